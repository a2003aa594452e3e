"""Soft Input Decryption laboratory."""
from .analytics import min_nmax, predict_x0
from .channel import ChannelParams
from .conv_codec import ConvCodeSpec, bcjr_decode, conv_encode
from .crypto_check import CheckScheme, Scenario, SidBlock, build_sid_block, verify
from .sid_engine import OutcomeKind, SidOutcome, Strategy, soft_input_decrypt
from .turbo_codec import TurboSpec, turbo_decode, turbo_encode

__version__ = "0.1.0"
