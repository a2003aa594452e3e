"""BPSK over AWGN and the channel LLR front end.

Noise is drawn from a counter-style stream: every call derives a fresh
generator from ``(seed, *stream_key)`` so a block's noise never depends on
which worker produced it or in what order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# exact 10*log10(2); analytics keeps the rounded 3 dB separately
RATE_HALF_DB = 10.0 * math.log10(2.0)
# stands in for an infinite L_c when the channel is noiseless
NOISELESS_RELIABILITY = 1e3


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    code_rate: Fraction | float = Fraction(1, 2)
    seed: int = 0

    def __post_init__(self):
        if not 0 < float(self.code_rate) <= 1:
            raise ValueError("code_rate must lie in (0, 1]")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.ebn0_db) and self.ebn0_db > 0

    @property
    def esn0(self) -> float:
        """Linear E_s/N_0 with unit symbol energy."""
        return float(self.code_rate) * 10.0 ** (self.ebn0_db / 10.0)

    @property
    def noise_var(self) -> float:
        if self.noiseless:
            return 0.0
        return 1.0 / (2.0 * self.esn0)

    @property
    def reliability(self) -> float:
        """Channel reliability L_c = 4 E_s/N_0 = 2 / sigma^2."""
        if self.noiseless:
            return NOISELESS_RELIABILITY
        return 4.0 * self.esn0


def snr_db(ebn0_db: float, code_rate=Fraction(1, 2)) -> float:
    return ebn0_db + 10.0 * math.log10(float(code_rate))


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), *key]))


def modulate_bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def add_awgn(symbols, params: ChannelParams, stream_id: int | tuple[int, ...] = 0) -> np.ndarray:
    x = np.asarray(symbols, dtype=np.float64)
    if params.noiseless:
        return x.copy()
    key = stream_id if isinstance(stream_id, tuple) else (stream_id,)
    noise = rng_for(params.seed, *key).standard_normal(x.shape)
    return x + math.sqrt(params.noise_var) * noise


def to_channel_llr(received, params: ChannelParams) -> np.ndarray:
    return params.reliability * np.asarray(received, dtype=np.float64)


def transmit(bits, params: ChannelParams, stream_id: int | tuple[int, ...] = 0) -> np.ndarray:
    """Modulate, add noise and return channel LLRs in one step."""
    return to_channel_llr(add_awgn(modulate_bpsk(bits), params, stream_id), params)
