"""Keyed check values for SID blocks and their verification.

Every scenario uses one primitive: HMAC truncated to the first ``n`` bits
(SHA-256 for n <= 256, SHA-512 above). Bits are packed MSB first; a message
whose length is not a multiple of 8 is zero-padded before hashing.
"""
from __future__ import annotations

import enum
import hashlib
import hmac
from dataclasses import dataclass, field

import numpy as np

DEFAULT_KEY = bytes([0x2A]) * 16
MIN_TAG_BITS = 16
MAX_TAG_BITS = 512


class Scenario(str, enum.Enum):
    RECOVERY = "recovery"
    DETACHED_SIGNATURE = "detached"
    MESSAGE_WITH_TAG = "message"


def _digestmod(n: int):
    return hashlib.sha256 if n <= 256 else hashlib.sha512


@dataclass(frozen=True)
class CheckScheme:
    key: bytes = DEFAULT_KEY
    tag_bits: int = 128

    def __post_init__(self):
        if not self.key:
            raise ValueError("key must be nonempty")
        if not MIN_TAG_BITS <= self.tag_bits <= MAX_TAG_BITS:
            raise ValueError(f"tag_bits must lie in [{MIN_TAG_BITS}, {MAX_TAG_BITS}]")

    @property
    def primitive(self) -> str:
        return f"HMAC-{_digestmod(self.tag_bits)().name.upper()}/{self.tag_bits}"


def _as_bits(bits) -> np.ndarray:
    return np.asarray(bits, dtype=np.uint8)


def derive_tag(key: bytes, message_bits, n: int) -> np.ndarray:
    """First ``n`` bits of HMAC(key, packed message)."""
    if not MIN_TAG_BITS <= n <= MAX_TAG_BITS:
        raise ValueError(f"tag length {n} outside [{MIN_TAG_BITS}, {MAX_TAG_BITS}]")
    packed = np.packbits(_as_bits(message_bits)).tobytes()
    digest = hmac.new(key, packed, _digestmod(n)).digest()
    return np.unpackbits(np.frombuffer(digest, dtype=np.uint8))[:n]


@dataclass
class SidBlock:
    """A w-bit block: message bits first, check value appended.

    For the detached-signature layout the block is only the tag and
    ``reference`` holds the separately delivered, already correct message.
    """

    bits: np.ndarray
    scenario: Scenario
    message_len: int
    tag_len: int
    reference: np.ndarray | None = None

    @property
    def w(self) -> int:
        return self.bits.size

    @property
    def message(self) -> np.ndarray:
        return self.bits[: self.message_len]

    @property
    def tag(self) -> np.ndarray:
        return self.bits[self.message_len:]

    def with_bits(self, bits) -> "SidBlock":
        return SidBlock(_as_bits(bits), self.scenario, self.message_len, self.tag_len, self.reference)


def build_sid_block(scenario: Scenario | str, message_bits, scheme: CheckScheme) -> SidBlock:
    scenario = Scenario(scenario)
    msg = _as_bits(message_bits)
    n = scheme.tag_bits
    if scenario is Scenario.DETACHED_SIGNATURE:
        return SidBlock(derive_tag(scheme.key, msg, n), scenario, 0, n, reference=msg.copy())
    if msg.size == 0:
        raise ValueError(f"{scenario.value} layout needs a nonempty message")
    bits = np.concatenate([msg, derive_tag(scheme.key, msg, n)])
    return SidBlock(bits, scenario, msg.size, n)


def _expected_tag(block: SidBlock, scheme: CheckScheme) -> np.ndarray:
    msg = block.reference if block.scenario is Scenario.DETACHED_SIGNATURE else block.message
    return derive_tag(scheme.key, msg, block.tag_len)


def verify(block: SidBlock, scheme: CheckScheme) -> tuple[bool, np.ndarray | None]:
    """Return ``(ok, recovered message)``; the message is only set for a
    successful recovery-layout block."""
    ok = bool(np.array_equal(block.tag, _expected_tag(block, scheme)))
    if ok and block.scenario is Scenario.RECOVERY:
        return ok, block.message.copy()
    return ok, None


class _KeyedHash:
    """HMAC with the keyed inner/outer states computed once (RFC 2104)."""

    def __init__(self, key: bytes, n: int):
        mod = _digestmod(n)
        block = mod().block_size
        if len(key) > block:
            key = mod(key).digest()
        key = key.ljust(block, b"\0")
        self._inner = mod(bytes(b ^ 0x36 for b in key))
        self._outer = mod(bytes(b ^ 0x5C for b in key))
        self.digest_size = self._inner.digest_size

    def digest(self, data: bytes) -> bytes:
        inner = self._inner.copy()
        inner.update(data)
        outer = self._outer.copy()
        outer.update(inner.digest())
        return outer.digest()


def _bits_to_int(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits).tobytes(), "big") >> (-bits.size % 8) if bits.size else 0


@dataclass
class VerifyCacheState:
    """Tag of the trial-zero message, reused while only tag bits change.

    Besides the bit-array interface of ``verify_cached`` the state offers a
    packed fast path: regions are held as big-endian integers and a trial is
    a pair of XOR masks (see ``masks``), which ``check`` evaluates.
    """

    block: SidBlock
    scheme: CheckScheme
    cached_tag: np.ndarray = field(init=False)
    recomputations: int = 0
    comparisons: int = 0

    def __post_init__(self):
        self.cached_tag = _expected_tag(self.block, self.scheme)
        n = self.block.tag_len
        m = self.message_len
        self._hash = _KeyedHash(self.scheme.key, n)
        self._digest_shift = self._hash.digest_size * 8 - n
        self._msg_pad = -m % 8
        self._msg_bytes = (m + 7) // 8
        self._msg = _bits_to_int(self.block.message)
        self._tag = _bits_to_int(self.block.tag)
        self._cached = _bits_to_int(self.cached_tag)

    @property
    def message_len(self) -> int:
        return self.block.message_len

    def masks(self, positions) -> tuple[int, int]:
        """XOR masks ``(message, tag)`` flipping ``positions`` of the block."""
        m, w = self.message_len, self.block.w
        msg_mask = tag_mask = 0
        for p in positions:
            if p < 0 or p >= w:
                raise IndexError(f"flip position {p} outside block of {w} bits")
            if p < m:
                msg_mask |= 1 << (m - 1 - p)
            else:
                tag_mask |= 1 << (w - 1 - p)
        return msg_mask, tag_mask

    def check(self, msg_mask: int, tag_mask: int) -> bool:
        """Verify the trial-zero block with the given masks applied."""
        if msg_mask:
            self.recomputations += 1
            packed = ((self._msg ^ msg_mask) << self._msg_pad).to_bytes(self._msg_bytes, "big")
            expected = int.from_bytes(self._hash.digest(packed), "big") >> self._digest_shift
        else:
            self.comparisons += 1
            expected = self._cached
        return self._tag ^ tag_mask == expected


def verify_cached(state: VerifyCacheState, block_bits, flipped_positions) -> bool:
    """Verify a trial block that differs from the trial-zero block at
    ``flipped_positions``; equivalent to ``verify`` on the trial block."""
    bits = _as_bits(block_bits)
    m = state.message_len
    w = state.block.w
    if any(p < 0 or p >= w for p in flipped_positions):
        raise IndexError(f"flip position outside block of {w} bits")
    tag = bits[m:]
    if any(p < m for p in flipped_positions):
        state.recomputations += 1
        expected = derive_tag(state.scheme.key, bits[:m], state.block.tag_len)
    else:
        state.comparisons += 1
        expected = state.cached_tag
    return bool(np.array_equal(tag, expected))
