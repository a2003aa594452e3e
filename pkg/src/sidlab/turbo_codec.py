"""Rate-1/3 parallel concatenated (turbo) code.

Two (7, 5) RSC constituents, a row-write/column-read block interleaver and
iterative log-MAP decoding. Only the first constituent is terminated; its
tail (systematic and parity) follows the multiplexed body, so the coded
length is ``3k + 2m``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .conv_codec import DEFAULT_RSC, ConvCodeSpec, _check_bits, log_map


def interleaver_permutation(length: int, depth: int) -> np.ndarray:
    """Read order of a block written row-wise into ``depth`` columns.

    A short last row leaves some columns one entry shorter; they are read in
    order like the others.
    """
    if length < 1:
        raise ValueError("interleaver length must be >= 1")
    if depth < 1:
        raise ValueError("interleaver depth must be >= 1")
    idx = np.arange(length)
    return np.concatenate([idx[c::depth] for c in range(min(depth, length))])


def interleave(bits, depth: int = 17) -> np.ndarray:
    x = np.asarray(bits)
    return x[..., interleaver_permutation(x.shape[-1], depth)]


def deinterleave(bits, depth: int = 17) -> np.ndarray:
    x = np.asarray(bits)
    perm = interleaver_permutation(x.shape[-1], depth)
    out = np.empty_like(x)
    out[..., perm] = x
    return out


@dataclass(frozen=True)
class TurboSpec:
    constituent: ConvCodeSpec = field(default=DEFAULT_RSC)
    interleaver_depth: int = 17
    iterations: int = 3

    def __post_init__(self):
        if not self.constituent.recursive:
            raise ValueError("turbo constituent must be recursive systematic")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.interleaver_depth < 1:
            raise ValueError("interleaver_depth must be >= 1")

    @property
    def rate(self) -> Fraction:
        return Fraction(1, 3)

    def coded_length(self, k: int) -> int:
        return 3 * k + 2 * self.constituent.memory


DEFAULT_TURBO = TurboSpec()


def turbo_encode(info_bits, spec: TurboSpec = DEFAULT_TURBO) -> np.ndarray:
    bits = _check_bits(info_bits)
    k = bits.size
    m = spec.constituent.memory
    trellis = spec.constituent.trellis
    c1, _ = trellis.run(bits, terminate=True)
    c2, _ = trellis.run(interleave(bits, spec.interleaver_depth), terminate=False)
    parity1 = c1[1::2]
    body = np.stack([bits, parity1[:k], c2[1::2]], axis=1).reshape(-1)
    tail = c1[2 * k:]
    assert tail.size == 2 * m
    return np.concatenate([body, tail])


def _split(llrs: np.ndarray, k: int, m: int):
    body = llrs[:, : 3 * k].reshape(-1, k, 3)
    tail = llrs[:, 3 * k:].reshape(-1, m, 2)
    sys, p1, p2 = body[..., 0], body[..., 1], body[..., 2]
    # constituent 1 sees the body pairs plus its tail
    obs1 = np.concatenate([np.stack([sys, p1], axis=2), tail], axis=1)
    return sys, obs1, p2


@dataclass
class IterationTrace:
    """LLRs of one decoding iteration, all in natural (deinterleaved) order."""

    post1: np.ndarray
    extrinsic12: np.ndarray
    extrinsic21: np.ndarray
    posterior: np.ndarray


def turbo_decode_trace(channel_llrs, spec: TurboSpec = DEFAULT_TURBO) -> list[IterationTrace]:
    llrs = np.asarray(channel_llrs, dtype=np.float64)
    if llrs.ndim == 1:
        llrs = llrs[None, :]
    m = spec.constituent.memory
    n = llrs.shape[1]
    if (n - 2 * m) % 3 or n - 2 * m < 3:
        raise ValueError(f"channel_llrs length {n} is not a valid turbo coded length")
    k = (n - 2 * m) // 3
    depth = spec.interleaver_depth
    trellis = spec.constituent.trellis

    sys, obs1, p2 = _split(llrs, k, m)
    obs2 = np.stack([interleave(sys, depth), p2], axis=2)
    ext21 = np.zeros_like(sys)
    trace = []
    for _ in range(spec.iterations):
        apriori1 = np.concatenate([ext21, np.zeros((sys.shape[0], m))], axis=1)
        post1 = log_map(trellis, obs1, apriori1, terminated=True)[:, :k]
        # extrinsic excludes the receiver's own a-priori and systematic terms
        ext12 = post1 - ext21 - sys
        post2 = deinterleave(log_map(trellis, obs2, interleave(ext12, depth), terminated=False), depth)
        ext21 = post2 - ext12 - sys
        trace.append(IterationTrace(post1, ext12, ext21, post2))
    return trace


def turbo_decode_all(channel_llrs, spec: TurboSpec = DEFAULT_TURBO) -> list[np.ndarray]:
    """A-posteriori info LLRs after every iteration."""
    single = np.ndim(channel_llrs) == 1
    return [t.posterior[0] if single else t.posterior for t in turbo_decode_trace(channel_llrs, spec)]


def turbo_decode(channel_llrs, spec: TurboSpec = DEFAULT_TURBO) -> np.ndarray:
    return turbo_decode_all(channel_llrs, spec)[-1]
