"""Binary convolutional codes: encoder, trellis and log-MAP (BCJR) decoder.

LLR convention throughout the package: ``L = ln P(b=0) / P(b=1)``, so a
positive value means bit 0 and ``|L|`` is the reliability.

The decoder works on batches. ``channel_llrs`` may be 1-D (one block) or
2-D with shape ``(blocks, coded_len)``; results keep the leading shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

MAX_BRUTE_FORCE_BITS = 16


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


@dataclass(frozen=True)
class ConvCodeSpec:
    """Rate 1/len(generators) code with ``memory`` delay elements.

    Generator masks are read MSB first: bit ``memory`` taps the current
    input, bit 0 the oldest register. With ``feedback`` set the code is
    recursive systematic: the first output is the input bit itself and
    ``generators`` holds the single feedforward (parity) mask.
    """

    memory: int = 2
    generators: tuple[int, ...] = (0o5, 0o7)
    feedback: int | None = None
    terminated: bool = True

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        limit = 1 << (self.memory + 1)
        for g in (*self.generators, *(() if self.feedback is None else (self.feedback,))):
            if not 0 < g < limit:
                raise ValueError(f"generator {g:o} does not fit in {self.memory + 1} bits")
        if self.feedback is None and len(self.generators) != 2:
            raise ValueError("feedforward rate-1/2 code needs exactly 2 generators")
        if self.feedback is not None:
            if len(self.generators) != 1:
                raise ValueError("RSC code takes one feedforward generator")
            if not self.feedback >> self.memory & 1:
                raise ValueError("feedback mask must tap the current input")

    @property
    def recursive(self) -> bool:
        return self.feedback is not None

    @property
    def n_outputs(self) -> int:
        return 2

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.n_outputs)

    def coded_length(self, k: int) -> int:
        return self.n_outputs * (k + (self.memory if self.terminated else 0))

    @cached_property
    def trellis(self) -> "Trellis":
        return Trellis.from_spec(self)


DEFAULT_CONV = ConvCodeSpec()
# feedback 7, feedforward 5 (octal)
DEFAULT_RSC = ConvCodeSpec(memory=2, generators=(0o5,), feedback=0o7, terminated=True)


@dataclass(frozen=True, eq=False)
class Trellis:
    """State-transition tables indexed by ``[state, input]``.

    ``next_state`` and ``outputs`` (shape ``(S, 2, n_outputs)``) describe the
    forward graph; ``prev_state``/``prev_input`` list, for each state, its two
    incoming branches. ``tail_input[s]`` is the input that moves ``s`` toward
    the zero state (0 for feedforward codes).
    """

    num_states: int
    next_state: np.ndarray
    outputs: np.ndarray
    prev_state: np.ndarray
    prev_input: np.ndarray
    tail_input: np.ndarray

    @classmethod
    def from_spec(cls, spec: ConvCodeSpec) -> "Trellis":
        m = spec.memory
        S = 1 << m
        next_state = np.zeros((S, 2), dtype=np.int64)
        outputs = np.zeros((S, 2, spec.n_outputs), dtype=np.int8)
        tail_input = np.zeros(S, dtype=np.int8)
        for s in range(S):
            if spec.recursive:
                tail_input[s] = _parity(s & spec.feedback)
            for u in (0, 1):
                if spec.recursive:
                    a = u ^ _parity(s & spec.feedback)
                    reg = (a << m) | s
                    outs = (u, _parity(reg & spec.generators[0]))
                else:
                    reg = (u << m) | s
                    outs = tuple(_parity(reg & g) for g in spec.generators)
                next_state[s, u] = reg >> 1
                outputs[s, u] = outs

        prev_state = np.zeros((S, 2), dtype=np.int64)
        prev_input = np.zeros((S, 2), dtype=np.int64)
        fill = np.zeros(S, dtype=np.int64)
        for s in range(S):
            for u in (0, 1):
                ns = next_state[s, u]
                if fill[ns] >= 2:
                    raise ValueError("trellis state with more than two predecessors")
                prev_state[ns, fill[ns]] = s
                prev_input[ns, fill[ns]] = u
                fill[ns] += 1
        if not np.all(fill == 2):
            raise ValueError("trellis state without two predecessors")
        return cls(S, next_state, outputs, prev_state, prev_input, tail_input)

    def run(self, info_bits, terminate: bool) -> tuple[np.ndarray, np.ndarray]:
        """Walk the trellis; return (coded bits, input incl. tail)."""
        state = 0
        out = []
        inputs = []
        for u in np.asarray(info_bits, dtype=np.int64):
            out.append(self.outputs[state, u])
            inputs.append(u)
            state = self.next_state[state, u]
        if terminate:
            m = int(self.num_states).bit_length() - 1
            for _ in range(m):
                u = int(self.tail_input[state])
                out.append(self.outputs[state, u])
                inputs.append(u)
                state = self.next_state[state, u]
            assert state == 0
        return np.concatenate(out).astype(np.uint8), np.array(inputs, dtype=np.uint8)


def _check_bits(info_bits) -> np.ndarray:
    bits = np.asarray(info_bits)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("info_bits must be a nonempty 1-D bit sequence")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("info_bits must contain only 0 and 1")
    return bits.astype(np.uint8)


def conv_encode(info_bits, spec: ConvCodeSpec = DEFAULT_CONV) -> np.ndarray:
    """Encode with a shift register; the output streams are multiplexed per step."""
    bits = _check_bits(info_bits)
    if spec.recursive:
        # tail inputs depend on the state, so walk the trellis
        return spec.trellis.run(bits, spec.terminated)[0]
    m = spec.memory
    u = np.concatenate([bits, np.zeros(m, np.uint8)]) if spec.terminated else bits
    padded = np.concatenate([np.zeros(m, np.uint8), u])
    streams = []
    for g in spec.generators:
        taps = np.array([(g >> (m - d)) & 1 for d in range(m + 1)], dtype=np.uint8)
        # output[t] = sum_d taps[d] * u[t - d]
        acc = np.zeros(u.size, dtype=np.uint8)
        for d in range(m + 1):
            if taps[d]:
                acc ^= padded[m - d: m - d + u.size]
        streams.append(acc)
    return np.stack(streams, axis=1).reshape(-1)


def _branch_metrics(trellis: Trellis, llrs: np.ndarray, apriori: np.ndarray | None) -> np.ndarray:
    """gamma[b, t, s, u] = 1/2 sum_o (1 - 2 c_o) L_o  (+ 1/2 (1 - 2u) La)."""
    signs = 1.0 - 2.0 * trellis.outputs.astype(np.float64)  # (S, 2, n)
    gamma = 0.5 * np.einsum("btn,sun->btsu", llrs, signs)
    if apriori is not None:
        gamma += 0.5 * apriori[:, :, None, None] * np.array([1.0, -1.0])
    return gamma


def log_map(
    trellis: Trellis,
    llrs: np.ndarray,
    apriori: np.ndarray | None = None,
    terminated: bool = True,
) -> np.ndarray:
    """Log-domain BCJR over a batch.

    ``llrs`` has shape ``(B, T, n_outputs)``, ``apriori`` ``(B, T)``. Returns
    the a-posteriori input LLRs, shape ``(B, T)``. The forward recursion starts
    in state 0; the backward one in state 0 when ``terminated``, uniform
    otherwise. max* uses the exact correction via ``np.logaddexp``.
    """
    B, T, _ = llrs.shape
    S = trellis.num_states
    gamma = _branch_metrics(trellis, llrs, apriori)
    ps, pu = trellis.prev_state, trellis.prev_input
    ns = trellis.next_state

    alpha = np.empty((B, T + 1, S))
    alpha[:, 0] = -np.inf
    alpha[:, 0, 0] = 0.0
    for t in range(T):
        cand = alpha[:, t][:, ps] + gamma[:, t][:, ps, pu]  # (B, S, 2)
        a = np.logaddexp(cand[..., 0], cand[..., 1])
        alpha[:, t + 1] = a - a.max(axis=1, keepdims=True)

    beta = np.empty((B, T + 1, S))
    if terminated:
        beta[:, T] = -np.inf
        beta[:, T, 0] = 0.0
    else:
        beta[:, T] = 0.0
    for t in range(T - 1, -1, -1):
        cand = gamma[:, t] + beta[:, t + 1][:, ns]  # (B, S, 2)
        b = np.logaddexp(cand[..., 0], cand[..., 1])
        beta[:, t] = b - b.max(axis=1, keepdims=True)

    # joint[b, t, s, u] = alpha_t(s) + gamma_t(s, u) + beta_{t+1}(ns(s, u))
    joint = alpha[:, :T, :, None] + gamma + beta[:, 1:][:, :, ns]
    l0 = np.logaddexp.reduce(joint[..., 0], axis=2)
    l1 = np.logaddexp.reduce(joint[..., 1], axis=2)
    return l0 - l1


def _as_batch(channel_llrs) -> tuple[np.ndarray, bool]:
    llrs = np.asarray(channel_llrs, dtype=np.float64)
    single = llrs.ndim == 1
    if single:
        llrs = llrs[None, :]
    if llrs.ndim != 2:
        raise ValueError("channel_llrs must be 1-D or 2-D")
    return llrs, single


def bcjr_decode(channel_llrs, spec: ConvCodeSpec = DEFAULT_CONV) -> np.ndarray:
    """A-posteriori LLRs of the information bits; tail positions are dropped."""
    llrs, single = _as_batch(channel_llrs)
    n = spec.n_outputs
    tail = spec.memory if spec.terminated else 0
    if llrs.shape[1] % n or llrs.shape[1] // n <= tail:
        raise ValueError(f"channel_llrs length {llrs.shape[1]} is not a valid coded length")
    T = llrs.shape[1] // n
    k = T - tail
    post = log_map(spec.trellis, llrs.reshape(-1, T, n), terminated=spec.terminated)[:, :k]
    return post[0] if single else post


def decoded_length(coded_len: int, spec: ConvCodeSpec = DEFAULT_CONV) -> int:
    tail = spec.memory if spec.terminated else 0
    return coded_len // spec.n_outputs - tail


def generator_matrix(k: int, spec: ConvCodeSpec = DEFAULT_CONV) -> np.ndarray:
    """Rows are the codewords of the unit vectors (the code is linear)."""
    return np.stack([conv_encode(np.eye(k, dtype=np.uint8)[i], spec) for i in range(k)])


def brute_force_posterior(channel_llrs, spec: ConvCodeSpec = DEFAULT_CONV) -> np.ndarray:
    """Exact per-bit posterior LLRs by enumerating every codeword.

    Independent of the trellis: codewords come from the generator matrix.
    """
    llrs = np.asarray(channel_llrs, dtype=np.float64)
    if llrs.ndim != 1:
        raise ValueError("brute_force_posterior takes a single block")
    k = decoded_length(llrs.size, spec)
    if spec.coded_length(k) != llrs.size or k < 1:
        raise ValueError(f"channel_llrs length {llrs.size} is not a valid coded length")
    if k > MAX_BRUTE_FORCE_BITS:
        raise ValueError(f"k = {k} exceeds the brute-force limit of {MAX_BRUTE_FORCE_BITS}")
    G = generator_matrix(k, spec).astype(np.int64)
    words = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1  # (2^k, k)
    codewords = (words @ G) & 1
    metric = 0.5 * ((1 - 2 * codewords) @ llrs)
    out = np.empty(k)
    for j in range(k):
        sel = words[:, j] == 0
        out[j] = np.logaddexp.reduce(metric[sel]) - np.logaddexp.reduce(metric[~sel])
    return out
