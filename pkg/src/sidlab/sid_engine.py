"""Soft Input Decryption: flip the least reliable bits until the check value verifies.

Ranks are 0-based internally (``rank r`` is the (r+1)-th lowest ``|L|``).
Every trial flips its positions relative to the hard decision of trial zero.
"""
from __future__ import annotations

import enum
import itertools
import time
from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np

from .analytics import p_block_errors
from .crypto_check import CheckScheme, Scenario, SidBlock, VerifyCacheState

MAX_NMAX = 24


class Strategy(str, enum.Enum):
    STATIC = "static"
    BER = "ber"


class OutcomeKind(str, enum.Enum):
    VERIFIED_FIRST_TRY = "verified_first_try"
    CORRECTED = "corrected"
    FAILED = "failed"


class Verdict(str, enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    COLLISION = "collision"


@dataclass(frozen=True)
class RankedPositions:
    """Block positions sorted by ascending ``|L|``; ties keep position order."""

    positions: np.ndarray
    magnitudes: np.ndarray

    def __len__(self) -> int:
        return self.positions.size

    def table(self) -> list[tuple[int, int, float]]:
        """Rows ``(j, P_j, |L|)`` with 1-based ``j`` and 0-based ``P_j``."""
        return [(j + 1, int(p), float(v)) for j, (p, v) in enumerate(zip(self.positions, self.magnitudes))]


@dataclass
class SidOutcome:
    kind: OutcomeKind
    trials_used: int
    flipped_positions: frozenset[int]
    bits: np.ndarray
    # highest 1-based rank flipped by the successful trial; 0 if none
    max_rank: int = 0
    recomputations: int = 0
    comparisons: int = 0
    message: np.ndarray | None = None
    is_collision: bool = False

    @property
    def verified(self) -> bool:
        return self.kind is not OutcomeKind.FAILED


def rank_positions(llrs) -> RankedPositions:
    mag = np.abs(np.asarray(llrs, dtype=np.float64))
    order = np.argsort(mag, kind="stable")
    return RankedPositions(order, mag[order])


def _check_nmax(n_max: int, w: int) -> None:
    if not 0 <= n_max <= min(w, MAX_NMAX):
        raise ValueError(f"n_max must lie in [0, min(w, {MAX_NMAX})], got {n_max}")


def static_trial_ranks(i: int, n_max: int) -> tuple[int, ...]:
    """Ranks whose counter bit is set in ``i`` (lowest bit = lowest ``|L|``)."""
    if not 1 <= i <= (1 << n_max) - 1:
        raise ValueError(f"trial counter {i} outside [1, 2^{n_max} - 1]")
    return tuple(j for j in range(n_max) if i >> j & 1)


def static_trial(i: int, ranked: RankedPositions, n_max: int) -> frozenset[int]:
    _check_nmax(n_max, len(ranked))
    return frozenset(int(ranked.positions[j]) for j in static_trial_ranks(i, n_max))


def static_trial_sequence(n_max: int) -> Iterator[tuple[int, ...]]:
    for i in range(1, 1 << n_max):
        yield tuple(j for j in range(n_max) if i >> j & 1)


def most_probable_error_count(n_max: int, w: int, p: float) -> int:
    """argmax over i = 0..n_max of the binomial block-error probability."""
    probs = [p_block_errors(w, i, p) for i in range(n_max + 1)]
    return int(np.argmax(probs))


def ber_size_order(n_max: int, w: int, p: float) -> list[int]:
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    e_star = most_probable_error_count(n_max, w, p)
    rest = [s for s in range(1, n_max + 1) if s != e_star]
    rest.sort(key=lambda s: (-p_block_errors(w, s, p), s))
    return ([e_star] if e_star > 0 else []) + rest


def ber_trial_sequence(n_max: int, w: int, p: float) -> Iterator[tuple[int, ...]]:
    """Rank subsets grouped by size, most probable error count first.

    Within a size the subsets come in lexicographic order of their ranks.
    """
    for size in ber_size_order(n_max, w, p):
        yield from itertools.combinations(range(n_max), size)


@dataclass
class _Budget:
    seconds: float | None
    start: float = field(default_factory=time.perf_counter)

    def spent(self) -> bool:
        return self.seconds is not None and time.perf_counter() - self.start > self.seconds


def soft_input_decrypt(
    llrs,
    block_layout: SidBlock,
    scheme: CheckScheme,
    strategy: Strategy | str = Strategy.STATIC,
    n_max: int = 16,
    ber: float | None = None,
    time_budget: float | None = None,
) -> SidOutcome:
    """Hard-decide ``llrs``, then try flip patterns until the block verifies.

    ``block_layout`` supplies the scenario, region lengths and (for detached
    signatures) the reference message; its bits are ignored. ``ber`` is the
    post-decoder bit error rate, needed only by the BER strategy.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    w = block_layout.w
    if llrs.shape != (w,):
        raise ValueError(f"expected {w} L-values, got shape {llrs.shape}")
    _check_nmax(n_max, w)
    strategy = Strategy(strategy)

    hard = (llrs < 0).astype(np.uint8)
    state = VerifyCacheState(block_layout.with_bits(hard), scheme)

    def finish(kind, trials, ranks, bits):
        msg = bits[: block_layout.message_len].copy() if block_layout.scenario is Scenario.RECOVERY and kind is not OutcomeKind.FAILED else None
        positions = frozenset(int(ranked.positions[r]) for r in ranks)
        return SidOutcome(
            kind,
            trials,
            positions,
            bits,
            max_rank=max(ranks) + 1 if ranks else 0,
            recomputations=state.recomputations,
            comparisons=state.comparisons,
            message=msg,
        )

    def corrected(trials, ranks):
        trial = hard.copy()
        trial[ranked.positions[list(ranks)]] ^= 1
        return finish(OutcomeKind.CORRECTED, trials, ranks, trial)

    ranked = rank_positions(llrs)
    if state.check(0, 0):
        return finish(OutcomeKind.VERIFIED_FIRST_TRY, 0, (), hard)

    budget = _Budget(time_budget)
    rank_masks = [state.masks((int(p),)) for p in ranked.positions[:n_max]]

    if strategy is Strategy.STATIC:
        # counter i reuses the masks of i without its lowest set bit
        size = 1 << n_max
        msg_tab = [0] * size
        tag_tab = [0] * size
        for i in range(1, size):
            low = i & -i
            rest = i ^ low
            rm, rt = rank_masks[low.bit_length() - 1]
            mm = msg_tab[i] = msg_tab[rest] | rm
            tm = tag_tab[i] = tag_tab[rest] | rt
            if state.check(mm, tm):
                return corrected(i, static_trial_ranks(i, n_max))
            if budget.spent():
                return finish(OutcomeKind.FAILED, i, (), hard)
        return finish(OutcomeKind.FAILED, size - 1, (), hard)

    if ber is None:
        raise ValueError("BER strategy needs the post-decoder bit error rate")
    used = 0
    for ranks in ber_trial_sequence(n_max, w, ber):
        used += 1
        mm = tm = 0
        for r in ranks:
            mm |= rank_masks[r][0]
            tm |= rank_masks[r][1]
        if state.check(mm, tm):
            return corrected(used, ranks)
        if budget.spent():
            break
    return finish(OutcomeKind.FAILED, used, (), hard)


def classify(outcome: SidOutcome, decoded_bits_after_sid, original_bits) -> Verdict:
    """Judge an outcome against ground truth; a false verification is a collision."""
    if not outcome.verified:
        return Verdict.INCORRECT
    same = np.array_equal(np.asarray(decoded_bits_after_sid), np.asarray(original_bits))
    outcome.is_collision = not same
    return Verdict.CORRECT if same else Verdict.COLLISION
