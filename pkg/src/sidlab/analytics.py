"""Closed-form model for how many L-values SID needs.

Binomial error statistics for a w-bit block, the exponential law
``y = k exp(-a x)`` for the share of blocks corrected at the x-th lowest
``|L|``, and the empirical polynomial/linear fit of ``a`` in S/N and w that
predicts the L-value count ``x0`` for a target correction fraction.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

# S/N offset for a rate-1/2 code as used by the published fit (rounded)
ROUNDED_RATE_HALF_DB = 3.0

# measured (k, a) per block length and E_b/N_0
TABLE1: dict[int, dict[float, tuple[float, float]]] = {
    128: {1: (0.083, 0.08), 1.5: (0.127, 0.12), 2: (0.271, 0.24), 2.5: (0.323, 0.28), 3: (0.418, 0.35),
          3.5: (0.461, 0.38), 4: (0.646, 0.5), 4.5: (0.733, 0.55), 5: (0.821, 0.6)},
    160: {1: (0.030, 0.038), 1.5: (0.078, 0.075), 2: (0.127, 0.12), 2.5: (0.221, 0.2), 3: (0.284, 0.25),
          3.5: (0.47, 0.38), 4: (0.582, 0.46), 4.5: (0.792, 0.6), 5: (1.059, 0.7)},
    320: {1: (0.02, 0.02), 1.5: (0.025, 0.025), 2: (0.062, 0.06), 2.5: (0.221, 0.2), 3: (0.258, 0.23),
          3.5: (0.419, 0.35), 4: (0.733, 0.5), 4.5: (1.222, 0.8), 5: (1.454, 0.9)},
}

# polynomial coefficients (A, B, C) per block length
TABLE2: dict[int, tuple[float, float, float]] = {
    128: (0.04, 0.206, 0.288),
    160: (0.04, 0.201, 0.28),
    320: (0.037, 0.177, 0.24),
}

FIT_DOMAIN_SNR_DB = (-2.0, 2.0)
FIT_DOMAIN_W = (128, 1024)


@dataclass(frozen=True)
class LinearCoefficients:
    """A, B, C as linear functions of the block length w."""

    KA: float = -0.00002
    NA: float = 0.043
    KB: float = -0.00015
    NB: float = 0.225
    KC: float = -0.00025
    NC: float = 0.32

    @classmethod
    def from_file(cls, path: str | Path) -> "LinearCoefficients":
        """Load re-fitted values from a JSON object; missing keys keep defaults."""
        data = json.loads(Path(path).read_text())
        unknown = set(data) - set(asdict(cls()))
        if unknown:
            raise ValueError(f"unknown coefficient keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


DEFAULT_COEFFICIENTS = LinearCoefficients()


@dataclass(frozen=True)
class FitCoefficients:
    k: float
    a: float
    A: float
    B: float
    C: float
    linear: LinearCoefficients = field(default=DEFAULT_COEFFICIENTS)


@dataclass
class CorrectionHistogram:
    """``fraction[x - 1]`` is the share of blocks corrected with the x-th
    lowest ``|L|`` as the highest flipped rank."""

    w: int
    ebn0_db: float
    fraction: np.ndarray
    blocks: int = 0
    first_try: int = 0

    def __post_init__(self):
        self.fraction = np.asarray(self.fraction, dtype=np.float64)
        if np.any(self.fraction < 0) or self.fraction.sum() > 1 + 1e-12:
            raise ValueError("fractions must be nonnegative and sum to at most 1")


def _log_binom(w: int, i: int) -> float:
    return math.lgamma(w + 1) - math.lgamma(i + 1) - math.lgamma(w - i + 1)


def p_block_errors(w: int, i: int, p: float) -> float:
    """Probability that a w-bit block holds exactly i bit errors."""
    if not 0 <= i <= w:
        raise ValueError("need 0 <= i <= w")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if p == 0:
        return 1.0 if i == 0 else 0.0
    if p == 1:
        return 1.0 if i == w else 0.0
    return math.exp(_log_binom(w, i) + i * math.log(p) + (w - i) * math.log1p(-p))


def residual_error_prob(w: int, n_max: int, p: float) -> float:
    """Probability that more than ``n_max`` bits are wrong."""
    if not 0 <= n_max <= w:
        raise ValueError("need 0 <= n_max <= w")
    return math.fsum(p_block_errors(w, i, p) for i in range(n_max + 1, w + 1))


def min_nmax(w: int, p: float, target: float = 0.95) -> int:
    """Smallest N whose cumulative error-count probability reaches ``target``."""
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    if p >= 1:
        return w
    terms = []
    for n in range(w + 1):
        terms.append(p_block_errors(w, n, p))
        if math.fsum(terms) >= target:
            return n
    return w


def k_from_a(a: float, w: int) -> float:
    """Normalization making ``k exp(-a x)`` sum to 1 over x = 1..w."""
    if a <= 0 or w < 1:
        raise ValueError("need a > 0 and w >= 1")
    return math.expm1(a) / -math.expm1(-a * w)


def k_from_a_approx(a: float, w: int) -> float:
    """First-order form ``a / (1 - exp(-a w))``."""
    if a <= 0 or w < 1:
        raise ValueError("need a > 0 and w >= 1")
    return a / -math.expm1(-a * w)


def snr_from_ebn0(ebn0_db: float, rate: Fraction | float = Fraction(1, 2), exact: bool = False) -> float:
    """S/N in dB. Rate 1/2 uses the rounded 3 dB unless ``exact`` is set."""
    if not exact and Fraction(rate).limit_denominator(1000) == Fraction(1, 2):
        return ebn0_db - ROUNDED_RATE_HALF_DB
    return ebn0_db + 10.0 * math.log10(float(rate))


def coeff_abc(w: float, coeffs: LinearCoefficients = DEFAULT_COEFFICIENTS) -> tuple[float, float, float]:
    if w < 1:
        raise ValueError("w must be >= 1")
    return (
        coeffs.KA * w + coeffs.NA,
        coeffs.KB * w + coeffs.NB,
        coeffs.KC * w + coeffs.NC,
    )


def exponent_a(w: float, snr_db: float, coeffs: LinearCoefficients = DEFAULT_COEFFICIENTS) -> float:
    A, B, C = coeff_abc(w, coeffs)
    return A * snr_db**2 + B * snr_db + C


def in_fit_domain(w: float, snr_db: float) -> bool:
    lo, hi = FIT_DOMAIN_SNR_DB
    return lo <= snr_db <= hi and FIT_DOMAIN_W[0] <= w <= FIT_DOMAIN_W[1]


def correction_fraction(x, w: int, a: float) -> np.ndarray:
    """Modelled share of blocks corrected at the x-th L-value."""
    return k_from_a(a, w) * np.exp(-a * np.asarray(x, dtype=np.float64))


def cumulative_fraction(x0: float, w: int, a: float) -> float:
    return -math.expm1(-a * x0) / -math.expm1(-a * w)


@dataclass(frozen=True)
class X0Prediction:
    x0: float
    needed: int
    a: float
    extrapolated: bool


def predict_x0(
    w: int,
    ebn0_db: float,
    target: float = 0.95,
    coeffs: LinearCoefficients = DEFAULT_COEFFICIENTS,
) -> X0Prediction:
    """L-values needed to correct ``target`` of the blocks.

    Raises ``ValueError`` when the fitted exponent is not positive, which
    happens only far outside the fitted S/N range.
    """
    if not 0 <= target < 1:
        raise ValueError("target must lie in [0, 1)")
    snr = snr_from_ebn0(ebn0_db)
    a = exponent_a(w, snr, coeffs)
    if a <= 0:
        raise ValueError(f"fitted exponent a = {a:.4g} <= 0 at w={w}, S/N={snr} dB")
    x0 = -math.log1p(target * math.expm1(-a * w)) / a
    # float noise in x0 must not push the ceiling up by one
    needed = math.ceil(round(x0, 9))
    return X0Prediction(x0, needed, a, not in_fit_domain(w, snr))


def fit_exponential(hist: CorrectionHistogram) -> tuple[float, float]:
    """Least-squares fit of ``ln fraction = ln k - a x``; returns ``(k, a)``.

    Positions with fewer than one block's worth of mass are ignored.
    """
    f = hist.fraction
    floor = 1.0 / hist.blocks if hist.blocks else 0.0
    x = np.arange(1, f.size + 1)
    usable = (f > 0) & (f >= floor)
    if usable.sum() < 3:
        raise ValueError("need at least 3 positions with nonzero fraction")
    slope, intercept = np.polyfit(x[usable], np.log(f[usable]), 1)
    return float(math.exp(intercept)), float(-slope)
