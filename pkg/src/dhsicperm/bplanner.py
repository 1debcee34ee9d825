"""Choosing the number of permutations ``B``.

Given the data, the sampled-test p-value is ``p_hat = (1 + Z) / (B + 1)``
with ``Z ~ Binom(B, p_D)``, where ``p_D`` is the p-value of the exhaustive
test.  Everything here is exact binomial arithmetic on that identity.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .errors import DomainError, SearchExhausted
from .permtest import as_fraction

__all__ = [
    "BPlan",
    "rejection_threshold",
    "rejection_probability",
    "ci_coverage",
    "ci_halfwidth",
    "minimal_B",
    "coverage_table",
]

_NOTE = (
    "coverage is not monotone in B (lattice effects); minimality is certified "
    "by evaluating the criterion at B_min and B_min - 1"
)


def _check_p(p_D) -> np.ndarray:
    p = np.asarray(p_D, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise DomainError(f"p_D must lie in [0, 1], got {p_D!r}")
    return p


def _check_B(B) -> int:
    if int(B) != B or B < 1:
        raise ValueError(f"B must be a positive integer, got {B!r}")
    return int(B)


def rejection_threshold(B: int, alpha) -> int:
    """Largest ``Z`` with ``(1 + Z) / (B + 1) <= alpha``, i.e. ``floor(alpha (B+1) - 1)``.

    May be negative, in which case the test cannot reject.
    """
    return math.floor(as_fraction(alpha) * (_check_B(B) + 1) - 1)


def _as_output(x: np.ndarray, like):
    return float(x) if np.ndim(like) == 0 else x


def rejection_probability(p_D, B: int, alpha):
    """``P(p_hat <= alpha | D)`` for a dataset whose exhaustive p-value is ``p_D``.

    Evaluated as ``exp(logcdf)`` of ``Binom(B, p_D)`` at the rejection
    threshold; vectorized over ``p_D``.
    """
    p = _check_p(p_D)
    t = rejection_threshold(B, alpha)
    if t < 0:
        return _as_output(np.zeros_like(p), p_D)
    out = np.exp(stats.binom.logcdf(t, B, p))
    return _as_output(np.clip(out, 0.0, 1.0), p_D)


def _snap(x: np.ndarray) -> np.ndarray:
    # absorb float error so that exact integer endpoints stay put
    r = np.round(x)
    return np.where(np.abs(x - r) <= 1e-9 * np.maximum(1.0, np.abs(x)), r, x)


def ci_coverage(p_D, B: int, epsilon):
    """``P(|p_hat - p_D| <= epsilon)``: the binomial mass of ``Z`` in
    ``[(p_D - eps)(B+1) - 1, (p_D + eps)(B+1) - 1]`` with the endpoints
    rounded inward.  Vectorized over ``p_D`` and ``epsilon``.
    """
    p = _check_p(p_D)
    B = _check_B(B)
    eps = np.asarray(epsilon, dtype=np.float64)
    if np.any(eps <= 0):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    lo = np.ceil(_snap((p - eps) * (B + 1) - 1))
    hi = np.floor(_snap((p + eps) * (B + 1) - 1))
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, B)
    below = np.where(lo > 0, stats.binom.cdf(lo - 1, B, p), 0.0)
    above = np.where(hi < B, stats.binom.sf(hi, B, p), 0.0)
    out = np.where(lo > hi, 0.0, np.clip(1.0 - below - above, 0.0, 1.0))
    return _as_output(out, p if np.ndim(eps) == 0 else eps)


def ci_halfwidth(p_D, B: int, confidence: float, tol: float = 1e-9):
    """Smallest ``epsilon`` making ``p_hat +- epsilon`` a ``confidence``-level interval at ``p_D``."""
    p = np.atleast_1d(_check_p(p_D)).astype(np.float64)
    lo = np.zeros_like(p)
    hi = np.full_like(p, 1.0 + 2.0 / (B + 1))
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        ok = ci_coverage(p, B, mid) >= confidence
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return _as_output(hi if np.ndim(p_D) else hi[0], p_D)


@dataclass(frozen=True)
class BPlan:
    """Result of :func:`minimal_B`.

    ``max_ci_width_above_C`` is the largest half-width ``epsilon`` needed for
    a ``confidence``-level interval ``p_hat +- epsilon`` over ``p_D in (C, 1]``
    at ``B_min``; ``worst_p_above_C`` is where it occurs.
    """

    alpha: float
    epsilon: float
    confidence: float
    threshold_C: float
    B_min: int
    max_ci_width_above_C: float
    worst_p_above_C: float
    min_coverage_at_B_min: float
    min_coverage_at_B_min_minus_1: float | None
    grid_step: float
    note: str = _NOTE

    def to_dict(self) -> dict:
        return asdict(self)


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    num = int(math.ceil((hi - lo) / step - 1e-12)) + 1
    return np.linspace(lo, hi, max(num, 2))


def minimal_B(
    alpha,
    epsilon: float,
    confidence: float,
    threshold_C: float,
    search_bounds: tuple[int, int] = (1, 10**7),
) -> BPlan:
    """Smallest ``B`` making ``p_hat +- epsilon`` a ``confidence`` interval for all ``p_D in [0, C]``.

    The worst case over ``[0, C]`` is taken on a grid of step ``epsilon / 10``
    (endpoints included).  ``B`` is bracketed by doubling and then bisected,
    so the returned value satisfies the criterion while ``B_min - 1`` does
    not.

    Raises
    ------
    DomainError
        Unless ``0 < epsilon < C < 1``, ``alpha < C`` and ``0 <= confidence < 1``.
    SearchExhausted
        If even ``search_bounds[1]`` fails the criterion.
    """
    alpha_q = as_fraction(alpha)
    if not (0 < epsilon < threshold_C < 1):
        raise DomainError(f"need 0 < epsilon < C < 1, got epsilon={epsilon}, C={threshold_C}")
    if not alpha_q < Fraction(repr(float(threshold_C))):
        raise DomainError(f"need alpha < C, got alpha={alpha}, C={threshold_C}")
    if not 0 <= confidence < 1:
        raise DomainError(f"confidence must lie in [0, 1), got {confidence}")
    b_lo, b_hi = (int(b) for b in search_bounds)
    if not 1 <= b_lo <= b_hi:
        raise ValueError(f"bad search bounds {search_bounds}")

    step = epsilon / 10
    grid = _grid(0.0, threshold_C, step)

    def worst(B):
        return float(np.min(ci_coverage(grid, B, epsilon)))

    if worst(b_lo) >= confidence:
        b_min, below = b_lo, None
    else:
        fail, b = b_lo, b_lo
        while True:
            b = min(2 * b, b_hi)
            if worst(b) >= confidence:
                break
            if b == b_hi:
                raise SearchExhausted(
                    f"no B <= {b_hi} reaches coverage {confidence} with epsilon={epsilon}"
                )
            fail = b
        ok = b
        while ok - fail > 1:
            mid = (ok + fail) // 2
            if worst(mid) >= confidence:
                ok = mid
            else:
                fail = mid
        b_min = ok
        below = worst(b_min - 1)

    upper = _grid(threshold_C, 1.0, step)[1:]
    widths = ci_halfwidth(upper, b_min, confidence)
    k = int(np.argmax(widths))
    return BPlan(
        alpha=float(alpha_q),
        epsilon=float(epsilon),
        confidence=float(confidence),
        threshold_C=float(threshold_C),
        B_min=b_min,
        max_ci_width_above_C=float(widths[k]),
        worst_p_above_C=float(upper[k]),
        min_coverage_at_B_min=worst(b_min),
        min_coverage_at_B_min_minus_1=below,
        grid_step=float(grid[1] - grid[0]),
    )


def coverage_table(B: int, epsilon: float, step: float | None = None) -> list[tuple[float, float]]:
    """``(p_D, coverage)`` pairs on ``[0, 1]`` for plotting."""
    step = epsilon / 10 if step is None else step
    grid = _grid(0.0, 1.0, step)
    return list(zip(grid.tolist(), np.atleast_1d(ci_coverage(grid, B, epsilon)).tolist()))
