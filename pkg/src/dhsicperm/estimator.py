"""The dHSIC V-statistic.

For Gram matrices ``K^1..K^d`` (each addressed through an index map) the
statistic is ``A + B - 2C`` with

* ``A = n^-2     sum_{a,b}          prod_j K^j[a, b]``
* ``B = n^-2d    sum_{i_1..i_2d}    prod_j K^j[i_{2j-1}, i_{2j}]``
* ``C = n^-(d+1) sum_{i_1..i_{d+1}} prod_j K^j[i_1, i_{j+1}]``

:func:`dhsic_naive` evaluates the three sums literally over every index
tuple and is kept as a user-facing correctness check.  :func:`dhsic_factorized`
uses ``B = prod_j mean(K^j)`` and ``C = n^-1 sum_a prod_j rowmean(K^j)[a]``,
which costs ``O(d n^2)``.  :func:`permuted_statistics` is the batched form of
the factorized path used by the permutation tests.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np

from .errors import GuardExceeded, WrongArity
from .kernels import GramStack
from .permutations import IndexAssignment, identity_assignment

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__all__ = [
    "NAIVE_GUARD",
    "NEGATIVE_SLACK",
    "StatisticValue",
    "dhsic_naive",
    "dhsic_factorized",
    "hsic",
    "permuted_statistics",
    "set_threads",
]

NAIVE_GUARD = 10**8
NEGATIVE_SLACK = 1e-10


@dataclass(frozen=True)
class StatisticValue:
    """A dHSIC estimate together with the shape it was computed on."""

    value: float
    n: int
    d: int
    path: Literal["naive", "factorized"]

    def __float__(self) -> float:
        return self.value


def _clamp(value, scale):
    # squared norm: negativity beyond float slack is left visible on purpose
    value = np.asarray(value, dtype=np.float64)
    slack = NEGATIVE_SLACK * np.maximum(1.0, scale)
    return np.where((value < 0) & (value > -slack), 0.0, value)


def dhsic_naive(gram: GramStack, assignment: IndexAssignment | None = None) -> StatisticValue:
    """Evaluate the estimator by summing over every index tuple.

    Meant for small problems only: raises :class:`GuardExceeded` when
    ``n**(2d)`` exceeds ``NAIVE_GUARD``.
    """
    n, d = gram.n, gram.d
    work = n ** (2 * d)
    if work > NAIVE_GUARD:
        raise GuardExceeded(
            f"naive dHSIC needs n^(2d) = {work} terms (limit {NAIVE_GUARD})",
            count=work,
            cap=NAIVE_GUARD,
        )
    if assignment is None:
        assignment = identity_assignment(n, d)
    kt = [gram.mats[j][np.ix_(m, m)] for j, m in enumerate(assignment.maps)]

    # M_2(n): both indices shared by all variables
    s_joint = np.prod(kt, axis=0).sum()

    # M_2d(n) and M_{d+1}(n), one leading index at a time to bound memory
    s_prod = 0.0
    s_cross = 0.0
    for i1 in range(n):
        t = kt[0][i1]
        for j in range(1, d):
            t = np.multiply.outer(t, kt[j])
        s_prod += t.sum()

        u = kt[0][i1]
        for j in range(1, d):
            u = np.multiply.outer(u, kt[j][i1])
        s_cross += u.sum()

    a = s_joint / n**2
    b = s_prod / float(n) ** (2 * d)
    c = s_cross / float(n) ** (d + 1)
    value = _clamp(a + b - 2.0 * c, abs(a) + abs(b) + 2.0 * abs(c))
    return StatisticValue(float(value), n, d, "naive")


@numba.njit(parallel=True, cache=True)
def _anchored_kernel(mats, row_means, b_term, parts):
    # parts[p, j-1] is the row map of variable j >= 1; variable 0 is unpermuted
    n_vec = parts.shape[0]
    d = mats.shape[0]
    n = mats.shape[1]
    out = np.empty(n_vec)
    scale = np.empty(n_vec)
    k0 = mats[0]
    for p in numba.prange(n_vec):
        s_a = 0.0
        s_c = 0.0
        if d == 2:
            k1 = mats[1]
            m = parts[p, 0]
            for a in range(n):
                ma = m[a]
                row = 0.0
                for b in range(n):
                    row += k0[a, b] * k1[ma, m[b]]
                s_a += row
                s_c += row_means[0, a] * row_means[1, ma]
        else:
            rows = np.empty(d - 1, dtype=np.int64)
            for a in range(n):
                for j in range(1, d):
                    rows[j - 1] = parts[p, j - 1, a]
                row = 0.0
                for b in range(n):
                    prod = k0[a, b]
                    for j in range(1, d):
                        prod *= mats[j, rows[j - 1], parts[p, j - 1, b]]
                    row += prod
                s_a += row
                prod = row_means[0, a]
                for j in range(1, d):
                    prod *= row_means[j, rows[j - 1]]
                s_c += prod
        a_term = s_a / (n * n)
        c_term = s_c / n
        out[p] = a_term + b_term - 2.0 * c_term
        scale[p] = abs(a_term) + abs(b_term) + 2.0 * abs(c_term)
    return out, scale


@numba.njit(parallel=True, cache=True)
def _general_kernel(mats, row_means, b_term, maps):
    n_vec = maps.shape[0]
    d = mats.shape[0]
    n = mats.shape[1]
    out = np.empty(n_vec)
    scale = np.empty(n_vec)
    for p in numba.prange(n_vec):
        s_a = 0.0
        s_c = 0.0
        for a in range(n):
            row = 0.0
            for b in range(n):
                prod = 1.0
                for j in range(d):
                    prod *= mats[j, maps[p, j, a], maps[p, j, b]]
                row += prod
            s_a += row
            prod = 1.0
            for j in range(d):
                prod *= row_means[j, maps[p, j, a]]
            s_c += prod
        a_term = s_a / (n * n)
        c_term = s_c / n
        out[p] = a_term + b_term - 2.0 * c_term
        scale[p] = abs(a_term) + abs(b_term) + 2.0 * abs(c_term)
    return out, scale


def permuted_statistics(gram: GramStack, parts) -> np.ndarray:
    """Factorized dHSIC for a batch of permutation vectors.

    Parameters
    ----------
    gram : GramStack
    parts : ndarray of int, shape (P, d - 1, n)
        Row maps for variables ``2..d``; variable 1 stays in place.

    Returns
    -------
    ndarray, shape (P,)
    """
    parts = np.ascontiguousarray(parts, dtype=np.int64)
    if parts.ndim != 3 or parts.shape[1:] != (gram.d - 1, gram.n):
        raise ValueError(
            f"parts must have shape (P, {gram.d - 1}, {gram.n}), got {parts.shape}"
        )
    b_term = float(np.prod(gram.grand_means))
    out, scale = _anchored_kernel(gram.mats, gram.row_means, b_term, parts)
    return _clamp(out, scale)


def dhsic_factorized(gram: GramStack, assignment: IndexAssignment | None = None) -> StatisticValue:
    """Evaluate the estimator in ``O(d n^2)`` without touching the kernels again."""
    n, d = gram.n, gram.d
    if assignment is None:
        assignment = identity_assignment(n, d)
    maps = assignment.maps
    if maps.shape != (d, n):
        raise ValueError(f"assignment has shape {maps.shape}, expected {(d, n)}")
    if np.array_equal(maps[0], np.arange(n)):
        value = permuted_statistics(gram, maps[None, 1:])[0]
    else:
        b_term = float(np.prod(gram.grand_means))
        out, scale = _general_kernel(
            gram.mats, gram.row_means, b_term, np.ascontiguousarray(maps[None], dtype=np.int64)
        )
        value = _clamp(out, scale)[0]
    return StatisticValue(float(value), n, d, "factorized")


def hsic(gram: GramStack, assignment: IndexAssignment | None = None) -> StatisticValue:
    """Two-variable special case; identical to :func:`dhsic_factorized`."""
    if gram.d != 2:
        raise WrongArity(f"HSIC is defined for 2 variables, got {gram.d}")
    return dhsic_factorized(gram, assignment)


def set_threads(count: int) -> int:
    """Cap the worker threads used by the batch kernels; returns the cap applied.

    Results do not depend on the cap.
    """
    if count < 1:
        raise ValueError(f"thread count must be positive, got {count}")
    count = min(int(count), numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(count)
    return count
