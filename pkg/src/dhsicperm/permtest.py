"""Permutation tests of joint independence based on dHSIC.

Two procedures are provided.  :func:`test_exhaustive` ranks the observed
statistic among all ``(n!)^(d-1)`` permutation vectors and rejects when
``p_D = R / (n!)^(d-1) <= alpha``.  :func:`test_sampled` draws ``B`` i.i.d.
uniform vectors and rejects when ``p_hat = R / (B + 1) <= alpha``.  In both
the observed statistic sits in slot 0 of the value array, and the rank of
the largest value is 1.

Ties are broken conservatively by default (every permuted value ``>=`` the
observed one counts against it).  Comparisons are exact; any float noise
can only enlarge the p-value.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Literal

import numpy as np

from ._version import __version__
from .estimator import permuted_statistics
from .kernels import Dataset, GramStack, build_gram_stack
from .permutations import (
    DEFAULT_CAP,
    count_permutation_vectors,
    enumerate_parts_batches,
    permutation_stream,
    sample_permutation_parts,
)

__all__ = [
    "TiePolicy",
    "TestResult",
    "as_fraction",
    "rank_with_ties",
    "test_exhaustive",
    "test_sampled",
    "dhsic_test",
]

_BATCH = 16384


class TiePolicy(str, enum.Enum):
    CONSERVATIVE = "conservative"
    RANDOM = "random"


def as_fraction(alpha) -> Fraction:
    """Exact rational value of a level given as str, Fraction, Decimal or float.

    Floats are read through their shortest decimal representation, so
    ``0.05`` becomes exactly ``1/20``.
    """
    if isinstance(alpha, float):
        alpha = repr(alpha)
    try:
        frac = Fraction(alpha)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"cannot read {alpha!r} as a level") from exc
    if not 0 < frac < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return frac


@dataclass(frozen=True)
class TestResult:
    """Outcome of one permutation test.

    ``p_value == rank / total``; ``reject`` compares that ratio with
    ``alpha`` in exact rational arithmetic.
    """

    __test__ = False

    statistic: float
    p_value: float
    rank: int
    method: Literal["exhaustive", "sampled"]
    B: int | None
    total: int
    alpha: float
    reject: bool
    tie_policy: str
    seed: int | None
    num_ties_at_statistic: int
    n: int
    d: int
    bandwidths: tuple
    version: str = __version__

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bandwidths"] = list(self.bandwidths)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def rank_with_ties(values, policy=TiePolicy.CONSERVATIVE, rng: np.random.Generator | None = None) -> int:
    """Rank of ``values[0]`` in ``values`` (largest has rank 1).

    Conservative: ``1 + #{i >= 1 : values[i] >= values[0]}``.
    Random: uniform on ``{l + 1, ..., l + k}`` where ``l`` counts strictly
    larger entries and ``k`` is the multiplicity of ``values[0]``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("values must be nonempty")
    policy = TiePolicy(policy)
    obs = values[0]
    if policy is TiePolicy.CONSERVATIVE:
        return 1 + int(np.count_nonzero(values[1:] >= obs))
    if rng is None:
        raise ValueError("random tie-breaking needs a generator")
    larger = int(np.count_nonzero(values > obs))
    ties = int(np.count_nonzero(values == obs))
    return larger + 1 + int(rng.integers(ties))


def _finish(values, policy, tie_rng, gram, alpha, method, B, total, seed) -> TestResult:
    alpha_q = as_fraction(alpha)
    rank = rank_with_ties(values, policy, tie_rng)
    ties = int(np.count_nonzero(values[1:] == values[0]))
    return TestResult(
        statistic=float(values[0]),
        p_value=rank / total,
        rank=rank,
        method=method,
        B=B,
        total=total,
        alpha=float(alpha_q),
        reject=Fraction(rank, total) <= alpha_q,
        tie_policy=TiePolicy(policy).value,
        seed=seed,
        num_ties_at_statistic=ties,
        n=gram.n,
        d=gram.d,
        bandwidths=tuple(gram.bandwidths),
    )


def test_exhaustive(
    gram: GramStack,
    alpha=0.05,
    policy=TiePolicy.CONSERVATIVE,
    cap: int = DEFAULT_CAP,
    seed: int | None = 0,
) -> TestResult:
    """Permutation test over every permutation vector.

    ``seed`` only matters for random tie-breaking.

    Raises
    ------
    GuardExceeded
        If ``(n!)^(d-1)`` exceeds ``cap``.
    """
    total = count_permutation_vectors(gram.n, gram.d)
    batches = enumerate_parts_batches(gram.n, gram.d, cap=cap, batch=_BATCH)
    values = np.concatenate([permuted_statistics(gram, parts) for parts in batches])
    assert values.size == total
    tie_rng = permutation_stream(seed or 0, 1)
    return _finish(values, policy, tie_rng, gram, alpha, "exhaustive", None, total, seed)


test_exhaustive.__test__ = False


def test_sampled(
    gram: GramStack,
    B: int,
    alpha=0.05,
    policy=TiePolicy.CONSERVATIVE,
    seed: int = 0,
) -> TestResult:
    """Permutation test with ``B`` i.i.d. uniformly sampled permutation vectors.

    Permutations come from the stream ``(seed, 0)`` and random tie-breaks
    from ``(seed, 1)``, so a fixed seed gives an identical result.  Warns
    when ``1 / (B + 1) > alpha`` because the test can then never reject.
    """
    B = int(B)
    if B < 1:
        raise ValueError(f"B must be at least 1, got {B}")
    if Fraction(1, B + 1) > as_fraction(alpha):
        warnings.warn(
            f"B={B} is too small for alpha={alpha}: the test cannot reject "
            f"(need B >= 1/alpha - 1)",
            stacklevel=2,
        )
    n, d = gram.n, gram.d
    perm_rng = permutation_stream(seed, 0)
    identity = np.broadcast_to(np.arange(n, dtype=np.int64), (1, d - 1, n))
    chunks = [permuted_statistics(gram, identity)]
    for lo in range(0, B, _BATCH):
        parts = sample_permutation_parts(n, d, min(_BATCH, B - lo), perm_rng)
        chunks.append(permuted_statistics(gram, parts))
    values = np.concatenate(chunks)
    tie_rng = permutation_stream(seed, 1)
    return _finish(values, policy, tie_rng, gram, alpha, "sampled", B, B + 1, seed)


test_sampled.__test__ = False


def dhsic_test(
    data: Dataset | GramStack,
    kernels=None,
    method: Literal["sampled", "exhaustive"] = "sampled",
    B: int = 999,
    alpha=0.05,
    ties=TiePolicy.CONSERVATIVE,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> TestResult:
    """Build the Gram stack (if needed) and run the requested permutation test."""
    gram = data if isinstance(data, GramStack) else build_gram_stack(data, kernels)
    if method == "sampled":
        return test_sampled(gram, B, alpha, ties, seed)
    if method == "exhaustive":
        return test_exhaustive(gram, alpha, ties, cap, seed)
    raise ValueError(f"unknown method {method!r}")
