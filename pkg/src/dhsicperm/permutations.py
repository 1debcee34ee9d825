"""Permutation vectors acting on variables ``2..d`` and their index maps.

A permutation vector ``psi = (psi^1, ..., psi^{d-1})`` maps sample ``i`` of a
dataset to ``(x^1_i, x^2_{psi^1(i)}, ..., x^d_{psi^{d-1}(i)})``.  Nothing here
moves data: :func:`to_assignment` turns ``psi`` into per-variable row maps
that the estimator applies to the Gram matrices directly.

Randomness comes from :class:`numpy.random.Generator` streams keyed by
``(seed, index...)`` through :class:`numpy.random.SeedSequence`, so a given key
always reproduces the same draws regardless of how work is scheduled.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import GuardExceeded

__all__ = [
    "DEFAULT_CAP",
    "PermutationVector",
    "IndexAssignment",
    "derive_seed",
    "permutation_stream",
    "identity_assignment",
    "sample_permutation_vector",
    "sample_permutation_parts",
    "count_permutation_vectors",
    "unrank_permutation",
    "permutation_vector_at",
    "enumerate_permutation_vectors",
    "enumerate_parts_batches",
    "to_assignment",
]

DEFAULT_CAP = 10**6


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic 63-bit child seed for ``(master_seed, *key)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def permutation_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; no key means the seed's own stream."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
    )


def _check_bijection(arr: np.ndarray, n: int, what: str):
    if arr.shape[-1] != n or not np.array_equal(np.sort(arr, axis=-1), np.broadcast_to(np.arange(n), arr.shape)):
        raise ValueError(f"{what} is not a permutation of 0..{n - 1}")


@dataclass(frozen=True, eq=False)
class PermutationVector:
    """``d - 1`` permutations of ``0..n-1`` (0-based in memory, 1-based on disk)."""

    parts: np.ndarray

    def __post_init__(self):
        parts = np.array(self.parts, dtype=np.int64, ndmin=2)
        _check_bijection(parts, parts.shape[1], "permutation vector part")
        parts.setflags(write=False)
        object.__setattr__(self, "parts", parts)

    @property
    def n(self) -> int:
        return self.parts.shape[1]

    @property
    def d(self) -> int:
        return self.parts.shape[0] + 1

    def __eq__(self, other):
        return isinstance(other, PermutationVector) and np.array_equal(self.parts, other.parts)

    def __hash__(self):
        return hash(self.parts.tobytes())

    def is_identity(self) -> bool:
        return bool(np.all(self.parts == np.arange(self.n)))

    def to_json(self) -> list[list[int]]:
        return (self.parts + 1).tolist()

    @classmethod
    def from_json(cls, obj) -> "PermutationVector":
        return cls(np.asarray(obj, dtype=np.int64) - 1)


@dataclass(frozen=True, eq=False)
class IndexAssignment:
    """Row/column maps for each variable's Gram matrix, shape ``(d, n)``."""

    maps: np.ndarray

    def __post_init__(self):
        maps = np.array(self.maps, dtype=np.int64, ndmin=2)
        _check_bijection(maps, maps.shape[1], "index map")
        maps.setflags(write=False)
        object.__setattr__(self, "maps", maps)

    @property
    def d(self) -> int:
        return self.maps.shape[0]

    @property
    def n(self) -> int:
        return self.maps.shape[1]


def identity_assignment(n: int, d: int) -> IndexAssignment:
    return IndexAssignment(np.tile(np.arange(n), (d, 1)))


def to_assignment(psi: PermutationVector, d: int | None = None) -> IndexAssignment:
    """Index maps realising ``psi D``: variable 1 fixed, variable ``j`` read through ``psi^{j-1}``."""
    if d is not None and psi.d != d:
        raise ValueError(f"permutation vector has {psi.d - 1} parts, expected {d - 1}")
    return IndexAssignment(np.vstack([np.arange(psi.n), psi.parts]))


def sample_permutation_parts(n: int, d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. uniform permutation vectors as an array ``(count, d - 1, n)``.

    Uses Fisher-Yates shuffles from ``rng`` and consumes the stream exactly
    as ``count`` successive calls to :func:`sample_permutation_vector` would.
    """
    if n < 1 or d < 2:
        raise ValueError(f"need n >= 1 and d >= 2, got n={n}, d={d}")
    base = np.broadcast_to(np.arange(n, dtype=np.int64), (count * (d - 1), n))
    return rng.permuted(base, axis=1).reshape(count, d - 1, n)


def sample_permutation_vector(n: int, d: int, rng: np.random.Generator) -> PermutationVector:
    """One vector of ``d - 1`` independent uniform permutations of ``0..n-1``."""
    return PermutationVector(sample_permutation_parts(n, d, 1, rng)[0])


def count_permutation_vectors(n: int, d: int) -> int:
    return math.factorial(n) ** (d - 1)


def unrank_permutation(rank: int, n: int) -> np.ndarray:
    """The permutation with lexicographic rank ``rank`` (factorial number system)."""
    if not 0 <= rank < math.factorial(n):
        raise ValueError(f"rank {rank} out of range for n={n}")
    pool = list(range(n))
    out = []
    for i in range(n, 0, -1):
        digit, rank = divmod(rank, math.factorial(i - 1))
        out.append(pool.pop(digit))
    return np.array(out, dtype=np.int64)


def permutation_vector_at(rank: int, n: int, d: int) -> PermutationVector:
    """Vector at position ``rank`` of the enumeration order (last part varies fastest)."""
    total = count_permutation_vectors(n, d)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} out of range for {total} vectors")
    nf = math.factorial(n)
    digits = []
    for _ in range(d - 1):
        rank, r = divmod(rank, nf)
        digits.append(r)
    return PermutationVector(np.stack([unrank_permutation(r, n) for r in reversed(digits)]))


def _check_cap(n: int, d: int, cap: int) -> int:
    total = count_permutation_vectors(n, d)
    if total > cap:
        raise GuardExceeded(
            f"exhaustive enumeration needs (n!)^(d-1) = {total} vectors (cap {cap})",
            count=total,
            cap=cap,
        )
    return total


def enumerate_permutation_vectors(
    n: int, d: int, cap: int = DEFAULT_CAP, start: int = 0, stop: int | None = None
) -> Iterator[PermutationVector]:
    """All ``(n!)^(d-1)`` vectors, identity first, in lexicographic rank order.

    ``start``/``stop`` select a rank range so consumers can split the work.
    The cap is checked eagerly, before the first vector is produced.
    """
    total = _check_cap(n, d, cap)
    stop = total if stop is None else min(stop, total)

    def gen():
        perms = itertools.permutations(range(n))
        vectors = itertools.product(perms, repeat=d - 1)
        for parts in itertools.islice(vectors, start, stop):
            yield PermutationVector(np.array(parts, dtype=np.int64))

    return gen()


def enumerate_parts_batches(
    n: int, d: int, cap: int = DEFAULT_CAP, batch: int = 65536
) -> Iterator[np.ndarray]:
    """Same order as :func:`enumerate_permutation_vectors`, as ``(P, d-1, n)`` arrays."""
    total = _check_cap(n, d, cap)
    table = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    nf = table.shape[0]

    def gen():
        for lo in range(0, total, batch):
            ranks = np.arange(lo, min(lo + batch, total), dtype=np.int64)
            digits = np.empty((ranks.size, d - 1), dtype=np.int64)
            rest = ranks.copy()
            for j in range(d - 2, -1, -1):
                digits[:, j] = rest % nf
                rest //= nf
            yield table[digits]

    return gen()
