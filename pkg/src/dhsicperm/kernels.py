"""Datasets, kernels, bandwidth selection and Gram-matrix construction.

A :class:`Dataset` holds ``n`` joint observations of ``d`` variables, each
variable stored as its own ``(n, m_j)`` block.  :func:`build_gram_stack`
turns it into a :class:`GramStack`, the stack of ``d`` kernel matrices that
every statistic in the package is computed from.

The Gaussian kernel follows the convention ``exp(-||x - y||^2 / sigma^2)``
(no factor of two in the denominator).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from .errors import AllPointsIdentical, DimensionMismatch

__all__ = [
    "MEDIAN",
    "Dataset",
    "KernelSpec",
    "GramStack",
    "median_heuristic_bandwidth",
    "gaussian_gram",
    "linear_gram",
    "build_gram_stack",
    "gram_stack_from_matrices",
]

MEDIAN = "median"

KernelFamily = Literal["gaussian", "linear", "tabulated"]
Bandwidth = Union[float, Literal["median"], None]


def _as_block(block) -> np.ndarray:
    arr = np.asarray(block, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"a block must be 1-D or 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Dataset:
    """``n`` samples of a ``d``-tuple of real vectors.

    Parameters
    ----------
    blocks : sequence of array_like
        One ``(n, m_j)`` array per variable.  1-D inputs are treated as
        ``(n, 1)``.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(_as_block(b) for b in self.blocks)
        if len(blocks) < 2:
            raise DimensionMismatch(f"need at least 2 variables, got {len(blocks)}")
        n = blocks[0].shape[0]
        if n < 1:
            raise DimensionMismatch("need at least one sample")
        for j, b in enumerate(blocks):
            if b.shape[0] != n:
                raise DimensionMismatch(
                    f"variable {j} has {b.shape[0]} rows, expected {n}"
                )
            if b.shape[1] < 1:
                raise DimensionMismatch(f"variable {j} has no columns")
            if not np.all(np.isfinite(b)):
                raise ValueError(f"variable {j} contains NaN or Inf")
            b.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def d(self) -> int:
        return len(self.blocks)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(b.shape[1] for b in self.blocks)

    def reorder(self, orders: Sequence[np.ndarray]) -> "Dataset":
        """Return a new dataset whose variable ``j`` rows are ``blocks[j][orders[j]]``."""
        if len(orders) != self.d:
            raise DimensionMismatch(f"need {self.d} row orders, got {len(orders)}")
        return Dataset(tuple(b[np.asarray(o)] for b, o in zip(self.blocks, orders)))


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice for one variable.

    ``bandwidth`` is a positive float or ``"median"`` for Gaussian kernels
    and ignored otherwise.  Tabulated kernels carry their precomputed
    ``(n, n)`` matrix in ``matrix``.
    """

    family: KernelFamily = "gaussian"
    bandwidth: Bandwidth = MEDIAN
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in ("gaussian", "linear", "tabulated"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian":
            if isinstance(self.bandwidth, str):
                if self.bandwidth != MEDIAN:
                    raise ValueError(f"unknown bandwidth marker {self.bandwidth!r}")
            elif self.bandwidth is None or not float(self.bandwidth) > 0:
                raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")
        elif self.bandwidth == MEDIAN and self.family != "gaussian":
            # the dataclass default is "median"; only reject it when set explicitly
            object.__setattr__(self, "bandwidth", None)
        if self.family == "tabulated" and self.matrix is None:
            raise ValueError("tabulated kernel needs a matrix")

    @classmethod
    def gaussian(cls, bandwidth: Bandwidth = MEDIAN) -> "KernelSpec":
        return cls("gaussian", bandwidth)

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear", None)

    @classmethod
    def tabulated(cls, matrix) -> "KernelSpec":
        return cls("tabulated", None, np.asarray(matrix, dtype=np.float64))


def _pairwise_sq_dists(block: np.ndarray) -> np.ndarray:
    # explicit differences summed column by column: exactly symmetric, exact
    # zero diagonal, and a fixed left-to-right summation order
    out = np.zeros((block.shape[0], block.shape[0]))
    for k in range(block.shape[1]):
        diff = block[:, k, None] - block[None, :, k]
        out += diff * diff
    return out


def median_heuristic_bandwidth(block) -> float:
    """Median of the nonzero pairwise Euclidean distances of ``block``.

    Zero distances (duplicate rows) are dropped before taking the median.
    An even count takes the mean of the two central values.

    Raises
    ------
    AllPointsIdentical
        If every pairwise distance is zero.
    """
    x = _as_block(block)
    n = x.shape[0]
    if n < 2:
        raise AllPointsIdentical("median heuristic needs at least two rows")
    iu = np.triu_indices(n, k=1)
    dist = np.sqrt(_pairwise_sq_dists(x)[iu])
    dist = dist[dist > 0]
    if dist.size == 0:
        raise AllPointsIdentical("all rows are identical; no usable length scale")
    return float(np.median(dist))


def gaussian_gram(block, sigma: float) -> np.ndarray:
    """Gaussian Gram matrix ``exp(-||x_a - x_b||^2 / sigma^2)``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    x = _as_block(block)
    return np.exp(-_pairwise_sq_dists(x) / (sigma * sigma))


def linear_gram(block) -> np.ndarray:
    x = _as_block(block)
    g = x @ x.T
    return 0.5 * (g + g.T)


def _resolve(block: np.ndarray, spec: KernelSpec, n: int):
    if spec.family == "gaussian":
        sigma = (
            median_heuristic_bandwidth(block)
            if spec.bandwidth == MEDIAN
            else float(spec.bandwidth)
        )
        return gaussian_gram(block, sigma), sigma
    if spec.family == "linear":
        return linear_gram(block), None
    mat = np.asarray(spec.matrix, dtype=np.float64)
    if mat.shape != (n, n):
        raise DimensionMismatch(f"tabulated kernel has shape {mat.shape}, expected {(n, n)}")
    return mat, None


@dataclass(frozen=True, eq=False)
class GramStack:
    """``d`` kernel matrices of size ``n x n``, one per variable.

    Immutable once built; safe to share between threads.  ``row_means`` and
    ``grand_means`` are cached because every permuted statistic needs them.
    """

    mats: np.ndarray
    specs: tuple
    bandwidths: tuple
    row_means: np.ndarray = field(init=False, repr=False)
    grand_means: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mats = np.ascontiguousarray(self.mats, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionMismatch(f"expected a (d, n, n) stack, got {mats.shape}")
        if mats.shape[0] < 2:
            raise DimensionMismatch("need at least 2 variables")
        if len(self.specs) != mats.shape[0] or len(self.bandwidths) != mats.shape[0]:
            raise DimensionMismatch("specs/bandwidths must have one entry per variable")
        if not np.all(np.isfinite(mats)):
            raise ValueError("Gram matrices contain NaN or Inf")
        asym = np.max(np.abs(mats - mats.transpose(0, 2, 1)))
        if asym > 1e-12:
            raise ValueError(f"Gram matrices are not symmetric (max deviation {asym:.3g})")
        mats.setflags(write=False)
        row_means = mats.mean(axis=2)
        grand_means = row_means.mean(axis=1)
        row_means.setflags(write=False)
        grand_means.setflags(write=False)
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "bandwidths", tuple(self.bandwidths))
        object.__setattr__(self, "row_means", row_means)
        object.__setattr__(self, "grand_means", grand_means)

    @property
    def d(self) -> int:
        return self.mats.shape[0]

    @property
    def n(self) -> int:
        return self.mats.shape[1]


def build_gram_stack(data: Dataset, specs=None) -> GramStack:
    """Evaluate each variable's kernel on its block.

    Parameters
    ----------
    data : Dataset
    specs : KernelSpec or sequence of KernelSpec, optional
        One spec per variable.  A single spec is broadcast to all
        variables; the default is a Gaussian kernel with median-heuristic
        bandwidth.

    Raises
    ------
    DimensionMismatch
        If the number of specs differs from ``data.d``.
    AllPointsIdentical
        If the median heuristic meets a constant block.
    """
    if specs is None:
        specs = KernelSpec()
    if isinstance(specs, KernelSpec):
        specs = [specs] * data.d
    specs = list(specs)
    if len(specs) != data.d:
        raise DimensionMismatch(f"got {len(specs)} kernel specs for {data.d} variables")
    mats, bws = [], []
    for block, spec in zip(data.blocks, specs):
        mat, bw = _resolve(block, spec, data.n)
        mats.append(mat)
        bws.append(bw)
    return GramStack(np.stack(mats), tuple(specs), tuple(bws))


def gram_stack_from_matrices(matrices) -> GramStack:
    """Wrap precomputed ``n x n`` kernel matrices (one per variable)."""
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    n = mats[0].shape[0] if mats and mats[0].ndim == 2 else -1
    for j, m in enumerate(mats):
        if m.shape != (n, n):
            raise DimensionMismatch(f"matrix {j} has shape {m.shape}, expected {(n, n)}")
    specs = tuple(KernelSpec.tabulated(m) for m in mats)
    return GramStack(np.stack(mats), specs, (None,) * len(mats))
