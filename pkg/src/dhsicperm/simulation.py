"""Monte Carlo studies: power sweeps, rejection curves, permuted-statistic decay.

Scenario 1 draws ``X1, eps ~ N(0, I_5)`` and sets ``X2 = theta X1 + eps``.
Scenario 2 is a fixed dataset ``X1_i = 2 pi i / n``, ``X2 = sin(theta X1)``,
so its replications only resample permutations.  The null scenario draws
independent standard normal blocks.

Every random draw is keyed off ``master_seed``:

* data for replication ``r`` at theta index ``t``: ``(master_seed, 0, t, r)``
* permutations for B index ``b``: ``(master_seed, 1, t, b, r)``

so all B values at a given ``(t, r)`` see the same dataset (common random
numbers), and results do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np

from .bplanner import rejection_probability, rejection_threshold
from .estimator import permuted_statistics
from .kernels import MEDIAN, Dataset, KernelSpec, build_gram_stack
from .permtest import TiePolicy, test_exhaustive, test_sampled
from .permutations import derive_seed, permutation_stream, sample_permutation_parts

__all__ = [
    "ScenarioSpec",
    "PowerRow",
    "CurveRow",
    "POWER_COLUMNS",
    "generate_scenario1",
    "generate_scenario2",
    "generate_null_gaussian",
    "power_sweep",
    "rejection_curve_empirical",
    "permuted_statistic_shrinkage",
    "write_rows_csv",
    "load_scenario_config",
]

ScenarioKind = Literal["scenario1", "scenario2", "null_gaussian", "custom"]

# scenario 2: p_D crosses alpha between theta = 2.5 and 2.6 under the median heuristic
DEFAULTS = {
    "scenario1": dict(
        thetas=[round(0.05 * i, 2) for i in range(11)], dims=(5, 5), n=100,
        B_list=[99, 199, 999], replications=200,
    ),
    "scenario2": dict(
        thetas=[1.0, 1.5, 2.0, 2.25, 2.5, 2.52, 2.54, 2.56, 2.58, 2.6, 2.75, 3.0, 3.5, 4.0],
        dims=(1, 1), n=100, B_list=[99, 999, 9999], replications=100,
    ),
    "null_gaussian": dict(thetas=[0.0], dims=(1, 1), n=30, B_list=[199], replications=2000),
    "custom": dict(thetas=[0.0], dims=None, n=100, B_list=[99, 199, 999], replications=100),
}

POWER_COLUMNS = ("kind", "theta", "n", "B", "alpha", "replications", "rejections", "rate", "mc_stderr")


def generate_scenario1(theta: float, n: int, seed: int, dim: int = 5) -> Dataset:
    """``X2 = theta * X1 + eps`` with ``X1, eps`` i.i.d. ``N(0, I_dim)``."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    rng = permutation_stream(seed)
    x1 = rng.standard_normal((n, dim))
    eps = rng.standard_normal((n, dim))
    return Dataset((x1, theta * x1 + eps))


def generate_scenario2(theta: float, n: int = 100) -> Dataset:
    """Deterministic sine dataset on the grid ``2 pi i / n``, ``i = 1..n``."""
    x1 = np.arange(1, n + 1) * 2.0 * np.pi / n
    return Dataset((x1, np.sin(theta * x1)))


def generate_null_gaussian(n: int, seed: int, dims: Sequence[int] = (1, 1)) -> Dataset:
    """Independent standard normal blocks, one per entry of ``dims``."""
    rng = permutation_stream(seed)
    return Dataset(tuple(rng.standard_normal((n, m)) for m in dims))


@dataclass
class ScenarioSpec:
    """Configuration of a power sweep.

    Unset fields take per-``kind`` defaults from ``DEFAULTS``; ``generator`` is required
    for ``kind="custom"`` and is called as ``generator(theta, n, seed)``.
    """

    kind: ScenarioKind
    n: int | None = None
    thetas: list | None = None
    dims: tuple | None = None
    replications: int | None = None
    B_list: list | None = None
    alpha: str | float = "0.05"
    master_seed: int = 0
    method: Literal["sampled", "exhaustive"] = "sampled"
    ties: str = "conservative"
    bandwidth: float | str = MEDIAN
    cap: int = 10**6
    generator: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("scenario1", "scenario2", "null_gaussian", "custom"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "custom" and self.generator is None:
            raise ValueError("custom scenarios need a generator")
        for name, value in DEFAULTS[self.kind].items():
            if getattr(self, name) is None:
                setattr(self, name, list(value) if isinstance(value, list) else value)
        if self.dims is not None:
            self.dims = tuple(int(m) for m in self.dims)
        self.thetas = [float(t) for t in self.thetas]
        self.B_list = [int(b) for b in self.B_list]
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.B_list or any(b < 1 for b in self.B_list):
            raise ValueError(f"B_list must be a nonempty list of positive integers, got {self.B_list}")
        if not self.thetas:
            raise ValueError("thetas must be nonempty")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.method not in ("sampled", "exhaustive"):
            raise ValueError(f"unknown method {self.method!r}")
        TiePolicy(self.ties)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "generator"}
        out["dims"] = list(out["dims"]) if out["dims"] is not None else None
        out["alpha"] = str(self.alpha)
        return out

    def dataset(self, theta: float, seed: int) -> Dataset:
        if self.kind == "scenario1":
            return generate_scenario1(theta, self.n, seed, dim=self.dims[0])
        if self.kind == "scenario2":
            return generate_scenario2(theta, self.n)
        if self.kind == "null_gaussian":
            return generate_null_gaussian(self.n, seed, self.dims)
        return self.generator(theta, self.n, seed)


@dataclass(frozen=True)
class PowerRow:
    kind: str
    theta: float
    n: int
    B: int
    alpha: float
    replications: int
    rejections: int
    rate: float
    mc_stderr: float

    @classmethod
    def from_counts(cls, kind, theta, n, B, alpha, replications, rejections) -> "PowerRow":
        rate = rejections / replications
        return cls(kind, theta, n, B, alpha, replications, rejections, rate,
                   math.sqrt(rate * (1.0 - rate) / replications))


def power_sweep(spec: ScenarioSpec, progress: Callable[[str], None] | None = None) -> list[PowerRow]:
    """Rejection rates for every ``(theta, B)`` in ``spec``.

    Returns one :class:`PowerRow` per pair, thetas outermost.  Scenario 2
    reuses its fixed dataset and only varies permutation seeds.
    """
    kernel = KernelSpec.gaussian(spec.bandwidth)
    counts = np.zeros((len(spec.thetas), len(spec.B_list)), dtype=np.int64)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="B=.* is too small")
        for ti, theta in enumerate(spec.thetas):
            fixed = None
            if spec.kind == "scenario2":
                fixed = build_gram_stack(spec.dataset(theta, 0), kernel)
            for ri in range(spec.replications):
                gram = fixed if fixed is not None else build_gram_stack(
                    spec.dataset(theta, derive_seed(spec.master_seed, 0, ti, ri)), kernel
                )
                for bi, B in enumerate(spec.B_list):
                    seed = derive_seed(spec.master_seed, 1, ti, bi, ri)
                    if spec.method == "sampled":
                        res = test_sampled(gram, B, spec.alpha, spec.ties, seed)
                    else:
                        res = test_exhaustive(gram, spec.alpha, spec.ties, spec.cap, seed)
                    counts[ti, bi] += res.reject
            if progress is not None:
                progress(f"theta={theta:g} done ({ti + 1}/{len(spec.thetas)})")
    alpha = float(spec.alpha)
    return [
        PowerRow.from_counts(spec.kind, theta, spec.n, B, alpha, spec.replications, int(counts[ti, bi]))
        for ti, theta in enumerate(spec.thetas)
        for bi, B in enumerate(spec.B_list)
    ]


@dataclass(frozen=True)
class CurveRow:
    p_D: float
    B: int
    alpha: float
    trials: int
    rejections: int
    empirical: float
    analytic: float
    stderr: float
    within_4sigma: bool


def rejection_curve_empirical(
    p_grid: Sequence[float], B_list: Sequence[int], alpha, trials: int, seed: int = 0
) -> list[CurveRow]:
    """Simulated ``P(p_hat <= alpha | p_D)`` next to its exact binomial value.

    Each cell draws ``trials`` values of ``Z ~ Binom(B, p_D)`` and counts
    ``(1 + Z) / (B + 1) <= alpha``.
    """
    rows = []
    for bi, B in enumerate(B_list):
        t = rejection_threshold(B, alpha)
        for pi, p in enumerate(p_grid):
            if not 0 <= p <= 1:
                raise ValueError(f"p_D grid values must lie in [0, 1], got {p}")
            rng = permutation_stream(seed, bi, pi)
            z = rng.binomial(B, p, size=trials)
            hits = int(np.count_nonzero(z <= t))
            q = rejection_probability(p, B, alpha)
            se = math.sqrt(q * (1.0 - q) / trials)
            emp = hits / trials
            rows.append(CurveRow(float(p), int(B), float(alpha), trials, hits, emp, q, se,
                                 abs(emp - q) <= 4 * se + 1e-12))
    return rows


def permuted_statistic_shrinkage(
    n_list: Sequence[int],
    dist: Callable[[int, int], Dataset],
    perms_per_n: int,
    seed: int = 0,
    kernels=None,
) -> list[tuple[int, float]]:
    """Mean of ``dHSIC(psi D)`` over random ``psi`` for one dataset per ``n``.

    ``dist(n, seed)`` produces the dataset.  Under any distribution the
    permuted statistic should decay towards zero as ``n`` grows.
    """
    if list(n_list) != sorted(n_list):
        raise ValueError("n_list must be ascending")
    out = []
    for i, n in enumerate(n_list):
        data = dist(n, derive_seed(seed, 0, i))
        gram = build_gram_stack(data, kernels)
        parts = sample_permutation_parts(n, data.d, perms_per_n, permutation_stream(seed, 1, i))
        out.append((int(n), float(np.mean(permuted_statistics(gram, parts)))))
    return out


def write_rows_csv(rows, path, columns: Sequence[str] | None = None) -> Path:
    """Write dataclass rows as CSV with a fixed header."""
    path = Path(path)
    rows = list(rows)
    if columns is None:
        columns = [f.name for f in fields(rows[0])] if rows else []
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            d = asdict(row)
            writer.writerow([d[c] for c in columns])
    return path


def load_scenario_config(path) -> dict:
    """Read a JSON or TOML scenario config into a plain dict."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)
