"""Permutation tests of joint independence with the dHSIC statistic."""

from ._version import __version__
from .bplanner import BPlan, ci_coverage, minimal_B, rejection_probability
from .errors import (
    AllPointsIdentical,
    DHSICError,
    DimensionMismatch,
    DomainError,
    GuardExceeded,
    SearchExhausted,
    WrongArity,
)
from .estimator import StatisticValue, dhsic_factorized, dhsic_naive, hsic, permuted_statistics, set_threads
from .kernels import Dataset, GramStack, KernelSpec, build_gram_stack, median_heuristic_bandwidth
from .permtest import TestResult, TiePolicy, dhsic_test, rank_with_ties, test_exhaustive, test_sampled
from .permutations import (
    IndexAssignment,
    PermutationVector,
    enumerate_permutation_vectors,
    sample_permutation_vector,
    to_assignment,
)

__all__ = [
    "__version__",
    "AllPointsIdentical",
    "BPlan",
    "DHSICError",
    "Dataset",
    "DimensionMismatch",
    "DomainError",
    "GramStack",
    "GuardExceeded",
    "IndexAssignment",
    "KernelSpec",
    "PermutationVector",
    "SearchExhausted",
    "StatisticValue",
    "TestResult",
    "TiePolicy",
    "WrongArity",
    "build_gram_stack",
    "ci_coverage",
    "dhsic_factorized",
    "dhsic_naive",
    "dhsic_test",
    "enumerate_permutation_vectors",
    "hsic",
    "median_heuristic_bandwidth",
    "minimal_B",
    "permuted_statistics",
    "rank_with_ties",
    "rejection_probability",
    "sample_permutation_vector",
    "set_threads",
    "test_exhaustive",
    "test_sampled",
    "to_assignment",
]
