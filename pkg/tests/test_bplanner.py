import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhsicperm.bplanner import (
    ci_coverage,
    ci_halfwidth,
    coverage_table,
    minimal_B,
    rejection_probability,
    rejection_threshold,
)
from dhsicperm.errors import DomainError, SearchExhausted

from conftest import binom_cdf_oracle, binom_pmf_oracle


def coverage_oracle(p, B, eps):
    """Sum the binomial mass over lattice points with |(1+z)/(B+1) - p| <= eps, exactly."""
    pq, eq = Fraction(repr(p)), Fraction(repr(eps))
    return sum(
        binom_pmf_oracle(z, B, p)
        for z in range(B + 1)
        if abs(Fraction(1 + z, B + 1) - pq) <= eq
    )


def rejection_oracle(p, B, alpha):
    # smallest rejected rank by direct search over the lattice
    zs = [z for z in range(B + 1) if Fraction(1 + z, B + 1) <= Fraction(repr(alpha))]
    return binom_cdf_oracle(max(zs), B, p) if zs else 0.0


class TestRejectionProbability:
    def test_threshold(self):
        assert rejection_threshold(19, 0.05) == 0
        assert rejection_threshold(99, 0.05) == 4
        assert rejection_threshold(9999, 0.05) == 499
        assert rejection_threshold(10, 0.05) < 0

    def test_b19_closed_form(self):
        # only Z = 0 rejects, so the probability is (1 - p)^19
        for p in (0.0, 0.01, 0.05, 0.3):
            assert rejection_probability(p, 19, 0.05) == pytest.approx((1 - p) ** 19, rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("B", [19, 99, 199, 999])
    @pytest.mark.parametrize("p", [0.0, 0.01, 0.04, 0.05, 0.07, 0.5, 1.0])
    def test_against_pmf_sum(self, B, p):
        assert rejection_probability(p, B, 0.05) == pytest.approx(rejection_oracle(p, B, 0.05), rel=1e-9, abs=1e-14)

    def test_at_alpha_large_B(self):
        assert 0.48 <= rejection_probability(0.05, 9999, 0.05) <= 0.52

    def test_cannot_reject(self):
        assert rejection_probability(0.0, 10, 0.05) == 0.0

    def test_vectorized(self):
        ps = np.linspace(0, 1, 11)
        out = rejection_probability(ps, 99, 0.05)
        assert out.shape == (11,)
        assert out[3] == rejection_probability(ps[3], 99, 0.05)

    def test_monotone_in_p(self):
        out = rejection_probability(np.linspace(0, 1, 201), 999, 0.05)
        assert np.all(np.diff(out) <= 1e-15)

    def test_domain(self):
        with pytest.raises(DomainError):
            rejection_probability(1.2, 99, 0.05)
        with pytest.raises(DomainError):
            rejection_probability(-0.1, 99, 0.05)

    def test_b_ladder(self):
        # below alpha larger B rejects more often, above alpha less often
        for p in (0.01, 0.03, 0.045):
            vals = [rejection_probability(p, B, 0.05) for B in (99, 999, 9999)]
            assert vals[0] < vals[1] <= vals[2]
        vals = [rejection_probability(0.045, B, 0.05) for B in (99, 999, 9999)]
        assert vals[0] < vals[1] < vals[2]
        for p in (0.06, 0.08, 0.1):
            vals = [rejection_probability(p, B, 0.05) for B in (99, 999, 9999)]
            assert vals[0] > vals[1] > vals[2]


class TestCoverage:
    @pytest.mark.parametrize("p", [0.0, 0.05, 0.2, 0.5, 0.83, 1.0])
    @pytest.mark.parametrize("B", [7, 100, 333])
    def test_against_lattice_sum(self, p, B):
        assert ci_coverage(p, B, 0.1) == pytest.approx(coverage_oracle(p, B, 0.1), abs=1e-12)

    def test_exact_lattice_endpoint(self):
        # p=0.5, B=99: (1+z)/100 hits 0.4 and 0.6 exactly, both included
        assert ci_coverage(0.5, 99, 0.1) == pytest.approx(coverage_oracle(0.5, 99, 0.1), abs=1e-12)

    def test_wide_epsilon(self):
        assert ci_coverage(0.3, 50, 1.0) == pytest.approx(1.0, abs=1e-15)
        assert ci_coverage(0.3, 50, 2.0) == pytest.approx(1.0, abs=1e-15)

    def test_empty_window(self):
        # no lattice point within 1e-4 of 0.0123 when B=9
        assert ci_coverage(0.0123, 9, 1e-4) == 0.0

    def test_large_B(self):
        assert ci_coverage(0.05, 23000, 0.005) >= 0.99

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            ci_coverage(0.5, 10, 0.0)

    def test_halfwidth_inverts_coverage(self):
        for p in (0.1, 0.5):
            w = ci_halfwidth(p, 500, 0.95)
            assert ci_coverage(p, 500, w) >= 0.95
            assert ci_coverage(p, 500, w - 1e-6) < 0.95

    def test_table(self):
        table = coverage_table(100, 0.1)
        assert table[0][0] == 0.0 and table[-1][0] == 1.0
        assert len(table) == 101


@pytest.fixture(scope="module")
def plan():
    return minimal_B(0.05, 0.005, 0.99, 0.10)


class TestMinimalB:
    def test_band(self, plan):
        assert 1.8e4 <= plan.B_min <= 2.8e4
        assert abs(plan.max_ci_width_above_C - 0.01) <= 0.002

    def test_certified_minimal(self, plan):
        assert plan.min_coverage_at_B_min >= 0.99
        assert plan.min_coverage_at_B_min_minus_1 < 0.99

    def test_recheck_with_independent_grid(self, plan):
        grid = np.linspace(0.0, 0.10, 101)
        assert np.min(ci_coverage(grid, plan.B_min, 0.005)) >= 0.99

    def test_worst_width_location(self, plan):
        # binomial spread peaks at p = 1/2
        assert abs(plan.worst_p_above_C - 0.5) <= 0.05

    def test_zero_confidence(self):
        assert minimal_B(0.05, 0.005, 0.0, 0.10).B_min == 1

    def test_normal_approximation_scale(self):
        # z_{0.975}^2 C(1-C)/eps^2 is the large-B ballpark
        plan = minimal_B(0.05, 0.01, 0.95, 0.2)
        approx = 1.959964 ** 2 * 0.2 * 0.8 / 0.01**2
        assert 0.8 * approx <= plan.B_min <= 1.2 * approx

    @pytest.mark.parametrize(
        "args",
        [(0.05, 0.2, 0.99, 0.1), (0.05, 0.005, 0.99, 1.0), (0.2, 0.005, 0.99, 0.1), (0.05, 0.005, 1.0, 0.1)],
    )
    def test_domain_errors(self, args):
        with pytest.raises(DomainError):
            minimal_B(*args)

    def test_search_exhausted(self):
        with pytest.raises(SearchExhausted):
            minimal_B(0.05, 0.005, 0.99, 0.1, search_bounds=(1, 1000))

    def test_to_dict(self):
        d = minimal_B(0.05, 0.05, 0.9, 0.3).to_dict()
        assert {"B_min", "max_ci_width_above_C", "note"} <= set(d)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(0, 1), B=st.integers(1, 300), eps=st.floats(0.001, 0.5))
def test_coverage_matches_oracle_property(p, B, eps):
    assert ci_coverage(p, B, eps) == pytest.approx(coverage_oracle(p, B, eps), abs=1e-10)
