import math

import numpy as np
import pytest

from dhsicperm.kernels import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_dataset(rng, n, dims):
    return Dataset(tuple(rng.standard_normal((n, m)) for m in dims))


def binom_pmf_oracle(k, B, p):
    """Binomial mass by log-gamma, independent of scipy."""
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == B else 0.0
    logc = math.lgamma(B + 1) - math.lgamma(k + 1) - math.lgamma(B - k + 1)
    return math.exp(logc + k * math.log(p) + (B - k) * math.log1p(-p))


def binom_cdf_oracle(t, B, p):
    return sum(binom_pmf_oracle(k, B, p) for k in range(0, min(t, B) + 1))
