import csv
import json
import math

import numpy as np
import pytest

from dhsicperm.bplanner import rejection_probability
from dhsicperm.kernels import Dataset, KernelSpec
from dhsicperm.simulation import (
    POWER_COLUMNS,
    PowerRow,
    ScenarioSpec,
    generate_null_gaussian,
    generate_scenario1,
    generate_scenario2,
    load_scenario_config,
    permuted_statistic_shrinkage,
    power_sweep,
    rejection_curve_empirical,
    write_rows_csv,
)


class TestGenerators:
    def test_scenario1_theta0_is_noise(self):
        data = generate_scenario1(0.0, 50, seed=1)
        assert data.dims == (5, 5)
        assert not np.allclose(data.blocks[0], data.blocks[1])

    def test_scenario1_deterministic(self):
        a, b = generate_scenario1(0.3, 40, seed=9), generate_scenario1(0.3, 40, seed=9)
        for x, y in zip(a.blocks, b.blocks):
            np.testing.assert_array_equal(x, y)

    def test_scenario1_cross_covariance(self):
        n, theta = 20000, 0.4
        data = generate_scenario1(theta, n, seed=3)
        cov = data.blocks[0].T @ data.blocks[1] / n
        # entries of X1' X2 / n have sd about sqrt((1 + 2 theta^2) / n) on the diagonal
        assert np.max(np.abs(cov - theta * np.eye(5))) <= 4 / math.sqrt(n) * math.sqrt(1 + 2 * theta**2)

    def test_scenario2_values(self):
        data = generate_scenario2(1.0, 100)
        x1, x2 = data.blocks[0][:, 0], data.blocks[1][:, 0]
        assert x1[0] == pytest.approx(2 * math.pi / 100)
        assert x1[-1] == pytest.approx(2 * math.pi)
        # i = 25 gives x1 = pi / 2
        assert x2[24] == pytest.approx(1.0, abs=1e-15)

    def test_null_gaussian(self):
        data = generate_null_gaussian(30, seed=4, dims=(1, 2, 3))
        assert (data.n, data.dims) == (30, (1, 2, 3))


class TestScenarioSpec:
    def test_defaults(self):
        spec = ScenarioSpec("null_gaussian")
        assert (spec.n, spec.B_list, spec.replications) == (30, [199], 2000)
        spec = ScenarioSpec("scenario1")
        assert spec.dims == (5, 5) and spec.B_list == [99, 199, 999]

    def test_defaults_not_shared(self):
        a = ScenarioSpec("scenario1")
        a.thetas.append(9.0)
        assert 9.0 not in ScenarioSpec("scenario1").thetas

    @pytest.mark.parametrize(
        "kwargs",
        [dict(kind="bogus"), dict(kind="custom"), dict(kind="scenario1", B_list=[]),
         dict(kind="scenario1", replications=0), dict(kind="scenario1", ties="coin")],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ScenarioSpec(**kwargs)

    def test_to_dict_is_json(self):
        json.dumps(ScenarioSpec("scenario2").to_dict())


class TestPowerSweep:
    def test_shape_and_determinism(self):
        spec = ScenarioSpec("scenario1", n=20, thetas=[0.0, 0.5], B_list=[19, 39], replications=10, master_seed=5)
        rows = power_sweep(spec)
        assert [(r.theta, r.B) for r in rows] == [(0.0, 19), (0.0, 39), (0.5, 19), (0.5, 39)]
        assert rows == power_sweep(spec)

    def test_strong_dependence_detected(self):
        spec = ScenarioSpec("scenario1", n=40, thetas=[1.0], B_list=[99], replications=10)
        assert power_sweep(spec)[0].rate == 1.0

    def test_scenario2_extremes(self):
        # fixed data with p_D near 0 (theta=2) and far above alpha (theta=3.5)
        spec = ScenarioSpec("scenario2", thetas=[2.0, 3.5], B_list=[99], replications=40)
        rows = power_sweep(spec)
        assert rows[0].rate == 1.0
        assert rows[1].rate == 0.0

    def test_custom_generator(self):
        def gen(theta, n, seed):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal(n)
            return Dataset((x, theta * x + rng.standard_normal(n)))

        spec = ScenarioSpec("custom", n=15, thetas=[0.0], B_list=[19], replications=5, generator=gen)
        assert power_sweep(spec)[0].replications == 5

    def test_exhaustive_method(self):
        spec = ScenarioSpec("null_gaussian", n=5, B_list=[1], replications=5, method="exhaustive")
        row = power_sweep(spec)[0]
        assert 0 <= row.rejections <= 5

    def test_progress_callback(self):
        seen = []
        spec = ScenarioSpec("null_gaussian", n=8, B_list=[19], replications=2, thetas=[0.0, 0.0])
        power_sweep(spec, progress=seen.append)
        assert len(seen) == 2

    def test_stderr(self):
        row = PowerRow.from_counts("x", 0.0, 10, 99, 0.05, 100, 20)
        assert row.rate == 0.2 and row.mc_stderr == pytest.approx(0.04)


@pytest.fixture(scope="module")
def rows():
    grid = [0.0, 0.02, 0.05, 0.08, 0.2]
    return rejection_curve_empirical(grid, [99, 999], 0.05, trials=4000, seed=1)


class TestCurves:
    def test_matches_analytic(self, rows):
        for r in rows:
            assert r.analytic == rejection_probability(r.p_D, r.B, 0.05)
            assert r.within_4sigma

    def test_monotone(self, rows):
        for B in (99, 999):
            emp = [r.empirical for r in rows if r.B == B]
            assert all(a >= b for a, b in zip(emp, emp[1:]))

    def test_zero_p_rejects(self, rows):
        assert all(r.empirical == 1.0 for r in rows if r.p_D == 0.0)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            rejection_curve_empirical([1.5], [99], 0.05, 10)


class TestShrinkage:
    def test_decreases(self):
        out = permuted_statistic_shrinkage(
            [20, 80], lambda n, s: generate_null_gaussian(n, s), perms_per_n=50
        )
        assert out[1][1] < out[0][1]

    def test_constant_data_is_zero(self):
        const = lambda n, s: Dataset((np.zeros(n), np.zeros(n)))
        out = permuted_statistic_shrinkage([5, 10], const, 10, kernels=KernelSpec.gaussian(1.0))
        assert [v for _, v in out] == [0.0, 0.0]

    def test_ascending_required(self):
        with pytest.raises(ValueError):
            permuted_statistic_shrinkage([10, 5], lambda n, s: generate_null_gaussian(n, s), 5)


def test_write_rows_csv(tmp_path):
    rows = [PowerRow.from_counts("null_gaussian", 0.0, 30, 199, 0.05, 10, 1)]
    path = write_rows_csv(rows, tmp_path / "p.csv", POWER_COLUMNS)
    with path.open() as fh:
        table = list(csv.reader(fh))
    assert table[0] == list(POWER_COLUMNS)
    assert table[1][:4] == ["null_gaussian", "0.0", "30", "199"]


def test_load_config(tmp_path):
    (tmp_path / "a.json").write_text('{"kind": "scenario1", "n": 10}')
    (tmp_path / "a.toml").write_text('kind = "scenario1"\nn = 10\n')
    assert load_scenario_config(tmp_path / "a.json") == load_scenario_config(tmp_path / "a.toml")
