import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvabo.baselines import argmax_first, bovo_select, bqoucb_select, rs_select, us_select
from mvabo.benchmarks import Benchmark
from mvabo.bounds import EnvDistribution, RiskBoundTable
from mvabo.gp import GpPosterior, KernelSpec
from mvabo.metrics import (
    GroundTruth,
    epsilon_pareto_check,
    exact_objectives,
    ground_truth,
    hypervolume,
    hypervolume_gap,
    regret,
)
from mvabo.scenarios import mt_select

seeds = st.integers(0, 2**32 - 1)


def table_benchmark(values, weights=None):
    values = np.asarray(values, dtype=float)
    n_x, n_w = values.shape
    env = EnvDistribution(np.arange(n_w), weights if weights is not None else np.full(n_w, 1 / n_w))

    def func(x, w):
        return values[np.rint(x[:, 0]).astype(int), np.rint(w[:, 0]).astype(int)]

    return Benchmark("table", np.arange(float(n_x)), env, func)


def truth_from_objectives(f1, f2, alpha=0.5):
    """Ground truth for given objective vectors, built without a benchmark."""
    from mvabo._pareto import nondominated_mask

    objectives = np.column_stack([f1, f2])
    pareto = np.flatnonzero(nondominated_mask(objectives))
    reference = objectives.min(0) - 1e-6
    return GroundTruth(np.asarray(f1, float), np.asarray(f2, float), alpha, pareto, reference,
                       hypervolume(objectives[pareto], reference))


def brute_hypervolume(points, ref, resolution=400):
    """Grid-counting estimate of the dominated area, for cross-checks."""
    points = np.asarray(points, float)
    hi = points.max(0)
    xs = np.linspace(ref[0], hi[0], resolution, endpoint=False) + (hi[0] - ref[0]) / (2 * resolution)
    ys = np.linspace(ref[1], hi[1], resolution, endpoint=False) + (hi[1] - ref[1]) / (2 * resolution)
    gx, gy = np.meshgrid(xs, ys)
    cells = np.stack([gx.ravel(), gy.ravel()], 1)
    dominated = np.any(np.all(cells[:, None, :] <= points[None, :, :], axis=-1), axis=1)
    return dominated.mean() * (hi[0] - ref[0]) * (hi[1] - ref[1])


class TestGroundTruth:
    def test_two_by_two_by_hand(self):
        truth = ground_truth(table_benchmark([[1, -1], [0, 0]]), alpha=0.5)
        np.testing.assert_allclose(truth.f1, [0, 0])
        np.testing.assert_allclose(truth.f2, [-1, 0])
        assert list(truth.pareto) == [1]
        assert truth.x_star == 1
        assert regret(truth, 0) == pytest.approx(0.5)
        assert regret(truth, 1) == 0.0

    def test_constant_function(self):
        truth = ground_truth(table_benchmark(np.full((4, 3), 2.0)))
        np.testing.assert_array_equal(truth.f2, 0.0)
        assert list(truth.pareto) == [0, 1, 2, 3]

    def test_constrained_optimum(self):
        truth = ground_truth(table_benchmark([[3, -3], [1, 1.5], [0, 0]]), h=-0.5)
        assert truth.constrained_opt == 1
        assert ground_truth(table_benchmark([[3, -3]]), h=-0.5).constrained_opt is None

    def test_two_implementations_agree(self, rng):
        values = rng.normal(size=(20, 7))
        weights = rng.dirichlet(np.ones(7))
        truth = ground_truth(table_benchmark(values, weights))
        for i in range(20):
            mean = sum(values[i, j] * weights[j] for j in range(7))
            var = sum(weights[j] * (values[i, j] - mean) ** 2 for j in range(7))
            assert truth.f1[i] == pytest.approx(mean, abs=1e-12)
            assert truth.f2[i] == pytest.approx(-np.sqrt(var), abs=1e-12)

    def test_stochastic_oracle_rejected(self):
        bench = table_benchmark([[0.0]])
        bench.stochastic = True
        with pytest.raises(ValueError):
            ground_truth(bench)

    @given(seeds, st.floats(0.01, 0.99))
    def test_scalarized_optimum_is_pareto(self, seed, alpha):
        rng = np.random.default_rng(seed)
        truth = ground_truth(table_benchmark(rng.normal(size=(12, 5))), alpha=alpha)
        g = truth.g
        best = np.flatnonzero(g == g.max())
        assert set(best) & set(truth.pareto)


class TestBaselines:
    def test_argmax_first(self):
        assert argmax_first([1, 3, 3]) == 1
        with pytest.raises(ValueError):
            argmax_first([])

    def test_rs(self):
        assert rs_select(1, np.random.default_rng(0)) == 0
        draws = np.array([rs_select(5, np.random.default_rng(s)) for s in range(3)])
        again = np.array([rs_select(5, np.random.default_rng(s)) for s in range(3)])
        np.testing.assert_array_equal(draws, again)
        rng = np.random.default_rng(1)
        freq = np.bincount([rs_select(4, rng) for _ in range(100_000)]) / 100_000
        np.testing.assert_allclose(freq, 0.25, atol=0.01)

    def test_us_prior_tie(self):
        p = EnvDistribution.uniform(np.linspace(-1, 1, 4))
        assert us_select(GpPosterior(KernelSpec(), 1e-4), np.linspace(-1, 1, 6), p) == 0

    def test_us_dirac_and_scan(self, rng):
        design = np.linspace(-1, 1, 9)
        omega = np.linspace(-1, 1, 5)
        model = GpPosterior(KernelSpec.isotropic(0.4), 1e-4)
        for _ in range(5):
            model = model.add(rng.uniform(-1, 1, 2), rng.standard_normal())
        dirac = EnvDistribution(omega, [0, 0, 1, 0, 0])
        sigma_at = [np.sqrt(model.query([[x, omega[2]]])[1][0]) for x in design]
        assert us_select(model, design, dirac) == int(np.argmax(sigma_at))
        p = EnvDistribution.from_unnormalized(omega, rng.uniform(0.1, 1, 5))
        scores = [sum(np.sqrt(model.query([[x, w]])[1][0]) * pw for w, pw in zip(omega, p.weights)) for x in design]
        assert us_select(model, design, p) == int(np.argmax(scores))

    def test_ucb_baselines(self):
        t = RiskBoundTable(np.zeros(2), np.array([3.0, 1.0]), np.array([-2.0, -1.0]), np.array([-1.0, -0.2]))
        assert bqoucb_select(t) == 0
        assert bovo_select(t) == 1

    @given(seeds)
    def test_agree_with_scalarized_extremes(self, seed):
        rng = np.random.default_rng(seed)
        u1, u2 = rng.normal(size=(2, 10))
        t = RiskBoundTable(u1 - 1, u1, -np.abs(u2) - 1, -np.abs(u2))
        assert bqoucb_select(t) == mt_select(t, 1.0)
        assert bovo_select(t) == mt_select(t, 0.0)


class TestHypervolume:
    def test_unit_box(self):
        assert hypervolume([(1, 1)], (0, 0)) == 1.0

    def test_two_points_by_hand(self):
        assert hypervolume([(1, 0.5), (0.5, 1)], (0, 0)) == pytest.approx(0.75)

    def test_empty(self):
        assert hypervolume(np.empty((0, 2)), (0, 0)) == 0.0
        assert hypervolume([(-1, 5)], (0, 0)) == 0.0

    @given(seeds)
    def test_permutation_and_dominated_points(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0, 1, size=(8, 2))
        base = hypervolume(pts, (0, 0))
        assert hypervolume(pts[rng.permutation(8)], (0, 0)) == pytest.approx(base, abs=1e-12)
        dominated = pts[0] * rng.uniform(0.1, 1, 2)
        assert hypervolume(np.vstack([pts, dominated]), (0, 0)) == pytest.approx(base, abs=1e-12)

    def test_matches_grid_count(self, rng):
        pts = rng.uniform(0, 1, size=(6, 2))
        assert hypervolume(pts, (0, 0)) == pytest.approx(brute_hypervolume(pts, (0, 0)), abs=5e-3)


class TestHypervolumeGap:
    def test_full_set_has_zero_gap(self, rng):
        truth = ground_truth(table_benchmark(rng.normal(size=(15, 4))))
        assert hypervolume_gap(truth, truth.pareto) == pytest.approx(0.0, abs=1e-12)

    def test_three_point_front_by_hand(self):
        f1 = [3.0, 2.0, 1.0]
        f2 = [-3.0, -2.0, -1.0]
        truth = truth_from_objectives(f1, f2)
        ref = (0.0, -4.0)
        # front boxes: widths along F1 3, 2, 1 with F2 steps of 1 above -4
        full = 3 * 1 + 2 * 1 + 1 * 1
        assert hypervolume(truth.objectives[truth.pareto], ref) == pytest.approx(full)
        gap = hypervolume_gap(truth, [1], reference=ref)
        assert gap == pytest.approx(full - 2 * 2)

    def test_bad_reference(self):
        truth = truth_from_objectives([1.0], [-1.0])
        with pytest.raises(ValueError):
            hypervolume_gap(truth, [0], reference=(5.0, 5.0))

    @given(seeds)
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        truth = ground_truth(table_benchmark(rng.normal(size=(10, 4))))
        subset = rng.choice(10, size=int(rng.integers(0, 10)), replace=False)
        assert hypervolume_gap(truth, subset) >= -1e-12


class TestEpsilonPareto:
    def test_true_set_passes(self, rng):
        truth = ground_truth(table_benchmark(rng.normal(size=(15, 4))))
        assert epsilon_pareto_check(truth, truth.pareto, (0, 0)).ok

    @given(seeds, st.floats(0, 2), st.floats(0, 2))
    def test_true_set_passes_any_epsilon(self, seed, e1, e2):
        rng = np.random.default_rng(seed)
        truth = ground_truth(table_benchmark(rng.normal(size=(10, 3))))
        assert epsilon_pareto_check(truth, truth.pareto, (e1, e2)).ok

    def test_missing_point_reported(self):
        truth = truth_from_objectives([3.0, 2.0, 1.0], [-3.0, -2.0, -1.0])
        result = epsilon_pareto_check(truth, [0, 1], (0.5, 0.5))
        assert not result.ok and result.condition == 2 and result.point == 2

    def test_dominated_point_reported(self):
        truth = truth_from_objectives([3.0, 1.0], [-1.0, -3.0])
        result = epsilon_pareto_check(truth, [0, 1], (0.5, 0.5))
        assert not result.ok and result.condition == 1 and result.point == 1 and result.witness == 0

    def test_monotone_in_epsilon(self, rng):
        for _ in range(50):
            truth = ground_truth(table_benchmark(rng.normal(size=(8, 3))))
            subset = rng.choice(8, size=3, replace=False)
            small = rng.uniform(0, 1, 2)
            if epsilon_pareto_check(truth, subset, small).ok:
                assert epsilon_pareto_check(truth, subset, small + rng.uniform(0, 1, 2)).ok

    def test_exhaustive_small_instances(self, rng):
        """Compare with a literal reading of both conditions on every subset."""
        for _ in range(10):
            truth = ground_truth(table_benchmark(rng.normal(size=(5, 3))))
            obj, eps = truth.objectives, np.array([0.2, 0.2])
            for r in range(1, 6):
                for subset in itertools.combinations(range(5), r):
                    cond1 = all(not np.any(np.all(obj > obj[i] + eps, axis=1)) for i in subset)
                    cond2 = all(any(np.all(obj[i] <= obj[j] + eps) for j in subset) for i in truth.pareto)
                    assert epsilon_pareto_check(truth, list(subset), eps).ok == (cond1 and cond2)


def test_exact_objectives_shapes():
    p = EnvDistribution.uniform([0.0, 1.0])
    f1, f2 = exact_objectives(np.array([[1.0, 3.0], [2.0, 2.0]]), p)
    np.testing.assert_allclose(f1, [2.0, 2.0])
    np.testing.assert_allclose(f2, [-1.0, 0.0])
