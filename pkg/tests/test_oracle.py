import numpy as np
import pytest

from relayee.fractional import ConstraintSet, LinearCap
from relayee.matops import ContractViolation
from relayee.oracle import (GridSpec, check_lemma1, check_lemma2, check_lemma3,
                            check_lemma4_5, check_lemma6, grid_search_gee,
                            random_feasible_points)


def box(dim, cap=2.0):
    return ConstraintSet(dimension=dim,
                         caps=(LinearCap(weights=np.ones(dim), cap=cap),))


def rand_hpd(rng, n, floor=0.1):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + floor * np.eye(n)


class TestGridSpec:
    def test_rejects_high_dim(self):
        with pytest.raises(ContractViolation):
            GridSpec(points_per_dim=2, dims=5, bounds=((0, 1),) * 5)

    def test_rejects_mismatched_bounds(self):
        with pytest.raises(ContractViolation):
            GridSpec(points_per_dim=2, dims=2, bounds=((0, 1),))

    def test_rejects_oversized_grid(self):
        with pytest.raises(ContractViolation):
            GridSpec(points_per_dim=10**4, dims=3, bounds=((0, 1),) * 3)

    def test_axes(self):
        axes = GridSpec(points_per_dim=3, dims=1, bounds=((0.0, 1.0),)).axes()
        assert np.allclose(axes[0], [0.0, 0.5, 1.0])


class TestGridSearch:
    def test_quadratic_peak(self):
        grid = GridSpec(points_per_dim=201, dims=1, bounds=((0.0, 2.0),))
        x, v = grid_search_gee(lambda p: -(p[0] - 0.7) ** 2, box(1), grid)
        assert x[0] == pytest.approx(0.7, abs=1e-9)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_cap_excludes_unconstrained_peak(self):
        grid = GridSpec(points_per_dim=101, dims=2, bounds=((0.0, 2.0), (0.0, 2.0)))
        x, _ = grid_search_gee(lambda p: p[0] + p[1], box(2, cap=1.0), grid)
        assert x[0] + x[1] <= 1.0 + 1e-9

    def test_vectorized_matches_scalar(self):
        grid = GridSpec(points_per_dim=41, dims=2, bounds=((0.0, 1.0), (0.0, 1.0)))

        def f(p):
            return np.sin(3 * p[0]) + np.cos(2 * p[1])

        x1, v1 = grid_search_gee(f, box(2), grid)
        x2, v2 = grid_search_gee(
            lambda pts: np.sin(3 * pts[:, 0]) + np.cos(2 * pts[:, 1]),
            box(2), grid, vectorized=True)
        assert np.allclose(x1, x2)
        assert v1 == pytest.approx(v2)

    def test_no_feasible_point_raises(self):
        grid = GridSpec(points_per_dim=5, dims=1, bounds=((10.0, 20.0),))
        with pytest.raises(ContractViolation):
            grid_search_gee(lambda p: 0.0, box(1, cap=1.0), grid)


class TestRandomFeasible:
    def test_all_points_feasible(self):
        rng = np.random.default_rng(0)
        cs = ConstraintSet(dimension=3, caps=(
            LinearCap(weights=np.array([1.0, 2.0, 0.5]), cap=1.5),
            LinearCap(weights=np.ones(3), cap=2.0)))
        pts = random_feasible_points(cs, 2000, rng, scale=3.0)
        assert pts.shape == (2000, 3)
        assert np.all(pts >= 0.0)
        for cap in cs.caps:
            assert np.all(pts @ cap.weights <= cap.cap + 1e-9)

    def test_covers_the_box(self):
        rng = np.random.default_rng(1)
        pts = random_feasible_points(box(2, cap=10.0), 500, rng, scale=1.0)
        # the cap is slack, so samples should fill the unit box
        assert np.max(pts) > 0.9
        assert np.min(pts) < 0.1


class TestLemmas:
    def test_lemma1_holds_random(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            assert check_lemma1(rand_hpd(rng, 3), rand_hpd(rng, 3),
                                n_rot=30, rng=rng)

    def test_lemma1_bound_tight_on_opposite_order(self):
        t = np.diag([3.0, 1.0])
        r = np.diag([1.0, 2.0])  # already opposite-ordered against t
        lt = np.array([3.0, 1.0])
        lr = np.array([2.0, 1.0])
        assert np.trace(t @ r) == pytest.approx(lt @ lr[::-1])
        assert check_lemma1(t, r, n_rot=10)

    def test_lemma2_holds_random(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            assert check_lemma2(rand_hpd(rng, 3), rand_hpd(rng, 3, floor=0.0),
                                n_rot=30, rng=rng)

    def test_lemma2_rejects_indefinite_t(self):
        with pytest.raises(ContractViolation):
            check_lemma2(np.diag([1.0, -1.0]), np.eye(2))

    def test_lemma3_diagonal_optimal_objective(self):
        # sum of log(1 + diagonal) depends only on the diagonal, hence
        # trivially sign-flip invariant and maximized by diagonal X
        def g(x):
            return float(np.sum(np.log1p(np.diag(x).real)))

        assert check_lemma3(g, dim=3, n_trials=50)

    def test_lemma3_detects_off_diagonal_gain(self):
        # |x_{01}| rewards off-diagonal mass and is sign-flip invariant
        def g(x):
            return float(np.sum(np.log1p(np.diag(x).real))
                         + abs(x[0, 1]))

        assert not check_lemma3(g, dim=3, n_trials=50)

    def test_lemma3_rejects_asymmetric_objective(self):
        def g(x):
            return float(x[0, 1].real)

        with pytest.raises(ContractViolation):
            check_lemma3(g, dim=2, n_trials=5)

    def test_lemma4_5_holds(self):
        assert check_lemma4_5(n_trials=50, dim=3,
                              rng=np.random.default_rng(4))

    def test_lemma6_random(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m1 = rand_hpd(rng, 3)
            m2 = rand_hpd(rng, 3, floor=0.0)
            assert check_lemma6(m1, m2, float(rng.uniform(0.1, 2.0)))

    def test_lemma6_rejects_indefinite(self):
        with pytest.raises(ContractViolation):
            check_lemma6(-np.eye(2), np.zeros((2, 2)), 1.0)
