import numpy as np
import pytest
from scipy import optimize

from relayee.fractional import (ConstraintSet, FractionalProblem,
                                InfeasibleStart, LinearCap, QoSConstraint,
                                dinkelbach_maximize, eval_F, project_feasible,
                                solve_subproblem)
from relayee.matops import ContractViolation


def scalar_problem(cap=10.0, offset=5.0):
    """max log2(1+x) / (x + offset) over [0, cap]."""
    def num(x):
        return float(np.log2(1.0 + x[0])), np.array([1.0 / (1.0 + x[0]) / np.log(2.0)])

    cs = ConstraintSet(dimension=1, caps=(LinearCap(weights=np.ones(1), cap=cap),))
    return FractionalProblem(numerator=num, den_weights=np.ones(1),
                             den_offset=offset, constraints=cs)


class TestProjection:
    def test_interior_point_unchanged(self):
        cs = ConstraintSet(dimension=2,
                           caps=(LinearCap(weights=np.ones(2), cap=10.0),))
        x = np.array([1.0, 2.0])
        assert np.allclose(project_feasible(x, cs), x)

    def test_symmetric_halfspace(self):
        cs = ConstraintSet(dimension=2,
                           caps=(LinearCap(weights=np.ones(2), cap=2.0),))
        assert np.allclose(project_feasible(np.array([2.0, 2.0]), cs),
                           [1.0, 1.0])

    def test_negative_clipped(self):
        cs = ConstraintSet(dimension=2,
                           caps=(LinearCap(weights=np.ones(2), cap=2.0),))
        assert np.allclose(project_feasible(np.array([-1.0, 1.0]), cs),
                           [0.0, 1.0])

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_qp_oracle(self, seed):
        """Projection vs a generic QP solver on random 5-dim instances."""
        rng = np.random.default_rng(seed)
        w1 = rng.uniform(0.1, 2.0, 5)
        w2 = rng.uniform(0.1, 2.0, 5)
        cs = ConstraintSet(dimension=5,
                           caps=(LinearCap(weights=w1, cap=3.0),
                                 LinearCap(weights=w2, cap=4.0)))
        x = rng.uniform(-2.0, 4.0, 5)
        mine = project_feasible(x, cs)

        res = optimize.minimize(
            lambda y: 0.5 * np.sum((y - x) ** 2), np.zeros(5),
            jac=lambda y: y - x,
            bounds=[(0.0, None)] * 5,
            constraints=[{"type": "ineq", "fun": lambda y, w=w1: 3.0 - w @ y},
                         {"type": "ineq", "fun": lambda y, w=w2: 4.0 - w @ y}],
            method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        # SLSQP occasionally reports precision loss after converging;
        # the comparison below is the actual oracle check
        assert np.linalg.norm(mine - res.x) <= 1e-6
        assert cs.satisfies_caps(mine)

    @pytest.mark.parametrize("scale", [1e12, 1e16, 1e20])
    def test_huge_point_stays_feasible(self, scale):
        """x - theta*w cancels catastrophically at large magnitudes; the
        projection must still return a point inside the caps."""
        cs = ConstraintSet(dimension=3, caps=(
            LinearCap(weights=np.array([2.134, 1.088, 1.035]), cap=1.0),))
        x = scale * np.array([1.02, 0.197, 0.011])
        y = project_feasible(x, cs)
        assert cs.satisfies_caps(y)
        assert np.all(y >= 0)

    def test_rejects_three_caps(self):
        with pytest.raises(ContractViolation):
            ConstraintSet(dimension=2, caps=(
                LinearCap(weights=np.ones(2), cap=1.0),
                LinearCap(weights=np.ones(2), cap=1.0),
                LinearCap(weights=np.ones(2), cap=1.0)))


class TestSubproblem:
    def test_interior_quadratic(self):
        c = np.array([1.0, 2.0])
        cs = ConstraintSet(dimension=2,
                           caps=(LinearCap(weights=np.ones(2), cap=10.0),))

        def obj(x):
            return -float(np.sum((x - c) ** 2)), -2.0 * (x - c)

        x = solve_subproblem(obj, cs, np.zeros(2))
        assert np.linalg.norm(x - c) <= 1e-6

    def test_linear_objective_hits_vertex(self):
        cs = ConstraintSet(dimension=2,
                           caps=(LinearCap(weights=np.ones(2), cap=1.0),))
        g = np.array([2.0, 1.0])

        def obj(x):
            return float(g @ x), g

        x = solve_subproblem(obj, cs, np.zeros(2))
        assert np.allclose(x, [1.0, 0.0], atol=1e-6)

    def test_two_caps_active(self):
        cs = ConstraintSet(dimension=2,
                           caps=(LinearCap(weights=np.array([1.0, 0.1]), cap=1.0),
                                 LinearCap(weights=np.array([0.1, 1.0]), cap=1.0)))

        def obj(x):
            return float(np.sum(np.log1p(x))), 1.0 / (1.0 + x)

        x = solve_subproblem(obj, cs, np.zeros(2))
        assert cs.satisfies_caps(x)
        # symmetric instance: both caps bind at the symmetric vertex
        assert np.allclose(x, np.full(2, 1.0 / 1.1), atol=1e-5)


class TestDinkelbach:
    def test_scalar_matches_grid(self):
        prob = scalar_problem()
        res = dinkelbach_maximize(prob, np.zeros(1))
        grid = np.arange(0.0, 10.0 + 1e-12, 1e-4)
        ratios = np.log2(1.0 + grid) / (grid + 5.0)
        assert abs(res.mu - np.max(ratios)) <= 1e-3 * np.max(ratios)
        assert abs(res.x[0] - grid[np.argmax(ratios)]) <= 1e-2

    def test_linear_ratio(self):
        def num(x):
            return float(x[0]), np.ones(1)

        cs = ConstraintSet(dimension=1,
                           caps=(LinearCap(weights=np.ones(1), cap=1.0),))
        prob = FractionalProblem(numerator=num, den_weights=np.zeros(1),
                                 den_offset=1.0, constraints=cs)
        res = dinkelbach_maximize(prob, np.zeros(1))
        assert res.x[0] == pytest.approx(1.0, abs=1e-8)
        assert res.mu == pytest.approx(1.0, abs=1e-8)

    def test_constant_ratio_single_iteration(self):
        def num(x):
            return 3.0, np.zeros(1)

        cs = ConstraintSet(dimension=1,
                           caps=(LinearCap(weights=np.ones(1), cap=1.0),))
        prob = FractionalProblem(numerator=num, den_weights=np.zeros(1),
                                 den_offset=6.0, constraints=cs)
        res = dinkelbach_maximize(prob, np.zeros(1))
        assert res.mu == pytest.approx(0.5)
        assert res.iterations == 1

    def test_mu_strictly_increasing_and_f_small(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            gains = rng.uniform(0.2, 3.0, 3)

            def num(x, gains=gains):
                val = float(np.sum(np.log2(1.0 + gains * x)))
                grad = gains / (1.0 + gains * x) / np.log(2.0)
                return val, grad

            cs = ConstraintSet(dimension=3, caps=(
                LinearCap(weights=np.ones(3), cap=float(rng.uniform(1.0, 10.0))),))
            prob = FractionalProblem(numerator=num,
                                     den_weights=rng.uniform(0.5, 2.0, 3),
                                     den_offset=float(rng.uniform(1.0, 8.0)),
                                     constraints=cs)
            res = dinkelbach_maximize(prob, np.zeros(3), tol=1e-6)
            assert res.converged
            assert np.all(np.diff(res.mu_trace) > 0)
            assert abs(res.f_trace[-1]) <= 1e-6

    def test_f_monotone_decreasing_in_mu(self):
        prob = scalar_problem()
        f1, _ = eval_F(prob, 0.01)
        f2, _ = eval_F(prob, 0.2)
        assert f1 > f2

    def test_mu_zero_maximizes_numerator(self):
        prob = scalar_problem(cap=4.0)
        _, x = eval_F(prob, 0.0)
        assert x[0] == pytest.approx(4.0, abs=1e-6)

    def test_large_mu_drives_to_origin(self):
        prob = scalar_problem()
        _, x = eval_F(prob, 1e6)
        assert np.allclose(x, 0.0, atol=1e-8)

    def test_infeasible_start_rejected(self):
        prob = scalar_problem(cap=1.0)
        with pytest.raises(InfeasibleStart):
            dinkelbach_maximize(prob, np.array([5.0]))

    def test_nonpositive_tol_rejected(self):
        with pytest.raises(ContractViolation):
            dinkelbach_maximize(scalar_problem(), np.zeros(1), tol=0.0)


class TestQoS:
    def test_binding_rate_floor(self):
        """A rate floor above the unconstrained optimum forces more power."""
        def num(x):
            return float(np.log2(1.0 + x[0])), np.array(
                [1.0 / (1.0 + x[0]) / np.log(2.0)])

        free = dinkelbach_maximize(
            FractionalProblem(numerator=num, den_weights=np.ones(1),
                              den_offset=5.0,
                              constraints=ConstraintSet(
                                  dimension=1,
                                  caps=(LinearCap(weights=np.ones(1), cap=20.0),))),
            np.zeros(1))
        floor = num(free.x)[0] + 0.5
        qos = QoSConstraint(rate=num, threshold=floor)
        res = dinkelbach_maximize(
            FractionalProblem(numerator=num, den_weights=np.ones(1),
                              den_offset=5.0,
                              constraints=ConstraintSet(
                                  dimension=1,
                                  caps=(LinearCap(weights=np.ones(1), cap=20.0),),
                                  qos=qos)),
            np.zeros(1))
        assert num(res.x)[0] >= floor - 1e-5
        # the floor binds: rate sits at the threshold, not above
        assert num(res.x)[0] <= floor + 1e-3
        assert res.mu < free.mu

    def test_slack_rate_floor_is_inactive(self):
        def num(x):
            return float(np.log2(1.0 + x[0])), np.array(
                [1.0 / (1.0 + x[0]) / np.log(2.0)])

        cs_free = ConstraintSet(dimension=1,
                                caps=(LinearCap(weights=np.ones(1), cap=20.0),))
        free = dinkelbach_maximize(
            FractionalProblem(numerator=num, den_weights=np.ones(1),
                              den_offset=5.0, constraints=cs_free), np.zeros(1))
        qos = QoSConstraint(rate=num, threshold=num(free.x)[0] * 0.5)
        cs = ConstraintSet(dimension=1,
                           caps=(LinearCap(weights=np.ones(1), cap=20.0),),
                           qos=qos)
        res = dinkelbach_maximize(
            FractionalProblem(numerator=num, den_weights=np.ones(1),
                              den_offset=5.0, constraints=cs), np.zeros(1))
        assert res.mu == pytest.approx(free.mu, rel=1e-5)
