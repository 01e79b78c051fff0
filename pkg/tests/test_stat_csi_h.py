import numpy as np
import pytest

from relayee.fractional import InfeasibleStart
from relayee.matops import ContractViolation, exp_correlation
from relayee.stat_csi_h import (StatHInstance, alternating_maximize_h,
                                build_solution_h, denominator_h,
                                expected_relay_power_h, jensen_numerator,
                                optimal_structure_h, recover_lambda_a_h,
                                saa_gee_h, saa_numerator)
from relayee.system_model import (ChannelRealization, KroneckerModel,
                                  LinkBudget, assemble_q, relay_tx_power,
                                  sample_complex_gaussian, sample_kronecker)


def budget(**kw):
    base = dict(p_source_max=10.0, p_relay_max=10.0, p_circuit=5.0)
    base.update(kw)
    return LinkBudget(**base)


def make_instance(seed=0, n=3, rho=0.5, n_samples=50, **bkw):
    rng = np.random.default_rng(seed)
    model = KroneckerModel(r_receive=exp_correlation(rho, n),
                           r_transmit=exp_correlation(rho, n))
    chan_g = sample_complex_gaussian(rng, n, n)
    return model, chan_g, optimal_structure_h(
        model, chan_g, budget(**bkw), n_samples=n_samples, rng=rng)


class TestStructure:
    def test_q_commutes_with_transmit_correlation(self):
        model, _, (u_q, _, _, inst) = make_instance(seed=1)
        lam_q = np.array([2.0, 1.0, 0.5])
        q = (u_q * lam_q) @ u_q.conj().T
        r = model.r_transmit
        assert np.linalg.norm(q @ r - r @ q) <= 1e-9

    def test_correlation_eigenvalues_descending(self):
        _, _, (_, _, _, inst) = make_instance(seed=2)
        assert np.all(np.diff(inst.lam_t_h) <= 1e-12)
        assert np.all(np.diff(inst.lam_r_h) <= 1e-12)

    def test_g_tilde_is_reciprocal(self):
        _, _, (_, _, _, inst) = make_instance(seed=3)
        assert np.allclose(inst.lam_g_tilde * inst.lam_g, 1.0)


class TestNumerator:
    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(1000 + seed)
        _, _, (_, _, _, inst) = make_instance(seed=seed, n_samples=30)
        lam_q = rng.uniform(0.2, 2.0, 3)
        ty = rng.uniform(0.2, 2.0, 3)
        val, grad_q, grad_ty = saa_numerator(inst, lam_q, ty, with_grads=True)
        h = 1e-6
        for i in range(3):
            for vec, grad in ((lam_q, grad_q), (ty, grad_ty)):
                up, dn = vec.copy(), vec.copy()
                up[i] += h
                dn[i] -= h
                if vec is lam_q:
                    fd = (saa_numerator(inst, up, ty)
                          - saa_numerator(inst, dn, ty)) / (2 * h)
                else:
                    fd = (saa_numerator(inst, lam_q, up)
                          - saa_numerator(inst, lam_q, dn)) / (2 * h)
                assert abs(fd - grad[i]) <= 1e-5 * max(abs(fd), 1e-8)

    def test_zero_power_zero_rate(self):
        _, _, (_, _, _, inst) = make_instance(seed=4)
        assert saa_numerator(inst, np.zeros(3), np.ones(3)) == pytest.approx(0.0)
        assert saa_numerator(inst, np.ones(3), np.zeros(3)) == pytest.approx(0.0)

    def test_jensen_upper_bounds_sample_average(self):
        rng = np.random.default_rng(5)
        _, _, (_, _, _, inst) = make_instance(seed=5, n_samples=400)
        for _ in range(10):
            lam_q = rng.uniform(0.1, 3.0, 3)
            ty = rng.uniform(0.1, 3.0, 3)
            saa = saa_numerator(inst, lam_q, ty)
            jen = jensen_numerator(inst, lam_q, ty)
            # the surrogate moves the expectation inside the concave
            # log-det; sampling noise allows a small negative margin
            assert jen >= saa - 0.05 * max(saa, 1.0)

    def test_deterministic_given_bank(self):
        _, _, (_, _, _, inst) = make_instance(seed=6)
        lam_q = np.array([1.0, 0.5, 0.2])
        ty = np.array([0.3, 0.2, 0.1])
        assert saa_numerator(inst, lam_q, ty) == saa_numerator(inst, lam_q, ty)


class TestDenominator:
    def test_accounting_identity(self):
        rng = np.random.default_rng(7)
        _, _, (_, _, _, inst) = make_instance(seed=7)
        lam_q = rng.uniform(0.1, 2.0, 3)
        ty = rng.uniform(0.1, 2.0, 3)
        assert denominator_h(inst, lam_q, ty) == pytest.approx(
            expected_relay_power_h(inst, lam_q, ty) + np.sum(lam_q)
            + inst.budget.p_circuit)

    @pytest.mark.parametrize("seed", range(3))
    def test_expected_relay_power_matches_monte_carlo(self, seed):
        rng = np.random.default_rng(2000 + seed)
        model, chan_g, (u_q, u_a, v_a, inst) = make_instance(
            seed=seed, n_samples=2)
        lam_q = rng.uniform(0.2, 2.0, 3)
        ty = rng.uniform(0.2, 2.0, 3)
        closed = expected_relay_power_h(inst, lam_q, ty)
        sol = build_solution_h(model, chan_g, inst, lam_q, ty)
        draws = np.array([
            relay_tx_power(
                ChannelRealization(h=sample_kronecker(model, rng), g=chan_g),
                sol, inst.budget)
            for _ in range(4000)])
        se = np.std(draws, ddof=1) / np.sqrt(len(draws))
        assert abs(np.mean(draws) - closed) <= 3.0 * se


class TestRecovery:
    def test_round_trip_spectrum(self):
        rng = np.random.default_rng(8)
        _, _, (_, _, _, inst) = make_instance(seed=8)
        ty = rng.uniform(0.1, 2.0, 3)
        lam_a = recover_lambda_a_h(inst, ty)
        k = len(inst.lam_g)
        back = lam_a * np.append(inst.lam_g, np.zeros(3 - k))[:3] * inst.lam_r_h
        assert np.allclose(back, ty, atol=1e-10)

    def test_zero_ty_gives_zero_gain(self):
        _, _, (_, _, _, inst) = make_instance(seed=9)
        assert np.allclose(recover_lambda_a_h(inst, np.zeros(3)), 0.0)


class TestAlternating:
    @pytest.mark.parametrize("seed", range(5))
    def test_trace_monotone_and_converges(self, seed):
        rng = np.random.default_rng(3000 + seed)
        _, _, (_, _, _, inst) = make_instance(seed=seed, n_samples=40)
        lam_q0 = rng.uniform(0.0, 1.0, 3)
        lam_q0 *= rng.uniform(0.0, 1.0) * inst.budget.p_source_max / np.sum(lam_q0)
        _, _, trace = alternating_maximize_h(inst, lam_q0, eps=1e-4)
        assert trace.converged
        assert trace.iterations <= 30
        assert np.all(np.diff(trace.gee_per_iteration) >= -1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_dominates_random_points(self, seed):
        rng = np.random.default_rng(4000 + seed)
        _, _, (_, _, _, inst) = make_instance(seed=seed, n_samples=40)
        lam_q, ty, _ = alternating_maximize_h(
            inst, np.full(3, inst.budget.p_source_max / 6), eps=1e-5)
        mine = saa_gee_h(inst, lam_q, ty)
        b = inst.budget
        for _ in range(300):
            q = rng.uniform(0.0, 1.0, 3)
            q *= rng.uniform(0.0, 1.0) * b.p_source_max / np.sum(q)
            t_q = float(np.sum(q * inst.lam_t_h))
            w = t_q * inst.lam_g_tilde + b.sigma2_relay * inst.lam_g_tilde / inst.lam_r_h
            y = rng.uniform(0.0, 1.0, 3)
            y *= rng.uniform(0.0, 1.0) * b.p_relay_max / (w @ y)
            assert saa_gee_h(inst, q, y) <= mine + 1e-6

    def test_multistart_consistency(self):
        _, _, (_, _, _, inst) = make_instance(seed=11, n_samples=40)
        vals = []
        for s in range(5):
            rng = np.random.default_rng(500 + s)
            lam_q0 = rng.uniform(0.0, 1.0, 3)
            lam_q0 *= rng.uniform(0.0, 1.0) * inst.budget.p_source_max / np.sum(lam_q0)
            lam_q, ty, _ = alternating_maximize_h(inst, lam_q0, eps=1e-4)
            vals.append(saa_gee_h(inst, lam_q, ty))
        assert max(vals) - min(vals) <= 1e-3

    def test_jensen_variant_runs(self):
        _, _, (_, _, _, inst) = make_instance(seed=12, n_samples=40)
        lam_q, ty, trace = alternating_maximize_h(
            inst, np.full(3, 0.5), eps=1e-4, use_jensen=True)
        assert trace.converged
        # evaluate the surrogate solution under the sample-average metric
        assert saa_gee_h(inst, lam_q, ty) > 0.0

    def test_infeasible_start_rejected(self):
        _, _, (_, _, _, inst) = make_instance(seed=13, p_source_max=1.0)
        with pytest.raises(InfeasibleStart):
            alternating_maximize_h(inst, np.full(3, 5.0))
