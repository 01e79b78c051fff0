"""Energy-efficiency solver with statistical CSI on the second hop.

The first-hop channel is known exactly; the relay-destination channel is
known only through its Kronecker correlation matrices. The rate numerator
is a sample-average of a log-det difference over a fixed bank of white
draws; the consumed power does not depend on the unknown channel at all,
so the denominator is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fractional import (ConstraintSet, FractionalProblem, InfeasibleStart,
                         LinearCap, QoSConstraint, SubproblemFailure,
                         dinkelbach_maximize)
from .matops import (batched_inv_small, batched_logdet_hpd,
                     evd_descending, svd_descending)
from .system_model import (LOG2, KroneckerModel, LinkBudget, PrecoderSolution,
                           sample_complex_gaussian)

DEFAULT_MC_SAMPLES = 500
MAX_OUTER_ITERS = 100


@dataclass(frozen=True)
class StatGInstance:
    lam_h: np.ndarray      # squared singular values of the known H, descending
    lam_t_g: np.ndarray    # transmit-correlation eigenvalues of G, descending
    lam_r_g: np.ndarray    # receive-correlation eigenvalues of G, descending
    u_t_g: np.ndarray
    budget: LinkBudget
    samples: np.ndarray    # fixed bank of white draws, (M, N_D, N_R)
    kernels: np.ndarray    # per-draw Z^H diag(lam_r_g) Z / sigma_D^2, active block

    @property
    def n_active(self) -> int:
        return self.kernels.shape[-1]


def optimal_structure_g(chan_h: np.ndarray, model_g: KroneckerModel,
                        budget: LinkBudget, n_samples: int = DEFAULT_MC_SAMPLES,
                        rng: np.random.Generator | None = None) -> tuple:
    """Bases (U_Q, U_A, V_A) and the reduced instance.

    The source aligns with the right singular vectors of the known first
    hop; the AF matrix maps that hop's receive space onto the transmit
    correlation eigenbasis of the statistical second hop.
    """
    dec_h = svd_descending(chan_h)
    dec_t = evd_descending(model_g.r_transmit)
    dec_r = evd_descending(model_g.r_receive)
    n_relay = model_g.r_transmit.shape[0]
    n_dest = model_g.r_receive.shape[0]
    n_active = min(len(dec_h.values), n_relay)
    lam_h = dec_h.values[:n_active] ** 2
    if rng is None:
        rng = np.random.default_rng(0)
    bank = np.stack([sample_complex_gaussian(rng, n_dest, n_relay)
                     for _ in range(n_samples)])
    za = bank[:, :, :n_active]
    kernels = np.einsum("mdi,d,mdj->mij", za.conj(), dec_r.values, za)
    kernels /= budget.sigma2_dest
    inst = StatGInstance(lam_h=lam_h, lam_t_g=dec_t.values[:n_active],
                         lam_r_g=dec_r.values, u_t_g=dec_t.basis,
                         budget=budget, samples=bank, kernels=kernels)
    u_q = dec_h.right
    u_a = dec_t.basis
    v_a = dec_h.left
    return u_q, u_a, v_a, inst


def _signal_noise_loads(inst: StatGInstance, lam_q: np.ndarray,
                        lam_a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-stream loads entering the two determinants.

    The first carries signal plus forwarded noise, the second the
    forwarded noise alone; their per-draw log-det difference is the rate.
    """
    b = inst.budget
    noise = b.sigma2_relay * inst.lam_t_g * lam_a
    signal = inst.lam_t_g * lam_a * inst.lam_h * lam_q
    return signal + noise, noise


def _batch_logdet(kernels: np.ndarray, d: np.ndarray) -> np.ndarray:
    n = kernels.shape[-1]
    return batched_logdet_hpd(np.eye(n) + kernels * d[None, None, :])


def _batch_diag_inv_k(kernels: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Re diag((I + W diag(d))^{-1} W) per draw, shape (M, n)."""
    n = kernels.shape[-1]
    minv = batched_inv_small(np.eye(n) + kernels * d[None, None, :])
    return np.sum(minv * kernels.swapaxes(1, 2), axis=2).real


def saa_numerator_g(inst: StatGInstance, lam_q: np.ndarray, lam_a: np.ndarray,
                    with_grads: bool = False):
    """Sample-average rate (log base 2) of the end-to-end link.

    Each draw contributes a difference of log-dets; both share the same
    quadratic kernel, so only the diagonal loads differ. Gradients come
    from the log-det derivative identity with batched inverses.
    """
    full, noise = _signal_noise_loads(inst, lam_q, lam_a)
    ld = _batch_logdet(inst.kernels, full) - _batch_logdet(inst.kernels, noise)
    val = float(np.mean(ld)) / LOG2
    if not with_grads:
        return val
    diag_full = np.mean(_batch_diag_inv_k(inst.kernels, full), axis=0)
    diag_noise = np.mean(_batch_diag_inv_k(inst.kernels, noise), axis=0)
    b = inst.budget
    grad_q = diag_full * inst.lam_t_g * lam_a * inst.lam_h / LOG2
    grad_a = (diag_full * inst.lam_t_g * (inst.lam_h * lam_q + b.sigma2_relay)
              - diag_noise * inst.lam_t_g * b.sigma2_relay) / LOG2
    return val, grad_q, grad_a


def per_sample_rates_g(inst: StatGInstance, lam_q: np.ndarray,
                       lam_a: np.ndarray) -> np.ndarray:
    """Individual draws' log2-det differences (each is non-negative)."""
    full, noise = _signal_noise_loads(inst, lam_q, lam_a)
    return (_batch_logdet(inst.kernels, full)
            - _batch_logdet(inst.kernels, noise)) / LOG2


def denominator_g(inst: StatGInstance, lam_q: np.ndarray, lam_a: np.ndarray) -> float:
    """Consumed power; exact since the relay output precedes the second hop."""
    b = inst.budget
    return float(np.sum(lam_a * (inst.lam_h * lam_q + b.sigma2_relay))
                 + np.sum(lam_q) + b.p_circuit)


def relay_power_g(inst: StatGInstance, lam_q: np.ndarray, lam_a: np.ndarray) -> float:
    b = inst.budget
    return float(np.sum(lam_a * (inst.lam_h * lam_q + b.sigma2_relay)))


def saa_gee_g(inst: StatGInstance, lam_q: np.ndarray, lam_a: np.ndarray) -> float:
    return saa_numerator_g(inst, lam_q, lam_a) / denominator_g(inst, lam_q, lam_a)


def _a_block_problem(inst: StatGInstance, lam_q: np.ndarray) -> FractionalProblem:
    b = inst.budget

    def num(lam_a):
        val, _, grad_a = saa_numerator_g(inst, lam_q, lam_a, with_grads=True)
        return val, grad_a

    def num_val(lam_a):
        return saa_numerator_g(inst, lam_q, lam_a)

    w_relay = inst.lam_h * lam_q + b.sigma2_relay
    caps = (LinearCap(weights=w_relay, cap=b.p_relay_max),)
    qos = QoSConstraint(rate=num, threshold=b.rate_min) if b.rate_min > 0 else None
    return FractionalProblem(
        numerator=num, den_weights=w_relay,
        den_offset=float(np.sum(lam_q)) + b.p_circuit,
        constraints=ConstraintSet(dimension=inst.n_active, caps=caps, qos=qos),
        numerator_value=num_val)


def _q_block_problem(inst: StatGInstance, lam_a: np.ndarray) -> FractionalProblem:
    b = inst.budget

    def num(lam_q):
        val, grad_q, _ = saa_numerator_g(inst, lam_q, lam_a, with_grads=True)
        return val, grad_q

    def num_val(lam_q):
        return saa_numerator_g(inst, lam_q, lam_a)

    caps = [LinearCap(weights=np.ones(inst.n_active), cap=b.p_source_max)]
    w_relay = lam_a * inst.lam_h
    if np.any(w_relay > 0):
        room = b.p_relay_max - b.sigma2_relay * float(np.sum(lam_a))
        caps.append(LinearCap(weights=w_relay, cap=max(room, 1e-30)))
    qos = QoSConstraint(rate=num, threshold=b.rate_min) if b.rate_min > 0 else None
    return FractionalProblem(
        numerator=num, den_weights=1.0 + lam_a * inst.lam_h,
        den_offset=b.sigma2_relay * float(np.sum(lam_a)) + b.p_circuit,
        constraints=ConstraintSet(dimension=inst.n_active, caps=tuple(caps), qos=qos),
        numerator_value=num_val)


def _alternate_inner_g(inst: StatGInstance, lam_q: np.ndarray, eps: float,
                       max_outer: int, dinkelbach_tol: float):
    lam_a = np.zeros(inst.n_active)
    gee_prev = saa_gee_g(inst, lam_q, lam_a)
    trace = [gee_prev]
    converged = False
    iters = 0
    for iters in range(1, max_outer + 1):
        if np.any(lam_q * inst.lam_h * inst.lam_t_g > 0):
            prob_a = _a_block_problem(inst, lam_q)
            cand = dinkelbach_maximize(prob_a, lam_a, tol=dinkelbach_tol).x
            if saa_gee_g(inst, lam_q, cand) >= saa_gee_g(inst, lam_q, lam_a):
                lam_a = cand
        if np.any(lam_a * inst.lam_t_g > 0):
            prob_q = _q_block_problem(inst, lam_a)
            cand = dinkelbach_maximize(prob_q, lam_q, tol=dinkelbach_tol).x
            if saa_gee_g(inst, cand, lam_a) >= saa_gee_g(inst, lam_q, lam_a):
                lam_q = cand
        gee_now = saa_gee_g(inst, lam_q, lam_a)
        trace.append(gee_now)
        if abs(gee_now - gee_prev) <= eps:
            converged = True
            break
        gee_prev = gee_now
    return lam_q, lam_a, trace, converged, iters


def alternating_maximize_g(inst: StatGInstance, lam_q0: np.ndarray,
                           eps: float = 1e-3, max_outer: int = MAX_OUTER_ITERS,
                           dinkelbach_tol: float = 1e-6):
    """Alternate block Dinkelbach solves in lam_a and lam_q.

    As in the perfect-CSI solver, the alternation has coordinate-wise
    fixed points differing in which streams carry power, so after each
    convergence every dead stream is probed with a fresh power injection
    and every live stream with a shutdown. A probe is kept only when the
    re-converged efficiency strictly improves; each accepted probe counts
    as one reported iteration and appends one trace point.
    """
    from .perfect_csi import AlternatingTrace  # shared trace record

    lam_q = np.asarray(lam_q0, dtype=float)
    if np.any(lam_q < 0) or np.sum(lam_q) > inst.budget.p_source_max * (1 + 1e-9):
        raise InfeasibleStart("lam_q0 violates the source power constraint")
    lam_q, lam_a, trace, converged, iters = _alternate_inner_g(
        inst, lam_q, eps, max_outer, dinkelbach_tol)
    for _ in range(4 * inst.n_active if converged else 0):
        base = saa_gee_g(inst, lam_q, lam_a)
        dead = (lam_q <= 1e-12) & (lam_a <= 1e-12)
        live = np.flatnonzero(~dead)
        trials = []
        for i in np.flatnonzero(dead):
            active = lam_q[lam_q > 1e-12]
            share = (float(np.mean(active)) if active.size
                     else inst.budget.p_source_max / inst.n_active)
            trial = lam_q.copy()
            trial[i] = share
            load = float(np.sum(trial))
            if load > inst.budget.p_source_max:
                trial *= inst.budget.p_source_max / load
            trials.append(trial)
        if len(live) > 1:
            for i in live:
                trial = lam_q.copy()
                trial[i] = 0.0
                trials.append(trial)
        improved = None
        for trial in trials:
            try:
                tq, ta, _, tconv, _ = _alternate_inner_g(
                    inst, trial, eps, max_outer, dinkelbach_tol)
            except SubproblemFailure:
                continue  # e.g. the rate floor is unattainable on the subset
            if tconv and saa_gee_g(inst, tq, ta) > base + 1e-9:
                improved = (tq, ta)
                break
        if improved is None:
            break
        lam_q, lam_a = improved
        trace.append(saa_gee_g(inst, lam_q, lam_a))
        iters += 1
    return lam_q, lam_a, AlternatingTrace(gee_per_iteration=trace,
                                          converged=converged, iterations=iters)


def build_solution_g(chan_h: np.ndarray, model_g: KroneckerModel,
                     inst: StatGInstance, lam_q: np.ndarray,
                     lam_a: np.ndarray) -> PrecoderSolution:
    u_q, u_a, v_a, _ = optimal_structure_g(chan_h, model_g, inst.budget, n_samples=1)
    return PrecoderSolution(q_basis=u_q, q_powers=lam_q, a_left=u_a,
                            a_gains=lam_a, a_right=v_a)
