"""Energy-efficiency solver under perfect CSI.

The optimal transmit bases diagonalize both channels, reducing the
matrix problem to a scalar power allocation over parallel streams that is
solved by alternating block Dinkelbach iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fractional import (ConstraintSet, FractionalProblem, InfeasibleStart,
                         LinearCap, QoSConstraint, SubproblemFailure,
                         dinkelbach_maximize)
from .matops import ContractViolation, svd_descending
from .system_model import LOG2, ChannelRealization, LinkBudget, PrecoderSolution

MAX_OUTER_ITERS = 100


@dataclass(frozen=True)
class ScalarizedInstance:
    lam_h: np.ndarray      # squared singular values of H, descending
    lam_g: np.ndarray      # squared singular values of G, descending
    budget: LinkBudget

    @property
    def r_eff(self) -> int:
        return min(len(self.lam_h), len(self.lam_g))


@dataclass
class AlternatingTrace:
    gee_per_iteration: list
    converged: bool
    iterations: int


def optimal_eigenstructure(chan: ChannelRealization):
    """SVD bases that jointly diagonalize the two hops of the GEE problem.

    Streams beyond min(N_S, N_R, N_D) carry no rate and are trimmed.
    """
    dec_h = svd_descending(chan.h)
    dec_g = svd_descending(chan.g)
    r = chan.dims.n_streams
    lam_h = dec_h.values[:r] ** 2
    lam_g = dec_g.values[:r] ** 2
    u_q = dec_h.right          # V_H
    u_a = dec_g.right          # V_G
    v_a = dec_h.left           # U_H
    return u_q, u_a, v_a, lam_h, lam_g


def scalar_instance(chan: ChannelRealization, budget: LinkBudget) -> ScalarizedInstance:
    _, _, _, lam_h, lam_g = optimal_eigenstructure(chan)
    return ScalarizedInstance(lam_h=lam_h, lam_g=lam_g, budget=budget)


def stream_gains(inst: ScalarizedInstance, lam_a: np.ndarray):
    """Per-stream SNR gains: rate = sum log2(1 + gain_i * lam_q_i)."""
    b = inst.budget
    denom = b.sigma2_dest + b.sigma2_relay * lam_a * inst.lam_g
    return lam_a * inst.lam_h * inst.lam_g / denom


def scalar_rate(inst: ScalarizedInstance, lam_q: np.ndarray, lam_a: np.ndarray) -> float:
    return float(np.sum(np.log2(1.0 + stream_gains(inst, lam_a) * lam_q)))


def scalar_denominator(inst: ScalarizedInstance, lam_q, lam_a) -> float:
    return float(np.sum(lam_q) + np.sum(lam_a * (inst.lam_h * lam_q + inst.budget.sigma2_relay))
                 + inst.budget.p_circuit)


def scalar_gee(inst: ScalarizedInstance, lam_q, lam_a) -> float:
    return scalar_rate(inst, lam_q, lam_a) / scalar_denominator(inst, lam_q, lam_a)


def _q_block_problem(inst: ScalarizedInstance, lam_a: np.ndarray) -> FractionalProblem:
    b = inst.budget
    gains = stream_gains(inst, lam_a)

    def num(lam_q):
        val = float(np.sum(np.log2(1.0 + gains * lam_q)))
        grad = gains / (1.0 + gains * lam_q) / LOG2
        return val, grad

    caps = [LinearCap(weights=np.ones(inst.r_eff), cap=b.p_source_max)]
    relay_room = b.p_relay_max - b.sigma2_relay * float(np.sum(lam_a))
    w_relay = lam_a * inst.lam_h
    if np.any(w_relay > 0):
        if relay_room <= 0:
            # lam_a already saturates the relay cap; only lam_q = 0 feasible
            relay_room = 1e-30
        caps.append(LinearCap(weights=w_relay, cap=relay_room))
    qos = None
    if b.rate_min > 0:
        qos = QoSConstraint(rate=num, threshold=b.rate_min)
    return FractionalProblem(
        numerator=num,
        den_weights=1.0 + lam_a * inst.lam_h,
        den_offset=b.sigma2_relay * float(np.sum(lam_a)) + b.p_circuit,
        constraints=ConstraintSet(dimension=inst.r_eff, caps=tuple(caps), qos=qos))


def _a_block_problem(inst: ScalarizedInstance, lam_q: np.ndarray) -> FractionalProblem:
    b = inst.budget
    u = lam_q * inst.lam_h * inst.lam_g         # signal coefficient
    w = b.sigma2_relay * inst.lam_g             # noise-amplification coefficient
    v = b.sigma2_dest

    def num(lam_a):
        val = float(np.sum(np.log2((v + (w + u) * lam_a) / (v + w * lam_a))))
        grad = ((w + u) / (v + (w + u) * lam_a) - w / (v + w * lam_a)) / LOG2
        return val, grad

    w_relay = inst.lam_h * lam_q + b.sigma2_relay
    caps = (LinearCap(weights=w_relay, cap=b.p_relay_max),)
    qos = None
    if b.rate_min > 0:
        qos = QoSConstraint(rate=num, threshold=b.rate_min)
    return FractionalProblem(
        numerator=num,
        den_weights=w_relay,
        den_offset=float(np.sum(lam_q)) + b.p_circuit,
        constraints=ConstraintSet(dimension=inst.r_eff, caps=caps, qos=qos))


def solve_lambda_a(inst: ScalarizedInstance, lam_q: np.ndarray,
                   lam_a0: np.ndarray | None = None, tol: float = 1e-6) -> np.ndarray:
    if not np.any(lam_q * inst.lam_h * inst.lam_g > 0):
        return np.zeros(inst.r_eff)
    prob = _a_block_problem(inst, lam_q)
    if lam_a0 is None:
        lam_a0 = np.zeros(inst.r_eff)
    return dinkelbach_maximize(prob, lam_a0, tol=tol).x


def solve_lambda_q(inst: ScalarizedInstance, lam_a: np.ndarray,
                   lam_q0: np.ndarray | None = None, tol: float = 1e-6) -> np.ndarray:
    if not np.any(lam_a * inst.lam_h * inst.lam_g > 0):
        return np.zeros(inst.r_eff)
    prob = _q_block_problem(inst, lam_a)
    if lam_q0 is None:
        lam_q0 = np.zeros(inst.r_eff)
    return dinkelbach_maximize(prob, lam_q0, tol=tol).x


def _alternate_inner(inst: ScalarizedInstance, lam_q: np.ndarray,
                     eps: float, max_outer: int):
    lam_a = np.zeros(inst.r_eff)
    gee_prev = scalar_gee(inst, lam_q, lam_a)
    trace = [gee_prev]
    converged = False
    iters = 0
    for iters in range(1, max_outer + 1):
        cand_a = solve_lambda_a(inst, lam_q, lam_a0=lam_a)
        if scalar_gee(inst, lam_q, cand_a) >= scalar_gee(inst, lam_q, lam_a):
            lam_a = cand_a
        cand_q = solve_lambda_q(inst, lam_a, lam_q0=lam_q)
        if scalar_gee(inst, cand_q, lam_a) >= scalar_gee(inst, lam_q, lam_a):
            lam_q = cand_q
        gee_now = scalar_gee(inst, lam_q, lam_a)
        trace.append(gee_now)
        if abs(gee_now - gee_prev) <= eps:
            converged = True
            break
        gee_prev = gee_now
    return lam_q, lam_a, trace, converged, iters


def alternating_maximize(inst: ScalarizedInstance, lam_q0: np.ndarray,
                         eps: float = 1e-3, max_outer: int = MAX_OUTER_ITERS):
    """Alternate block Dinkelbach solves in lam_a and lam_q until the
    efficiency changes by at most eps.

    The alternation has coordinate-wise fixed points that differ in which
    streams carry power: a stream with both powers at zero is absorbing
    (neither block can revive it on its own), and conversely neither block
    will shut a stream down when the other block still feeds it. After
    each convergence every dead stream is probed with a fresh power
    injection and every live stream with a shutdown; a probe is kept only
    when the re-converged efficiency strictly improves, so different
    starts do not get trapped in distinct stream subsets. Each accepted
    probe counts as one reported iteration and appends one trace point.
    """
    if eps <= 0:
        raise ContractViolation("eps must be > 0")
    lam_q = np.asarray(lam_q0, dtype=float)
    if np.any(lam_q < 0) or np.sum(lam_q) > inst.budget.p_source_max * (1 + 1e-9):
        raise InfeasibleStart("lam_q0 violates the source power constraint")
    lam_q, lam_a, trace, converged, iters = _alternate_inner(
        inst, lam_q, eps, max_outer)
    for _ in range(4 * inst.r_eff if converged else 0):
        base = scalar_gee(inst, lam_q, lam_a)
        dead = (lam_q <= 1e-12) & (lam_a <= 1e-12)
        live = np.flatnonzero(~dead)
        trials = []
        for i in np.flatnonzero(dead):
            active = lam_q[lam_q > 1e-12]
            share = (float(np.mean(active)) if active.size
                     else inst.budget.p_source_max / inst.r_eff)
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
                tq, ta, _, tconv, _ = _alternate_inner(inst, trial, eps,
                                                       max_outer)
            except SubproblemFailure:
                continue  # e.g. the rate floor is unattainable on the subset
            if tconv and scalar_gee(inst, tq, ta) > base + 1e-9:
                improved = (tq, ta)
                break
        if improved is None:
            break
        lam_q, lam_a = improved
        trace.append(scalar_gee(inst, lam_q, lam_a))
        iters += 1
    return (lam_q, lam_a), AlternatingTrace(gee_per_iteration=trace,
                                            converged=converged, iterations=iters)


def random_feasible_lam_q(inst: ScalarizedInstance, rng: np.random.Generator) -> np.ndarray:
    """Uniform simplex direction scaled by a uniform fraction of the budget."""
    w = rng.exponential(size=inst.r_eff)
    w /= np.sum(w)
    return w * rng.uniform(0.0, 1.0) * inst.budget.p_source_max


def multistart(inst: ScalarizedInstance, n_starts: int, rng: np.random.Generator,
               eps: float = 1e-3):
    """Best fixed point over random initializations."""
    best = None
    best_gee = -np.inf
    for _ in range(max(n_starts, 1)):
        lam_q0 = random_feasible_lam_q(inst, rng)
        (lam_q, lam_a), trace = alternating_maximize(inst, lam_q0, eps=eps)
        g = scalar_gee(inst, lam_q, lam_a)
        if g > best_gee:
            best_gee = g
            best = ((lam_q, lam_a), trace)
    return best


def build_solution(chan: ChannelRealization, lam_q: np.ndarray,
                   lam_a: np.ndarray) -> PrecoderSolution:
    u_q, u_a, v_a, _, _ = optimal_eigenstructure(chan)
    return PrecoderSolution(q_basis=u_q, q_powers=lam_q, a_left=u_a,
                            a_gains=lam_a, a_right=v_a)
