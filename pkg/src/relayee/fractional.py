"""Dinkelbach engine for concave-over-affine ratio maximization.

The feasible sets handled here are the non-negative orthant intersected
with at most two non-negative linear caps, optionally with one concave
rate constraint (handled by a two-phase dual scheme, since projecting onto
a log-constraint set is awkward).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .matops import ContractViolation

# Evaluators return (value, gradient)
ValueGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]

PROJ_TOL = 1e-10
GRAD_TOL = 1e-7
MAX_PG_ITERS = 5000
ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4


class InfeasibleStart(ValueError):
    """Starting point violates the constraint set."""


class SubproblemFailure(RuntimeError):
    """Inner concave subproblem could not be solved."""


@dataclass(frozen=True)
class LinearCap:
    weights: np.ndarray    # >= 0
    cap: float             # > 0


@dataclass(frozen=True)
class QoSConstraint:
    rate: ValueGrad
    threshold: float


@dataclass(frozen=True)
class ConstraintSet:
    dimension: int
    caps: tuple[LinearCap, ...] = ()
    qos: QoSConstraint | None = None

    def __post_init__(self):
        if len(self.caps) > 2:
            raise ContractViolation("at most two linear caps supported")
        for c in self.caps:
            if np.any(c.weights < 0) or c.cap <= 0:
                raise ContractViolation("caps must have non-negative weights, cap > 0")

    def satisfies_caps(self, x: np.ndarray, tol: float = 1e-8) -> bool:
        if np.any(x < -tol):
            return False
        return all(float(c.weights @ x) <= c.cap + tol * max(1.0, c.cap)
                   for c in self.caps)


@dataclass(frozen=True)
class FractionalProblem:
    numerator: ValueGrad          # concave, with gradient
    den_weights: np.ndarray       # affine denominator: d @ x + b
    den_offset: float
    constraints: ConstraintSet
    # optional cheaper value-only evaluator (used during line searches)
    numerator_value: Callable[[np.ndarray], float] | None = None

    def denominator(self, x: np.ndarray) -> float:
        return float(self.den_weights @ x) + self.den_offset

    def num_value(self, x: np.ndarray) -> float:
        if self.numerator_value is not None:
            return self.numerator_value(x)
        return self.numerator(x)[0]

    def ratio(self, x: np.ndarray) -> float:
        return self.num_value(x) / self.denominator(x)


@dataclass
class DinkelbachResult:
    x: np.ndarray
    mu: float
    mu_trace: list = field(default_factory=list)
    f_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = True


def project_feasible(x: np.ndarray, cs: ConstraintSet) -> np.ndarray:
    """Euclidean projection onto orthant + up to two linear caps.

    Active-set enumeration over the caps; each active cap contributes a
    non-negative multiplier located by bisection (QoS is not handled here).
    """
    x = np.asarray(x, dtype=float)

    def clip0(y):
        return np.maximum(y, 0.0)

    candidates = []
    y0 = clip0(x)
    if cs.satisfies_caps(y0, tol=PROJ_TOL):
        candidates.append(y0)
    idx_pairs = [(0,), (1,)][: len(cs.caps)] + ([(0, 1)] if len(cs.caps) == 2 else [])
    for active in idx_pairs:
        y = _project_active(x, cs, active, clip0)
        if y is not None and cs.satisfies_caps(y, tol=1e-8):
            candidates.append(y)
    if not candidates:
        raise ContractViolation("projection failed: no feasible candidate")
    dists = [np.linalg.norm(c - x) for c in candidates]
    return candidates[int(np.argmin(dists))]


def _cap_kill_theta(x, w):
    """Smallest theta at which w @ clip0(x - theta*w) reaches zero."""
    mask = w > 0
    if not np.any(mask):
        return None
    return float(np.max(np.maximum(x[mask] / w[mask], 0.0)))


def _bisect_cap(x, w, cap, clip0):
    """Find theta >= 0 with w @ clip0(x - theta*w) == cap (monotone decreasing)."""
    if float(w @ clip0(x)) <= cap:
        return 0.0
    hi = _cap_kill_theta(x, w)
    if hi is None or not np.isfinite(hi):
        return None
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(w @ clip0(x - mid * w)) > cap:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    return hi


def _rescale_into_caps(y, cs):
    """Scale y down onto the cap boundary when floating-point cancellation
    in x - theta*w (ulp of a huge x) leaves the bisection result slightly
    outside; a no-op for points already inside."""
    s = 1.0
    for c in cs.caps:
        load = float(c.weights @ y)
        if load > c.cap:
            s = min(s, c.cap / load)
    return y if s == 1.0 else y * s


def _project_active(x, cs, active, clip0):
    if len(active) == 1:
        c = cs.caps[active[0]]
        theta = _bisect_cap(x, c.weights, c.cap, clip0)
        if theta is None or theta < 0:
            return None
        return _rescale_into_caps(clip0(x - theta * c.weights), cs)
    # both caps active: nested bisection on the second multiplier
    c1, c2 = cs.caps[0], cs.caps[1]

    def inner(theta2):
        shifted = x - theta2 * c2.weights
        theta1 = _bisect_cap(shifted, c1.weights, c1.cap, clip0)
        if theta1 is None:
            return None, None
        y = clip0(shifted - theta1 * c1.weights)
        return y, float(c2.weights @ y) - c2.cap

    y, r = inner(0.0)
    if y is None or r <= PROJ_TOL:
        return None  # second cap not active after all
    hi = _cap_kill_theta(x, c2.weights)
    if hi is None or not np.isfinite(hi):
        return None
    y, r = inner(hi)
    if y is None or r > 0:
        return None
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        y, r = inner(mid)
        if r > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    y, _ = inner(hi)
    return None if y is None else _rescale_into_caps(y, cs)


def solve_subproblem(objective: ValueGrad, cs: ConstraintSet, x0: np.ndarray,
                     *, grad_tol: float = GRAD_TOL,
                     max_iters: int = MAX_PG_ITERS,
                     value_fn: Callable[[np.ndarray], float] | None = None) -> np.ndarray:
    """Projected-gradient ascent with Armijo backtracking.

    Uses a Barzilai-Borwein initial step for speed; `value_fn`, when
    supplied, is a cheaper value-only evaluator used inside the line
    search. Returns the best iterate seen if the projected-gradient
    tolerance is not reached.
    """
    if value_fn is None:
        def value_fn(x):
            return objective(x)[0]

    x = project_feasible(np.asarray(x0, dtype=float), cs)
    f, g = objective(x)
    best_x, best_f = x.copy(), f
    step = 1.0
    prev_x, prev_g = None, None
    stalls = 0
    f_window = f
    for it in range(max_iters):
        # projected gradient residual at unit step
        pg = x - project_feasible(x + g, cs)
        if np.linalg.norm(pg) <= grad_tol:
            break
        if prev_x is not None:
            dx = x - prev_x
            dg = g - prev_g
            denom = -float(dx @ dg)  # ascent: curvature along dx
            num = float(dx @ dx)
            if denom > 1e-16 and num > 0:
                step = min(max(num / denom, 1e-12), 1e12)
            else:
                step = min(step * 2.0, 1e12)
        accepted = False
        t = step
        for _ in range(60):
            x_new = project_feasible(x + t * g, cs)
            d = x_new - x
            f_new = value_fn(x_new)
            if f_new >= f + ARMIJO_SLOPE * float(g @ d):
                accepted = True
                break
            t *= ARMIJO_SHRINK
        if not accepted or np.allclose(x_new, x, atol=1e-16, rtol=0.0):
            break
        # consecutive negligible improvements mean we are at numerical rest
        stalls = stalls + 1 if f_new - f <= 1e-12 * max(1.0, abs(f)) else 0
        prev_x, prev_g = x, g
        x = x_new
        f, g = objective(x)
        if f > best_f:
            best_x, best_f = x.copy(), f
        if stalls >= 3:
            break
        # windowed stall: a long crawling tail contributes less than the
        # Dinkelbach tolerance, so cut it off
        if it % 20 == 19:
            if f - f_window <= 1e-10 * max(1.0, abs(f)):
                break
            f_window = f
    return best_x if best_f > f else x


def _qos_dual_solve(prob: FractionalProblem, mu: float, x0: np.ndarray,
                    qos: QoSConstraint, qos_tol: float = 1e-6) -> np.ndarray:
    """Maximize N - mu*D with the rate constraint dualized.

    The dual multiplier theta >= 0 is bisected on the rate residual of the
    unconstrained maximizer; the rate is concave in each block so the
    residual is monotone in theta.
    """

    def solve_at(theta: float) -> np.ndarray:
        def obj(x):
            n, gn = prob.numerator(x)
            r, gr = qos.rate(x)
            val = n + theta * (r - qos.threshold) - mu * prob.denominator(x)
            return val, gn + theta * gr - mu * prob.den_weights

        return solve_subproblem(obj, _drop_qos(prob.constraints), x0)

    def residual(x: np.ndarray) -> float:
        return qos.rate(x)[0] - qos.threshold

    lo, hi = 0.0, 1.0
    x_hi = solve_at(hi)
    guard = 0
    while residual(x_hi) < -qos_tol:
        lo, hi = hi, hi * 4.0
        x_hi = solve_at(hi)
        guard += 1
        if guard > 30:
            raise SubproblemFailure("QoS constraint appears unattainable in this block")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        x_mid = solve_at(mid)
        if residual(x_mid) < -qos_tol:
            lo = mid
        else:
            hi, x_hi = mid, x_mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return x_hi


def _drop_qos(cs: ConstraintSet) -> ConstraintSet:
    return ConstraintSet(dimension=cs.dimension, caps=cs.caps, qos=None)


def eval_F(prob: FractionalProblem, mu: float,
           x0: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """F(mu) = max_x N(x) - mu * D(x) over the constraint set."""
    cs = prob.constraints
    if x0 is None:
        x0 = np.zeros(cs.dimension)
    x = solve_subproblem(
        lambda x: _dinkelbach_obj(prob, mu, x), _drop_qos(cs), x0,
        value_fn=lambda x: prob.num_value(x) - mu * prob.denominator(x))
    if cs.qos is not None and cs.qos.rate(x)[0] < cs.qos.threshold - 1e-6:
        x = _qos_dual_solve(prob, mu, x, cs.qos)
    val = prob.num_value(x) - mu * prob.denominator(x)
    return val, x


def _dinkelbach_obj(prob: FractionalProblem, mu: float, x: np.ndarray):
    n, gn = prob.numerator(x)
    return n - mu * prob.denominator(x), gn - mu * prob.den_weights


def dinkelbach_maximize(prob: FractionalProblem, x0: np.ndarray,
                        tol: float = 1e-6, max_iters: int = 30) -> DinkelbachResult:
    """Maximize the concave-over-affine ratio by root-finding on F(mu)."""
    if tol <= 0:
        raise ContractViolation("tol must be > 0")
    x0 = np.asarray(x0, dtype=float)
    cs = prob.constraints
    if not cs.satisfies_caps(x0):
        raise InfeasibleStart("x0 violates caps or non-negativity")
    mu = max(prob.num_value(x0) / prob.denominator(x0), 0.0)
    x = x0
    mu_trace, f_trace = [], []
    for it in range(1, max_iters + 1):
        f_val, x = eval_F(prob, mu, x0=x)
        mu_trace.append(mu)
        f_trace.append(f_val)
        if abs(f_val) <= tol:
            return DinkelbachResult(x=x, mu=prob.ratio(x), mu_trace=mu_trace,
                                    f_trace=f_trace, iterations=it, converged=True)
        mu_new = prob.ratio(x)
        if mu_new <= mu:
            # numerically stalled; accept the current point
            return DinkelbachResult(x=x, mu=mu_new, mu_trace=mu_trace,
                                    f_trace=f_trace, iterations=it, converged=True)
        mu = mu_new
    return DinkelbachResult(x=x, mu=prob.ratio(x), mu_trace=mu_trace,
                            f_trace=f_trace, iterations=max_iters, converged=False)
