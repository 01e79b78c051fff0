"""Energy-efficiency solver with statistical CSI on the first hop.

The first-hop channel is known only through its Kronecker correlation
matrices; the second hop is known exactly. The rate numerator is a
sample-average over a fixed bank of white channel draws (common random
numbers keep the objective deterministic across iterations), while the
expected relay power has an exact closed form, so the denominator needs
no sampling at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fractional import (ConstraintSet, FractionalProblem, InfeasibleStart,
                         LinearCap, QoSConstraint, dinkelbach_maximize)
from .matops import (ContractViolation, batched_inv_small,
                     batched_logdet_hpd, evd_descending, svd_descending)
from .system_model import (LOG2, KroneckerModel, LinkBudget, PrecoderSolution,
                           sample_complex_gaussian)

DEFAULT_MC_SAMPLES = 500
MAX_OUTER_ITERS = 100


@dataclass(frozen=True)
class StatHInstance:
    lam_t_h: np.ndarray      # transmit-correlation eigenvalues, descending
    lam_r_h: np.ndarray      # receive-correlation eigenvalues, descending
    u_t_h: np.ndarray
    u_r_h: np.ndarray
    lam_g: np.ndarray        # squared singular values of the known G
    lam_g_tilde: np.ndarray  # reciprocal gains of G on the relay space
    budget: LinkBudget
    samples: np.ndarray      # fixed bank of white draws, (M, N_R, N_S)

    @property
    def n_source(self) -> int:
        return len(self.lam_t_h)

    @property
    def n_relay(self) -> int:
        return len(self.lam_r_h)


def optimal_structure_h(model_h: KroneckerModel, chan_g: np.ndarray,
                        budget: LinkBudget, n_samples: int = DEFAULT_MC_SAMPLES,
                        rng: np.random.Generator | None = None) -> tuple:
    """Bases (U_Q, U_A, V_A) and the reduced instance.

    U_Q aligns with the transmit correlation of the first hop; the AF
    matrix aligns its input with the receive correlation and its output
    with the right singular vectors of the known second hop.
    """
    dec_t = evd_descending(model_h.r_transmit)
    dec_r = evd_descending(model_h.r_receive)
    dec_g = svd_descending(chan_g)
    n_relay = model_h.r_receive.shape[0]
    lam_g = dec_g.values ** 2
    # reciprocal squared gains of G, padded/trimmed to the relay dimension
    lam_g_tilde = np.zeros(n_relay)
    k = min(n_relay, len(lam_g))
    nz = lam_g[:k] > 1e-12 * max(lam_g[0], 1e-300)
    lam_g_tilde[:k][nz] = 1.0 / lam_g[:k][nz]
    if rng is None:
        rng = np.random.default_rng(0)
    bank = np.stack([
        sample_complex_gaussian(rng, n_relay, model_h.r_transmit.shape[0])
        for _ in range(n_samples)])
    inst = StatHInstance(lam_t_h=dec_t.values, lam_r_h=dec_r.values,
                         u_t_h=dec_t.basis, u_r_h=dec_r.basis,
                         lam_g=lam_g, lam_g_tilde=lam_g_tilde,
                         budget=budget, samples=bank)
    u_q = dec_t.basis
    u_a = dec_g.right
    v_a = dec_r.basis
    return u_q, u_a, v_a, inst


def _mix_coeff(inst: StatHInstance, ty: np.ndarray) -> np.ndarray:
    """Diagonal of ty (sigma_D^2 I + sigma_R^2 ty / lam_r)^{-1}."""
    b = inst.budget
    return ty / (b.sigma2_dest + b.sigma2_relay * ty / inst.lam_r_h)


def _sample_kernel(inst: StatHInstance, ty: np.ndarray) -> np.ndarray:
    """Per-draw kernel K = Z^H diag(mix) Z, shape (M, N_S, N_S)."""
    z = inst.samples
    m = _mix_coeff(inst, ty)
    return np.matmul(z.conj().swapaxes(1, 2), m[None, :, None] * z)


def _saa_value(inst: StatHInstance, lam_q: np.ndarray, k_mat: np.ndarray) -> float:
    dq = lam_q * inst.lam_t_h
    sqrt_dq = np.sqrt(dq)
    inner = np.eye(inst.n_source) + sqrt_dq[:, None] * k_mat * sqrt_dq[None, :]
    return float(np.mean(batched_logdet_hpd(inner))) / LOG2


def _saa_grad_q(inst: StatHInstance, lam_q: np.ndarray, k_mat: np.ndarray) -> np.ndarray:
    """d/dlam_q of the sample-average log2-det via (I + K Dq)^{-1} K."""
    dq = lam_q * inst.lam_t_h
    minv = batched_inv_small(np.eye(inst.n_source) + k_mat * dq[None, None, :])
    kminv = np.sum(minv * k_mat.swapaxes(1, 2), axis=2)  # diag of minv @ K
    return inst.lam_t_h * np.mean(kminv.real, axis=0) / LOG2


def _saa_val_grad_ty(inst: StatHInstance, lam_q: np.ndarray,
                     ty: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and ty-gradient only (skips the lam_q gradient work)."""
    z = inst.samples
    dq = lam_q * inst.lam_t_h
    k_mat = _sample_kernel(inst, ty)
    val = _saa_value(inst, lam_q, k_mat)
    minv = batched_inv_small(np.eye(inst.n_source) + k_mat * dq[None, None, :])
    b = inst.budget
    denom = b.sigma2_dest + b.sigma2_relay * ty / inst.lam_r_h
    m_prime = b.sigma2_dest / denom**2
    zb = np.matmul(z, dq[None, :, None] * minv)
    quad = np.sum(zb * z.conj(), axis=2)
    return val, m_prime * np.mean(quad.real, axis=0) / LOG2


def saa_numerator(inst: StatHInstance, lam_q: np.ndarray, ty: np.ndarray,
                  with_grads: bool = False):
    """Sample-average rate over the fixed bank, log base 2.

    Returns the value, or (value, grad_lam_q, grad_ty) if requested;
    gradients use the log-det derivative identity and batched inverses.
    """
    z = inst.samples                          # (M, N_R, N_S)
    dq = lam_q * inst.lam_t_h                 # (N_S,)
    k_mat = _sample_kernel(inst, ty)
    val = _saa_value(inst, lam_q, k_mat)
    if not with_grads:
        return val
    minv = batched_inv_small(np.eye(inst.n_source) + k_mat * dq[None, None, :])
    kminv = np.sum(minv * k_mat.swapaxes(1, 2), axis=2)
    grad_q = inst.lam_t_h * np.mean(kminv.real, axis=0) / LOG2
    # gradient wrt ty: mix'_j * Re[z_j^H Dq (I + K Dq)^{-1} z_j] averaged
    b = inst.budget
    denom = b.sigma2_dest + b.sigma2_relay * ty / inst.lam_r_h
    m_prime = b.sigma2_dest / denom**2
    zb = np.matmul(z, dq[None, :, None] * minv)
    quad = np.sum(zb * z.conj(), axis=2)
    grad_ty = m_prime * np.mean(quad.real, axis=0) / LOG2
    return val, grad_q, grad_ty


def denominator_h(inst: StatHInstance, lam_q: np.ndarray, ty: np.ndarray) -> float:
    """Closed-form expected consumed power (no sampling)."""
    if np.any(inst.lam_r_h <= 0):
        raise ContractViolation("receive correlation must be positive definite")
    b = inst.budget
    return float(np.sum(lam_q * inst.lam_t_h) * np.sum(ty * inst.lam_g_tilde)
                 + b.sigma2_relay * np.sum(ty * inst.lam_g_tilde / inst.lam_r_h)
                 + np.sum(lam_q) + b.p_circuit)


def expected_relay_power_h(inst: StatHInstance, lam_q, ty) -> float:
    b = inst.budget
    return float(np.sum(lam_q * inst.lam_t_h) * np.sum(ty * inst.lam_g_tilde)
                 + b.sigma2_relay * np.sum(ty * inst.lam_g_tilde / inst.lam_r_h))


def jensen_numerator(inst: StatHInstance, lam_q: np.ndarray, ty: np.ndarray) -> float:
    """Deterministic surrogate: expectation moved inside the log-det."""
    t = float(np.sum(lam_q * inst.lam_t_h))
    return float(np.sum(np.log2(1.0 + t * _mix_coeff(inst, ty))))


def recover_lambda_a_h(inst: StatHInstance, ty: np.ndarray) -> np.ndarray:
    """AF gains reproducing the relay-output spectrum ty."""
    lam_a = np.zeros(inst.n_relay)
    k = min(inst.n_relay, len(inst.lam_g))
    for i in range(inst.n_relay):
        scale = (inst.lam_g[i] if i < k else 0.0) * inst.lam_r_h[i]
        if ty[i] <= 0:
            continue
        if scale <= 0:
            raise ContractViolation("nonzero ty on a zero-gain stream")
        lam_a[i] = ty[i] / scale
    return lam_a


def _ty_block_problem(inst: StatHInstance, lam_q: np.ndarray,
                      use_jensen: bool) -> FractionalProblem:
    b = inst.budget
    t_q = float(np.sum(lam_q * inst.lam_t_h))

    if use_jensen:
        def num(ty):
            m = _mix_coeff(inst, ty)
            val = float(np.sum(np.log2(1.0 + t_q * m)))
            denom = b.sigma2_dest + b.sigma2_relay * ty / inst.lam_r_h
            m_prime = b.sigma2_dest / denom**2
            grad = t_q * m_prime / (1.0 + t_q * m) / LOG2
            return val, grad

        def num_val(ty):
            return float(np.sum(np.log2(1.0 + t_q * _mix_coeff(inst, ty))))
    else:
        def num(ty):
            return _saa_val_grad_ty(inst, lam_q, ty)

        def num_val(ty):
            return _saa_value(inst, lam_q, _sample_kernel(inst, ty))

    w_relay = t_q * inst.lam_g_tilde + b.sigma2_relay * inst.lam_g_tilde / inst.lam_r_h
    caps = (LinearCap(weights=w_relay, cap=b.p_relay_max),)
    qos = QoSConstraint(rate=num, threshold=b.rate_min) if b.rate_min > 0 else None
    return FractionalProblem(
        numerator=num, den_weights=w_relay,
        den_offset=float(np.sum(lam_q)) + b.p_circuit,
        constraints=ConstraintSet(dimension=inst.n_relay, caps=caps, qos=qos),
        numerator_value=num_val)


def _q_block_problem(inst: StatHInstance, ty: np.ndarray,
                     use_jensen: bool) -> FractionalProblem:
    b = inst.budget
    m = _mix_coeff(inst, ty)

    if use_jensen:
        def num(lam_q):
            t_q = float(np.sum(lam_q * inst.lam_t_h))
            val = float(np.sum(np.log2(1.0 + t_q * m)))
            slope = float(np.sum(m / (1.0 + t_q * m))) / LOG2
            return val, slope * inst.lam_t_h

        def num_val(lam_q):
            t_q = float(np.sum(lam_q * inst.lam_t_h))
            return float(np.sum(np.log2(1.0 + t_q * m)))
    else:
        k_mat = _sample_kernel(inst, ty)  # fixed in this block, reuse per eval

        def num(lam_q):
            return (_saa_value(inst, lam_q, k_mat),
                    _saa_grad_q(inst, lam_q, k_mat))

        def num_val(lam_q):
            return _saa_value(inst, lam_q, k_mat)

    c_y = float(np.sum(ty * inst.lam_g_tilde))
    den_w = inst.lam_t_h * c_y + 1.0
    caps = [LinearCap(weights=np.ones(inst.n_source), cap=b.p_source_max)]
    if c_y > 0:
        room = b.p_relay_max - b.sigma2_relay * float(
            np.sum(ty * inst.lam_g_tilde / inst.lam_r_h))
        caps.append(LinearCap(weights=inst.lam_t_h * c_y, cap=max(room, 1e-30)))
    qos = QoSConstraint(rate=num, threshold=b.rate_min) if b.rate_min > 0 else None
    return FractionalProblem(
        numerator=num, den_weights=den_w,
        den_offset=b.sigma2_relay * float(np.sum(ty * inst.lam_g_tilde / inst.lam_r_h))
        + b.p_circuit,
        constraints=ConstraintSet(dimension=inst.n_source, caps=tuple(caps), qos=qos),
        numerator_value=num_val)


def saa_gee_h(inst: StatHInstance, lam_q, ty, use_jensen: bool = False) -> float:
    num = (jensen_numerator(inst, lam_q, ty) if use_jensen
           else saa_numerator(inst, lam_q, ty))
    return num / denominator_h(inst, lam_q, ty)


def alternating_maximize_h(inst: StatHInstance, lam_q0: np.ndarray,
                           eps: float = 1e-3, max_outer: int = MAX_OUTER_ITERS,
                           use_jensen: bool = False, dinkelbach_tol: float = 1e-6):
    from .perfect_csi import AlternatingTrace  # shared trace record

    lam_q = np.asarray(lam_q0, dtype=float)
    if np.any(lam_q < 0) or np.sum(lam_q) > inst.budget.p_source_max * (1 + 1e-9):
        raise InfeasibleStart("lam_q0 violates the source power constraint")
    ty = np.zeros(inst.n_relay)
    gee_prev = saa_gee_h(inst, lam_q, ty, use_jensen)
    trace = [gee_prev]
    converged = False
    iters = 0
    for iters in range(1, max_outer + 1):
        if np.any(lam_q * inst.lam_t_h > 0):
            prob_ty = _ty_block_problem(inst, lam_q, use_jensen)
            cand = dinkelbach_maximize(prob_ty, ty, tol=dinkelbach_tol).x
            if saa_gee_h(inst, lam_q, cand, use_jensen) >= saa_gee_h(inst, lam_q, ty, use_jensen):
                ty = cand
        if np.any(ty > 0):
            prob_q = _q_block_problem(inst, ty, use_jensen)
            cand = dinkelbach_maximize(prob_q, lam_q, tol=dinkelbach_tol).x
            if saa_gee_h(inst, cand, ty, use_jensen) >= saa_gee_h(inst, lam_q, ty, use_jensen):
                lam_q = cand
        gee_now = saa_gee_h(inst, lam_q, ty, use_jensen)
        trace.append(gee_now)
        if abs(gee_now - gee_prev) <= eps:
            converged = True
            break
        gee_prev = gee_now
    return lam_q, ty, AlternatingTrace(gee_per_iteration=trace,
                                       converged=converged, iterations=iters)


def build_solution_h(model_h: KroneckerModel, chan_g: np.ndarray,
                     inst: StatHInstance, lam_q: np.ndarray,
                     ty: np.ndarray) -> PrecoderSolution:
    u_q, u_a, v_a, _ = optimal_structure_h(model_h, chan_g, inst.budget, n_samples=1)
    lam_a = recover_lambda_a_h(inst, ty)
    return PrecoderSolution(q_basis=u_q, q_powers=lam_q, a_left=u_a,
                            a_gains=lam_a, a_right=v_a)
