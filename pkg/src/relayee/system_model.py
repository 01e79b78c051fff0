"""Physical-layer model for the two-hop AF MIMO link.

Rates are log-det values in base 2 without the half-duplex 1/2 factor;
the bits-per-Joule efficiency is their ratio to the total consumed power,
so the constant transmission time drops out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matops import ContractViolation, evd_descending, sqrt_psd

LOG2 = np.log(2.0)


@dataclass(frozen=True)
class SystemDims:
    n_source: int
    n_relay: int
    n_dest: int

    def __post_init__(self):
        if min(self.n_source, self.n_relay, self.n_dest) < 1:
            raise ContractViolation("antenna counts must be >= 1")

    @property
    def n_streams(self) -> int:
        return min(self.n_source, self.n_relay, self.n_dest)


@dataclass(frozen=True)
class LinkBudget:
    p_source_max: float
    p_relay_max: float
    p_circuit: float
    sigma2_relay: float = 1.0
    sigma2_dest: float = 1.0
    rate_min: float = 0.0
    amp_eff_source: float = 1.0
    amp_eff_relay: float = 1.0

    def __post_init__(self):
        if min(self.p_source_max, self.p_relay_max, self.p_circuit,
               self.sigma2_relay, self.sigma2_dest) <= 0:
            raise ContractViolation("powers and noise variances must be > 0")
        if self.rate_min < 0:
            raise ContractViolation("rate_min must be >= 0")
        for eff in (self.amp_eff_source, self.amp_eff_relay):
            if not 0.0 < eff <= 1.0:
                raise ContractViolation("amplifier efficiencies must be in (0, 1]")


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # relay x source
    g: np.ndarray  # dest x relay

    def __post_init__(self):
        for m in (self.h, self.g):
            if not np.all(np.isfinite(m)):
                raise ContractViolation("channel has non-finite entries")
        for name, m in (("h", self.h), ("g", self.g)):
            s = np.linalg.svd(m, compute_uv=False)
            if s[-1] <= 1e-12 * s[0]:
                raise ContractViolation(f"channel {name} is rank deficient")

    @property
    def dims(self) -> SystemDims:
        return SystemDims(n_source=self.h.shape[1], n_relay=self.h.shape[0],
                          n_dest=self.g.shape[0])


@dataclass(frozen=True)
class KroneckerModel:
    """Separable correlation: channel = R_r^{1/2} Z R_t^{1/2}, Z white."""
    r_receive: np.ndarray
    r_transmit: np.ndarray

    def __post_init__(self):
        for m in (self.r_receive, self.r_transmit):
            if m.shape[0] != m.shape[1]:
                raise ContractViolation("correlation matrices must be square")
        # PSD check via sqrt construction
        sqrt_psd(self.r_receive)
        sqrt_psd(self.r_transmit)

    @property
    def sqrt_receive(self) -> np.ndarray:
        return sqrt_psd(self.r_receive)

    @property
    def sqrt_transmit(self) -> np.ndarray:
        return sqrt_psd(self.r_transmit)


@dataclass(frozen=True)
class PrecoderSolution:
    """Source covariance Q and AF matrix A in factored form."""
    q_basis: np.ndarray    # unitary U_Q (n_source x n_source)
    q_powers: np.ndarray   # eigenvalues of Q, >= 0 (may be shorter than n_source)
    a_left: np.ndarray     # unitary U_A (n_relay x n_relay)
    a_gains: np.ndarray    # eigenvalues of A A^H, >= 0
    a_right: np.ndarray    # unitary V_A (n_relay x n_relay)


@dataclass(frozen=True)
class GEEReport:
    rate: float
    p_source: float
    p_relay: float
    gee: float
    qos_met: bool


def assemble_q(sol: PrecoderSolution) -> np.ndarray:
    n = sol.q_basis.shape[0]
    lam = np.zeros(n)
    lam[: len(sol.q_powers)] = sol.q_powers
    return (sol.q_basis * lam) @ sol.q_basis.conj().T


def assemble_a(sol: PrecoderSolution) -> np.ndarray:
    n = sol.a_left.shape[0]
    lam = np.zeros(n)
    lam[: len(sol.a_gains)] = sol.a_gains
    return (sol.a_left * np.sqrt(lam)) @ sol.a_right.conj().T


def achievable_logdet(chan: ChannelRealization, sol: PrecoderSolution,
                      budget: LinkBudget) -> float:
    """log2-det rate of the end-to-end link (without the 1/2 factor)."""
    q = assemble_q(sol)
    a = assemble_a(sol)
    return logdet_rate(chan.h, chan.g, q, a, budget)


def logdet_rate(h: np.ndarray, g: np.ndarray, q: np.ndarray, a: np.ndarray,
                budget: LinkBudget) -> float:
    n_d = g.shape[0]
    ga = g @ a
    w = budget.sigma2_dest * np.eye(n_d) + budget.sigma2_relay * (ga @ ga.conj().T)
    gah = ga @ h
    signal = gah @ q @ gah.conj().T
    sign, ld = np.linalg.slogdet(np.eye(n_d) + np.linalg.solve(w, signal))
    if not sign.real > 0 or not np.isfinite(ld):
        raise ContractViolation("non-positive determinant in rate evaluation")
    return float(ld / LOG2)


def relay_tx_power(chan: ChannelRealization, sol: PrecoderSolution,
                   budget: LinkBudget) -> float:
    q = assemble_q(sol)
    a = assemble_a(sol)
    n_r = chan.h.shape[0]
    inner = chan.h @ q @ chan.h.conj().T + budget.sigma2_relay * np.eye(n_r)
    return float(np.real(np.trace(a @ inner @ a.conj().T)))


def gee(chan: ChannelRealization, sol: PrecoderSolution,
        budget: LinkBudget) -> GEEReport:
    rate = achievable_logdet(chan, sol, budget)
    p_s = float(np.sum(sol.q_powers))
    p_r = relay_tx_power(chan, sol, budget)
    total = p_s / budget.amp_eff_source + p_r / budget.amp_eff_relay + budget.p_circuit
    return GEEReport(rate=rate, p_source=p_s, p_relay=p_r, gee=rate / total,
                     qos_met=rate >= budget.rate_min - 1e-9)


def sample_complex_gaussian(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Circular complex Gaussian, unit variance per entry (1/2 per component)."""
    return (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def sample_kronecker(model: KroneckerModel, rng: np.random.Generator) -> np.ndarray:
    n_r = model.r_receive.shape[0]
    n_t = model.r_transmit.shape[0]
    z = sample_complex_gaussian(rng, n_r, n_t)
    return model.sqrt_receive @ z @ model.sqrt_transmit


def ergodic_logdet_mc(model_h: KroneckerModel | None, model_g: KroneckerModel | None,
                      chan: ChannelRealization, sol: PrecoderSolution,
                      budget: LinkBudget, n_samples: int,
                      rng: np.random.Generator) -> float:
    """Sample-average rate over random draws of the statistical channel(s).

    A `None` model keeps the corresponding realized channel fixed.
    """
    if n_samples < 1:
        raise ContractViolation("n_samples must be >= 1")
    q = assemble_q(sol)
    a = assemble_a(sol)
    acc = 0.0
    for _ in range(n_samples):
        h = sample_kronecker(model_h, rng) if model_h is not None else chan.h
        g = sample_kronecker(model_g, rng) if model_g is not None else chan.g
        acc += logdet_rate(h, g, q, a, budget)
    return acc / n_samples
