"""Experiment harness: scenario generation, solver dispatch, CSV output.

All randomness flows from a single 64-bit master seed through a
splitmix-style mixing function, so every run is reproducible byte for
byte regardless of execution order or worker count.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import beamforming, perfect_csi, stat_csi_g, stat_csi_h
from .fractional import SubproblemFailure
from .matops import ContractViolation, exp_correlation
from .system_model import (ChannelRealization, KroneckerModel, LinkBudget,
                           gee, sample_kronecker)

MASK64 = (1 << 64) - 1
ALGORITHMS = ("perfect", "stat_h", "stat_g", "stat_h_jensen")

SCENARIO_FIELDS = ("scenario_id", "snr_db", "rho", "algorithm", "gee", "rate",
                   "p_source", "p_relay", "iterations", "converged", "qos_met",
                   "seed")
CONVERGENCE_FIELDS = ("algorithm", "start", "iteration", "gee", "snr_db",
                      "rho", "seed")
BEAM_FIELDS = ("p_dbw", "p_watts", "p_relay_max", "lam1", "lam2",
               "fp_optimal", "condition_lhs", "c2_sign", "mc_std_error")


def splitmix64(state: int) -> int:
    """One step of the splitmix64 sequence (public-domain constants)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def mix_seed(master: int, *parts: int) -> int:
    """Deterministic substream seed from the master seed and indices."""
    s = splitmix64(master & MASK64)
    for p in parts:
        s = splitmix64(s ^ (p & MASK64))
    return s


@dataclass
class ExperimentConfig:
    n_source: int = 3
    n_relay: int = 3
    n_dest: int = 3
    rho: float = 0.5
    snr_db: float = 20.0
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    p_circuit: float = 5.0
    rate_min: float = 1.0
    n_scenarios: int = 1000
    n_starts: int = 10
    eps: float = 1e-3
    master_seed: int = 0
    mc_samples: int = 500
    beam_mc_samples: int = 100_000
    algorithm: str = "stat_h"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ContractViolation(f"unknown algorithm {self.algorithm!r}")
        if self.n_scenarios < 1 or self.n_starts < 1 or self.mc_samples < 1:
            raise ContractViolation("counts must be >= 1")
        if self.eps <= 0:
            raise ContractViolation("eps must be > 0")
        self.snr_grid_db = tuple(float(s) for s in self.snr_grid_db)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ContractViolation(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def budget_for_snr(cfg: ExperimentConfig, snr_db: float) -> LinkBudget:
    """Noise variances pinned to 1; the SNR is swept through the power caps."""
    p_max = 10.0 ** (snr_db / 10.0)
    return LinkBudget(p_source_max=p_max, p_relay_max=p_max,
                      p_circuit=cfg.p_circuit, rate_min=cfg.rate_min)


def correlation_models(cfg: ExperimentConfig) -> tuple[KroneckerModel, KroneckerModel]:
    model_h = KroneckerModel(r_receive=exp_correlation(cfg.rho, cfg.n_relay),
                             r_transmit=exp_correlation(cfg.rho, cfg.n_source))
    model_g = KroneckerModel(r_receive=exp_correlation(cfg.rho, cfg.n_dest),
                             r_transmit=exp_correlation(cfg.rho, cfg.n_relay))
    return model_h, model_g


def draw_channels(cfg: ExperimentConfig, scenario_id: int) -> ChannelRealization:
    rng = np.random.default_rng(mix_seed(cfg.master_seed, scenario_id, 0xC0FFEE))
    model_h, model_g = correlation_models(cfg)
    return ChannelRealization(h=sample_kronecker(model_h, rng),
                              g=sample_kronecker(model_g, rng))


def _random_lam_q(n: int, p_max: float, rng: np.random.Generator) -> np.ndarray:
    w = rng.exponential(size=n)
    w /= np.sum(w)
    return w * rng.uniform(0.0, 1.0) * p_max


@dataclass
class SolveOutcome:
    solution: object           # PrecoderSolution or None when infeasible
    iterations: int
    converged: bool
    traces: list               # per-start objective traces
    objective_values: list     # per-start fixed-point objectives
    feasible: bool


def solve_scenario(algorithm: str, chan: ChannelRealization, budget: LinkBudget,
                   cfg: ExperimentConfig, seed: int) -> SolveOutcome:
    """Multi-start alternating solve; the best fixed point is returned."""
    rng = np.random.default_rng(seed)
    model_h, model_g = correlation_models(cfg)
    traces, objs, fits = [], [], []
    if algorithm == "perfect":
        inst = perfect_csi.scalar_instance(chan, budget)
        for _ in range(cfg.n_starts):
            lam_q0 = _random_lam_q(inst.r_eff, budget.p_source_max, rng)
            try:
                (lq, la), tr = perfect_csi.alternating_maximize(
                    inst, lam_q0, eps=cfg.eps)
            except SubproblemFailure:
                continue
            traces.append(tr)
            objs.append(perfect_csi.scalar_gee(inst, lq, la))
            fits.append((lq, la))
        if not objs:
            return SolveOutcome(None, 0, False, [], [], False)
        best = int(np.argmax(objs))
        sol = perfect_csi.build_solution(chan, *fits[best])
    elif algorithm in ("stat_h", "stat_h_jensen"):
        jensen = algorithm == "stat_h_jensen"
        bank_rng = np.random.default_rng(mix_seed(seed, 0xBA11))
        _, _, _, inst = stat_csi_h.optimal_structure_h(
            model_h, chan.g, budget, n_samples=cfg.mc_samples, rng=bank_rng)
        for _ in range(cfg.n_starts):
            lam_q0 = _random_lam_q(inst.n_source, budget.p_source_max, rng)
            try:
                lq, ty, tr = stat_csi_h.alternating_maximize_h(
                    inst, lam_q0, eps=cfg.eps, use_jensen=jensen)
            except SubproblemFailure:
                continue
            traces.append(tr)
            objs.append(stat_csi_h.saa_gee_h(inst, lq, ty, jensen))
            fits.append((lq, ty))
        if not objs:
            return SolveOutcome(None, 0, False, [], [], False)
        best = int(np.argmax(objs))
        sol = stat_csi_h.build_solution_h(model_h, chan.g, inst, *fits[best])
    elif algorithm == "stat_g":
        bank_rng = np.random.default_rng(mix_seed(seed, 0xBA11))
        _, _, _, inst = stat_csi_g.optimal_structure_g(
            chan.h, model_g, budget, n_samples=cfg.mc_samples, rng=bank_rng)
        for _ in range(cfg.n_starts):
            lam_q0 = _random_lam_q(inst.n_active, budget.p_source_max, rng)
            try:
                lq, la, tr = stat_csi_g.alternating_maximize_g(
                    inst, lam_q0, eps=cfg.eps)
            except SubproblemFailure:
                continue
            traces.append(tr)
            objs.append(stat_csi_g.saa_gee_g(inst, lq, la))
            fits.append((lq, la))
        if not objs:
            return SolveOutcome(None, 0, False, [], [], False)
        best = int(np.argmax(objs))
        sol = stat_csi_g.build_solution_g(chan.h, model_g, inst, *fits[best])
    else:
        raise ContractViolation(f"unknown algorithm {algorithm!r}")
    tr = traces[best]
    return SolveOutcome(solution=sol, iterations=tr.iterations,
                        converged=tr.converged, traces=traces,
                        objective_values=objs, feasible=True)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(path: str, fields, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fields])


ALGO_IDS = {name: i for i, name in enumerate(ALGORITHMS)}


def scenario_row(cfg: ExperimentConfig, scenario_id: int, snr_db: float,
                 algorithm: str, chan: ChannelRealization,
                 budget: LinkBudget, outcome: SolveOutcome, seed: int) -> dict:
    if not outcome.feasible:
        return dict(scenario_id=scenario_id, snr_db=snr_db, rho=cfg.rho,
                    algorithm=algorithm, gee=0.0, rate=0.0, p_source=0.0,
                    p_relay=0.0, iterations=0, converged=False, qos_met=False,
                    seed=seed)
    report = gee(chan, outcome.solution, budget)
    return dict(scenario_id=scenario_id, snr_db=snr_db, rho=cfg.rho,
                algorithm=algorithm, gee=report.gee, rate=report.rate,
                p_source=report.p_source, p_relay=report.p_relay,
                iterations=outcome.iterations, converged=outcome.converged,
                qos_met=report.qos_met, seed=seed)


def run_gee_vs_snr(cfg: ExperimentConfig, out_path: str,
                   algorithms: tuple = ("perfect", "stat_h", "stat_g")) -> dict:
    """Paired-scenario sweep: same channel draws feed every algorithm."""
    rows = []
    infeasible = 0
    for scenario_id in range(cfg.n_scenarios):
        chan = draw_channels(cfg, scenario_id)
        for snr_db in cfg.snr_grid_db:
            budget = budget_for_snr(cfg, snr_db)
            for algorithm in algorithms:
                seed = mix_seed(cfg.master_seed, scenario_id,
                                ALGO_IDS[algorithm], int(round(snr_db * 1000)))
                outcome = solve_scenario(algorithm, chan, budget, cfg, seed)
                if not outcome.feasible:
                    infeasible += 1
                rows.append(scenario_row(cfg, scenario_id, snr_db, algorithm,
                                         chan, budget, outcome, seed))
    rows.sort(key=lambda r: (r["snr_db"], r["scenario_id"], r["algorithm"]))
    _write_csv(out_path, SCENARIO_FIELDS, rows)
    return {"rows": len(rows), "infeasible": infeasible}


def run_convergence(cfg: ExperimentConfig, out_path: str) -> dict:
    """Per-start objective traces at a fixed SNR (one scenario)."""
    chan = draw_channels(cfg, 0)
    budget = budget_for_snr(cfg, cfg.snr_db)
    seed = mix_seed(cfg.master_seed, 0, ALGO_IDS[cfg.algorithm],
                    int(round(cfg.snr_db * 1000)))
    outcome = solve_scenario(cfg.algorithm, chan, budget, cfg, seed)
    rows = []
    for start, tr in enumerate(outcome.traces):
        for it, val in enumerate(tr.gee_per_iteration):
            rows.append(dict(algorithm=cfg.algorithm, start=start,
                             iteration=it, gee=val, snr_db=cfg.snr_db,
                             rho=cfg.rho, seed=seed))
    rows.sort(key=lambda r: (r["start"], r["iteration"]))
    _write_csv(out_path, CONVERGENCE_FIELDS, rows)
    return {"rows": len(rows), "infeasible": 0 if outcome.feasible else 1}


def run_beamforming_scan(cfg: ExperimentConfig, out_path: str,
                         p_grid_dbw: np.ndarray | None = None,
                         solver_mc: int = 2000) -> dict:
    """Power split on the two-stream reduced problem versus available power.

    Uses the reference parameters: two streams through three effective
    receive dimensions with unit column covariance, top-stream gain 2,
    power floor 0.1, relay slope 0.5, 1 W source cap. The verdict flips
    near -9 dBW and power splitting starts right above the flip.
    """
    if p_grid_dbw is None:
        p_grid_dbw = np.arange(-15.0, 3.0 + 1e-9, 0.5)
    rng_verdict = np.random.default_rng(mix_seed(cfg.master_seed, 0xBEA3, 1))
    rng_solver = np.random.default_rng(mix_seed(cfg.master_seed, 0xBEA3, 2))
    b, c, p_s_max = 0.1, 0.5, 1.0
    rows = []
    for p_dbw in p_grid_dbw:
        p = beamforming.from_dbw(float(p_dbw))
        # choose the relay cap so the relay term of the cap equals p
        p_r_max = c * p + b
        inst = beamforming.BeamInstanceH(
            lam_c=np.ones(3), lam_t=np.array([2.0, 1.0]), b=b, c=c,
            p_s_max=p_s_max, p_r_max=p_r_max, p_c=0.0)
        p_eff = beamforming.p_cap_h(inst)
        verdict = beamforming.fp_condition_h(
            inst, n_mc=cfg.beam_mc_samples, rng=rng_verdict, p=p_eff)
        lam = beamforming.solve_power_split_h(inst, n_mc=solver_mc,
                                              rng=rng_solver)
        total = float(np.sum(lam))
        lam_n = lam / total if total > 0 else np.array([1.0, 0.0])
        rows.append(dict(p_dbw=float(p_dbw), p_watts=p_eff, p_relay_max=p_r_max,
                         lam1=float(lam_n[0]), lam2=float(lam_n[1]),
                         fp_optimal=verdict.fp_optimal,
                         condition_lhs=verdict.condition_lhs,
                         c2_sign=verdict.c2_sign,
                         mc_std_error=verdict.mc_std_error))
    rows.sort(key=lambda r: r["p_dbw"])
    _write_csv(out_path, BEAM_FIELDS, rows)
    return {"rows": len(rows), "infeasible": 0}


def _complex_to_lists(m: np.ndarray) -> dict:
    return {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}


def run_single(cfg: ExperimentConfig, scenario_seed: int, out_path: str) -> dict:
    """One scenario end to end, dumped as JSON with the full solution."""
    local = ExperimentConfig(**{**asdict(cfg), "master_seed": scenario_seed})
    chan = draw_channels(local, 0)
    budget = budget_for_snr(local, local.snr_db)
    seed = mix_seed(local.master_seed, 0, ALGO_IDS[local.algorithm],
                    int(round(local.snr_db * 1000)))
    outcome = solve_scenario(local.algorithm, chan, budget, local, seed)
    payload = {
        "config": asdict(local),
        "channel_h": _complex_to_lists(chan.h),
        "channel_g": _complex_to_lists(chan.g),
        "feasible": outcome.feasible,
    }
    if outcome.feasible:
        from .system_model import assemble_a, assemble_q
        report = gee(chan, outcome.solution, budget)
        payload.update({
            "q": _complex_to_lists(assemble_q(outcome.solution)),
            "a": _complex_to_lists(assemble_a(outcome.solution)),
            "report": {"gee": report.gee, "rate": report.rate,
                       "p_source": report.p_source, "p_relay": report.p_relay,
                       "qos_met": bool(report.qos_met)},
            "iterations": outcome.iterations,
            "converged": bool(outcome.converged),
        })
    else:
        payload["report"] = {"reason": "no feasible fixed point found"}
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return {"rows": 1, "infeasible": 0 if outcome.feasible else 1}
