"""Figure builders over the relayee experiment CSV contracts.

Each builder validates the CSV header against the declared schema before
touching the data, so a mismatched file fails fast with a column-level
diagnostic instead of a mid-plot exception. Rendering is read-only and
deterministic: identical CSV input yields an identical image (fixed style,
fixed SVG hash salt, no timestamps).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

SCHEMAS = {
    "convergence": ("algorithm", "start", "iteration", "gee", "snr_db",
                    "rho", "seed"),
    "gee_vs_snr": ("scenario_id", "snr_db", "rho", "algorithm", "gee", "rate",
                   "p_source", "p_relay", "iterations", "converged", "qos_met",
                   "seed"),
    "beam_scan": ("p_dbw", "p_watts", "p_relay_max", "lam1", "lam2",
                  "fp_optimal", "condition_lhs", "c2_sign", "mc_std_error"),
}

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "svg.hashsalt": "relayee-plots",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}

ALGO_LABELS = {
    "perfect": "perfect CSI",
    "stat_h": "statistical CSI (first hop)",
    "stat_g": "statistical CSI (second hop)",
    "stat_h_jensen": "statistical CSI (first hop, Jensen bound)",
}


class SchemaMismatch(ValueError):
    """Raised when a CSV header does not match the declared contract."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_csv: Path
    output_image: Path
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""

    def __post_init__(self):
        if self.kind not in SCHEMAS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; "
                f"expected one of {sorted(SCHEMAS)}")


def read_rows(path: Path, kind: str) -> list[dict[str, str]]:
    """Parse the CSV and enforce the exact column contract for `kind`."""
    expected = SCHEMAS[kind]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(
                f"{path}: empty file, expected header {list(expected)}")
        if tuple(header) != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaMismatch(
                f"{path}: header does not match the {kind} contract; "
                f"missing columns {missing}, unexpected columns {extra}")
        rows = []
        for lineno, values in enumerate(reader, start=2):
            if len(values) != len(expected):
                raise SchemaMismatch(
                    f"{path}:{lineno}: expected {len(expected)} fields, "
                    f"got {len(values)}")
            rows.append(dict(zip(expected, values)))
    return rows


def _new_axes(spec: FigureSpec, default_x: str, default_y: str):
    fig, ax = plt.subplots()
    ax.set_xlabel(spec.xlabel or default_x)
    ax.set_ylabel(spec.ylabel or default_y)
    if spec.title:
        ax.set_title(spec.title)
    return fig, ax


def _label(algorithm: str, rho: str | None = None) -> str:
    base = ALGO_LABELS.get(algorithm, algorithm)
    return base if rho is None else f"{base}, rho={rho}"


def _plot_convergence(rows: list[dict[str, str]], spec: FigureSpec, ax) -> None:
    traces: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for r in rows:
        traces.setdefault((r["algorithm"], r["start"]), []).append(
            (int(r["iteration"]), float(r["gee"])))
    algorithms = sorted({alg for alg, _ in traces})
    for alg, start in sorted(traces):
        pts = sorted(traces[(alg, start)])
        label = _label(alg) if start == "0" and len(algorithms) > 1 else None
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                color=f"C{algorithms.index(alg)}", alpha=0.8, label=label)
    if len(algorithms) > 1:
        ax.legend()


def _plot_gee_vs_snr(rows: list[dict[str, str]], spec: FigureSpec, ax) -> None:
    sums: dict[tuple[str, str], dict[float, list[float]]] = {}
    for r in rows:
        per_snr = sums.setdefault((r["algorithm"], r["rho"]), {})
        per_snr.setdefault(float(r["snr_db"]), []).append(float(r["gee"]))
    rhos = sorted({rho for _, rho in sums})
    for alg, rho in sorted(sums):
        per_snr = sums[(alg, rho)]
        xs = sorted(per_snr)
        ys = [sum(per_snr[x]) / len(per_snr[x]) for x in xs]
        ax.plot(xs, ys, marker="o",
                label=_label(alg, rho if len(rhos) > 1 else None))
    if sums:
        ax.legend()


def _plot_beam_scan(rows: list[dict[str, str]], spec: FigureSpec, ax) -> None:
    rows = sorted(rows, key=lambda r: float(r["p_dbw"]))
    xs = [float(r["p_dbw"]) for r in rows]
    ax.plot(xs, [float(r["lam1"]) for r in rows], marker="o",
            label="stream 1 power share")
    ax.plot(xs, [float(r["lam2"]) for r in rows], marker="s",
            label="stream 2 power share")
    threshold = verdict_flip(rows)
    if threshold is not None:
        ax.axvline(threshold, color="k", linestyle="--",
                   label=f"optimality threshold ({threshold:g} dBW)")
    ax.legend()


def verdict_flip(rows: list[dict[str, str]]) -> float | None:
    """Midpoint between the last optimal and first non-optimal grid power.

    Rows must be sorted by p_dbw. Returns None when the verdict never
    flips (all-optimal, all-non-optimal, or no rows).
    """
    verdicts = [r["fp_optimal"] == "1" for r in rows]
    for i in range(len(rows) - 1):
        if verdicts[i] and not verdicts[i + 1]:
            return 0.5 * (float(rows[i]["p_dbw"])
                          + float(rows[i + 1]["p_dbw"]))
    return None


_PLOTTERS = {
    "convergence": (_plot_convergence, "outer iteration", "GEE (bits/Joule)"),
    "gee_vs_snr": (_plot_gee_vs_snr, "SNR (dB)", "average GEE (bits/Joule)"),
    "beam_scan": (_plot_beam_scan, "stream power (dBW)",
                  "normalized power split"),
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; empty-but-valid input yields empty axes."""
    rows = read_rows(spec.input_csv, spec.kind)
    plotter, default_x, default_y = _PLOTTERS[spec.kind]
    with plt.rc_context(STYLE):
        fig, ax = _new_axes(spec, default_x, default_y)
        if rows:
            plotter(rows, spec, ax)
        fig.tight_layout()
        fig.savefig(spec.output_image, metadata=_metadata(spec.output_image))
        plt.close(fig)
    return spec.output_image


def _metadata(path: Path) -> dict | None:
    suffix = Path(path).suffix.lower()
    if suffix == ".svg":
        return {"Date": None}  # strip the timestamp for byte-stable output
    if suffix == ".png":
        return {"Software": None}
    return None
