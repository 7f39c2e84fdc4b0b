"""Plots and a one-page text summary from the artifacts of finished runs.

Reports only read files; they never rerun anything.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..errors import ArtifactError  # noqa: E402

# fixed ids keep the SVG text identical across runs; text stays searchable
matplotlib.rcParams["svg.hashsalt"] = "slabmhd"
matplotlib.rcParams["svg.fonttype"] = "none"

DEFAULT_QUANTITIES = {
    "run3d": ("energy", "functional_ratio", "E+_0_0_full", "E-_0_0_full", "F+_0_0_full", "F-_0_0_full"),
    "run2d": ("energy", "E+_0", "E-_0", "F+_0", "F-_0"),
}
SWEEP_SERIES = (("diff_final", "3D-2D difference"), ("z3_final", "rescaled z3"), ("w3_scaled_max", "delta^-2 w3"))


def read_series(path: str) -> Dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ArtifactError(f"{path} is empty")
    head, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(head):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(v) if v != "" else math.nan for v in col])
        except ValueError:
            out[name] = np.array(col, dtype=object)
    return out


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name.replace("+", "p").replace("-", "m"))


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_series(series: Dict[str, np.ndarray], quantities: Sequence[str], plot_dir: str) -> List[str]:
    """One SVG per quantity against time."""
    missing = [q for q in quantities if q not in series]
    if missing:
        raise ArtifactError(f"quantities not in series.csv: {', '.join(missing)}")
    os.makedirs(plot_dir, exist_ok=True)
    paths = []
    for q in quantities:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(series["t"], series[q], marker=".", lw=1)
        ax.set_xlabel("t")
        ax.set_ylabel(q)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        p = os.path.join(plot_dir, f"ts_{_slug(q)}.svg")
        _save(fig, p)
        paths.append(p)
    return paths


def plot_sweep(rows: Dict[str, np.ndarray], slopes: dict, plot_dir: str) -> str:
    """Log-log plot of the sweep quantities with their fitted lines."""
    os.makedirs(plot_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    d = rows["delta"]
    fitkey = {"diff_final": "diff", "z3_final": "z3", "w3_scaled_max": "w3_scaled"}
    for col, label in SWEEP_SERIES:
        if col not in rows:
            continue
        y = rows[col]
        good = (d > 0) & (y > 0)
        if not good.any():
            continue
        (line,) = ax.loglog(d[good], y[good], "o", label=label)
        fit = slopes.get(fitkey[col], {})
        m, c = fit.get("slope"), fit.get("intercept")
        if m is not None and c is not None:
            xs = np.array([d[good].min(), d[good].max()])
            ax.loglog(xs, 10**c * xs**m, "-", color=line.get_color(), lw=1)
            r2 = fit.get("r2")
            note = f"slope {m:.2f}" + (f", R2 {r2:.3f}" if r2 is not None else "")
            ax.annotate(note, (xs[-1], 10**c * xs[-1] ** m), textcoords="offset points", xytext=(-60, 6), fontsize=8,
                        color=line.get_color())
    ax.set_xlabel("delta")
    ax.set_ylabel("energy")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    p = os.path.join(plot_dir, "sweep_slopes.svg")
    _save(fig, p)
    return p


def _verdict(v) -> str:
    if v is None:
        return "n/a"
    return "PASS" if v else "FAIL"


def _checks_lines(checks: dict) -> List[str]:
    return [f"  {name:<22} {_verdict(v)}" for name, v in checks.items()]


def _num(v) -> str:
    return "n/a" if v is None else f"{v:.4g}"


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def detect(path: str) -> Optional[str]:
    """Artifact kind stored directly in ``path``, or None."""
    if os.path.isfile(os.path.join(path, "slopes.json")) and os.path.isfile(os.path.join(path, "sweep.csv")):
        return "sweep"
    if os.path.isfile(os.path.join(path, "pressure_validation.json")):
        return "validate_pressure"
    sp = os.path.join(path, "summary.json")
    if os.path.isfile(sp) and os.path.isfile(os.path.join(path, "series.csv")):
        kind = _load_json(sp).get("kind")
        if kind in ("run3d", "run2d"):
            return kind
    return None


def _report_one(path: str, kind: str, quantities: Optional[Sequence[str]]) -> List[str]:
    plots = os.path.join(path, "plots")
    lines = [f"[{kind}] {path}"]
    if kind in ("run3d", "run2d"):
        s = _load_json(os.path.join(path, "summary.json"))
        series = read_series(os.path.join(path, "series.csv"))
        made = plot_series(series, quantities or DEFAULT_QUANTITIES[kind], plots)
        tr = s["trajectory"]
        lines.append(f"  t_final {tr['t_final']:.4g}, snapshots {tr['n_snapshots']}, aborted {tr['aborted']}")
        lines.append(f"  energy drift per unit time {_num(s.get('energy_drift_per_time'))}")
        if kind == "run3d":
            lines.append(f"  functional ratio {_num(s.get('functional_ratio'))}, max divergence {_num(tr.get('max_divergence'))}")
            for sg, fs in s.get("flux_surface", {}).items():
                lines.append(f"  flux routes ({sg}): rel diff {_num(fs['rel_diff'])} (half cadence {_num(fs['rel_diff_coarse'])})")
        lines.append(f"  plots: {len(made)} time series")
    elif kind == "sweep":
        s = _load_json(os.path.join(path, "slopes.json"))
        rows = read_series(os.path.join(path, "sweep.csv"))
        plot_sweep(rows, s["slopes"], plots)
        for name, f in s["slopes"].items():
            v = "" if f["verdict_allowed"] else " (R2 too low for a verdict)"
            lines.append(f"  slope {name:<10} {_num(f['slope'])}  R2 {_num(f['r2'])}{v}")
    else:
        s = _load_json(os.path.join(path, "pressure_validation.json"))
        lines.append(f"  Green bound max {_num(s['green_bound']['max_ratio'])} vs {s['green_bound']['constant']:.4g}")
        lines.append(f"  Neumann max |d3 G| {_num(s['neumann_max_d3G'])}")
        for a in s["agreement"]:
            lines.append(f"  agreement {a['Nx']}x{a['Nx']}x{a['Nz']}: {_num(a['max_rel_err'])}")
    lines.extend(_checks_lines(s.get("checks", {})))
    lines.append(f"  overall {_verdict(s.get('passed'))}")
    return lines


def make_report(path: str, quantities: Optional[Sequence[str]] = None) -> str:
    """Render plots into ``plots/`` and write ``summary.txt``; returns the text.

    ``path`` may hold one artifact set or several in its subdirectories.
    """
    if not os.path.isdir(path):
        raise ArtifactError(f"no artifacts: {path} is not a directory")
    targets = []
    kind = detect(path)
    if kind:
        targets.append((path, kind))
    else:
        for name in sorted(os.listdir(path)):
            sub = os.path.join(path, name)
            if os.path.isdir(sub) and detect(sub):
                targets.append((sub, detect(sub)))
    if not targets:
        raise ArtifactError(f"no artifacts found in {path}")
    lines = []
    for p, k in targets:
        lines.extend(_report_one(p, k, quantities))
        lines.append("")
    text = "\n".join(lines)
    with open(os.path.join(path, "summary.txt"), "w") as fh:
        fh.write(text)
    return text
