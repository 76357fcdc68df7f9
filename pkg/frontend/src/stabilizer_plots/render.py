"""Render simulation-log CSV files into the three standard figures.

Inputs are the files written by the stabilizer CLI:
  periods.csv    j, t, err_frobenius, lyapunov, amps_hash
  dense.csv      t, u_norm, lyapunov
  run.json       config echo + summary + rate_fit
  montecarlo.csv p, det/stoch final errors per goal

Rendering is deterministic for identical inputs: fixed style, no
timestamps embedded in the output files.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("decay", "loglyap", "montecarlo")

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "stabilizer-plots",
}


class RenderError(Exception):
    """Missing/odd input files or columns."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    in_dir: Path
    out_path: Path
    zoom: Optional[tuple] = None  # (lo, hi) error window for the zoom panel

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")


def _read_csv(path, required):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise RenderError(f"{path} is empty")
    missing = [c for c in required if c not in rows[0]]
    if missing:
        raise RenderError(f"{path} lacks columns: {', '.join(missing)}")
    out = {}
    for col in required:
        try:
            out[col] = np.array([float(r[col]) for r in rows])
        except ValueError:
            raise RenderError(f"{path}: column {col} has non-numeric entries") from None
    if not all(np.isfinite(v).all() for v in out.values()):
        raise RenderError(f"{path}: non-finite values")
    return out


def _savefig(fig, out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    kw = {}
    if out_path.suffix.lower() == ".svg":
        kw["metadata"] = {"Date": None}  # drop the timestamp for reproducibility
    fig.savefig(out_path, **kw)
    plt.close(fig)


def _render_decay(spec):
    periods = _read_csv(spec.in_dir / "periods.csv", ["t", "err_frobenius"])
    dense = _read_csv(spec.in_dir / "dense.csv", ["t", "u_norm"])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax1.semilogy(periods["t"], np.maximum(periods["err_frobenius"], 1e-18),
                 "o-", ms=3.5, lw=1.0, color="tab:blue")
    ax1.set_ylabel("||X(jT) - X_goal||_F")
    ax1.set_title("tracking error at period samples")
    ax2.plot(dense["t"], dense["u_norm"], lw=0.7, color="tab:orange")
    ax2.set_ylabel("||u(t)||")
    ax2.set_xlabel("t")
    ax2.set_title("input norm")
    fig.tight_layout()
    _savefig(fig, spec.out_path)
    return {"n_periods": len(periods["t"]) - 1, "n_dense": len(dense["t"])}


def _fit_overlay(j, ln_v, slope, tail_fraction=0.6):
    """Line with the externally supplied slope, intercept fitted to the same
    tail the rate fit used."""
    k0 = int(math.floor(len(j) * (1.0 - tail_fraction)))
    jj, yy = j[k0:], ln_v[k0:]
    keep = np.isfinite(yy)
    intercept = float(np.mean(yy[keep] - slope * jj[keep]))
    return intercept


def _render_loglyap(spec):
    periods = _read_csv(spec.in_dir / "periods.csv", ["j", "lyapunov"])
    j = periods["j"]
    v = periods["lyapunov"]
    ln_v = np.where(v > 0, np.log(np.maximum(v, 1e-300)), np.nan)
    fit = None
    run_json = spec.in_dir / "run.json"
    if run_json.exists():
        try:
            fit = json.loads(run_json.read_text()).get("rate_fit")
        except json.JSONDecodeError as exc:
            raise RenderError(f"{run_json}: {exc}") from None
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(j, ln_v, "o", ms=4, color="tab:blue", label="ln V(jT)")
    meta = {"n_samples": len(j), "overlay_slope": None}
    if fit and isinstance(fit.get("slope"), (int, float)):
        slope = float(fit["slope"])
        intercept = _fit_overlay(j, ln_v, slope)
        ax.plot(j, slope * j + intercept, "-", lw=1.2, color="tab:red",
                label=f"fit: slope {slope:.3f}/period")
        meta["overlay_slope"] = slope
        meta["overlay_intercept"] = intercept
    ax.set_xlabel("period index j")
    ax.set_ylabel("ln V(jT)")
    ax.set_title("Lyapunov decay at sampling times")
    ax.legend()
    fig.tight_layout()
    _savefig(fig, spec.out_path)
    return meta


def _render_montecarlo(spec):
    cols = ["p", "det_err_cnot", "stoch_err_cnot", "det_err_academic", "stoch_err_academic"]
    mc = _read_csv(spec.in_dir / "montecarlo.csv", cols)
    p = mc["p"]
    panels = [
        ("primary goal", "det_err_cnot", "stoch_err_cnot"),
        ("second goal", "det_err_academic", "stoch_err_academic"),
    ]
    fig, axes = plt.subplots(3, 1, figsize=(7, 8))
    for ax, (title, det_col, sto_col) in zip(axes[:2], panels):
        ax.semilogy(p, np.maximum(mc[det_col], 1e-18), "s", ms=4,
                    color="tab:blue", label="deterministic")
        ax.semilogy(p, np.maximum(mc[sto_col], 1e-18), "o", ms=4,
                    color="tab:red", label="stochastic")
        ax.set_title(f"final error, {title}")
        ax.set_ylabel("error")
        ax.legend()
    ax = axes[2]
    if spec.zoom is not None:
        lo, hi = spec.zoom
    else:
        lo, hi = 0.0, 2.0 * float(np.max(mc["stoch_err_cnot"]))
    ax.plot(p, mc["det_err_cnot"], "s", ms=4, color="tab:blue", label="deterministic")
    ax.plot(p, mc["stoch_err_cnot"], "o", ms=4, color="tab:red", label="stochastic")
    ax.set_ylim(lo, hi if hi > lo else lo + 1.0)
    ax.set_title("zoom, primary goal")
    ax.set_xlabel("run index p")
    ax.set_ylabel("error")
    ax.legend()
    fig.tight_layout()
    _savefig(fig, spec.out_path)
    return {"n_runs": len(p), "zoom": (lo, hi)}


def render(spec: FigureSpec):
    """Render one figure; returns a small metadata dict for callers/tests."""
    with plt.rc_context(_STYLE):
        if spec.kind == "decay":
            return _render_decay(spec)
        if spec.kind == "loglyap":
            return _render_loglyap(spec)
        return _render_montecarlo(spec)
