"""Command-line front end: JSON config in, CSV/JSON logs out.

Subcommands: check | simulate | montecarlo | rate.  Complex matrices are
encoded as nested arrays of [re, im] pairs.  All numeric output is written
with 17 significant digits and a dot decimal separator, so identical inputs
produce byte-identical files.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .controls import AmplitudeVector
from .errors import InsufficientData, StabilizerError
from .experiments import build_cnot_system, monte_carlo, rate_fit
from .lie import SystemDef, admissibility_rank, lie_closure
from .simulate import FixedAmps, RunConfig, StochasticAmps, run

_NUMBER = {"type": "number"}
_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "minItems": 1,
        "items": {
            "type": "array",
            "prefixItems": [_NUMBER, _NUMBER],
            "minItems": 2,
            "maxItems": 2,
        },
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": ["cnot-u4"]},
        "goal": {"enum": ["cnot", "academic"]},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["generators"],
            "properties": {"generators": {"type": "array", "minItems": 1, "items": _MATRIX}},
        },
        "T": {"type": "number", "exclusiveMinimum": 0},
        "gains": {
            "anyOf": [
                {"type": "number", "exclusiveMinimum": 0},
                {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
            ]
        },
        "amps_mode": {
            "anyOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "amplitudes"],
                    "properties": {
                        "type": {"const": "fixed"},
                        "amplitudes": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "minItems": 1, "items": _NUMBER},
                        },
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"const": "stochastic"},
                        "bound": {"type": "number", "exclusiveMinimum": 0},
                        "a_max": {"type": "number", "exclusiveMinimum": 0},
                        "M": {"type": "integer", "minimum": 1},
                        "pin_first": {"type": "boolean"},
                    },
                },
            ]
        },
        "X0": {"anyOf": [{"const": "identity"}, _MATRIX]},
        "X_goal": _MATRIX,
        "n_periods": {"type": "integer", "minimum": 1},
        "steps_per_period": {"type": "integer", "minimum": 16},
        "strategy": {"enum": ["direct", "two_step", "phase_shifted"]},
        "seed": {"type": "integer"},
        "run_id": {"type": "integer"},
        "dense_stride": {"type": "integer", "minimum": 1},
        "switch_margin": {"type": "number", "exclusiveMinimum": 0},
        "switch_tol": {"type": "number", "exclusiveMinimum": 0},
        "record_controls": {"type": "boolean"},
        "montecarlo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_runs": {"type": "integer", "minimum": 1},
                "n_periods": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "steps_per_period": {"type": "integer", "minimum": 16},
                "pin_first": {"type": "boolean"},
            },
        },
    },
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


class ConfigError(StabilizerError):
    """Configuration failed schema or semantic validation (exit code 2)."""


def _fmt(x):
    """17 significant digits, locale-independent."""
    return format(float(x), ".17g")


def matrix_to_json(mat):
    m = np.asarray(mat, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(obj, what="matrix"):
    try:
        arr = np.asarray(obj, dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{what}: ragged matrix literal: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{what}: expected a square matrix of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def load_config(path):
    """Read and schema-validate a config file.  A run.json produced by
    `simulate` is accepted too: its `config` member is unwrapped, which
    makes every run reproducible from its own log."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if isinstance(doc, dict) and "config" in doc and "preset" not in doc:
        doc = doc["config"]
    return validate_config(doc)


def validate_config(doc):
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {loc}: {e.message}")
    return doc


def _build_system(doc):
    if "preset" in doc:
        exp = build_cnot_system()
        return exp.sys, exp
    if "system" not in doc:
        raise ConfigError("config needs either a preset or a system")
    gens = [matrix_from_json(g, f"system/generators/{i}") for i, g in enumerate(doc["system"]["generators"])]
    try:
        return SystemDef(tuple(gens)), None
    except StabilizerError as exc:
        raise ConfigError(str(exc)) from None


def _build_amps_mode(doc, m, default_M, default_bound):
    spec = doc.get("amps_mode")
    if spec is None:
        if default_bound is None:
            raise ConfigError("config needs amps_mode")
        return StochasticAmps(bound=default_bound, M=default_M)
    if spec["type"] == "fixed":
        amps = np.asarray(spec["amplitudes"], dtype=float)
        if amps.shape[0] != m:
            raise ConfigError(f"amplitudes have {amps.shape[0]} rows for {m} controls")
        return FixedAmps(AmplitudeVector(amps))
    if "bound" in spec and "a_max" in spec:
        raise ConfigError("give either bound or a_max, not both")
    if "bound" in spec:
        bound = float(spec["bound"])
    elif "a_max" in spec:
        bound = float(spec["a_max"]) / 2.0  # draws on [-a_max/2, a_max/2]
    elif default_bound is not None:
        bound = default_bound
    else:
        raise ConfigError("stochastic amps_mode needs bound or a_max")
    M = int(spec.get("M", default_M))
    if spec.get("pin_first"):
        raise ConfigError("pin_first requires fixed first amplitudes; use the montecarlo command")
    return StochasticAmps(bound=bound, M=M)


def build_run_config(doc, seed_override=None):
    sysdef, exp = _build_system(doc)
    if exp is not None:
        t_default, gains_default = exp.T, exp.gain
        default_M, default_bound = exp.M, exp.a_max
        goal_default = exp.x_goal_cnot if doc.get("goal", "cnot") == "cnot" else exp.x_goal_academic
        x0_default = exp.x0
    else:
        t_default = gains_default = default_bound = None
        default_M = 4
        goal_default = None
        x0_default = np.eye(sysdef.n, dtype=complex)
    T = doc.get("T", t_default)
    if T is None:
        raise ConfigError("config needs T")
    gains = doc.get("gains", gains_default)
    if gains is None:
        raise ConfigError("config needs gains")
    if "X_goal" in doc:
        x_goal = matrix_from_json(doc["X_goal"], "X_goal")
    elif goal_default is not None:
        x_goal = goal_default
    else:
        raise ConfigError("config needs X_goal")
    x0 = doc.get("X0", "identity")
    x0 = x0_default if x0 == "identity" else matrix_from_json(x0, "X0")
    amps_mode = _build_amps_mode(doc, sysdef.m, default_M, default_bound)
    seed = int(doc.get("seed", 0)) if seed_override is None else int(seed_override)
    try:
        return RunConfig(
            sys=sysdef,
            T=float(T),
            gains=gains,
            x0=x0,
            x_goal=x_goal,
            n_periods=int(doc.get("n_periods", 10)),
            amps_mode=amps_mode,
            steps_per_period=int(doc.get("steps_per_period", 4096)),
            strategy=doc.get("strategy", "direct"),
            seed=seed,
            run_id=int(doc.get("run_id", 0)),
            dense_stride=int(doc.get("dense_stride", 16)),
            record_controls=bool(doc.get("record_controls", False)),
            switch_margin=float(doc.get("switch_margin", 0.1)),
            switch_tol=float(doc.get("switch_tol", 0.3)),
        )
    except StabilizerError:
        raise


def config_to_json(cfg: RunConfig):
    """Expanded, preset-free echo of a RunConfig; parses back to the same run."""
    doc = {
        "system": {"generators": [matrix_to_json(g) for g in cfg.sys.generators]},
        "T": cfg.T,
        "gains": [float(g) for g in cfg.gains],
        "X0": matrix_to_json(cfg.x0),
        "X_goal": matrix_to_json(cfg.x_goal),
        "n_periods": cfg.n_periods,
        "steps_per_period": cfg.steps_per_period,
        "strategy": cfg.strategy,
        "seed": cfg.seed,
        "run_id": cfg.run_id,
        "dense_stride": cfg.dense_stride,
        "record_controls": cfg.record_controls,
        "switch_margin": cfg.switch_margin,
        "switch_tol": cfg.switch_tol,
    }
    if isinstance(cfg.amps_mode, FixedAmps):
        doc["amps_mode"] = {
            "type": "fixed",
            "amplitudes": [list(map(float, row)) for row in cfg.amps_mode.amps.a],
        }
    else:
        doc["amps_mode"] = {
            "type": "stochastic",
            "bound": cfg.amps_mode.bound,
            "M": cfg.amps_mode.M,
        }
    return doc


def cmd_check(args):
    doc = load_config(args.config) if args.config else {}
    if args.preset:
        doc = dict(doc)
        doc["preset"] = args.preset
        validate_config(doc)
    sysdef, exp = _build_system(doc)
    full = sysdef.n * sysdef.n
    report = lie_closure(sysdef)
    print(f"rank {report.rank}/{full}, depth {report.max_depth_used}")
    ok = report.rank == full
    amps_spec = doc.get("amps_mode")
    if amps_spec is not None and amps_spec.get("type") == "fixed":
        T = doc.get("T", exp.T if exp else None)
        if T is None:
            raise ConfigError("admissibility check needs T")
        amps = np.asarray(amps_spec["amplitudes"], dtype=float)
        arank = admissibility_rank(sysdef, amps, float(T))
        print(f"admissibility rank {arank}/{full}")
        ok = ok and arank == full
    return 0 if ok else 1


def _write_periods_csv(path, log):
    hashes = [a.digest() for a in log.amps_history]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["j", "t", "err_frobenius", "lyapunov", "amps_hash"])
        for j in range(len(log.period_j)):
            h = hashes[max(0, j - 1)] if hashes else ""
            lyap = log.period_lyap[j]
            wr.writerow([
                int(log.period_j[j]), _fmt(log.period_t[j]), _fmt(log.period_err[j]),
                _fmt(lyap) if math.isfinite(lyap) else "inf", h,
            ])


def _write_dense_csv(path, log):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "u_norm", "lyapunov"])
        for t, u, v in zip(log.dense_t, log.dense_unorm, log.dense_lyap):
            wr.writerow([_fmt(t), _fmt(u), _fmt(v)])


def _rate_fit_json(log):
    try:
        fit = rate_fit(log)
    except (InsufficientData, StabilizerError):
        return None
    return {
        "slope": "-inf" if fit.underflowed else fit.slope,
        "r_squared": fit.r_squared,
        "n_points": fit.n_points,
        "underflowed": fit.underflowed,
    }


def cmd_simulate(args):
    doc = load_config(args.config) if args.config else {}
    if args.preset:
        doc = dict(doc)
        doc["preset"] = args.preset
        validate_config(doc)
    cfg = build_run_config(doc, seed_override=args.seed)
    log = run(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_periods_csv(out / "periods.csv", log)
    _write_dense_csv(out / "dense.csv", log)
    payload = {
        "config": config_to_json(cfg),
        "seed": cfg.seed,
        "summary": {
            "final_error": log.final_error,
            "final_lyapunov": float(log.period_lyap[-1]) if math.isfinite(log.period_lyap[-1]) else None,
            "n_periods": cfg.n_periods,
            "switch_period": log.switch_period,
            "phase_shift": log.phase_shift,
        },
        "rate_fit": _rate_fit_json(log),
    }
    (out / "run.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"final error {log.final_error:.6e} after {cfg.n_periods} periods -> {out}")
    return 0


def cmd_montecarlo(args):
    doc = load_config(args.config) if args.config else {}
    if args.preset:
        doc = dict(doc)
        doc["preset"] = args.preset
        validate_config(doc)
    if "preset" not in doc:
        raise ConfigError("montecarlo needs the cnot-u4 preset")
    exp = build_cnot_system()
    mc = doc.get("montecarlo", {})
    seed = int(mc.get("seed", doc.get("seed", 0))) if args.seed is None else int(args.seed)
    report = monte_carlo(
        exp,
        n_runs=int(mc.get("n_runs", 50)),
        n_periods=int(mc.get("n_periods", 25)),
        seed=seed,
        steps_per_period=int(mc.get("steps_per_period", doc.get("steps_per_period", 4096))),
        pin_first=bool(mc.get("pin_first", False)),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "montecarlo.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["p", "det_err_cnot", "stoch_err_cnot",
                     "det_err_academic", "stoch_err_academic", "error"])
        for r in report.runs:
            row = [r.p]
            for d, g in ((r.det_err, "cnot"), (r.stoch_err, "cnot"),
                         (r.det_err, "academic"), (r.stoch_err, "academic")):
                row.append(_fmt(d[g]) if g in d else "")
            row.append(r.error or "")
            wr.writerow(row)
    cn = report.summary.get("cnot", {})
    verdict = None
    if cn.get("stoch_max") is not None and cn.get("det_min") is not None:
        verdict = bool(cn["stoch_max"] <= 10.0 * cn["det_min"])
    payload = {
        "n_runs": len(report.runs),
        "n_periods": report.n_periods,
        "seed": report.seed,
        "summary": report.summary,
        "verdicts": {
            "stochastic_median_wins_cnot": cn.get("stochastic_median_wins"),
            "stoch_max_within_10x_det_min_cnot": verdict,
        },
    }
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    n_failed = sum(1 for r in report.runs if r.error)
    print(f"{len(report.runs)} runs ({n_failed} with errors) -> {out}")
    return 0 if n_failed < len(report.runs) else 3


def cmd_rate(args):
    path = Path(args.indir) / "periods.csv"
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not rows or "lyapunov" not in rows[0]:
        raise ConfigError(f"{path} lacks a lyapunov column")
    v = np.array([float(r["lyapunov"]) for r in rows])
    try:
        fit = rate_fit(v, tail_fraction=args.tail)
    except InsufficientData as exc:
        print(json.dumps({"error": {"type": "InsufficientData", "message": str(exc)}}))
        return 3
    print(json.dumps({
        "slope": "-inf" if fit.underflowed else fit.slope,
        "r_squared": fit.r_squared,
        "n_points": fit.n_points,
        "underflowed": fit.underflowed,
    }, sort_keys=True))
    return 0


def make_parser():
    ap = argparse.ArgumentParser(
        prog="stabilizer",
        description="Sampled-time stabilizing control laws on the unitary group",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_out):
        p.add_argument("--config", help="JSON config file (or a run.json to reproduce)")
        p.add_argument("--preset", choices=["cnot-u4"], help="built-in experiment preset")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("check", help="controllability / admissibility report")
    common(p, needs_out=False)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("simulate", help="run one closed-loop simulation")
    common(p, needs_out=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("montecarlo", help="paired deterministic/stochastic comparison")
    common(p, needs_out=True)
    p.set_defaults(fn=cmd_montecarlo)

    p = sub.add_parser("rate", help="exponential-rate fit from an existing run directory")
    p.add_argument("--in", dest="indir", required=True, help="directory holding periods.csv")
    p.add_argument("--tail", type=float, default=0.6, help="fraction of samples to fit")
    p.set_defaults(fn=cmd_rate)
    return ap


def main(argv=None):
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(json.dumps({"error": {"type": "ConfigError", "message": str(exc)}}),
              file=sys.stderr)
        return 2
    except StabilizerError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
