"""The two-qubit benchmark: a six-control U(4) system steering to a C-NOT
propagator, with the paired deterministic/stochastic Monte-Carlo comparison,
exponential-rate fits, and the one-period contraction diagnostic Q."""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .controls import AmplitudeVector, lyapunov
from .errors import InsufficientData, NotInW, StabilizerError
from .lie import SystemDef
from .simulate import FixedAmps, RunConfig, RunLog, StochasticAmps, run
from .unitary import check_unitary, gap_from_minus_one

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

V_FLOOR = 1e-14  # below this, ln V is numerical noise


@dataclass(frozen=True)
class CnotExperiment:
    """n=4, m=6 benchmark: single-qubit x/y drives on both qubits, the full
    exchange coupling, and the identity (global-phase) channel."""

    sys: SystemDef
    x_goal_cnot: np.ndarray      # exp(i pi/2) * C-NOT permutation
    x_goal_academic: np.ndarray  # second benchmark goal
    M: int = 4
    a_max: float = 0.25
    gain: float = 0.75
    T: float = 25.0

    @property
    def gains(self):
        return np.full(self.sys.m, self.gain)

    @property
    def x0(self):
        return np.eye(4, dtype=complex)


def build_cnot_system():
    """Construct the benchmark exactly as printed: six Hamiltonians
    H1..H6 (generators S_k = -i H_k) and both goal propagators."""
    hams = [
        np.kron(SX, I2),
        np.kron(I2, SX),
        np.kron(SY, I2),
        np.kron(I2, SY),
        np.kron(SX, SX) + np.kron(SY, SY) + np.kron(SZ, SZ),
        np.kron(I2, I2),
    ]
    sys = SystemDef(tuple(-1j * h for h in hams))
    x1 = np.exp(1j * np.pi / 2) * np.array(
        [[1, 0, 0, 0],
         [0, 1, 0, 0],
         [0, 0, 0, 1],
         [0, 0, 1, 0]], dtype=complex)
    x2 = np.array(
        [[1, 0, 0, 0],
         [0, 0, -1, 0],
         [0, 1, 0, 0],
         [0, 0, 0, 1]], dtype=complex)
    return CnotExperiment(sys=sys, x_goal_cnot=x1, x_goal_academic=x2)


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (j, ln V(jT)) over the sample tail.

    slope = -inf flags runs whose V collapsed below the numerical floor
    before enough tail samples accumulated: convergence too fast to
    measure, reported as success.
    """

    slope: float
    r_squared: float
    n_points: int

    @property
    def underflowed(self):
        return math.isinf(self.slope) and self.slope < 0


def rate_fit(lyap_samples, tail_fraction=0.6):
    """Fit the exponential decay rate of sampled Lyapunov values.

    Accepts a RunLog or a 1-D array of V(jT) values.  Uses the final
    tail_fraction of samples, ignoring entries at or below the V floor.
    """
    if isinstance(lyap_samples, RunLog):
        v = np.asarray(lyap_samples.period_lyap, dtype=float)
    else:
        v = np.asarray(lyap_samples, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise InsufficientData("need a 1-D sequence of at least 2 samples")
    k0 = int(math.floor(len(v) * (1.0 - tail_fraction)))
    j = np.arange(len(v), dtype=float)[k0:]
    tail = v[k0:]
    ok = np.isfinite(tail) & (tail > V_FLOOR)
    if int(ok.sum()) < 5:
        if np.any(tail <= V_FLOOR):
            return RateFit(slope=-math.inf, r_squared=1.0, n_points=int(ok.sum()))
        raise InsufficientData(f"only {int(ok.sum())} usable tail samples")
    y = np.log(tail[ok])
    x = j[ok]
    design = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    pred = design @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(coef[0]), r_squared=float(r2), n_points=int(ok.sum()))


def _worker_count():
    env = os.environ.get("STABILIZER_THREADS", "0")
    try:
        k = int(env)
    except ValueError:
        k = 0
    if k == 0:  # auto
        k = os.cpu_count() or 1
    return max(1, k)


@dataclass
class MonteCarloRun:
    p: int
    amps: AmplitudeVector
    det_err: dict = field(default_factory=dict)    # goal name -> final error
    stoch_err: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class MonteCarloReport:
    runs: list
    n_periods: int
    seed: int
    summary: dict
    logs: Optional[dict] = None  # (goal, strategy) -> list of RunLog


def _mc_single(exp: CnotExperiment, p, seed, n_periods, steps_per_period,
               pin_first, keep_logs):
    """One paired Monte-Carlo index: deterministic and stochastic runs for
    both goals, sharing the fixed draw a^p across goals."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(p,)))
    # Fixed deterministic amplitudes are drawn on the full interval
    # [-a_max, a_max]; the stochastic per-period draws use the same bound
    # so the comparison is like-for-like (see decisions ledger).
    a_p = AmplitudeVector(rng.uniform(-exp.a_max, exp.a_max, size=(exp.sys.m, exp.M)))
    rec = MonteCarloRun(p=p, amps=a_p)
    logs = {}
    goals = {"cnot": exp.x_goal_cnot, "academic": exp.x_goal_academic}
    for gname, goal in goals.items():
        for strategy, mode in (
            ("det", FixedAmps(a_p)),
            ("stoch", StochasticAmps(bound=exp.a_max, M=exp.M,
                                     pin_first=pin_first, first=a_p if pin_first else None)),
        ):
            cfg = RunConfig(
                sys=exp.sys, T=exp.T, gains=exp.gains, x0=exp.x0, x_goal=goal,
                n_periods=n_periods, amps_mode=mode,
                steps_per_period=steps_per_period, seed=seed, run_id=p,
            )
            try:
                log = run(cfg)
            except StabilizerError as exc:
                rec.error = f"{gname}/{strategy}: {type(exc).__name__}: {exc}"
                continue
            (rec.det_err if strategy == "det" else rec.stoch_err)[gname] = log.final_error
            if keep_logs:
                logs[(gname, strategy)] = log
    return rec, logs


def monte_carlo(exp: CnotExperiment, n_runs=50, n_periods=25, seed=0,
                steps_per_period=4096, pin_first=False, keep_logs=False):
    """Paired comparison over n_runs indices p: a fresh fixed a^p per p
    (same a^p for both goals), deterministic vs per-period stochastic.

    Per-run failures are recorded, not fatal.  Fully reproducible from the
    seed; the worker pool size (STABILIZER_THREADS, 0 = auto) does not
    affect results.
    """
    workers = _worker_count()
    args = [(exp, p, seed, n_periods, steps_per_period, pin_first, keep_logs)
            for p in range(n_runs)]
    if workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mc_single_star, args))
    else:
        results = [_mc_single(*a) for a in args]
    runs = [r for r, _ in results]
    logs = {}
    if keep_logs:
        for _, lg in results:
            for key, val in lg.items():
                logs.setdefault(key, []).append(val)

    def _collect(attr, gname):
        vals = [getattr(r, attr).get(gname) for r in runs]
        return np.array([v for v in vals if v is not None])

    summary = {}
    for gname in ("cnot", "academic"):
        de = _collect("det_err", gname)
        se = _collect("stoch_err", gname)
        summary[gname] = {
            "det_median": float(np.median(de)) if len(de) else None,
            "stoch_median": float(np.median(se)) if len(se) else None,
            "det_min": float(de.min()) if len(de) else None,
            "det_max": float(de.max()) if len(de) else None,
            "stoch_min": float(se.min()) if len(se) else None,
            "stoch_max": float(se.max()) if len(se) else None,
        }
        if len(de) and len(se):
            summary[gname]["stochastic_median_wins"] = bool(
                np.median(se) <= np.median(de))
    return MonteCarloReport(runs=runs, n_periods=n_periods, seed=seed,
                            summary=summary, logs=logs if keep_logs else None)


def _mc_single_star(a):
    return _mc_single(*a)


def empirical_Q(exp: CnotExperiment, x_hat, n_samples, seed=0,
                steps_per_period=1024, return_samples=False):
    """Monte-Carlo estimate of the mean one-period Lyapunov contraction.

    Averages V(X~(0)) - V(X~(T)) over uniform amplitude draws on
    [-a_max/2, a_max/2]^{mM}, starting the tracking error at x_hat (the
    time integral of dV/dt over one period telescopes).  Nonnegative, and
    zero only at the identity.
    """
    x_hat = check_unitary(x_hat, what="x_hat")
    if gap_from_minus_one(x_hat) <= 1e-6:
        raise NotInW("x_hat has an eigenvalue too close to -1")
    v0 = lyapunov(x_hat)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(97,)))
    samples = np.empty(n_samples)
    # Tracking error x_hat corresponds to plant state X_goal @ x_hat.
    x0 = exp.x_goal_cnot @ x_hat
    for i in range(n_samples):
        amps = AmplitudeVector(
            rng.uniform(-exp.a_max / 2.0, exp.a_max / 2.0, size=(exp.sys.m, exp.M)))
        cfg = RunConfig(
            sys=exp.sys, T=exp.T, gains=exp.gains, x0=x0,
            x_goal=exp.x_goal_cnot, n_periods=1, amps_mode=FixedAmps(amps),
            steps_per_period=steps_per_period, seed=seed, run_id=i,
        )
        log = run(cfg)
        samples[i] = v0 - float(log.period_lyap[-1])
    est = float(samples.mean())
    if return_samples:
        return est, samples
    return est
