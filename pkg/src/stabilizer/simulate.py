"""Closed-loop geometric simulation on U(n).

Co-evolves the reference trajectory and the plant with a group-preserving
exponential-midpoint scheme (order 2), samples at period boundaries, and
implements the two-step and global-phase strategies for goals outside the
domain of the Lyapunov function.
"""

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernel
from .controls import AmplitudeVector, as_gains, lyapunov, sample_amplitudes
from .errors import IntegratorTolerance, NotInW, StabilizerError, SwitchNeverReached
from .lie import SystemDef
from .unitary import (
    SINGULAR_TOL,
    UNITARITY_TOL,
    check_unitary,
    eig_unitary,
    expm_skew,
    frobenius_norm,
    gap_from_minus_one,
    unitarize,
)

# Per-substep Lyapunov increases beyond this abort the run: the continuous
# law makes V non-increasing, so anything larger flags integrator trouble.
V_MONOTONE_TOL = 1e-8


@dataclass(frozen=True)
class FixedAmps:
    """One amplitude vector held for the whole run (deterministic law)."""

    amps: AmplitudeVector


@dataclass(frozen=True)
class StochasticAmps:
    """Fresh per-period amplitude draws: M harmonics, entries uniform on
    [-bound, bound].

    pin_first replays `first` on period 0 (so a paired deterministic run and
    a stochastic run coincide over the first period).
    """

    bound: float
    M: int
    pin_first: bool = False
    first: Optional[AmplitudeVector] = None

    def __post_init__(self):
        if self.bound <= 0:
            raise StabilizerError("stochastic amplitude bound must be positive")
        if self.M < 1:
            raise StabilizerError("need at least one harmonic")
        if self.pin_first and self.first is None:
            raise StabilizerError("pin_first requires the first amplitude vector")


@dataclass(frozen=True)
class TrajectoryPair:
    """Reference and plant states at a common time."""

    x_bar: np.ndarray
    x: np.ndarray
    t: float


@dataclass
class RunConfig:
    sys: SystemDef
    T: float
    gains: np.ndarray
    x0: np.ndarray
    x_goal: np.ndarray
    n_periods: int
    amps_mode: Union[FixedAmps, StochasticAmps]
    steps_per_period: int = 4096
    strategy: str = "direct"
    seed: int = 0
    run_id: int = 0
    dense_stride: int = 16
    record_controls: bool = False
    switch_margin: float = 0.1
    switch_tol: float = 0.3
    unitarity_tol: float = UNITARITY_TOL
    singular_tol: float = SINGULAR_TOL

    def __post_init__(self):
        if self.T <= 0:
            raise StabilizerError("period T must be positive")
        if self.n_periods < 1:
            raise StabilizerError("n_periods must be >= 1")
        if self.steps_per_period < 16:
            raise StabilizerError("steps_per_period must be >= 16")
        if self.strategy not in ("direct", "two_step", "phase_shifted"):
            raise StabilizerError(f"unknown strategy {self.strategy!r}")
        self.gains = as_gains(self.gains, self.sys.m)
        self.x0 = check_unitary(self.x0, tol=self.unitarity_tol, what="X0")
        self.x_goal = check_unitary(self.x_goal, tol=self.unitarity_tol, what="X_goal")
        if isinstance(self.amps_mode, FixedAmps) and self.amps_mode.amps.m != self.sys.m:
            raise StabilizerError("amplitude rows must match the control count")
        if self.strategy == "direct":
            gap = gap_from_minus_one(self.x_goal @ self.x0.conj().T)
            if gap <= self.singular_tol:
                raise NotInW(
                    f"X_goal X0^dag has an eigenvalue within {gap:.3e} of -1; "
                    "use the two_step or phase_shifted strategy"
                )


@dataclass
class PeriodLog:
    """Dense diagnostics from one period of closed-loop integration."""

    dense_t: np.ndarray
    dense_unorm: np.ndarray
    dense_lyap: np.ndarray
    v_end: float
    max_v_increase: float
    min_gap: float
    controls: Optional[np.ndarray]


@dataclass
class RunLog:
    """Per-period samples plus decimated dense diagnostics for one run."""

    config: RunConfig
    period_j: np.ndarray
    period_t: np.ndarray
    period_err: np.ndarray
    period_lyap: np.ndarray
    period_states: list
    amps_history: list
    dense_t: np.ndarray
    dense_unorm: np.ndarray
    dense_lyap: np.ndarray
    effective_goal: np.ndarray
    switch_period: Optional[int] = None
    phase_shift: Optional[float] = None
    controls: Optional[np.ndarray] = None
    min_gap: float = math.inf

    @property
    def final_error(self):
        return float(self.period_err[-1])

    @property
    def final_state(self):
        return self.period_states[-1]


def _period_rng(seed, run_id, j):
    """Counter-style generator keyed by (run, period): reproducible and
    order-independent across parallel runs."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(run_id, j)))


def _amps_for_period(cfg: RunConfig, sysdef: SystemDef, j):
    mode = cfg.amps_mode
    if isinstance(mode, FixedAmps):
        return mode.amps
    if mode.pin_first and j == 0:
        return mode.first
    rng = _period_rng(cfg.seed, cfg.run_id, j)
    # sample_amplitudes draws on [-a/2, a/2]; the mode's bound is a half-range.
    return sample_amplitudes(rng, sysdef.m, mode.M, 2.0 * mode.bound)


def integrate_reference(sys: SystemDef, amps, T, x_init, steps):
    """One period of the reference trajectory on a uniform (steps+1)-grid.

    Explicit exponential midpoint: X[i+1] = exp(h A(t_i + h/2)) X[i].  The
    control is odd about T/2, so midpoint factors pair into exact inverses
    and the grid endpoint returns to x_init up to rounding; the same pairing
    yields the reflection symmetry X(t) = X(T - t) on grid points.
    """
    if steps < 16:
        raise StabilizerError("steps must be >= 16")
    x_init = check_unitary(x_init, what="reference initial state")
    a = amps.a if isinstance(amps, AmplitudeVector) else np.asarray(amps, dtype=float)
    h = T / steps
    w = 2 * np.pi / T
    ell = np.arange(1, a.shape[1] + 1)
    t_mid = (np.arange(steps) + 0.5) * h
    u = (a @ np.sin(np.multiply.outer(ell * w, t_mid))).T  # (steps, m)
    gens = np.stack(sys.generators)
    factors = expm_skew(np.einsum("ik,kab->iab", u, gens) * h)
    out = np.empty((steps + 1, sys.n, sys.n), dtype=complex)
    out[0] = x_init
    for i in range(steps):
        out[i + 1] = factors[i] @ out[i]
    drift = frobenius_norm(out[-1].conj().T @ out[-1] - np.eye(sys.n))
    if drift > UNITARITY_TOL:
        raise IntegratorTolerance(f"reference lost unitarity: {drift:.3e}")
    return out


def _advance_period_numpy(x0, xbar0, a, gens, gains, T, nsteps, gap_floor,
                          dense_stride, record_u):
    """Plain-numpy twin of the compiled kernel (same scheme, same returns)."""
    n = x0.shape[0]
    m = gens.shape[0]
    h = T / nsteps
    w = 2 * np.pi / T
    ell = np.arange(1, a.shape[1] + 1)
    eye = np.eye(n)

    def uref(t):
        return a @ np.sin(ell * w * t)

    def feedback(x, xbar):
        xt = xbar.conj().T @ x
        p = np.linalg.inv(xt + eye)
        cay = (xt - eye) @ p
        v = float(np.sum(np.abs(cay) ** 2))
        z = xt @ cay @ p @ p
        zc = xbar @ z @ xbar.conj().T
        tr = np.einsum("ij,kji->k", zc, gens)
        return gains * tr.real, v, 1.0 / frobenius_norm(p)

    x = x0.copy()
    xbar = xbar0.copy()
    nd_cap = nsteps // dense_stride if dense_stride > 0 else 0
    dense_unorm = np.zeros(nd_cap)
    dense_lyap = np.zeros(nd_cap)
    u_out = np.zeros((nsteps, m)) if record_u else None
    _, v_prev, gap = feedback(x, xbar)
    min_gap = gap
    max_inc = -math.inf
    nd = 0
    for i in range(nsteps):
        tl = i * h
        tm = tl + 0.5 * h
        ufb, v, gap = feedback(x, xbar)
        min_gap = min(min_gap, gap)
        if gap < gap_floor:
            return x, xbar, v, max_inc, min_gap, 1, dense_unorm, dense_lyap, nd, u_out
        ul = uref(tl)
        xh = expm_skew(np.tensordot(ul + ufb, gens, axes=1), 0.5 * h) @ x
        xbh = expm_skew(np.tensordot(ul, gens, axes=1), 0.5 * h) @ xbar
        ufb, v, gap = feedback(xh, xbh)
        min_gap = min(min_gap, gap)
        if gap < gap_floor:
            return x, xbar, v, max_inc, min_gap, 1, dense_unorm, dense_lyap, nd, u_out
        um = uref(tm)
        utot = um + ufb
        if record_u:
            u_out[i] = utot
        x = expm_skew(np.tensordot(utot, gens, axes=1), h) @ x
        xbar = expm_skew(np.tensordot(um, gens, axes=1), h) @ xbar
        _, v, gap = feedback(x, xbar)
        min_gap = min(min_gap, gap)
        max_inc = max(max_inc, v - v_prev)
        v_prev = v
        if dense_stride > 0 and (i + 1) % dense_stride == 0:
            dense_unorm[nd] = float(np.linalg.norm(utot))
            dense_lyap[nd] = v
            nd += 1
    return x, xbar, v, max_inc, min_gap, 0, dense_unorm, dense_lyap, nd, u_out


def closed_loop_period(state: TrajectoryPair, amps, cfg: RunConfig):
    """Advance the pair one period under the total law u = uref + ufb.

    The tracking error X~ = Xbar^dag X must start inside the Lyapunov
    domain; V(X~) is monitored per substep and must not increase by more
    than V_MONOTONE_TOL.  Returns the pair at t + T and a PeriodLog.
    """
    a = amps.a if isinstance(amps, AmplitudeVector) else np.asarray(amps, dtype=float)
    gens = np.stack(cfg.sys.generators)
    nsteps = cfg.steps_per_period
    stride = cfg.dense_stride
    nd_cap = nsteps // stride if stride > 0 else 0
    if _kernel.HAVE_NUMBA:
        dense_unorm = np.zeros(max(nd_cap, 1))
        dense_lyap = np.zeros(max(nd_cap, 1))
        u_out = np.zeros((nsteps if cfg.record_controls else 1, cfg.sys.m))
        x, xbar, v_end, max_inc, min_gap, status = _kernel.advance_period(
            np.ascontiguousarray(state.x, dtype=complex),
            np.ascontiguousarray(state.x_bar, dtype=complex),
            np.ascontiguousarray(a, dtype=float),
            np.ascontiguousarray(gens, dtype=complex),
            np.ascontiguousarray(cfg.gains, dtype=float),
            float(cfg.T), int(nsteps), float(cfg.singular_tol),
            int(stride), dense_unorm, dense_lyap,
            1 if cfg.record_controls else 0, u_out,
        )
        nd = nd_cap
        controls = u_out if cfg.record_controls else None
    else:
        x, xbar, v_end, max_inc, min_gap, status, dense_unorm, dense_lyap, nd, controls = (
            _advance_period_numpy(state.x, state.x_bar, a, gens, cfg.gains, cfg.T,
                                  nsteps, cfg.singular_tol, stride, cfg.record_controls)
        )
    if status != 0:
        gap = gap_from_minus_one(xbar.conj().T @ x)
        raise NotInW(
            f"tracking error drifted to the -1 boundary (gap {gap:.3e}); "
            "this should be impossible inside the invariant set and signals "
            "an integrator failure"
        )
    if max_inc > V_MONOTONE_TOL:
        raise IntegratorTolerance(
            f"Lyapunov value increased by {max_inc:.3e} within one substep"
        )
    dense_t = state.t + (np.arange(1, nd + 1) * stride) * (cfg.T / nsteps) if nd else np.zeros(0)
    log = PeriodLog(
        dense_t=dense_t,
        dense_unorm=dense_unorm[:nd].copy(),
        dense_lyap=dense_lyap[:nd].copy(),
        v_end=float(v_end),
        max_v_increase=float(max_inc),
        min_gap=float(min_gap),
        controls=controls,
    )
    return TrajectoryPair(x_bar=xbar, x=x, t=state.t + cfg.T), log


def _maintain_unitarity(x, tol):
    defect = frobenius_norm(x.conj().T @ x - np.eye(x.shape[0]))
    if defect > tol:
        raise IntegratorTolerance(f"plant lost unitarity: {defect:.3e}")
    if defect > tol / 10.0:
        return unitarize(x)
    return x


def _run_phase(cfg: RunConfig, x_start, goal, j_offset, n_periods, log: RunLog):
    """Iterate closed-loop periods toward `goal`, appending to the log.

    The reference is pinned back to the goal at every period start: it is
    T-periodic for each amplitude choice, so this only removes accumulated
    rounding and makes X_bar(jT) exact.
    """
    entry_gap = gap_from_minus_one(goal.conj().T @ x_start)
    if entry_gap <= cfg.singular_tol:
        raise NotInW(f"tracking error starts within {entry_gap:.3e} of the -1 boundary")
    x = x_start
    for jj in range(n_periods):
        j = j_offset + jj
        amps = _amps_for_period(cfg, cfg.sys, j)
        pair = TrajectoryPair(x_bar=goal, x=x, t=j * cfg.T)
        pair, plog = closed_loop_period(pair, amps, cfg)
        x = _maintain_unitarity(pair.x, cfg.unitarity_tol)
        log.amps_history.append(amps)
        log.period_states.append(x)
        log.dense_t = np.concatenate([log.dense_t, plog.dense_t])
        log.dense_unorm = np.concatenate([log.dense_unorm, plog.dense_unorm])
        log.dense_lyap = np.concatenate([log.dense_lyap, plog.dense_lyap])
        log.min_gap = min(log.min_gap, plog.min_gap)
        if cfg.record_controls and plog.controls is not None:
            log.controls = (plog.controls if log.controls is None
                            else np.vstack([log.controls, plog.controls]))
    return x


def _finalize_log(log: RunLog, goal):
    n = len(log.period_states)
    log.period_j = np.arange(n)
    log.period_t = log.period_j * log.config.T
    log.period_err = np.array([frobenius_norm(x - goal) for x in log.period_states])
    log.period_lyap = np.array(
        [lyapunov(goal.conj().T @ x, singular_tol=log.config.singular_tol * 1e-3)
         if gap_from_minus_one(goal.conj().T @ x) > log.config.singular_tol * 1e-3
         else math.inf
         for x in log.period_states]
    )
    return log


def _empty_log(cfg, goal):
    return RunLog(
        config=cfg, period_j=np.zeros(0, dtype=int), period_t=np.zeros(0),
        period_err=np.zeros(0), period_lyap=np.zeros(0),
        period_states=[cfg.x0], amps_history=[],
        dense_t=np.zeros(0), dense_unorm=np.zeros(0), dense_lyap=np.zeros(0),
        effective_goal=goal,
    )


def run(cfg: RunConfig) -> RunLog:
    """Execute a full run under the configured strategy and return its log."""
    if cfg.strategy == "two_step":
        return two_step_run(cfg)
    if cfg.strategy == "phase_shifted":
        phi, shifted = select_global_phase(cfg.x_goal, singular_tol=cfg.singular_tol)
        log = _empty_log(cfg, shifted)
        log.phase_shift = phi
        _run_phase(cfg, cfg.x0, shifted, 0, cfg.n_periods, log)
        return _finalize_log(log, shifted)
    log = _empty_log(cfg, cfg.x_goal)
    _run_phase(cfg, cfg.x0, cfg.x_goal, 0, cfg.n_periods, log)
    return _finalize_log(log, cfg.x_goal)


def two_step_plan(x0, x_goal):
    """Intermediate target X1 with both X1 X0^dag and X_goal X1^dag inside
    the Lyapunov domain.

    W = X_goal X0^dag is diagonalized, its eigenphases (taken in (-pi, pi])
    are halved, and X1 = W_half X0.  Half-phases live in (-pi/2, pi/2], so
    W_half stays clear of -1 no matter where W sits.
    """
    x0 = check_unitary(x0, what="X0")
    x_goal = check_unitary(x_goal, what="X_goal")
    w = x_goal @ x0.conj().T
    dec = eig_unitary(w)
    d_half = np.exp(1j * dec.phases / 2.0)
    w_half = dec.rotation.conj().T @ (d_half[:, None] * dec.rotation)
    return w_half @ x0


def two_step_run(cfg: RunConfig) -> RunLog:
    """Steer X0 -> X1 -> X_goal, switching once the plant is close to X1 and
    X_goal X(LT)^dag has all eigenvalues clear of -1.

    The switch predicate requires an eigenphase margin of cfg.switch_margin
    radians from pi and proximity ||X(LT) - X1|| <= cfg.switch_tol.  Raises
    SwitchNeverReached if the whole period budget elapses in phase one.
    """
    x1 = two_step_plan(cfg.x0, cfg.x_goal)
    log = _empty_log(cfg, cfg.x_goal)
    x = cfg.x0
    switch = None
    for j in range(cfg.n_periods):
        x = _run_phase(cfg, x, x1, j, 1, log)
        phases = eig_unitary(cfg.x_goal @ x.conj().T).phases
        margin = float(np.min(np.abs(np.abs(phases) - np.pi)))
        if margin >= cfg.switch_margin and frobenius_norm(x - x1) <= cfg.switch_tol:
            switch = j + 1
            break
    if switch is None:
        raise SwitchNeverReached(
            f"switch predicate not met in {cfg.n_periods} periods "
            f"(margin {cfg.switch_margin}, proximity {cfg.switch_tol})"
        )
    _run_phase(cfg, x, cfg.x_goal, switch, cfg.n_periods - switch, log)
    log.switch_period = switch
    # Period errors measure the final goal; phase-one Lyapunov values are
    # only meaningful against X1, so the per-phase log keeps the raw states.
    return _finalize_log(log, cfg.x_goal)


def select_global_phase(x_goal, singular_tol=SINGULAR_TOL):
    """Pick phi so exp(i phi) X_goal has its spectrum as far from -1 as
    possible: the midpoint of the largest circular gap between the
    forbidden shifts pi - theta_j.  Ties prefer the smallest |phi|."""
    x_goal = check_unitary(x_goal, what="X_goal")
    phases = eig_unitary(x_goal).phases
    bad = np.angle(np.exp(1j * (np.pi - phases)))  # forbidden phi values
    bad = np.unique(np.round(bad, 12))
    k = len(bad)
    candidates = []
    for i in range(k):
        lo = bad[i]
        hi = bad[(i + 1) % k] + (2 * np.pi if i + 1 == k else 0.0)
        mid = np.angle(np.exp(1j * (lo + hi) / 2.0))
        margin = (hi - lo) / 2.0
        candidates.append((margin, mid))
    best_margin = max(c[0] for c in candidates)
    ties = [c[1] for c in candidates if c[0] >= best_margin - 1e-12]
    phi = min(ties, key=lambda p: (abs(p), p))
    shifted = np.exp(1j * phi) * x_goal
    if gap_from_minus_one(shifted) <= singular_tol:
        raise StabilizerError("no usable global phase found (degenerate spectrum?)")
    return float(phi), shifted


def replay_open_loop(sys: SystemDef, controls, T, steps_per_period, x0):
    """Re-apply recorded substep controls as an open-loop program.

    controls has shape (total_substeps, m): the midpoint control of each
    substep, as recorded by a run with record_controls=True.  This is the
    intended deployment mode: simulate once with feedback, then replay the
    recorded inputs on the real system.
    """
    controls = np.asarray(controls, dtype=float)
    x = check_unitary(x0, what="replay initial state")
    h = T / steps_per_period
    gens = np.stack(sys.generators)
    factors = expm_skew(np.einsum("ik,kab->iab", controls, gens) * h)
    for i in range(controls.shape[0]):
        x = factors[i] @ x
    return x
