"""Acceptance suite: one test per product criterion, each printing a
PASS/FAIL line.  The heavy shared artifacts (the 10-period convergence
batches and the 25-period paired Monte Carlo) are session fixtures; the
whole module runs in a few minutes on one core.

Run with:  pytest tests/test_acceptance.py -v
"""

import numpy as np
import pytest

from stabilizer import (
    AmplitudeVector,
    FixedAmps,
    NotInW,
    RunConfig,
    StochasticAmps,
    TrajectoryPair,
    admissibility_rank,
    build_cnot_system,
    closed_loop_period,
    empirical_Q,
    eig_unitary,
    frobenius_norm,
    integrate_reference,
    lie_closure,
    lyapunov,
    monte_carlo,
    random_unitary_with_phases,
    rate_fit,
    run,
)

CONV_SEED = 20250810   # convergence batches
MC_SEED = 424242       # paired Monte Carlo
STEPS = 4096


def _report(capsys, name, ok, detail=""):
    with capsys.disabled():
        print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="session")
def exp():
    return build_cnot_system()


def _det_amps(p):
    rng = np.random.default_rng(np.random.SeedSequence(CONV_SEED, spawn_key=(p,)))
    return AmplitudeVector(rng.uniform(-0.25, 0.25, size=(6, 4)))


@pytest.fixture(scope="session")
def conv_batch(exp):
    """50 deterministic + 50 stochastic 10-period runs at the experiment's
    parameters (fixed draws on the full interval [-a_max, a_max])."""
    det, stoch = [], []
    for p in range(50):
        cfg = RunConfig(
            sys=exp.sys, T=exp.T, gains=exp.gain, x0=exp.x0,
            x_goal=exp.x_goal_cnot, n_periods=10,
            amps_mode=FixedAmps(_det_amps(p)), steps_per_period=STEPS,
            seed=CONV_SEED, run_id=p,
        )
        det.append(run(cfg))
        cfg = RunConfig(
            sys=exp.sys, T=exp.T, gains=exp.gain, x0=exp.x0,
            x_goal=exp.x_goal_cnot, n_periods=10,
            amps_mode=StochasticAmps(bound=exp.a_max, M=exp.M),
            steps_per_period=STEPS, seed=CONV_SEED, run_id=p,
        )
        stoch.append(run(cfg))
    return det, stoch


@pytest.fixture(scope="session")
def mc_report(exp):
    """Paired 50-run Monte Carlo at 25 periods, logs retained."""
    return monte_carlo(exp, n_runs=50, n_periods=25, seed=MC_SEED,
                       steps_per_period=STEPS, keep_logs=True)


def test_controllability_rank(exp, capsys):
    rep = lie_closure(exp.sys)
    ok = rep.rank == 16 and rep.max_depth_used <= 3
    _report(capsys, "controllability-rank-16-depth-3", ok,
            f"rank {rep.rank}/16 at depth {rep.max_depth_used}")


def test_admissibility_genericity(exp, capsys):
    hits = 0
    for p in range(50):
        rng = np.random.default_rng(np.random.SeedSequence(CONV_SEED, spawn_key=(1, p)))
        amps = rng.uniform(-exp.a_max, exp.a_max, size=(6, 4))
        if admissibility_rank(exp.sys, amps, exp.T) == 16:
            hits += 1
    _report(capsys, "admissibility-generic", hits >= 49, f"{hits}/50 full rank")


def test_lyapunov_monotonicity(conv_batch, capsys):
    det, stoch = conv_batch
    worst = -np.inf
    for log in det[:20] + stoch[:20]:
        worst = max(worst, float(np.max(np.diff(log.period_lyap))))
        worst = max(worst, float(np.max(np.diff(log.dense_lyap))))
    _report(capsys, "lyapunov-monotone", worst <= 1e-8,
            f"worst logged increase {worst:.3e}")


def test_unitarity_preservation(mc_report, capsys):
    worst = 0.0
    n_states = 0
    for logs in mc_report.logs.values():
        for log in logs:
            for x in log.period_states:
                worst = max(worst, frobenius_norm(x.conj().T @ x - np.eye(4)))
                n_states += 1
    _report(capsys, "unitarity-25T", worst <= 1e-9,
            f"worst defect {worst:.3e} over {n_states} samples")


def test_reference_trajectory_structure(exp, capsys):
    worst_period = worst_reflect = 0.0
    for p in range(10):
        rng = np.random.default_rng(np.random.SeedSequence(CONV_SEED, spawn_key=(2, p)))
        amps = AmplitudeVector(rng.uniform(-exp.a_max, exp.a_max, size=(6, 4)))
        grid = integrate_reference(exp.sys, amps, exp.T, exp.x_goal_cnot, STEPS)
        worst_period = max(worst_period, frobenius_norm(grid[-1] - grid[0]))
        n = len(grid) - 1
        worst_reflect = max(
            worst_reflect,
            max(frobenius_norm(grid[n - j] - grid[j]) for j in range(n + 1)))
    ok = worst_period <= 1e-7 and worst_reflect <= 1e-7
    _report(capsys, "reference-periodic-reflective", ok,
            f"endpoint {worst_period:.2e}, reflection {worst_reflect:.2e}")


def test_lyapunov_formula_equivalence(capsys):
    rng = np.random.default_rng(CONV_SEED)
    worst = 0.0
    for _ in range(100):
        phases = rng.uniform(-3.0, 3.0, size=4)
        x = random_unitary_with_phases(phases, rng)
        via_trace = lyapunov(x)
        via_phases = float(np.sum(np.tan(eig_unitary(x).phases / 2.0) ** 2))
        worst = max(worst, abs(via_trace - via_phases))
    _report(capsys, "lyapunov-trace-vs-eigenphase", worst <= 1e-8,
            f"worst gap {worst:.3e}")


def test_convergence_tenfold(conv_batch, capsys):
    det, stoch = conv_batch
    err0 = frobenius_norm(np.eye(4) - build_cnot_system().x_goal_cnot)
    det_ok = sum(1 for lg in det if lg.final_error < 0.1 * err0)
    stoch_ok = sum(1 for lg in stoch if lg.final_error < 0.1 * err0)
    ok = det_ok >= 45 and stoch_ok >= 49
    _report(capsys, "convergence-10x-by-10-periods", ok,
            f"det {det_ok}/50 (need 45), stoch {stoch_ok}/50 (need 49)")


def _rate_ok(log):
    fit = rate_fit(log)
    return fit.underflowed or (fit.slope < 0 and fit.r_squared >= 0.9)


def test_exponential_rate(mc_report, capsys):
    det_ok = sum(1 for lg in mc_report.logs[("cnot", "det")] if _rate_ok(lg))
    stoch_ok = sum(1 for lg in mc_report.logs[("cnot", "stoch")] if _rate_ok(lg))
    ok = det_ok >= 45 and stoch_ok >= 49
    _report(capsys, "exponential-rate-fit", ok,
            f"det {det_ok}/50 (need 45), stoch {stoch_ok}/50 (need 49)")


def test_stochastic_advantage(mc_report, capsys):
    det = np.array([r.det_err["cnot"] for r in mc_report.runs if "cnot" in r.det_err])
    sto = np.array([r.stoch_err["cnot"] for r in mc_report.runs if "cnot" in r.stoch_err])
    medians = np.median(sto) <= np.median(det)
    worst_best = sto.max() <= 10.0 * det.min()
    ok = len(det) == len(sto) == 50 and medians and worst_best
    _report(capsys, "stochastic-advantage", ok,
            f"median stoch {np.median(sto):.2e} vs det {np.median(det):.2e}; "
            f"max stoch {sto.max():.2e} vs 10x min det {10 * det.min():.2e}")


def test_two_step_globality(exp, capsys):
    goal = np.diag([np.exp(1j * np.pi), np.exp(1j * 0.3),
                    np.exp(-1j * 0.9), np.exp(1j * 1.7)])
    rng = np.random.default_rng(np.random.SeedSequence(CONV_SEED, spawn_key=(3,)))
    amps = AmplitudeVector(rng.uniform(-exp.a_max, exp.a_max, size=(6, 4)))

    def cfg(strategy):
        return RunConfig(
            sys=exp.sys, T=exp.T, gains=exp.gain, x0=exp.x0, x_goal=goal,
            n_periods=30, amps_mode=FixedAmps(amps),
            steps_per_period=STEPS, strategy=strategy, seed=CONV_SEED,
        )

    try:
        cfg("direct")
        direct_raises = False
    except NotInW:
        direct_raises = True
    ts_log = run(cfg("two_step"))
    ps_log = run(cfg("phase_shifted"))
    ok = (direct_raises and ts_log.switch_period is not None
          and ts_log.final_error < 0.1 and ps_log.final_error < 0.1)
    _report(capsys, "two-step-globality", ok,
            f"direct NotInW={direct_raises}, two-step err {ts_log.final_error:.2e} "
            f"(switch at {ts_log.switch_period}), phase-shifted err {ps_log.final_error:.2e}")


def test_integrator_order(exp, capsys):
    rng = np.random.default_rng(np.random.SeedSequence(CONV_SEED, spawn_key=(4,)))
    amps = AmplitudeVector(rng.uniform(-exp.a_max, exp.a_max, size=(6, 4)))
    ends = {}
    for steps in (2048, 4096, 8192):
        cfg = RunConfig(
            sys=exp.sys, T=exp.T, gains=exp.gain, x0=exp.x0,
            x_goal=exp.x_goal_cnot, n_periods=1, amps_mode=FixedAmps(amps),
            steps_per_period=steps, seed=CONV_SEED,
        )
        pair = TrajectoryPair(x_bar=exp.x_goal_cnot, x=exp.x0, t=0.0)
        out, _ = closed_loop_period(pair, amps, cfg)
        ends[steps] = out.x
    ratio = (frobenius_norm(ends[2048] - ends[4096])
             / frobenius_norm(ends[4096] - ends[8192]))
    _report(capsys, "integrator-second-order", 3.4 <= ratio <= 4.6,
            f"Richardson ratio {ratio:.3f}")


def test_q_diagnostic(exp, capsys):
    q_id = empirical_Q(exp, np.eye(4, dtype=complex), n_samples=20, seed=MC_SEED)
    theta = 2.0 * np.arcsin(0.25)
    x_hat = np.diag(np.exp(1j * np.array([theta, 0.0, 0.0, 0.0])))
    q, samples = empirical_Q(exp, x_hat, n_samples=200, seed=MC_SEED,
                             return_samples=True)
    rng = np.random.default_rng(np.random.SeedSequence(MC_SEED, spawn_key=(5,)))
    boot = np.array([
        rng.choice(samples, size=len(samples), replace=True).mean()
        for _ in range(2000)
    ])
    ci_low = float(np.percentile(boot, 2.5))
    ok = abs(q_id) <= 1e-10 and ci_low > 0.0
    _report(capsys, "q-diagnostic", ok,
            f"Q(I) = {q_id:.2e}; Q at offset 0.5 = {q:.3e}, 95% CI low {ci_low:.3e}")
