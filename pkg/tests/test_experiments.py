import numpy as np
import pytest

from stabilizer import (
    InsufficientData,
    RunConfig,
    FixedAmps,
    AmplitudeVector,
    empirical_Q,
    lie_closure,
    monte_carlo,
    rate_fit,
    run,
)
from stabilizer.experiments import SX, SY, SZ

KRON = np.kron


class TestBuildCnotSystem:
    def test_dimensions(self, cnot_exp):
        assert cnot_exp.sys.n == 4
        assert cnot_exp.sys.m == 6
        assert (cnot_exp.M, cnot_exp.a_max, cnot_exp.gain, cnot_exp.T) == (4, 0.25, 0.75, 25.0)

    def test_identity_channel(self, cnot_exp):
        # last Hamiltonian is the identity, so S6 = -i I
        np.testing.assert_array_equal(cnot_exp.sys.generators[5], -1j * np.eye(4))

    def test_exchange_coupling(self, cnot_exp):
        h5 = 1j * cnot_exp.sys.generators[4]
        expected = KRON(SX, SX) + KRON(SY, SY) + KRON(SZ, SZ)
        np.testing.assert_array_equal(h5, expected)
        np.testing.assert_allclose(h5, h5.conj().T, atol=0)

    def test_goal_entries(self, cnot_exp):
        x1 = cnot_exp.x_goal_cnot
        # permutation block carries the global phase: entry (3, 4) is e^{i pi/2}
        assert x1[2, 3] == pytest.approx(1j, abs=1e-15)
        assert x1[3, 2] == pytest.approx(1j, abs=1e-15)
        assert x1[0, 0] == pytest.approx(1j, abs=1e-15)
        x2 = cnot_exp.x_goal_academic
        assert x2[1, 2] == -1.0
        assert x2[2, 1] == 1.0

    def test_generators_skew_hermitian(self, cnot_exp):
        for s in cnot_exp.sys.generators:
            np.testing.assert_allclose(s + s.conj().T, 0.0, atol=1e-15)

    def test_controllable_at_depth_three(self, cnot_exp):
        rep = lie_closure(cnot_exp.sys)
        assert (rep.rank, rep.max_depth_used) == (16, 3)


@pytest.fixture(scope="module")
def small_report(cnot_exp):
    return monte_carlo(cnot_exp, n_runs=2, n_periods=2, seed=7,
                       steps_per_period=256)


class TestMonteCarlo:
    def test_shape_and_pairing(self, small_report):
        assert len(small_report.runs) == 2
        for rec in small_report.runs:
            assert rec.error is None
            assert set(rec.det_err) == {"cnot", "academic"}
            assert set(rec.stoch_err) == {"cnot", "academic"}
            # the same fixed draw a^p serves both goals
            assert rec.amps.a.shape == (6, 4)
            assert np.all(np.abs(rec.amps.a) <= 0.25)

    def test_goals_differ_for_same_amps(self, small_report):
        d1 = np.array([r.det_err["cnot"] for r in small_report.runs])
        d2 = np.array([r.det_err["academic"] for r in small_report.runs])
        assert np.max(np.abs(d1 - d2)) > 1e-6

    def test_bit_identical_rerun(self, cnot_exp, small_report):
        again = monte_carlo(cnot_exp, n_runs=2, n_periods=2, seed=7,
                            steps_per_period=256)
        for a, b in zip(small_report.runs, again.runs):
            assert a.det_err == b.det_err
            assert a.stoch_err == b.stoch_err
            assert a.amps.digest() == b.amps.digest()

    def test_seed_changes_results(self, cnot_exp, small_report):
        other = monte_carlo(cnot_exp, n_runs=2, n_periods=2, seed=8,
                            steps_per_period=256)
        assert other.runs[0].det_err["cnot"] != small_report.runs[0].det_err["cnot"]

    def test_summary_fields(self, small_report):
        s = small_report.summary["cnot"]
        for key in ("det_median", "stoch_median", "det_min", "stoch_max"):
            assert s[key] is not None

    def test_worker_pool_does_not_change_results(self, cnot_exp, small_report,
                                                  monkeypatch):
        monkeypatch.setenv("STABILIZER_THREADS", "2")
        pooled = monte_carlo(cnot_exp, n_runs=2, n_periods=2, seed=7,
                             steps_per_period=256)
        for a, b in zip(small_report.runs, pooled.runs):
            assert a.det_err == b.det_err
            assert a.stoch_err == b.stoch_err


class TestRateFit:
    def test_exact_exponential(self):
        v = np.exp(-0.5 * np.arange(11))
        fit = rate_fit(v)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_tail_only(self):
        # early garbage must not affect a fit over the final 60%
        v = np.concatenate([[5.0, 0.01, 3.0, 0.2], np.exp(-0.8 * np.arange(7))])
        fit = rate_fit(v)
        assert fit.slope == pytest.approx(-0.8, abs=1e-9)

    def test_underflow_sentinel(self):
        v = np.full(20, 1e-16)
        fit = rate_fit(v)
        assert fit.underflowed
        assert fit.slope == float("-inf")
        assert fit.r_squared == 1.0

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            rate_fit(np.array([1.0, 0.5, 0.2, 0.1, 0.05, 0.01]))  # 4-point tail

    def test_accepts_run_log(self, cnot_exp):
        rng = np.random.default_rng(0)
        amps = AmplitudeVector(rng.uniform(-0.25, 0.25, (6, 4)))
        cfg = RunConfig(sys=cnot_exp.sys, T=25.0, gains=0.75,
                        x0=np.eye(4, dtype=complex), x_goal=cnot_exp.x_goal_cnot,
                        n_periods=8, amps_mode=FixedAmps(amps), steps_per_period=512)
        fit = rate_fit(run(cfg))
        assert fit.slope < 0

    def test_time_scaling_preserves_per_period_slope(self, cnot_exp):
        """Speeding up time (T -> T/c) with gains and amplitudes scaled by c
        reparametrizes the same trajectory: per-period samples coincide."""
        rng = np.random.default_rng(1)
        a = rng.uniform(-0.25, 0.25, (6, 4))
        slopes = []
        for c in (1.0, 2.0, 3.0):
            cfg = RunConfig(sys=cnot_exp.sys, T=25.0 / c, gains=0.75 * c,
                            x0=np.eye(4, dtype=complex), x_goal=cnot_exp.x_goal_cnot,
                            n_periods=8, amps_mode=FixedAmps(AmplitudeVector(c * a)),
                            steps_per_period=512)
            slopes.append(rate_fit(run(cfg)).slope)
        assert slopes[1] == pytest.approx(slopes[0], rel=0.10)
        assert slopes[2] == pytest.approx(slopes[0], rel=0.10)


def offset_state(d):
    """diag(e^{i theta}, 1, 1, 1) with ||X - I||_F = d."""
    theta = 2.0 * np.arcsin(d / 2.0)
    return np.diag(np.exp(1j * np.array([theta, 0.0, 0.0, 0.0])))


class TestEmpiricalQ:
    def test_zero_at_identity(self, cnot_exp):
        assert abs(empirical_Q(cnot_exp, np.eye(4, dtype=complex), n_samples=3)) <= 1e-10

    def test_positive_off_identity(self, cnot_exp):
        q, samples = empirical_Q(cnot_exp, offset_state(0.5), n_samples=30,
                                 seed=5, return_samples=True)
        assert q > 0
        assert samples.min() > -1e-8  # one-period decrease is pathwise

    def test_quadratic_scaling_trend(self, cnot_exp):
        qs = [empirical_Q(cnot_exp, offset_state(d), n_samples=30, seed=5)
              for d in (0.1, 0.2, 0.4)]
        assert 3.0 <= qs[1] / qs[0] <= 5.5
        assert 3.0 <= qs[2] / qs[1] <= 5.5
