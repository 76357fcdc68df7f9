"""Sampled-time stabilizing control laws for driftless systems on U(n).

Feedback built on a Cayley-type Lyapunov function tracks periodic
sinusoidal reference trajectories through the goal unitary; the sampled
state X(jT) converges to the goal.  Deterministic (fixed amplitudes) and
stochastic (per-period resampled amplitudes) laws are provided, with a
geometric integrator, controllability/admissibility analysis, and the
two-qubit C-NOT benchmark experiment.
"""

from .controls import (
    AmplitudeVector,
    ControlSnapshot,
    as_gains,
    cayley_transform,
    feedback_controls,
    feedback_matrix,
    lyapunov,
    reference_control,
    sample_amplitudes,
)
from .errors import (
    InsufficientData,
    IntegratorTolerance,
    NotInW,
    StabilizerError,
    SwitchNeverReached,
)
from .experiments import (
    CnotExperiment,
    MonteCarloReport,
    MonteCarloRun,
    RateFit,
    build_cnot_system,
    empirical_Q,
    monte_carlo,
    rate_fit,
)
from .lie import (
    BracketClosureReport,
    SystemDef,
    TaylorMatrixSeries,
    admissibility_rank,
    bracket_series_at_zero,
    lie_closure,
    real_span_rank,
    taylor_A,
)
from .simulate import (
    FixedAmps,
    RunConfig,
    RunLog,
    StochasticAmps,
    TrajectoryPair,
    closed_loop_period,
    integrate_reference,
    replay_open_loop,
    run,
    select_global_phase,
    two_step_plan,
    two_step_run,
)
from .unitary import (
    SINGULAR_TOL,
    UNITARITY_TOL,
    UnitaryEigen,
    cayley_inverse_term,
    check_skew_hermitian,
    check_unitary,
    eig_unitary,
    expm_skew,
    frobenius_norm,
    gap_from_minus_one,
    is_unitary,
    random_unitary,
    random_unitary_with_phases,
    unitarize,
)

__version__ = "0.1.0"
