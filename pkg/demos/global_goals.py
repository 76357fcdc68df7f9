#!/usr/bin/env python3
"""Goals with an eigenvalue at -1 sit outside the feedback's domain: the
direct law refuses them.  Two escape routes, both demonstrated here:

  1. two_step: insert the half-phase midpoint target, steer there first;
  2. phase_shifted: multiply the goal by a global phase (physically
     immaterial) chosen to push the spectrum away from -1.

Run:  python3 demos/global_goals.py
"""

import numpy as np

from stabilizer import (
    AmplitudeVector,
    FixedAmps,
    NotInW,
    RunConfig,
    build_cnot_system,
    eig_unitary,
    run,
    select_global_phase,
    two_step_plan,
)

exp = build_cnot_system()
goal = np.diag([np.exp(1j * np.pi), np.exp(1j * 0.3),
                np.exp(-1j * 0.9), np.exp(1j * 1.7)])
print("goal eigenphases:", np.round(eig_unitary(goal).phases, 4))

rng = np.random.default_rng(3)
amps = AmplitudeVector(rng.uniform(-exp.a_max, exp.a_max, (exp.sys.m, exp.M)))


def cfg(strategy, n_periods):
    return RunConfig(
        sys=exp.sys, T=exp.T, gains=exp.gain, x0=exp.x0, x_goal=goal,
        n_periods=n_periods, amps_mode=FixedAmps(amps),
        steps_per_period=2048, strategy=strategy,
    )


try:
    cfg("direct", 5)
except NotInW as exc:
    print(f"\ndirect strategy refused, as it must: {exc}")

x1 = two_step_plan(exp.x0, goal)
print("\nmidpoint target eigenphases:", np.round(eig_unitary(x1).phases, 4))
log = run(cfg("two_step", 32))
print(f"two_step: switched after period {log.switch_period}, "
      f"final error {log.final_error:.3e}")

phi, shifted = select_global_phase(goal)
print(f"\nglobal phase {phi:+.4f} moves the spectrum to "
      f"{np.round(eig_unitary(shifted).phases, 4)}")
log = run(cfg("phase_shifted", 20))
print(f"phase_shifted: final error {log.final_error:.3e} "
      f"(measured against the shifted goal)")
