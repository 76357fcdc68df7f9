#!/usr/bin/env python3
"""Steer a single qubit: build a two-control system on U(2), verify it is
controllable, check an amplitude draw is admissible, then run the sampled
feedback law and watch the error at period boundaries collapse.

Run:  python3 demos/two_level_steering.py
"""

import numpy as np

from stabilizer import (
    AmplitudeVector,
    FixedAmps,
    RunConfig,
    SystemDef,
    admissibility_rank,
    lie_closure,
    run,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)

# x and y rotations plus a phase channel: all of u(2)
sys = SystemDef((-1j * SX, -1j * SY, -1j * np.eye(2)))
report = lie_closure(sys)
print(f"bracket closure: rank {report.rank}/4 at depth {report.max_depth_used}")

T, M = 8.0, 2
rng = np.random.default_rng(7)
amps = AmplitudeVector(rng.uniform(-0.5, 0.5, size=(3, M)))
rank = admissibility_rank(sys, amps.a, T)
print(f"amplitude draw admissible: rank {rank}/4")

# target: a Hadamard-like gate (pi rotation about (x+z)/sqrt(2), i phase)
x_goal = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2) * 1j

cfg = RunConfig(
    sys=sys, T=T, gains=1.0, x0=np.eye(2, dtype=complex), x_goal=x_goal,
    n_periods=12, amps_mode=FixedAmps(amps), steps_per_period=1024, seed=0,
)
log = run(cfg)

print("\n  j     ||X(jT) - X_goal||      V(jT)")
for j, err, v in zip(log.period_j, log.period_err, log.period_lyap):
    print(f"  {j:2d}     {err:14.6e}    {v:12.6e}")
print(f"\nfinal error {log.final_error:.3e} after {cfg.n_periods} periods")
