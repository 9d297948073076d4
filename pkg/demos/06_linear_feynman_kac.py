#!/usr/bin/env python3
"""Linear solves with a zero-order weight: the path-weighted representation

    u(t, x) = E[ Z_{t,0} phi(X_{t,0}) + int_t^0 Z_{t,r} f_r(X_{t,r}) dr ],
    dZ = H(X) Z ds,  Z_{t,t} = I,

realized by the per-step factor (I + H dt).  A scalar weight commutes with
everything, so against a cosine datum the answer factorizes into
e^{lam |t|} times the plain heat evolution -- an exact line to test against.
"""

import math

import numpy as np

from levypide import levy
from levypide.field import SpaceGrid, TimeGrid
from levypide.pide import PideProblem, SolveMode, SolverConfig, solve_linear_fk

LAM, NU = 0.8, 0.5

print("=== deterministic check: no noise, phi = 1 -> u = e^{lam |t|} ===")
p0 = PideProblem(levy.LevyTriple(drift=[0.0], dim=1), None, None,
                 lambda x: np.full((x.shape[0], 1), 1.0), SolveMode.LINEAR_FK,
                 H=lambda t, x: np.full((x.shape[0], 1, 1), LAM))
for nsteps in (32, 64, 128):
    cfg = SolverConfig(SpaceGrid([-1], [1], 5), TimeGrid(-0.5, 0.5 / nsteps),
                       100, seed=3, tol=1e-12)
    f = solve_linear_fk(p0, cfg)
    got = float(f.slice_values(-0.5)[2, 0])
    print(f"  dt = 1/{2*nsteps:<4d} u(-0.5) = {got:.6f}  "
          f"err = {abs(got - math.exp(LAM * 0.5)):.2e}  (first order in dt)")

print("\n=== weighted heat evolution of a cosine ===")
p1 = PideProblem(levy.LevyTriple.brownian(np.array([[2.0 * NU]])), None, None,
                 lambda x: np.cos(x[:, :1]), SolveMode.LINEAR_FK,
                 H=lambda t, x: np.full((x.shape[0], 1, 1), LAM))
sg = SpaceGrid([-4 * np.pi], [4 * np.pi], 257)
f = solve_linear_fk(p1, SolverConfig(sg, TimeGrid(-0.5, 1 / 64), 20_000,
                                     seed=4, tol=1e-12))
xg = sg.axis(0)
mask = np.abs(xg) <= np.pi
want = math.exp(LAM * 0.5) * math.exp(-NU * 0.5) * np.cos(xg[mask])
gap = np.max(np.abs(f.slice_values(-0.5)[mask, 0] - want))
print(f"  sup gap to e^(lam|t|) e^(-nu|t|) cos(x) on |x| <= pi: {gap:.5f}")
