#!/usr/bin/env python3
"""Solve the backward viscous Burgers equation by the fixed-point Monte
Carlo solver and compare against the Cole-Hopf reference.

The problem is d_t u + nu u_xx - u u_x = 0 on t <= 0 with u(0, .) = sin:
drift coupling G(u) = -u, Brownian noise with covariance 2 nu.  The solver
freezes the drift at the previous iterate, averages terminal values of the
frozen-drift trajectories (stepwise conditional expectations with common
random numbers), and repeats until the field stops moving.  Window patching
marches the horizon backward; residuals should contract geometrically.
"""

import time

import numpy as np

from levypide import levy, oracle
from levypide.field import SpaceGrid, TimeGrid
from levypide.pide import PideProblem, SolveMode, SolverConfig, solve_semilinear

NU = 0.5

problem = PideProblem(
    triple=levy.LevyTriple.brownian(np.array([[2.0 * NU]])),
    G=lambda t, x, u: -u,
    F=None,
    phi=lambda x: np.sin(x[:, :1]),
    mode=SolveMode.SEMILINEAR,
)
config = SolverConfig(
    space_grid=SpaceGrid([-2 * np.pi], [2 * np.pi], 129),
    time_grid=TimeGrid(-0.5, 1.0 / 128.0),
    n_particles=40_000,
    seed=2024,
    tol=3e-4,
    window=0.25,
)

t0 = time.perf_counter()
field, report = solve_semilinear(problem, config)
print(f"solved in {time.perf_counter() - t0:.1f}s, "
      f"{config.n_particles} particles, sigma_max={report.sigma_max:.2e}")
for w in report.windows:
    ratios = ", ".join(f"{r:.3f}" for r in w.ratios)
    print(f"  window [{w.t_start:+.3f}, {w.t_end:+.3f}]: "
          f"{w.iterations} iterations, contraction ratios [{ratios}]")

print("\n   t      sup gap to Cole-Hopf (|x| <= pi)")
xg = field.space_grid.axis(0)
mask = np.abs(xg) <= np.pi
anti = lambda y: 1.0 - np.cos(y)
for t in (-0.125, -0.25, -0.375, -0.5):
    ref = oracle.cole_hopf_burgers(np.sin, NU, t, xg[mask], antideriv=anti)
    gap = np.max(np.abs(field.slice_values(t)[mask, 0] - ref))
    print(f"  {t:+.3f}   {gap:.5f}")

print("\na-priori sup bound held:", not report.apriori_violations)
print("per-time Lipschitz norms stayed near 1:",
      f"max {max(report.lip_norms):.3f}")
