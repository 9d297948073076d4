"""Weak and strong residual verification, with negative controls."""

import numpy as np
import pytest

from levypide import levy, oracle
from levypide.field import SpaceGrid, SpaceTimeField, TimeGrid
from levypide.pide import (
    PideProblem,
    SolveMode,
    SolverConfig,
    smooth_bump,
    solve_linear_fk,
    strong_residual,
    weak_residual,
)

BROWNIAN = levy.LevyTriple.brownian(np.array([[1.0]]))


def zero_problem():
    return PideProblem(BROWNIAN, None, None,
                       lambda x: np.zeros((x.shape[0], 1)),
                       SolveMode.SEMILINEAR)


def test_weak_residual_zero_field_is_zero():
    sg = SpaceGrid([-4.0], [4.0], 65)
    tg = TimeGrid(-0.25, 1 / 16)
    f = SpaceTimeField(sg, tg, np.zeros((tg.n_steps + 1, 65, 1)))
    gap = weak_residual(f, zero_problem(), [smooth_bump(0.0, 1.5)], -0.25)
    assert gap == 0.0


def test_weak_residual_requires_interior_support():
    sg = SpaceGrid([-1.0], [1.0], 17)
    tg = TimeGrid(-0.25, 1 / 16)
    f = SpaceTimeField(sg, tg, np.zeros((tg.n_steps + 1, 17, 1)))
    with pytest.raises(ValueError):
        weak_residual(f, zero_problem(), [smooth_bump(0.0, 5.0)], -0.25)


@pytest.fixture(scope="module")
def fk_linear_solution():
    """Plain Feynman-Kac output (H = 0, Brownian, sin drift-free datum)."""
    nu = 0.5
    problem = PideProblem(levy.LevyTriple.brownian(np.array([[2.0 * nu]])),
                          None, None, lambda x: np.sin(x[:, :1]),
                          SolveMode.LINEAR_FK)
    sg = SpaceGrid([-3 * np.pi], [3 * np.pi], 97)
    cfg = SolverConfig(sg, TimeGrid(-0.25, 1 / 32), 40_000, seed=21, tol=1e-12)
    field = solve_linear_fk(problem, cfg)
    return problem, field


def test_weak_residual_on_solver_output(fk_linear_solution):
    problem, field = fk_linear_solution
    tests = [smooth_bump(0.0, 2.0), smooth_bump(1.0, 1.5)]
    gap = weak_residual(field, problem, tests, -0.25)
    # MC noise integrated against smooth data + time-quadrature error
    sigma = 3.0 / np.sqrt(40_000)
    bound = sigma + 5e-3
    assert gap < bound


def test_weak_residual_negative_control(fk_linear_solution):
    problem, field = fk_linear_solution
    tests = [smooth_bump(0.0, 2.0)]
    gap_clean = weak_residual(field, problem, tests, -0.25)
    corrupt = field.values.copy()
    bump_vals = smooth_bump(0.0, 2.0)(field.space_grid.axis(0))
    corrupt += 0.1 * bump_vals[None, :, None] / np.e ** -1  # O(0.1) dent
    f_bad = SpaceTimeField(field.space_grid, field.time_grid, corrupt)
    gap_bad = weak_residual(f_bad, problem, tests, -0.25)
    assert gap_bad > 10.0 * max(gap_clean, 1e-6)


def test_strong_residual_constant_field_zero():
    sg = SpaceGrid([-2.0], [2.0], 33)
    tg = TimeGrid(-0.25, 1 / 16)
    f = SpaceTimeField(sg, tg, np.full((tg.n_steps + 1, 33, 1), 1.3))
    p = PideProblem(levy.LevyTriple.symmetric_stable(1.5, 0.3), None, None,
                    lambda x: np.full((x.shape[0], 1), 1.3),
                    SolveMode.SEMILINEAR)
    r = strong_residual(f, p, -0.125, 0.0)
    assert np.max(np.abs(r)) < 1e-8


def test_strong_residual_on_convolution_oracle_field():
    """The transform solution nearly annihilates the linear operator."""
    nu = 0.5
    tr = levy.LevyTriple.symmetric_stable(
        1.5, levy.stable_scale_for_multiplier(1.5, nu))
    grid = oracle.PeriodicSpectralGrid(modes=512, length=2.0)
    tg = TimeGrid(-0.25, 1 / 64)
    slices = []
    for t in tg.nodes:
        slices.append(oracle.linear_convolution_solve(
            tr, np.exp(-grid.nodes ** 2), grid, float(t)))
    sg = SpaceGrid([grid.nodes[0]], [grid.nodes[-1]], grid.modes)
    f = SpaceTimeField(sg, tg, np.stack(slices)[..., None])
    p = PideProblem(tr, None, None,
                    lambda x: np.exp(-x[:, :1] ** 2), SolveMode.SEMILINEAR)
    rep = strong_residual(f, p, -0.125, float(sg.axis(0)[256]),
                          return_details=True)
    # time difference is first-order: residual ~ dt * |u_tt| plus quadrature
    assert abs(rep.residual[0]) < 0.02


def test_strong_residual_burgers_self_check(burgers_small):
    field = burgers_small["field"]
    problem = burgers_small["problem"]
    rep = burgers_small["report"]
    xg = field.space_grid.axis(0)
    j = int(np.argmin(np.abs(xg)))  # x = 0 interior node
    out = strong_residual(field, problem, -0.125, float(xg[j]),
                          mc_sigma=rep.sigma_max, return_details=True)
    assert abs(out.residual[0]) < out.suggested_tolerance + 0.05


def test_strong_residual_negative_control(burgers_small):
    field = burgers_small["field"]
    problem = burgers_small["problem"]
    rep = burgers_small["report"]
    xg = field.space_grid.axis(0)
    j = int(np.argmin(np.abs(xg)))
    bad_vals = field.values.copy()
    bump = np.exp(-((xg - xg[j]) / 0.5) ** 2)
    bad_vals[:, :, 0] += 0.5 * bump[None, :]
    f_bad = SpaceTimeField(field.space_grid, field.time_grid, bad_vals)
    good = strong_residual(field, problem, -0.125, float(xg[j]),
                           mc_sigma=rep.sigma_max, return_details=True)
    bad = strong_residual(f_bad, problem, -0.125, float(xg[j]),
                          mc_sigma=rep.sigma_max, return_details=True)
    assert abs(bad.residual[0]) > 3.0 * abs(good.residual[0])
    assert abs(bad.residual[0]) > bad.suggested_tolerance


def test_strong_residual_guards():
    sg = SpaceGrid([-2.0], [2.0], 33)
    tg = TimeGrid(-0.25, 1 / 16)
    f = SpaceTimeField(sg, tg, np.zeros((tg.n_steps + 1, 33, 1)))
    p = zero_problem()
    with pytest.raises(ValueError):
        strong_residual(f, p, -0.125, -2.0)  # boundary node
    with pytest.raises(ValueError):
        strong_residual(f, p, 0.0, 0.0)      # need t < 0
