"""Fixed-point solver: trivial invariances, oracle equivalence at desk
scale, mode reductions, common-random-number determinism."""

import math

import numpy as np
import pytest

from levypide import levy, oracle
from levypide.field import SpaceGrid, TimeGrid
from levypide.pide import (
    CoefficientBounds,
    ModeError,
    PideProblem,
    SolveMode,
    SolverConfig,
    feynman_kac_estimate,
    solve,
    solve_linear_fk,
    solve_quasilinear,
    solve_semilinear,
)

BROWNIAN = levy.LevyTriple.brownian(np.array([[1.0]]))


def sg1(lo, hi, n):
    return SpaceGrid([lo], [hi], n)


def test_constant_terminal_is_fixed_point_after_one_iteration():
    p = PideProblem(BROWNIAN, None, None,
                    lambda x: np.full((x.shape[0], 1), 3.0),
                    SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-1, 1, 17), TimeGrid(-0.25, 1 / 32), 500, seed=1,
                       tol=1e-12)
    f, r = solve_semilinear(p, cfg)
    assert r.windows[0].iterations == 1
    assert r.windows[0].residuals == [0.0]
    assert np.all(f.values == 3.0)


def test_unit_source_gives_exact_linear_ramp():
    p = PideProblem(BROWNIAN, None,
                    lambda t, x, u: np.ones((x.shape[0], 1)),
                    lambda x: np.zeros((x.shape[0], 1)),
                    SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-1, 1, 17), TimeGrid(-0.25, 1 / 32), 500, seed=2,
                       tol=1e-12)
    f, _ = solve(p, cfg)
    for t in f.time_grid.nodes:
        assert np.allclose(f.slice_values(float(t)), -t, atol=1e-13)


def test_u_independent_coefficients_terminate_in_two_iterations():
    p = PideProblem(BROWNIAN,
                    G=lambda t, x, u: np.sin(x),
                    F=lambda t, x, u: np.cos(x),
                    phi=lambda x: np.sin(x[:, :1]),
                    mode=SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-6, 6, 33), TimeGrid(-0.25, 1 / 16), 2000, seed=3,
                       tol=1e-12)
    _, r = solve(p, cfg)
    assert r.windows[0].iterations == 2
    assert r.windows[0].residuals[-1] == 0.0


def test_common_random_numbers_bitwise_reproducible():
    p = PideProblem(BROWNIAN, G=lambda t, x, u: -u, F=None,
                    phi=lambda x: np.sin(x[:, :1]), mode=SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-6, 6, 33), TimeGrid(-0.25, 1 / 32), 4000, seed=4,
                       tol=1e-4)
    f1, r1 = solve(p, cfg)
    f2, r2 = solve(p, cfg)
    assert np.array_equal(f1.values, f2.values)
    assert [w.residuals for w in r1.windows] == [w.residuals for w in r2.windows]


def test_contraction_is_geometric(burgers_small):
    for w in burgers_small["report"].windows:
        rs = w.residuals
        for i in range(1, len(rs) - 1):
            assert rs[i + 1] <= 0.7 * rs[i]


def test_burgers_small_matches_cole_hopf(burgers_small):
    field = burgers_small["field"]
    xg = field.space_grid.axis(0)
    mask = np.abs(xg) <= np.pi
    anti = lambda y: 1.0 - np.cos(y)
    for t in (-0.25, -0.125):
        ref = oracle.cole_hopf_burgers(np.sin, 0.5, t, xg[mask], antideriv=anti)
        got = field.slice_values(t)[mask, 0]
        assert np.max(np.abs(got - ref)) < 0.02


def test_sweep_solver_agrees_with_path_ensemble_estimator(burgers_small):
    """Dual route: the per-step conditional-expectation field matches the
    literal path-ensemble estimator at probe nodes within 3 sigma."""
    field = burgers_small["field"]
    problem = burgers_small["problem"]
    grid = field.time_grid
    for x0 in (-1.2, 0.0, 0.7):
        est, se = feynman_kac_estimate(problem, field, (-0.25, [x0]),
                                       20_000, grid, seed=555)
        ref = field.eval(-0.25, [x0])
        tol = 3.0 * float(se[0]) + 3.0 * burgers_small["report"].sigma_max + 5e-3
        assert abs(float(est[0]) - float(ref[0])) < tol


def test_apriori_bound_and_no_violations(burgers_small):
    rep = burgers_small["report"]
    assert rep.apriori_violations == []
    for t, s in zip(rep.times, rep.sup_norms):
        assert s <= rep.phi_sup + abs(t) * rep.source_sup + 3 * rep.sigma_max + 1e-9


# -- linear Feynman-Kac mode ------------------------------------------------------


def test_fk_zero_weight_equals_semilinear_bitwise():
    phi = lambda x: np.cos(x[:, :1])
    g = lambda t, x, u: np.sin(x)
    fsrc = lambda t, x, u: 0.1 * np.cos(x)
    sg, tg = sg1(-6, 6, 33), TimeGrid(-0.25, 1 / 16)
    p_fk = PideProblem(BROWNIAN, g, fsrc, phi, SolveMode.LINEAR_FK)  # H = 0
    p_sl = PideProblem(BROWNIAN, g, fsrc, phi, SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg, tg, 2000, seed=5, tol=1e-12)
    f_fk = solve_linear_fk(p_fk, cfg)
    f_sl, _ = solve_semilinear(p_sl, cfg)
    assert np.array_equal(f_fk.values, f_sl.values)


def test_fk_scalar_exponential_growth_euler_rate():
    lam = 0.8
    p = PideProblem(levy.LevyTriple(drift=[0.0], dim=1), None, None,
                    lambda x: np.full((x.shape[0], 1), 1.0),
                    SolveMode.LINEAR_FK,
                    H=lambda t, x: np.full((x.shape[0], 1, 1), lam))
    errs = []
    for nsteps in (32, 64):
        cfg = SolverConfig(sg1(-1, 1, 5), TimeGrid(-0.5, 0.5 / nsteps), 100,
                           seed=6, tol=1e-12)
        f = solve_linear_fk(p, cfg)
        errs.append(abs(float(f.slice_values(-0.5)[2, 0]) - math.exp(lam * 0.5)))
    assert errs[0] < lam**2 * 0.5 * math.exp(lam * 0.5) / 32  # O(dt)
    assert errs[1] < 0.6 * errs[0]  # first-order decay


def test_fk_weighted_cosine_matches_convolution_oracle():
    lam = 0.8
    nu = 0.5
    p = PideProblem(levy.LevyTriple.brownian(np.array([[2.0 * nu]])), None,
                    None, lambda x: np.cos(x[:, :1]), SolveMode.LINEAR_FK,
                    H=lambda t, x: np.full((x.shape[0], 1, 1), lam))
    sg = sg1(-4 * np.pi, 4 * np.pi, 257)
    cfg = SolverConfig(sg, TimeGrid(-0.5, 1 / 64), 20_000, seed=7, tol=1e-12)
    f = solve_linear_fk(p, cfg)
    xg = sg.axis(0)
    mask = np.abs(xg) <= np.pi
    # scalar weight commutes: u = e^{lam |t|} * heat-semigroup datum
    want = math.exp(lam * 0.5) * math.exp(-nu * 0.5) * np.cos(xg[mask])
    got = f.slice_values(-0.5)[mask, 0]
    assert np.max(np.abs(got - want)) < 0.02  # 3 sigma + O(dt)


# -- quasi-linear modes ------------------------------------------------------------


def test_quasilinear_identity_coupling_reduces_to_linear():
    nu = 0.5
    p = PideProblem(levy.LevyTriple.brownian(np.array([[2.0 * nu]])),
                    G=lambda t, x, u: np.ones((x.shape[0], 1, 1)),
                    F=lambda t, x, u: np.full((x.shape[0], 1), 0.2),
                    phi=lambda x: np.cos(x[:, :1]),
                    mode=SolveMode.QUASILINEAR_GENERAL)
    sg = sg1(-4 * np.pi, 4 * np.pi, 257)
    cfg = SolverConfig(sg, TimeGrid(-0.25, 1 / 64), 20_000, seed=8, tol=1e-9)
    f, r = solve_quasilinear(p, cfg)
    assert r.windows[0].iterations == 2
    xg = sg.axis(0)
    mask = np.abs(xg) <= np.pi
    want = math.exp(-nu * 0.25) * np.cos(xg[mask]) + 0.2 * 0.25
    got = f.slice_values(-0.25)[mask, 0]
    assert np.max(np.abs(got - want)) < 0.02


def test_quasilinear_zero_coupling_freezes_paths():
    st = levy.LevyTriple.symmetric_stable(1.5, 0.3)
    p = PideProblem(st, G=lambda t, x, u: np.zeros((x.shape[0], 1, 1)),
                    F=None, phi=lambda x: np.exp(-x[:, :1] ** 2),
                    mode=SolveMode.QUASILINEAR_GENERAL)
    cfg = SolverConfig(sg1(-4, 4, 33), TimeGrid(-0.25, 1 / 16), 200, seed=9,
                       tol=1e-12)
    f, _ = solve_quasilinear(p, cfg)
    xg = f.space_grid.axis(0)
    phi_vals = np.exp(-xg ** 2)
    for t in f.time_grid.nodes:
        assert np.allclose(f.slice_values(float(t))[:, 0], phi_vals, atol=1e-12)


def test_quasilinear_moment_gate_rejects_low_alpha():
    st = levy.LevyTriple.symmetric_stable(0.8, 0.3)
    with pytest.raises(ModeError):
        PideProblem(st, G=lambda t, x, u: np.ones((x.shape[0], 1, 1)),
                    F=None, phi=lambda x: np.exp(-x[:, :1] ** 2),
                    mode=SolveMode.QUASILINEAR_GENERAL)


def test_quasilinear_constant_big_jump_accepts_low_alpha_and_contracts():
    st = levy.LevyTriple.symmetric_stable(0.8, 0.1)
    p = PideProblem(
        st,
        G=lambda t, x, u: (1.0 + 0.5 * np.tanh(u))[..., None],
        F=None,
        phi=lambda x: np.exp(-x[:, :1] ** 2),
        mode=SolveMode.QUASILINEAR_CONSTANT_BIG_JUMP,
        bounds=CoefficientBounds(sup_g=1.5, lip_g=0.5, sup_f=0.0, lip_f=0.0,
                                 sup_phi=1.0, lip_phi=1.0),
    )
    cfg = SolverConfig(sg1(-8, 8, 129), TimeGrid(-0.25, 1 / 64), 20_000,
                       seed=10, tol=5e-4)
    _f, r = solve_quasilinear(p, cfg)
    rs = r.windows[0].residuals
    assert len(rs) >= 3
    for i in range(len(rs) - 1):
        assert rs[i + 1] < 0.7 * rs[i]
    assert r.apriori_violations == []


def test_mode_guards():
    p = PideProblem(BROWNIAN, None, None, lambda x: x[:, :1],
                    SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-1, 1, 9), TimeGrid(-0.25, 1 / 8), 100, seed=11)
    with pytest.raises(ModeError):
        solve_quasilinear(p, cfg)
    with pytest.raises(ModeError):
        solve_linear_fk(p, cfg)


def test_seed_is_mandatory():
    with pytest.raises(TypeError):
        SolverConfig(sg1(-1, 1, 9), TimeGrid(-0.25, 1 / 8), 100)  # no seed


def test_multidim_system_sup_bound_and_nonnegativity():
    """2D state, drift coupling, nonnegative datum and source."""
    p = PideProblem(
        levy.LevyTriple.brownian(0.5 * np.eye(2)),
        G=lambda t, x, u: -u,
        F=lambda t, x, u: np.full((x.shape[0], 2), 0.05),
        phi=lambda x: np.stack(
            [np.exp(-np.sum(x**2, 1)), 0.5 * np.exp(-np.sum(x**2, 1))], axis=1
        ),
        mode=SolveMode.SEMILINEAR,
        space_dim=2,
        val_dim=2,
    )
    cfg = SolverConfig(SpaceGrid([-3, -3], [3, 3], (17, 17)),
                       TimeGrid(-0.125, 1 / 32), 1000, seed=12, tol=1e-3,
                       interp="linear")
    f, r = solve(p, cfg)
    assert float(np.min(f.values)) >= -(3 * r.sigma_max + 1e-6)
    assert r.apriori_violations == []
    assert f.values.shape[-1] == 2


def test_non_contraction_error_at_floor_window():
    """A coupling too stiff for any window length must surface as
    NonContractionError carrying the partial report (not loop forever and
    not masquerade as blow-up when the Lipschitz norm is tame)."""
    p = PideProblem(BROWNIAN, G=lambda t, x, u: 30.0 * u, F=None,
                    phi=lambda x: np.sin(x[:, :1]), mode=SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-6, 6, 33), TimeGrid(-1.0, 1 / 8), 2000, seed=1,
                       tol=1e-6, max_iter=6, window=1.0, window_floor_steps=4,
                       blowup_threshold=1e9)
    from levypide.pide import NonContractionError

    with pytest.raises(NonContractionError) as exc:
        solve(p, cfg)
    assert exc.value.report is not None
    assert any("halved" in w for w in exc.value.report.warnings)


def test_quasilinear_cbj_strong_residual_probes():
    """Self-consistency of the bounded quasi-linear fixed point: the
    pointwise operator residual at 9 interior probes stays below the bound
    implied by quadrature plus Monte Carlo noise."""
    from levypide.pide import strong_residual

    st = levy.LevyTriple.symmetric_stable(0.8, 0.1)
    p = PideProblem(
        st,
        G=lambda t, x, u: (1.0 + 0.5 * np.tanh(u))[..., None],
        F=None,
        phi=lambda x: np.exp(-x[:, :1] ** 2),
        mode=SolveMode.QUASILINEAR_CONSTANT_BIG_JUMP,
        bounds=CoefficientBounds(sup_g=1.5, lip_g=0.5, sup_f=0.0, lip_f=0.0,
                                 sup_phi=1.0, lip_phi=1.0),
    )
    cfg = SolverConfig(sg1(-8, 8, 129), TimeGrid(-0.25, 1 / 64), 20_000,
                       seed=10, tol=5e-4)
    f, r = solve_quasilinear(p, cfg)
    xg = f.space_grid.axis(0)
    probes = xg[np.linspace(30, 98, 9, dtype=int)]
    for xp in probes:
        rep = strong_residual(f, p, -0.125, float(xp), mc_sigma=r.sigma_max,
                              return_details=True)
        assert abs(float(rep.residual[0])) <= rep.suggested_tolerance


def test_solver_step_budget_refuses_with_required_report():
    from levypide.sfde import BudgetExceededError

    p = PideProblem(BROWNIAN, G=lambda t, x, u: -u, F=None,
                    phi=lambda x: np.sin(x[:, :1]), mode=SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-6, 6, 33), TimeGrid(-0.25, 1 / 32), 2000, seed=1,
                       step_budget=1e3)
    with pytest.raises(BudgetExceededError) as exc:
        solve(p, cfg)
    assert exc.value.required > exc.value.budget


def test_flat_terminal_with_gradient_source_no_spurious_blowup():
    """Constant phi has zero Lipschitz norm; the default threshold must not
    degenerate and flag the source-induced gradient as blow-up."""
    p = PideProblem(BROWNIAN, None,
                    F=lambda t, x, u: np.cos(x),
                    phi=lambda x: np.zeros((x.shape[0], 1)),
                    mode=SolveMode.SEMILINEAR)
    cfg = SolverConfig(sg1(-6, 6, 33), TimeGrid(-0.5, 1 / 16), 2000, seed=2,
                       tol=1e-9, window=0.125)
    f, r = solve(p, cfg)
    assert not r.blow_up
    assert abs(f.time_grid.horizon + 0.5) < 1e-12
