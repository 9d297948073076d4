"""Path-wise simulation: Euler trajectories, flow/Markov checks, nested
conditional validation."""

import math

import numpy as np
import pytest
from scipy import stats

from levypide import levy
from levypide.field import SpaceGrid, TimeGrid
from levypide.pide import PideProblem, SolveMode
from levypide.sfde import (
    BudgetExceededError,
    CouplingMode,
    flow_test,
    flow_test_gaussian,
    ks_critical_value,
    nested_conditional_simulate,
    simulate_ensemble,
    simulate_path,
)
from levypide.field import SpaceTimeField


BROWNIAN = levy.LevyTriple.brownian(np.array([[1.0]]))


def test_zero_coefficient_freezes_state_general_coupling():
    grid = TimeGrid(-0.5, 1.0 / 16.0)
    zero = lambda s, x: np.zeros((x.shape[0], 1, 1))
    p = simulate_path(CouplingMode.GENERAL, zero,
                      levy.LevyTriple.symmetric_stable(1.5, 0.3),
                      (-0.5, [0.7]), grid, levy.NoiseStream(1))
    assert np.all(p.states == 0.7)
    assert p.start_time == -0.5 and p.times[-1] == 0.0


def test_deterministic_drift_integrates_exactly():
    # dX = (g + b) ds with no noise: X_s = x + (g + b)(s - t)
    grid = TimeGrid(-0.5, 1.0 / 32.0)
    tr = levy.LevyTriple(drift=[0.4], dim=1)
    g = 1.1
    p = simulate_path(CouplingMode.DRIFT_ONLY,
                      lambda s, x: np.full((x.shape[0], 1), g),
                      tr, (-0.5, [0.2]), grid, levy.NoiseStream(2))
    want = 0.2 + (g + 0.4) * (p.times - (-0.5))
    assert np.allclose(p.states[:, 0], want, atol=1e-12)


def test_ou_mean_matches_closed_form():
    # dX = -X ds + dW from (t, x): E X_{t,0} = x e^{t} for t <= 0
    t0, x0, n = -0.5, 1.0, 100_000
    grid = TimeGrid(-0.5, 1.0 / 64.0)
    drift = lambda s, x: -x
    _, term = simulate_ensemble(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                                (t0, [x0]), grid, seed=42, n_paths=n,
                                terminal_only=True)
    want = x0 * math.exp(t0)
    se = term[:, 0].std(ddof=1) / math.sqrt(n)
    euler_bias = abs(x0) * abs(t0) * grid.dt  # O(dt) mean bias budget
    assert abs(term[:, 0].mean() - want) < 3.0 * se + euler_bias


def test_ensemble_matches_per_path_api_bitwise():
    grid = TimeGrid(-0.25, 1.0 / 16.0)
    drift = lambda s, x: np.sin(x)
    _times, states = simulate_ensemble(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                                       (-0.25, [0.3]), grid, seed=7, n_paths=5)
    for p in range(5):
        path = simulate_path(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                             (-0.25, [0.3]), grid, levy.NoiseStream(7, p))
        assert np.array_equal(states[p], path.states)


def test_path_end_time_composition_bitwise():
    grid = TimeGrid(-0.5, 1.0 / 32.0)
    drift = lambda s, x: np.sin(x)
    full = simulate_path(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                         (-0.5, [0.1]), grid, levy.NoiseStream(9, 0))
    ns = levy.NoiseStream(9, 0)
    leg1 = simulate_path(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                         (-0.5, [0.1]), grid, ns, end_time=-0.25)
    leg2 = simulate_path(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                         (-0.25, leg1.terminal()), grid, ns)
    assert np.array_equal(np.vstack([leg1.states[:-1], leg2.states]),
                          full.states)


def test_divergent_path_flagged_not_raised():
    grid = TimeGrid(-0.5, 1.0 / 8.0)
    blow = lambda s, x: np.exp(x * 200.0)  # overflows within a few steps
    with np.errstate(over="ignore"):
        p = simulate_path(CouplingMode.DRIFT_ONLY, blow, BROWNIAN,
                          (-0.5, [5.0]), grid, levy.NoiseStream(3))
    assert p.divergent
    assert np.all(np.isfinite(p.states))


def test_constant_big_jump_records_jumps():
    tr = levy.LevyTriple.symmetric_stable(0.8, 0.6)
    grid = TimeGrid(-1.0, 1.0 / 8.0)
    coef = lambda s, x: np.full((x.shape[0], 1, 1), 0.5)
    mags = []
    for sid in range(20):
        p = simulate_path(CouplingMode.CONSTANT_BIG_JUMP, coef, tr,
                          (-1.0, [0.0]), grid, levy.NoiseStream(77, sid))
        for t_jump, z in p.jumps:
            assert -1.0 < t_jump <= 0.0
            assert np.linalg.norm(z) > 0.0
            mags.append(np.linalg.norm(z))
    # jumps below magnitude 1 are excluded from the record (a per-step
    # aggregate of two opposing big jumps may still be small, but most are not)
    assert mags and np.median(mags) >= 1.0


# -- flow / Markov --------------------------------------------------------------


def test_flow_zero_coefficient_pathwise_exact():
    grid = TimeGrid(-0.5, 1.0 / 16.0)
    zero = lambda s, x: np.zeros((x.shape[0], 1, 1))
    res = flow_test(CouplingMode.GENERAL, zero,
                    levy.LevyTriple.symmetric_stable(1.2, 0.3),
                    -0.5, -0.25, -1.0 / 16.0, [0.4], 200, grid, seed=5)
    assert res.pathwise_gap == 0.0
    assert res.ks_statistic < ks_critical_value(200, 200)


def test_flow_deterministic_drift_exact():
    grid = TimeGrid(-0.5, 1.0 / 16.0)
    tr = levy.LevyTriple(drift=[0.2], dim=1)
    res = flow_test(CouplingMode.DRIFT_ONLY, lambda s, x: np.cos(x), tr,
                    -0.5, -0.25, -1.0 / 16.0, [0.4], 50, grid, seed=6)
    assert res.pathwise_gap == 0.0


def test_flow_sin_drift_brownian():
    grid = TimeGrid(-0.5, 1.0 / 32.0)
    res = flow_test_gaussian(CouplingMode.DRIFT_ONLY, lambda s, x: np.sin(x),
                             BROWNIAN, -0.5, -0.25, -1.0 / 32.0, [0.3],
                             10_000, grid, seed=8)
    assert res.pathwise_gap <= 1e-12
    assert res.ks_statistic < res.ks_critical_1pct


def test_flow_general_coupling_jump_noise():
    grid = TimeGrid(-0.25, 1.0 / 16.0)
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.2)
    coef = lambda s, x: (1.0 + 0.1 * np.tanh(x))[..., None]
    res = flow_test(CouplingMode.GENERAL, coef, tr, -0.25, -0.125,
                    -1.0 / 16.0, [0.0], 300, grid, seed=10)
    assert res.pathwise_gap <= 1e-12
    assert res.ks_statistic < res.ks_critical_1pct


def test_flow_misaligned_times_raise():
    grid = TimeGrid(-0.5, 1.0 / 16.0)
    with pytest.raises(ValueError):
        flow_test(CouplingMode.DRIFT_ONLY, lambda s, x: 0 * x, BROWNIAN,
                  -0.5, -0.2512, -0.125, [0.0], 10, grid, seed=1)


def test_monotone_in_initial_condition_1d():
    """With a Lipschitz drift and K dt < 1, the Euler map is monotone in x
    under shared noise."""
    grid = TimeGrid(-0.5, 1.0 / 32.0)  # K = 1, dt = 1/32
    drift = lambda s, x: np.sin(x)
    for sid in range(10):
        pa = simulate_path(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                           (-0.5, [-0.4]), grid, levy.NoiseStream(123, sid))
        pb = simulate_path(CouplingMode.DRIFT_ONLY, drift, BROWNIAN,
                           (-0.5, [0.4]), grid, levy.NoiseStream(123, sid))
        assert np.all(pb.states[:, 0] >= pa.states[:, 0])


def test_general_coupling_moment_diagnostic_logged():
    """Empirical beta-moment of sup_s |X| stays finite for beta < alpha."""
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.2)
    grid = TimeGrid(-0.25, 1.0 / 8.0)
    coef = lambda s, x: np.ones((x.shape[0], 1, 1))
    sups = []
    for sid in range(400):
        p = simulate_path(CouplingMode.GENERAL, coef, tr, (-0.25, [0.0]),
                          grid, levy.NoiseStream(321, sid))
        sups.append(np.max(np.abs(p.states)))
    beta_moment = float(np.mean(np.asarray(sups) ** 1.2))
    assert np.isfinite(beta_moment)


# -- nested conditional validation ----------------------------------------------


def _semilinear_problem(G, F=None, phi=None):
    return PideProblem(
        triple=BROWNIAN, G=G, F=F,
        phi=phi or (lambda x: np.sin(x[:, :1])),
        mode=SolveMode.SEMILINEAR,
    )


def _const_field(sg, tg, value):
    vals = np.full((tg.n_steps + 1,) + tuple(sg.points) + (1,), value)
    return SpaceTimeField(sg, tg, vals)


def test_nested_budget_enforced():
    problem = _semilinear_problem(lambda t, x, u: -u)
    grid = TimeGrid(-1.0, 1.0 / 64.0)
    frozen = _const_field(SpaceGrid([-1], [1], 5), grid, 0.0)
    with pytest.raises(BudgetExceededError) as exc:
        nested_conditional_simulate(problem, frozen, (-1.0, [0.0]),
                                    outer=100, inner=500, grid=grid, seed=1)
    assert exc.value.required > exc.value.budget


def test_nested_constant_field_exact():
    """frozen = const c, phi = c, f = 0: every inner estimate equals c."""
    c = 1.7
    sg = SpaceGrid([-4.0], [4.0], 9)
    grid = TimeGrid(-0.25, 1.0 / 8.0)
    problem = _semilinear_problem(
        G=lambda t, x, u: 0.3 * u,
        phi=lambda x: np.full((x.shape[0], 1), c),
    )
    frozen = _const_field(sg, grid, c)
    _, diag = nested_conditional_simulate(problem, frozen, (-0.25, [0.0]),
                                          outer=5, inner=20, grid=grid, seed=3)
    assert diag.max_gap == pytest.approx(0.0, abs=1e-13)


def test_nested_u_independent_coupling_matches_direct_law():
    """G without u-dependence: the nested machinery must reproduce the plain
    path law (the conditional term is unused)."""
    grid = TimeGrid(-0.25, 1.0 / 8.0)
    sg = SpaceGrid([-4.0], [4.0], 9)
    problem = _semilinear_problem(G=lambda t, x, u: np.sin(x))
    frozen = _const_field(sg, grid, 0.0)
    paths, _ = nested_conditional_simulate(problem, frozen, (-0.25, [0.2]),
                                           outer=60, inner=10, grid=grid,
                                           seed=4)
    nested_term = np.array([p.terminal()[0] for p in paths])
    _, direct = simulate_ensemble(CouplingMode.DRIFT_ONLY,
                                  lambda s, x: np.sin(x), BROWNIAN,
                                  (-0.25, [0.2]), grid, seed=5, n_paths=60,
                                  terminal_only=True)
    ks = stats.ks_2samp(nested_term, direct[:, 0], method="asymp")
    assert ks.statistic < ks_critical_value(60, 60)
