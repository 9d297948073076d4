"""Noise layer: symbol, increment sampling, moment gate, generator."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from levypide import levy


def gaussian_cp():
    return levy.CompoundPoisson(
        rate=2.0,
        sampler=lambda rng, n: rng.standard_normal(n),
        density=lambda z: np.exp(-z * z / 2.0) / math.sqrt(2.0 * math.pi),
        symmetric=True,
    )


# ---------------------------------------------------------------------------
# symbol
# ---------------------------------------------------------------------------


def test_symbol_vanishes_at_zero():
    tr = levy.LevyTriple(drift=[0.3], covariance=np.array([[1.2]]),
                         jump_spec=levy.AlphaStable(1.5, 0.4))
    assert levy.symbol(tr, [0.0]) == 0.0


def test_symbol_gaussian_identity_covariance():
    # standard Levy-Khintchine quadratic form: -|xi|^2 / 2 for A = I
    tr = levy.LevyTriple.brownian(np.eye(3))
    xi = np.array([1.0, -2.0, 0.5])
    got = levy.symbol(tr, xi)
    assert got == pytest.approx(-0.5 * float(xi @ xi), abs=1e-14)
    assert got.imag == 0.0


def stable_symbol_quadrature(alpha, scale, xi):
    """Independent oracle: direct quadrature of the Levy-Khintchine integrand
    against nu(dz) = scale dz/|z|^{1+alpha} (symmetric, so the sine and
    compensator parts cancel and the cosine part doubles)."""
    xi = abs(xi)
    inner, _ = integrate.quad(
        lambda z: (math.cos(xi * z) - 1.0) * z ** (-1.0 - alpha), 0.0, 1.0,
        limit=400,
    )
    # oscillatory tail: QAWF handles int_1^inf cos(xi z) z^{-1-alpha} dz
    osc, _ = integrate.quad(lambda z: z ** (-1.0 - alpha), 1.0, np.inf,
                            weight="cos", wvar=xi)
    tail = osc - 1.0 / alpha
    return 2.0 * scale * (inner + tail)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.5, 1.9])
def test_stable_symbol_matches_quadrature_oracle(alpha):
    scale = 0.7
    tr = levy.LevyTriple.symmetric_stable(alpha, scale)
    for xi in (0.5, 1.0, 2.3):
        closed = levy.symbol(tr, [xi]).real
        quad = stable_symbol_quadrature(alpha, scale, xi)
        assert closed == pytest.approx(quad, rel=1e-6, abs=1e-8)
        assert closed < 0.0


def test_stable_symbol_is_power_law_with_explicit_scale():
    nu = 0.5
    tr = levy.LevyTriple.symmetric_stable(
        1.5, levy.stable_scale_for_multiplier(1.5, nu))
    for xi in (0.5, 1.0, 3.0):
        assert levy.symbol(tr, [xi]).real == pytest.approx(
            -nu * abs(xi) ** 1.5, rel=1e-12)


def test_compound_poisson_symbol_closed_form():
    tr = levy.LevyTriple(jump_spec=gaussian_cp(), dim=1)
    got = levy.symbol(tr, [1.0])
    want = 2.0 * (math.exp(-0.5) - 1.0)
    assert got.real == pytest.approx(want, abs=1e-7)
    assert abs(got.imag) < 1e-9


# ---------------------------------------------------------------------------
# increment sampling
# ---------------------------------------------------------------------------


def test_brownian_increment_covariance():
    n = 100_000
    tr = levy.LevyTriple.brownian(np.eye(2))
    X = levy.sample_increments(tr, 1.0, levy.NoiseStream(11), n)
    cov = np.cov(X.T)
    # 3 standard errors: var entries fluctuate at sqrt(2/N), cross at 1/sqrt(N)
    assert abs(cov[0, 0] - 1.0) < 3.0 * math.sqrt(2.0 / n)
    assert abs(cov[1, 1] - 1.0) < 3.0 * math.sqrt(2.0 / n)
    assert abs(cov[0, 1]) < 3.0 / math.sqrt(n)
    assert abs(X.mean(axis=0)).max() < 3.0 / math.sqrt(n)


def test_symmetric_jump_increment_mean_zero():
    n = 100_000
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.3)
    X = levy.sample_increments(tr, 1.0, levy.NoiseStream(12), n)[:, 0]
    se = X.std(ddof=1) / math.sqrt(n)
    assert abs(X.mean()) < 3.0 * se


def test_stable_increment_characteristic_function():
    n = 100_000
    dt = 1.0
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.3)
    X = levy.sample_increments(tr, dt, levy.NoiseStream(13), n)[:, 0]
    for xi in (0.5, 1.0, 2.0):
        emp = np.mean(np.exp(1j * xi * X))
        want = np.exp(dt * levy.symbol(tr, [xi]))
        assert abs(emp - want) < 3.0 / math.sqrt(n)


def test_characteristic_function_grid_all_variants():
    n = 100_000
    dt = 0.5
    triples = [
        levy.LevyTriple.brownian(np.array([[1.3]])),
        levy.LevyTriple.symmetric_stable(0.8, 0.2),
        levy.LevyTriple(jump_spec=gaussian_cp(), dim=1),
        levy.LevyTriple(jump_spec=levy.TruncatedStable(1.2, 0.3, 0.05), dim=1),
    ]
    for k, tr in enumerate(triples):
        X = levy.sample_increments(tr, dt, levy.NoiseStream(140 + k), n)[:, 0]
        for xi in (0.25, 0.5, 1.0, 2.0, 3.0):
            emp = np.mean(np.exp(1j * xi * X))
            want = np.exp(dt * levy.symbol(tr, [xi]))
            assert abs(emp - want) < 3.0 / math.sqrt(n), (k, xi)


def test_increment_additivity_kolmogorov_smirnov():
    """L_{dt1} + independent L_{dt2} must match L_{dt1+dt2} in law."""
    n = 50_000
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.3)
    a = levy.sample_increments(tr, 0.3, levy.NoiseStream(21), n)[:, 0]
    b = levy.sample_increments(tr, 0.7, levy.NoiseStream(22), n)[:, 0]
    c = levy.sample_increments(tr, 1.0, levy.NoiseStream(23), n)[:, 0]
    ks = stats.ks_2samp(a + b, c, method="asymp")
    crit = math.sqrt(-0.5 * math.log(0.005)) * math.sqrt(2.0 / n)
    assert ks.statistic < crit


def test_split_increments_recompose_in_law():
    n = 100_000
    tr = levy.LevyTriple.symmetric_stable(0.8, 0.2)
    small, big = levy.split_increments(tr, 0.5, levy.NoiseStream(31), n)
    X = (small + big)[:, 0]
    for xi in (0.5, 1.5):
        emp = np.mean(np.exp(1j * xi * X))
        want = np.exp(0.5 * levy.symbol(tr, [xi]))
        assert abs(emp - want) < 3.5 / math.sqrt(n)


def test_multidim_stable_increments():
    n = 100_000
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.4, dim=2)
    X = levy.sample_increments(tr, 0.3, levy.NoiseStream(33), n)
    xi = np.array([0.8, -0.5])
    emp = np.mean(np.exp(1j * (X @ xi)))
    want = np.exp(0.3 * levy.symbol(tr, xi))
    assert abs(emp - want) < 3.0 / math.sqrt(n)


def test_bit_identical_streams():
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.3)
    a = levy.sample_increments(tr, 0.1, levy.NoiseStream(5, 2), 64)
    b = levy.sample_increments(tr, 0.1, levy.NoiseStream(5, 2), 64)
    assert np.array_equal(a, b)
    c = levy.sample_increments(tr, 0.1, levy.NoiseStream(5, 3), 64)
    assert not np.array_equal(a, c)


def test_batched_draws_equal_sequential_draws():
    tr = levy.LevyTriple.brownian(np.array([[1.0]]))
    ns1 = levy.NoiseStream(9, 1)
    batch = levy.sample_increments(tr, 0.25, ns1, 10)
    ns2 = levy.NoiseStream(9, 1)
    singles = np.vstack([levy.sample_increment(tr, 0.25, ns2) for _ in range(10)])
    assert np.array_equal(batch, singles)


# ---------------------------------------------------------------------------
# moment gate
# ---------------------------------------------------------------------------


def test_check_moment_stable_cases():
    assert levy.check_moment(levy.LevyTriple.symmetric_stable(1.5), 1.2) == "finite"
    assert levy.check_moment(levy.LevyTriple.symmetric_stable(0.8), 1.0) == "infinite"


def test_check_moment_pure_gaussian_always_finite():
    tr = levy.LevyTriple.brownian(np.eye(2))
    for beta in (0.5, 2.0, 7.0):
        assert levy.check_moment(tr, beta) == "finite"


def test_check_moment_compound_poisson_tails():
    tr = levy.LevyTriple(jump_spec=gaussian_cp(), dim=1)
    assert levy.check_moment(tr, 3.0) == "finite"
    heavy = levy.CompoundPoisson(
        rate=1.0,
        sampler=lambda rng, n: rng.standard_cauchy(n),
        density=lambda z: 1.0 / (math.pi * (1.0 + z * z)),
        symmetric=True,
    )
    trh = levy.LevyTriple(jump_spec=heavy, dim=1)
    assert levy.check_moment(trh, 2.0) == "infinite"
    assert levy.check_moment(trh, 0.5) == "finite"


def test_check_moment_unknown_without_density():
    spec = levy.CompoundPoisson(rate=1.0,
                                sampler=lambda rng, n: rng.standard_normal(n))
    with pytest.raises(ValueError):
        levy.LevyTriple(jump_spec=spec, dim=1)  # asymmetric without density
    sym = levy.CompoundPoisson(rate=1.0,
                               sampler=lambda rng, n: rng.standard_normal(n),
                               symmetric=True)
    tr = levy.LevyTriple(jump_spec=sym, dim=1)
    with pytest.raises(levy.UnknownMomentError):
        levy.check_moment(tr, 2.0)


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------


def test_generator_annihilates_constants():
    tr = levy.LevyTriple(drift=[0.5], covariance=np.array([[1.0]]),
                         jump_spec=levy.AlphaStable(1.2, 0.3))
    assert levy.apply_generator(tr, lambda x: 3.14, [0.2]) == pytest.approx(0.0, abs=1e-9)


def test_generator_gaussian_trace():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    tr = levy.LevyTriple.brownian(A)
    got = levy.apply_generator(tr, lambda x: float(x @ x), [0.7, -0.2])
    assert got == pytest.approx(np.trace(A), abs=1e-6)


@pytest.mark.parametrize("case", ["gaussian", "stable"])
def test_generator_symbol_fourier_multiplier(case):
    if case == "gaussian":
        tr, tol = levy.LevyTriple.brownian(np.array([[2.0]])), 1e-6
    else:
        tr, tol = levy.LevyTriple.symmetric_stable(
            1.5, levy.stable_scale_for_multiplier(1.5, 0.5)), 1e-4
    xi, x0 = 1.3, 0.4
    got = complex(
        levy.apply_generator(tr, lambda y: math.cos(xi * y[0]), [x0], tol=tol),
        levy.apply_generator(tr, lambda y: math.sin(xi * y[0]), [x0], tol=tol),
    )
    want = levy.symbol(tr, [xi]) * np.exp(1j * xi * x0)
    assert abs(got - want) < tol


def test_generator_truncated_stable_matches_its_symbol():
    tr = levy.LevyTriple(jump_spec=levy.TruncatedStable(1.2, 0.3, 0.05), dim=1)
    xi, x0 = 0.9, 0.2
    got = complex(
        levy.apply_generator(tr, lambda y: math.cos(xi * y[0]), [x0], tol=1e-4),
        levy.apply_generator(tr, lambda y: math.sin(xi * y[0]), [x0], tol=1e-4),
    )
    want = levy.symbol(tr, [xi]) * np.exp(1j * xi * x0)
    assert abs(got - want) < 1e-4


def test_generator_drift_only():
    tr = levy.LevyTriple(drift=[2.0], dim=1)
    got = levy.apply_generator(tr, lambda x: math.sin(x[0]), [0.0])
    assert got == pytest.approx(2.0, abs=1e-7)


def test_adjoint_generator_flips_drift():
    tr = levy.LevyTriple(drift=[2.0], covariance=np.array([[1.0]]), dim=1)
    u = lambda x: math.sin(x[0])
    forward = levy.apply_generator(tr, u, [0.3])
    adjoint = levy.apply_adjoint_generator(tr, u, [0.3])
    # sin'' term is shared; the drift contribution flips sign
    drift_part = 2.0 * math.cos(0.3)
    assert forward - adjoint == pytest.approx(2.0 * drift_part, abs=1e-6)


def test_triple_validation():
    with pytest.raises(ValueError):
        levy.LevyTriple(covariance=np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        levy.LevyTriple(covariance=np.array([[-1.0]]))
    with pytest.raises(ValueError):
        levy.AlphaStable(2.0)  # alpha = 2 belongs to the covariance
    with pytest.raises(ValueError):
        levy.AlphaStable(0.0)


def test_generator_quadrature_error_carries_residual():
    tr = levy.LevyTriple.symmetric_stable(1.5, 0.5)
    with pytest.raises(levy.QuadratureError) as exc:
        levy.apply_generator(tr, lambda y: math.cos(3.0 * y[0]), [0.1],
                             tol=1e-14)
    assert exc.value.residual is not None and exc.value.residual > 1e-14
