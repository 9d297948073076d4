"""Path-wise simulation of the driving stochastic equations.

Three coupling modes for the Euler--Maruyama step on a backward time grid
(nodes decreasing from 0):

* ``DRIFT_ONLY``     X' = X + G(s, X) dt + dL          (coupling in the drift)
* ``GENERAL``        X' = X + G(s, X) . dL             (coefficient multiplies
                                                        the whole increment,
                                                        big jumps included)
* ``CONSTANT_BIG_JUMP``  X' = X + G(s, X) . dL_small + dJ_big
                                                       (big jumps enter with
                                                        unit coefficient)

The coefficient is always evaluated at the pre-step state (left limits).
On aligned grids with shared noise the Euler flow composes exactly:
running [t1,t3] in one pass performs bit-for-bit the same updates as
running [t1,t2] and continuing to t3, which is what ``flow_test`` checks
path-wise; the distributional half of the Markov property is checked by a
two-sample Kolmogorov--Smirnov test.

``nested_conditional_simulate`` replaces the field shortcut for the
conditional expectation by a brute-force inner Monte Carlo at every outer
step; it exists to validate the Markov substitution at desk scale and is
budget-capped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import levy
from .field import SpaceTimeField, TimeGrid


class BudgetExceededError(RuntimeError):
    """The requested nested simulation exceeds the step budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class CouplingMode(Enum):
    """How the coefficient meets the noise.  GENERAL multiplies the whole
    increment and is only admissible when the big jumps carry a finite
    beta-moment for some beta > 1 (the solver's problem layer enforces that
    gate); CONSTANT_BIG_JUMP needs no moment condition."""

    DRIFT_ONLY = "drift_only"
    GENERAL = "general"
    CONSTANT_BIG_JUMP = "constant_big_jump"


@dataclass
class SamplePath:
    """One simulated trajectory on the time nodes of a grid restricted to
    [start time, 0]; ``states[i]`` is the state at ``times[i]`` (decreasing
    from 0 is *not* used here: times ascend from the start to 0 for natural
    reading of the trajectory)."""

    start_time: float
    start_state: np.ndarray
    times: np.ndarray          # ascending from start_time to 0
    states: np.ndarray         # (len(times), d)
    jumps: list = dc_field(default_factory=list)  # (time, jump vector) of big jumps
    divergent: bool = False

    def terminal(self) -> np.ndarray:
        return self.states[-1]


def _restrict_ascending(grid: TimeGrid, t: float) -> np.ndarray:
    nodes = grid.restricted(t)
    return nodes[::-1].copy()  # ascending t ... 0


def _coerce_matrix_coefficient(value, d, m, n):
    """Normalize a coefficient closure result to shape (n, d, m)."""
    a = np.asarray(value, float)
    if a.ndim == 1 and d == 1 and m == 1:
        return a.reshape(n, 1, 1)
    if a.ndim == 2 and a.shape == (n, d) and m == 1:
        return a.reshape(n, d, 1)
    if a.ndim == 3 and a.shape == (n, d, m):
        return a
    raise ValueError(f"coefficient returned shape {a.shape}, want ({n},{d},{m})")


def _coerce_drift(value, d, n):
    a = np.asarray(value, float)
    if a.ndim == 1 and d == 1:
        return a.reshape(n, 1)
    if a.shape == (n, d):
        return a
    raise ValueError(f"drift closure returned shape {a.shape}, want ({n},{d})")


def simulate_path(mode: CouplingMode, coefficient: Callable,
                  triple: levy.LevyTriple, start, grid: TimeGrid,
                  noise: levy.NoiseStream, end_time: float = 0.0) -> SamplePath:
    """Euler--Maruyama trajectory from ``start = (t, x)`` up to ``end_time``
    (a grid node, default 0).

    ``coefficient(s, x)`` returns the drift G(s, x) in drift-only mode
    (shape (n, d) for x of shape (n, d)) or the matrix coefficient
    (shape (n, d, m)) in the multiplicative modes.  The coefficient is
    evaluated at the pre-step (left-limit) state.  Increments are drawn one
    step at a time from ``noise`` so that trajectories composed across
    aligned sub-grids consume identical draws: stopping at an intermediate
    node and continuing with the same stream is bit-identical to one pass.

    Non-finite states mark the path divergent (reported, not raised); the
    state freezes at its last finite value.
    """
    t0, x0 = start
    x0 = np.atleast_1d(np.asarray(x0, float))
    d = x0.size
    m = triple.dim
    times = _restrict_ascending(grid, t0)
    if abs(times[0] - t0) > 1e-9 * grid.dt:
        raise ValueError("start time must be a node of the grid")
    if end_time != 0.0:
        keep = int(round((end_time - t0) / grid.dt))
        if keep < 1 or abs(t0 + keep * grid.dt - end_time) > 1e-9 * grid.dt:
            raise ValueError("end_time must be a grid node after the start")
        times = times[: keep + 1]
    states = np.empty((times.size, d))
    states[0] = x0
    jumps: list = []
    divergent = False
    x = x0.copy()
    for i in range(times.size - 1):
        s = times[i]
        dt = times[i + 1] - times[i]
        if divergent:
            states[i + 1] = x
            continue
        if mode is CouplingMode.DRIFT_ONLY:
            g = _coerce_drift(coefficient(s, x[None, :]), d, 1)[0]
            dl = levy.sample_increments(triple, dt, noise, 1)[0]
            xn = x + g * dt + dl
        elif mode is CouplingMode.GENERAL:
            g = _coerce_matrix_coefficient(coefficient(s, x[None, :]), d, m, 1)[0]
            dl = levy.sample_increments(triple, dt, noise, 1)[0]
            xn = x + g @ dl
        else:
            g = _coerce_matrix_coefficient(coefficient(s, x[None, :]), d, m, 1)[0]
            small, big = levy.split_increments(triple, dt, noise, 1)
            xn = x + g @ small[0] + big[0]
            if np.any(big[0] != 0.0):
                jumps.append((times[i + 1], big[0].copy()))
        if np.all(np.isfinite(xn)):
            x = xn
        else:
            divergent = True
        states[i + 1] = x
    return SamplePath(t0, x0, times, states, jumps, divergent)


def simulate_ensemble(mode: CouplingMode, coefficient: Callable,
                      triple: levy.LevyTriple, start, grid: TimeGrid,
                      seed: int, n_paths: int, stream_offset: int = 0,
                      terminal_only: bool = False):
    """n_paths independent trajectories, stream_id = stream_offset + p.

    Pure-Gaussian triples take a vectorized route that draws, per path, the
    same normal sequence as ``simulate_path`` would (batched draws equal
    sequential draws bit-for-bit), so results agree path-by-path with the
    scalar API.  Jump triples fall back to per-path simulation.

    Returns (times, states) with states of shape (n_paths, n_times, d), or
    (times, terminal states (n_paths, d)) when ``terminal_only``.
    """
    t0, x0 = start
    x0 = np.atleast_1d(np.asarray(x0, float))
    d = x0.size
    m = triple.dim
    times = _restrict_ascending(grid, t0)
    nstep = times.size - 1

    if triple.is_pure_gaussian:
        dls = np.empty((n_paths, nstep, m))
        for p in range(n_paths):
            ns = levy.NoiseStream(seed, stream_offset + p)
            dls[p] = levy.sample_increments(triple, grid.dt, ns, nstep)
        X = np.tile(x0, (n_paths, 1))
        out = None if terminal_only else np.empty((n_paths, nstep + 1, d))
        if out is not None:
            out[:, 0] = X
        for i in range(nstep):
            s = times[i]
            dt = times[i + 1] - times[i]
            if mode is CouplingMode.DRIFT_ONLY:
                g = _coerce_drift(coefficient(s, X), d, n_paths)
                X = X + g * dt + dls[:, i]
            elif mode is CouplingMode.GENERAL:
                g = _coerce_matrix_coefficient(coefficient(s, X), d, m, n_paths)
                X = X + np.einsum("pij,pj->pi", g, dls[:, i])
            else:
                g = _coerce_matrix_coefficient(coefficient(s, X), d, m, n_paths)
                X = X + np.einsum("pij,pj->pi", g, dls[:, i])
            if out is not None:
                out[:, i + 1] = X
        return (times, X) if terminal_only else (times, out)

    paths = [
        simulate_path(mode, coefficient, triple, (t0, x0), grid,
                      levy.NoiseStream(seed, stream_offset + p))
        for p in range(n_paths)
    ]
    states = np.stack([p.states for p in paths])
    return (times, states[:, -1]) if terminal_only else (times, states)


# ---------------------------------------------------------------------------
# flow / Markov property test
# ---------------------------------------------------------------------------


@dataclass
class FlowTestResult:
    pathwise_gap: float        # max |X_{t1,t3} - X_{t2,t3}(X_{t1,t2})|, shared noise
    ks_statistic: float        # two-sample KS between composed and direct laws
    ks_critical_1pct: float
    n_paths: int

    @property
    def distributional_ok(self) -> bool:
        return self.ks_statistic < self.ks_critical_1pct


def ks_critical_value(n: int, m: int, level: float = 0.01) -> float:
    """Two-sample Kolmogorov--Smirnov critical value at the given level."""
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def flow_test(mode: CouplingMode, coefficient: Callable,
              triple: levy.LevyTriple, t1: float, t2: float, t3: float,
              x, n_paths: int, grid: TimeGrid, seed: int,
              observable: Optional[Callable] = None) -> FlowTestResult:
    """Check the flow identity and the Markov property of the Euler scheme.

    Path-wise half (shared noise): for each path, run [t1 -> 0] in one pass
    and compare the state at t3 against restarting at t2 from the same
    stream; on aligned grids the two perform identical floating-point
    updates, so the gap must be 0 up to round-off.

    Distributional half (independent noise): empirical law of
    phi(X_{t1,t3}(x)) against phi(X_{t2,t3}(y)) with y drawn as X_{t1,t2}(x)
    from independent streams (two-sample KS statistic, 1% critical value).
    ``observable`` defaults to the first state component.
    """
    if not (t1 < t2 < t3 <= 0.0):
        raise ValueError("need t1 < t2 < t3 <= 0")
    for t in (t1, t2, t3):
        grid.index_of(t)  # raises on misaligned grids
    x = np.atleast_1d(np.asarray(x, float))
    if observable is None:
        observable = lambda xs: xs[..., 0]

    gap = 0.0
    direct_t3 = np.empty((n_paths, x.size))
    for p in range(n_paths):
        ns = levy.NoiseStream(seed, p)
        full = simulate_path(mode, coefficient, triple, (t1, x), grid, ns,
                             end_time=t3)
        # composed run with a rewound copy of the same stream: stop at t2,
        # then continue with the same stream object so the remaining
        # per-step draws are consumed in identical order
        ns2 = levy.NoiseStream(seed, p)
        leg1 = simulate_path(mode, coefficient, triple, (t1, x), grid, ns2,
                             end_time=t2)
        leg2 = simulate_path(mode, coefficient, triple, (t2, leg1.terminal()),
                             grid, ns2, end_time=t3)
        gap = max(gap, float(np.max(np.abs(full.terminal() - leg2.terminal()))))
        direct_t3[p] = full.terminal()

    # distributional check with independent streams
    composed = np.empty(n_paths)
    for p in range(n_paths):
        ns_a = levy.NoiseStream(seed ^ 0x5DEECE66D, 2 * p)
        leg1 = simulate_path(mode, coefficient, triple, (t1, x), grid, ns_a,
                             end_time=t2)
        ns_b = levy.NoiseStream(seed ^ 0x2545F4914F6CDD1D, 2 * p + 1)
        leg2 = simulate_path(mode, coefficient, triple, (t2, leg1.terminal()),
                             grid, ns_b, end_time=t3)
        composed[p] = observable(leg2.terminal())
    direct_obs = observable(direct_t3)
    ks = stats.ks_2samp(direct_obs, composed, method="asymp").statistic
    return FlowTestResult(
        pathwise_gap=gap,
        ks_statistic=float(ks),
        ks_critical_1pct=ks_critical_value(n_paths, n_paths, 0.01),
        n_paths=n_paths,
    )


def flow_test_gaussian(mode: CouplingMode, coefficient: Callable,
                       triple: levy.LevyTriple, t1, t2, t3, x, n_paths,
                       grid: TimeGrid, seed: int,
                       observable: Optional[Callable] = None) -> FlowTestResult:
    """Vectorized flow test for pure-Gaussian triples (same semantics as
    ``flow_test``, practical at n_paths = 1e4)."""
    if not triple.is_pure_gaussian:
        return flow_test(mode, coefficient, triple, t1, t2, t3, x, n_paths,
                         grid, seed, observable)
    if not (t1 < t2 < t3 <= 0.0):
        raise ValueError("need t1 < t2 < t3 <= 0")
    for t in (t1, t2, t3):
        grid.index_of(t)
    x = np.atleast_1d(np.asarray(x, float))
    d, m = x.size, triple.dim
    if observable is None:
        observable = lambda xs: xs[..., 0]
    nstep = int(round(-t1 / grid.dt))
    j2 = int(round((t2 - t1) / grid.dt))
    j3 = int(round((t3 - t1) / grid.dt))
    times = _restrict_ascending(grid, t1)

    def draw_all(seed_, offset):
        dls = np.empty((n_paths, nstep, m))
        for p in range(n_paths):
            ns = levy.NoiseStream(seed_, offset + p)
            dls[p] = levy.sample_increments(triple, grid.dt, ns, nstep)
        return dls

    def advance(X, i, dls):
        s = times[i]
        if mode is CouplingMode.DRIFT_ONLY:
            g = _coerce_drift(coefficient(s, X), d, X.shape[0])
            return X + g * grid.dt + dls[:, i]
        g = _coerce_matrix_coefficient(coefficient(s, X), d, m, X.shape[0])
        return X + np.einsum("pij,pj->pi", g, dls[:, i])

    dls = draw_all(seed, 0)
    X = np.tile(x, (n_paths, 1))
    for i in range(j3):
        X = advance(X, i, dls)
    direct = X.copy()
    # composed with identical draws: restart from the stored state at t2
    X = np.tile(x, (n_paths, 1))
    for i in range(j2):
        X = advance(X, i, dls)
    for i in range(j2, j3):
        X = advance(X, i, dls)
    gap = float(np.max(np.abs(direct - X)))

    dls_a = draw_all(seed ^ 0x5DEECE66D, 0)
    dls_b = draw_all(seed ^ 0x2545F4914F6CDD1D, n_paths)
    X = np.tile(x, (n_paths, 1))
    for i in range(j2):
        X = advance(X, i, dls_a)
    for i in range(j2, j3):
        X = advance(X, i, dls_b)
    ks = stats.ks_2samp(observable(direct), observable(X), method="asymp").statistic
    return FlowTestResult(gap, float(ks), ks_critical_value(n_paths, n_paths),
                          n_paths)


# ---------------------------------------------------------------------------
# nested conditional-expectation validation
# ---------------------------------------------------------------------------


@dataclass
class NestedDiagnostic:
    max_gap: float             # max |inner estimate - frozen field| along paths
    mean_gap: float
    inner_sigma: float         # largest inner-ensemble standard error
    total_steps: int


def nested_conditional_simulate(problem, frozen: SpaceTimeField, start,
                                outer: int, inner: int, grid: TimeGrid,
                                seed: int, budget: int = 1_000_000):
    """Outer paths whose drift uses a brute-force inner Monte Carlo estimate
    of the conditional expectation instead of the frozen field.

    At every outer step from state (s, X): spawn ``inner`` sub-trajectories
    continuing to 0 with coefficients frozen through the field, average the
    terminal-plus-running-cost functional phi(X_0) + sum_r f(r, X_r) dt to
    estimate the conditional expectation, then advance the outer path one
    Euler step with the drift evaluated at that estimate.  The diagnostic
    records the gap between the inner estimates and the frozen field's own
    values along the outer paths (the two agree, up to Monte Carlo and
    interpolation error, exactly when the Markov substitution is valid).

    Enforces outer * inner * n_steps^2 <= budget; raises BudgetExceededError
    with the required budget otherwise.  ``problem`` must be a drift-coupled
    (semi-linear) problem.
    """
    from .pide.problem import SolveMode  # local import to avoid a cycle

    if problem.mode is not SolveMode.SEMILINEAR:
        raise ValueError("nested validation targets drift-coupled problems")
    t0, x0 = start
    x0 = np.atleast_1d(np.asarray(x0, float))
    times = _restrict_ascending(grid, t0)
    nstep = times.size - 1
    required = outer * inner * nstep * nstep
    if required > budget:
        raise BudgetExceededError(
            f"nested simulation needs ~{required} steps > budget {budget}; "
            f"reduce outer/inner counts or coarsen the grid",
            required=required, budget=budget,
        )

    triple = problem.triple
    d = x0.size

    def frozen_drift(s, xs):
        u = frozen.eval(s, xs)
        return problem.G(s, xs, u)

    def frozen_source(s, xs):
        u = frozen.eval(s, xs)
        return problem.F(s, xs, u)

    paths = []
    gaps = []
    sig_max = 0.0
    total = 0
    for p in range(outer):
        ns_outer = levy.NoiseStream(seed, p)
        x = x0.copy()
        states = np.empty((nstep + 1, d))
        states[0] = x
        for i in range(nstep):
            s = times[i]
            # inner ensemble from (s, x), coefficients via the frozen field
            inner_vals = np.zeros((inner, problem.val_dim))
            for q in range(inner):
                ns_in = levy.NoiseStream(seed ^ 0x9E3779B97F4A7C15,
                                         (p * 131071 + i) * 65537 + q)
                sub = simulate_path(CouplingMode.DRIFT_ONLY, frozen_drift,
                                    triple, (s, x), grid, ns_in)
                total += sub.times.size - 1
                run = np.zeros(problem.val_dim)
                for j in range(sub.times.size - 1):
                    run += np.atleast_1d(
                        frozen_source(sub.times[j], sub.states[j][None, :])[0]
                    ) * grid.dt
                inner_vals[q] = problem.phi(sub.states[-1][None, :])[0] + run
            est = inner_vals.mean(axis=0)
            sig = float(
                np.max(inner_vals.std(axis=0, ddof=1)) / math.sqrt(inner)
            )
            sig_max = max(sig_max, sig)
            ref = np.atleast_1d(frozen.eval(s, x))
            gaps.append(float(np.linalg.norm(est - ref)))
            g = np.atleast_1d(
                np.asarray(problem.G(s, x[None, :], est[None, :]), float)[0]
            )
            dl = levy.sample_increments(triple, grid.dt, ns_outer, 1)[0]
            x = x + g * grid.dt + dl
            states[i + 1] = x
        paths.append(SamplePath(t0, x0, times, states))
    diag = NestedDiagnostic(
        max_gap=float(np.max(gaps)) if gaps else 0.0,
        mean_gap=float(np.mean(gaps)) if gaps else 0.0,
        inner_sigma=sig_max,
        total_steps=total,
    )
    return paths, diag
