"""Fixed-point Monte Carlo solver for backward PIDEs.

The outer loop is Picard iteration on the field: freeze the coupling at the
previous iterate, evaluate the terminal-plus-running-cost expectation of the
frozen-coefficient process, repeat until the sup-residual contracts below
tolerance.  Time is handled in windows marched backward from 0; each finished
window re-terminalizes the next one with its earliest slice, and a window
that refuses to contract is halved down to a floor of a few steps.

Within a window the expectation field is evolved by per-step conditional
expectations (tower property of the Markov flow): every level is the
particle average of the next level read at the propagated sample points.
Common random numbers -- one counter-based stream per (time step, node,
particle), reused across Picard iterations -- make the iteration map
deterministic, so the contraction test is meaningful and reruns are
bit-identical.  ``feynman_kac_estimate`` keeps the literal path-ensemble
estimator for cross-validation at probe nodes.
"""

from __future__ import annotations

import math
import time as _time
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .. import levy
from ..field import SpaceTimeField, TimeGrid
from . import kernels
from .probes import blow_up_detector
from .problem import (
    ModeError,
    NonContractionError,
    PideProblem,
    SolveMode,
    SolveReport,
    SolverConfig,
    WindowReport,
)

_NOISE_SALT = 0x9E3779B97F4A7C15


def _philox_key(seed: int, step: int) -> np.ndarray:
    """Level-keyed Philox key as an explicit uint64 array (a plain int list
    would round-trip through float64 and lose the low key bits)."""
    return np.array([(seed ^ _NOISE_SALT) & (2**64 - 1), step & (2**64 - 1)],
                    dtype=np.uint64)


class _NoiseBank:
    """Level-keyed increment draws with optional caching.

    Step ``i`` spans [-(i+1) dt, -i dt]; its draws come from a Philox stream
    keyed by (seed ^ salt, i), laid out as (node, particle).  Identical keys
    across Picard iterations realize common random numbers whether or not
    the cache holds the array.
    """

    def __init__(self, triple, dt, nn, n_particles, seed, dtype, split,
                 cache_bytes):
        self.triple = triple
        self.dt = dt
        self.nn = nn
        self.np_ = n_particles
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.split = split
        itemsize = self.dtype.itemsize * (2 if split else 1)
        self.entry_bytes = nn * n_particles * itemsize
        self.max_entries = max(0, int(cache_bytes // max(self.entry_bytes, 1)))
        self._cache: dict = {}

    def _generate(self, step: int):
        rng = np.random.Generator(np.random.Philox(key=_philox_key(self.seed,
                                                                   step)))
        count = self.nn * self.np_
        if self.split:
            small, big = levy.split_increments(self.triple, self.dt, rng, count)
            return (
                small[:, 0].reshape(self.nn, self.np_).astype(self.dtype),
                big[:, 0].reshape(self.nn, self.np_).astype(self.dtype),
            )
        incr = levy.sample_increments(self.triple, self.dt, rng, count)
        return incr[:, 0].reshape(self.nn, self.np_).astype(self.dtype)

    def get(self, step: int):
        if step in self._cache:
            return self._cache[step]
        val = self._generate(step)
        if len(self._cache) < self.max_entries:
            self._cache[step] = val
        return val

    def drop(self, steps):
        for s in steps:
            self._cache.pop(s, None)


def _spline_coeffs(xg, vals):
    cs = CubicSpline(xg, vals)
    return cs.c[0], cs.c[1], cs.c[2], cs.c[3]


def _as_nodes_matrix(a, nn, k, what):
    out = np.asarray(a, float)
    if out.ndim == 1 and k == 1:
        out = out[:, None]
    if out.shape != (nn, k):
        raise ValueError(f"{what} returned shape {out.shape}, want ({nn},{k})")
    return out


class _FastPath1D:
    """d = k = m = 1 sweep machinery (numba kernels, cubic splines)."""

    def __init__(self, problem, config):
        self.problem = problem
        self.config = config
        self.sg = config.space_grid
        self.xg = self.sg.axis(0)
        self.nn = self.xg.size
        self.h = float(self.sg.spacing[0])
        self.lo = float(self.sg.lower[0])
        self.dt = config.time_grid.dt
        self.use_cubic = config.interp == "cubic" and self.nn >= 4
        mode = problem.mode
        self.split = mode is SolveMode.QUASILINEAR_CONSTANT_BIG_JUMP
        self.bank = _NoiseBank(
            problem.triple, self.dt, self.nn, config.n_particles, config.seed,
            config.noise_dtype, self.split, config.noise_cache_bytes,
        )
        self._zero_big = np.zeros((1, 1), dtype=np.dtype(config.noise_dtype))

    def coefficients(self, t, u_prev):
        """(base, scale, weight, fdt) arrays for the sweep at time t."""
        pr = self.problem
        x = self.xg[:, None]
        u = u_prev[:, None] if u_prev.ndim == 1 else u_prev
        mode = pr.mode
        if mode in (SolveMode.SEMILINEAR, SolveMode.LINEAR_FK):
            uarg = np.zeros_like(u) if mode is SolveMode.LINEAR_FK else u
            g = np.asarray(pr.G(t, x, uarg), float).reshape(self.nn)
            base = self.xg + g * self.dt
            scale = np.ones(self.nn)
        else:
            g = np.asarray(pr.G(t, x, u), float).reshape(self.nn)
            base = self.xg.copy()
            scale = g
        if mode is SolveMode.LINEAR_FK:
            hmat = np.asarray(pr.H(t, x), float).reshape(self.nn)
            weight = 1.0 + hmat * self.dt
            fsrc = np.asarray(pr.F(t, x, np.zeros_like(u)), float).reshape(self.nn)
        else:
            weight = np.ones(self.nn)
            fsrc = np.asarray(pr.F(t, x, u), float).reshape(self.nn)
        return base, scale, weight, fsrc * self.dt, float(np.max(np.abs(fsrc)))

    def sweep(self, step, vnext, sig2next, base, scale, weight, fdt,
              want_sigma):
        draws = self.bank.get(step)
        incr, big, has_big = (
            (draws[0], draws[1], True) if self.split else (draws, self._zero_big, False)
        )
        if self.use_cubic:
            c0, c1, c2, c3 = _spline_coeffs(self.xg, vnext)
            out, _var, sig2, exits = kernels.sweep_cubic(
                c0, c1, c2, c3, self.xg, self.lo, self.h, vnext[0], vnext[-1],
                base, scale, incr, big, has_big, fdt, weight, sig2next,
                want_sigma,
            )
        else:
            out, _var, sig2, exits = kernels.sweep_linear(
                vnext, self.xg, self.lo, self.h, base, scale, incr, big,
                has_big, fdt, weight, sig2next, want_sigma,
            )
        exit_frac = float(exits.sum()) / (self.nn * self.config.n_particles)
        return out, sig2, exit_frac


class _GeneralPath:
    """Any d, k, m: vectorized numpy sweeps with multilinear interpolation."""

    def __init__(self, problem, config):
        self.problem = problem
        self.config = config
        self.sg = config.space_grid
        self.nodes = self.sg.nodes()
        self.nn = self.nodes.shape[0]
        self.d = self.sg.dim
        self.k = problem.val_dim
        self.m = problem.triple.dim
        self.dt = config.time_grid.dt
        mode = problem.mode
        self.split = mode is SolveMode.QUASILINEAR_CONSTANT_BIG_JUMP
        if config.interp == "cubic" and self.d > 1:
            problem.notes.append("cubic interpolation is 1D-only; using linear")
        self._shape = tuple(self.sg.points)

    def _draws(self, step):
        rng = np.random.Generator(
            np.random.Philox(key=_philox_key(self.config.seed, step))
        )
        count = self.nn * self.config.n_particles
        if self.split:
            small, big = levy.split_increments(self.problem.triple, self.dt,
                                               rng, count)
            return (
                small.reshape(self.nn, self.config.n_particles, self.m),
                big.reshape(self.nn, self.config.n_particles, self.m),
            )
        incr = levy.sample_increments(self.problem.triple, self.dt, rng, count)
        return incr.reshape(self.nn, self.config.n_particles, self.m)

    def _interp(self, vnext_flat, pts):
        """Multilinear interpolation of (nn, k) node values at pts (q, d)."""
        idx, frac = self.sg.locate(pts)
        vals = vnext_flat.reshape(self._shape + (self.k,))
        out = np.zeros((pts.shape[0], self.k))
        for corner in range(1 << self.d):
            w = np.ones(pts.shape[0])
            ix = []
            for a in range(self.d):
                bit = (corner >> a) & 1
                w = w * (frac[:, a] if bit else 1.0 - frac[:, a])
                ix.append(idx[:, a] + bit)
            out += w[:, None] * vals[tuple(ix)]
        return out

    def coefficients(self, t, u_prev):
        pr = self.problem
        mode = pr.mode
        uarg = np.zeros_like(u_prev) if mode is SolveMode.LINEAR_FK else u_prev
        if mode in (SolveMode.SEMILINEAR, SolveMode.LINEAR_FK):
            g = np.asarray(pr.G(t, self.nodes, uarg), float)
            g = g.reshape(self.nn, self.d)
            coef = None
        else:
            g = None
            coef = np.asarray(pr.G(t, self.nodes, u_prev), float)
            if coef.ndim == 1:
                coef = coef.reshape(self.nn, 1, 1)
            elif coef.ndim == 2 and self.m == 1:
                coef = coef[:, :, None]
            coef = coef.reshape(self.nn, self.d, self.m)
        if mode is SolveMode.LINEAR_FK:
            hmat = np.asarray(pr.H(t, self.nodes), float).reshape(
                self.nn, self.k, self.k
            )
            weight = np.eye(self.k)[None] + hmat * self.dt
        else:
            weight = None
        fsrc = _as_nodes_matrix(pr.F(t, self.nodes, uarg), self.nn, self.k, "F")
        return g, coef, weight, fsrc

    def sweep_general(self, step, vnext_flat, sig2next, t, u_prev, want_sigma):
        g, coef, weight, fsrc = self.coefficients(t, u_prev)
        draws = self._draws(step)
        if self.split:
            small, big = draws
            pts = (
                self.nodes[:, None, :]
                + np.einsum("ndm,npm->npd", coef, small)
                + big
            )
        elif coef is not None:
            pts = self.nodes[:, None, :] + np.einsum("ndm,npm->npd", coef, draws)
        else:
            pts = self.nodes[:, None, :] + g[:, None, :] * self.dt + draws
        flat = pts.reshape(-1, self.d)
        vals = self._interp(vnext_flat, flat).reshape(
            self.nn, self.config.n_particles, self.k
        )
        mean = vals.mean(axis=1)
        var = vals.var(axis=1, ddof=1).max(axis=1)
        if weight is not None:
            mean = np.einsum("nij,nj->ni", weight, mean)
        out = mean + fsrc * self.dt
        sig2 = np.zeros(self.nn)
        if want_sigma:
            idx, frac = self.sg.locate(flat)
            s2 = sig2next.reshape(self._shape)
            acc = np.zeros(flat.shape[0])
            for corner in range(1 << self.d):
                w = np.ones(flat.shape[0])
                ix = []
                for a in range(self.d):
                    bit = (corner >> a) & 1
                    w = w * (frac[:, a] if bit else 1.0 - frac[:, a])
                    ix.append(idx[:, a] + bit)
                acc += w * s2[tuple(ix)]
            sig2 = (
                var / self.config.n_particles
                + acc.reshape(self.nn, self.config.n_particles).mean(axis=1)
            )
        inside = np.all(
            (flat >= self.sg.lower) & (flat <= self.sg.upper), axis=1
        )
        exit_frac = 1.0 - float(inside.mean())
        return out, sig2, exit_frac, float(np.max(np.abs(fsrc)))


def solve(problem: PideProblem, config: SolverConfig):
    """Run the windowed Picard solver; returns (field, report).

    The returned field covers [t_reached, 0]; t_reached is the horizon
    unless blow-up was declared, in which case it is the detected maximal
    time and ``report.blow_up`` is set.
    """
    t_begin = _time.perf_counter()
    sg, tg = config.space_grid, config.time_grid
    if problem.space_dim != sg.dim:
        raise ValueError("problem.space_dim disagrees with the space grid")
    k = problem.val_dim
    nn = int(np.prod(sg.points))
    if config.step_budget is not None:
        from ..sfde import BudgetExceededError

        required = float(tg.n_steps) * nn * config.n_particles * config.max_iter
        if required > config.step_budget:
            raise BudgetExceededError(
                f"solve needs up to {required:.3g} particle-steps "
                f"> budget {config.step_budget:.3g}; shrink the grid, the "
                f"particle count or the iteration cap",
                required=required, budget=config.step_budget,
            )
    fast = sg.dim == 1 and k == 1 and problem.triple.dim == 1

    phiv = problem.phi_values(sg).reshape(nn, k)
    phi_sup = float(np.max(np.abs(phiv)))
    # grid Lipschitz norm of the terminal data
    phi_field = SpaceTimeField(
        sg, TimeGrid(-tg.dt, tg.dt),
        np.broadcast_to(
            phiv.reshape(tuple(sg.points) + (k,)), (2,) + tuple(sg.points) + (k,)
        ).copy(),
    )
    phi_lip = phi_field.lipschitz_norm(0.0)
    # default threshold 25 |grad phi|_inf, floored so that flat terminal
    # data with a gradient-carrying source cannot trip the detector
    threshold = (
        config.blowup_threshold
        if config.blowup_threshold is not None
        else 25.0 * phi_lip + max(1.0, phi_sup)
    )

    report = SolveReport(
        mode=problem.mode.value, n_particles=config.n_particles,
        seed=config.seed, phi_sup=phi_sup, phi_lip=phi_lip,
        blowup_threshold=threshold,
    )
    report.warnings.extend(problem.notes)

    n_total = tg.n_steps
    U = np.empty((n_total + 1, nn, k))
    SIG2 = np.zeros((n_total + 1, nn))
    U[0] = phiv

    engine = _FastPath1D(problem, config) if fast else _GeneralPath(problem, config)

    lip_history = []
    f_sup_seen = 0.0
    a = 0
    wsteps = config.window_steps
    blow_up = False
    t_max: Optional[float] = None
    pending_halvings = 0  # halvings applied while retrying the current window

    def level_lip(vals_flat):
        f = SpaceTimeField(
            sg, TimeGrid(-tg.dt, tg.dt),
            np.broadcast_to(
                vals_flat.reshape(tuple(sg.points) + (k,)),
                (2,) + tuple(sg.points) + (k,),
            ).copy(),
        )
        return f.lipschitz_norm(0.0)

    while a < n_total and not blow_up:
        b = min(a + wsteps, n_total)
        klev = b - a
        terminal = U[a].copy()
        sig2_terminal = SIG2[a].copy()
        Uw = np.tile(terminal, (klev + 1, 1, 1))
        sig2w = np.tile(sig2_terminal, (klev + 1, 1))
        residuals = []
        converged = False
        exit_frac_w = 0.0

        for it in range(1, config.max_iter + 1):
            Unew = np.empty_like(Uw)
            Unew[0] = terminal
            s2new = np.empty_like(sig2w)
            s2new[0] = sig2_terminal
            for l in range(1, klev + 1):
                gi = a + l
                t_l = -gi * tg.dt
                step = gi - 1
                if fast:
                    base, scale, weight, fdt, fmax = engine.coefficients(
                        t_l, Uw[l][:, 0]
                    )
                    out, sig2, ef = engine.sweep(
                        step, Unew[l - 1][:, 0], s2new[l - 1], base, scale,
                        weight, fdt, config.track_sigma,
                    )
                    Unew[l][:, 0] = out
                    s2new[l] = sig2
                else:
                    out, sig2, ef, fmax = engine.sweep_general(
                        step, Unew[l - 1], s2new[l - 1], t_l, Uw[l],
                        config.track_sigma,
                    )
                    Unew[l] = out
                    s2new[l] = sig2
                f_sup_seen = max(f_sup_seen, fmax)
                exit_frac_w = max(exit_frac_w, ef)
            resid = float(np.max(np.abs(Unew - Uw)))
            residuals.append(resid)
            Uw, sig2w = Unew, s2new

            # a-priori sup bound check on this iterate
            sig_margin = 3.0 * math.sqrt(max(float(np.max(sig2w)), 0.0))
            for l in range(klev + 1):
                t_l = -(a + l) * tg.dt
                bound = phi_sup + (-t_l) * f_sup_seen + sig_margin + 1e-12
                sup_l = float(np.max(np.abs(Uw[l])))
                if sup_l > bound:
                    report.apriori_violations.append(
                        f"iterate {it}, t={t_l:.6g}: sup {sup_l:.6g} > "
                        f"bound {bound:.6g}"
                    )
            if resid <= config.tol:
                converged = True
                break

        if not converged:
            ratios = [
                residuals[i + 1] / residuals[i]
                for i in range(len(residuals) - 1)
                if residuals[i] > 0
            ]
            stagnating = (not ratios) or any(
                r >= config.stagnation_ratio for r in ratios[-2:]
            )
            if not stagnating:
                report.warnings.append(
                    f"window [{-b * tg.dt:.6g}, {-a * tg.dt:.6g}]: contracting "
                    f"but tolerance not reached in {config.max_iter} iterations"
                )
            elif wsteps > config.window_floor_steps:
                wsteps = max(config.window_floor_steps, wsteps // 2)
                pending_halvings += 1
                report.warnings.append(
                    f"window at t_end={-a * tg.dt:.6g} did not contract; "
                    f"halved to {wsteps} steps"
                )
                continue
            else:
                last_lip = level_lip(Uw[klev])
                report.windows.append(WindowReport(
                    t_start=-b * tg.dt, t_end=-a * tg.dt, n_steps=klev,
                    residuals=residuals, iterations=len(residuals),
                    converged=False, halvings=pending_halvings,
                ))
                if last_lip > threshold and a > 0:
                    # a committed prefix exists: classify the stagnation as
                    # blow-up at the last committed time
                    blow_up = True
                    t_max = -a * tg.dt
                    report.warnings.append(
                        f"floor-length window stagnated with Lipschitz norm "
                        f"{last_lip:.3g} > threshold {threshold:.3g}: "
                        f"declaring blow-up"
                    )
                    break
                report.wall_time = _time.perf_counter() - t_begin
                raise NonContractionError(
                    f"Picard iteration stagnated at the minimal window "
                    f"({klev} steps) ending at t={-a * tg.dt:.6g}",
                    report=report,
                )

        # commit the window
        U[a:b + 1] = Uw
        SIG2[a:b + 1] = sig2w
        report.windows.append(WindowReport(
            t_start=-b * tg.dt, t_end=-a * tg.dt, n_steps=klev,
            residuals=residuals, iterations=len(residuals), converged=converged,
            halvings=pending_halvings,
        ))
        pending_halvings = 0
        report.exit_fraction_max = max(report.exit_fraction_max, exit_frac_w)
        engine_bank = getattr(engine, "bank", None)
        if engine_bank is not None:
            engine_bank.drop(range(a, b))

        lip_b = level_lip(U[b])
        lip_history.append((-b * tg.dt, lip_b))
        decision = blow_up_detector(lip_history, threshold)
        if decision.blown:
            blow_up = True
            t_max = decision.t_max
            a = b
            break
        a = b

    covered = a  # last committed global index
    tg_out = TimeGrid(-covered * tg.dt, tg.dt) if covered > 0 else tg
    vals = U[: covered + 1].reshape((covered + 1,) + tuple(sg.points) + (k,))
    field = SpaceTimeField(sg, tg_out, vals)

    report.blow_up = blow_up
    report.t_max = t_max
    report.times = list(tg_out.nodes)
    report.sup_norms = [field.sup_norm(t) for t in tg_out.nodes]
    report.lip_norms = [field.lipschitz_norm(t) for t in tg_out.nodes]
    report.sigma_per_time = [
        float(np.sqrt(np.max(SIG2[i]))) for i in range(covered + 1)
    ]
    report.sigma_max = max(report.sigma_per_time) if report.sigma_per_time else 0.0
    report.source_sup = f_sup_seen
    report.apriori_bound = phi_sup + (-tg_out.horizon) * f_sup_seen
    report.wall_time = _time.perf_counter() - t_begin
    return field, report


def solve_semilinear(problem: PideProblem, config: SolverConfig):
    """Drift-coupled (semi-linear) solve; returns (field, report)."""
    if problem.mode is not SolveMode.SEMILINEAR:
        raise ModeError("solve_semilinear needs a SEMILINEAR problem")
    return solve(problem, config)


def solve_quasilinear(problem: PideProblem, config: SolverConfig):
    """Noise-coefficient-coupled solve; returns (field, report)."""
    if problem.mode not in (
        SolveMode.QUASILINEAR_GENERAL,
        SolveMode.QUASILINEAR_CONSTANT_BIG_JUMP,
    ):
        raise ModeError("solve_quasilinear needs a quasi-linear problem")
    return solve(problem, config)


def solve_linear_fk(problem: PideProblem, config: SolverConfig) -> SpaceTimeField:
    """Linear problem with matrix weight; returns the field.

    The weight solves dZ = H(X) Z ds along each trajectory by explicit
    Euler on the solver grid, entering the sweep as the per-step factor
    (I + H dt).
    """
    if problem.mode is not SolveMode.LINEAR_FK:
        raise ModeError("solve_linear_fk needs a LINEAR_FK problem")
    field, _ = solve(problem, config)
    return field


def feynman_kac_estimate(problem: PideProblem, frozen: SpaceTimeField,
                         start, n_particles: int, grid: TimeGrid, seed: int,
                         stream_offset: int = 0):
    """Literal path-ensemble estimator at one node for a drift-coupled
    problem with coefficients frozen through ``frozen``:

        u(t, x) ~ (1/N) sum_p [ phi(X^p_0) + sum_s F(s, X^p_s) dt ].

    Returns (estimate (k,), standard error (k,)).  This is the direct
    counterpart of the sweep solver and is used to cross-check it.
    """
    from ..sfde import CouplingMode, simulate_ensemble

    if problem.mode is not SolveMode.SEMILINEAR:
        raise ModeError("feynman_kac_estimate targets drift-coupled problems")
    t0, x0 = start

    def drift(s, xs):
        return problem.G(s, xs, frozen.eval(s, xs))

    times, states = simulate_ensemble(
        CouplingMode.DRIFT_ONLY, drift, problem.triple, (t0, x0), grid, seed,
        n_particles, stream_offset,
    )
    vals = np.asarray(problem.phi(states[:, -1, :]), float).reshape(
        n_particles, problem.val_dim
    )
    for j in range(times.size - 1):
        xs = states[:, j, :]
        u = frozen.eval(times[j], xs)
        vals += np.asarray(problem.F(times[j], xs, u), float).reshape(
            n_particles, problem.val_dim
        ) * grid.dt
    return vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(n_particles)
