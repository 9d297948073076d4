"""Registry of named built-in problems and tabulated-closure assembly.

Fully custom problems need no code: coefficients G and F are piecewise
linear tables in u, the terminal datum a table in x, and the noise triple
is described by named fields.  The scalar conservation law enters through
the user-supplied derivative table G = g'(u) plus optional source (the
chain-rule form of the divergence); nothing is differentiated symbolically.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .. import levy
from ..field import SpaceGrid, TimeGrid
from ..pide import CoefficientBounds, PideProblem, SolveMode, SolverConfig
from .config import ConfigError


def build_phi(spec: Optional[dict], val_dim: int = 1) -> Callable:
    """Terminal-datum closure from a named family or a table."""
    spec = spec or {"name": "sin"}
    if "table" in spec:
        xs = np.asarray(spec["table"]["x"], float)
        vs = np.asarray(spec["table"]["value"], float)
        if xs.size != vs.size or xs.size < 2:
            raise ConfigError("phi table needs matching x/value arrays")
        return lambda x: np.interp(x[:, 0], xs, vs)[:, None]
    name = spec.get("name", "sin")
    amp = float(spec.get("amplitude", 1.0))
    if name == "sin":
        return lambda x: amp * np.sin(x[:, :1])
    if name == "cos":
        return lambda x: amp * np.cos(x[:, :1])
    if name == "gauss_bump":
        w = float(spec.get("width", 1.0))
        return lambda x: amp * np.exp(-np.sum((x / w) ** 2, axis=1))[:, None]
    if name == "tanh_step":
        s = float(spec.get("steepness", 4.0))
        return lambda x: amp * np.tanh(s * x[:, :1])
    if name == "smoothed_step":
        w = float(spec.get("width", 0.01))
        return lambda x: amp * np.clip(x[:, :1] / w + 0.5, 0.0, 1.0)
    if name == "constant":
        c = float(spec.get("value", 0.0))
        return lambda x: np.full((x.shape[0], 1), c)
    raise ConfigError(f"unknown terminal datum '{name}'")


def build_table_closure(table: dict, arg: str = "u") -> Callable:
    """Piecewise-linear closure (t, x, u) -> value from a 1D table."""
    xs = np.asarray(table[arg if arg in table else "u"], float)
    vs = np.asarray(table["value"], float)
    if xs.size != vs.size or xs.size < 2:
        raise ConfigError("coefficient table needs matching abscissa/value arrays")

    def closure(t, x, u):
        base = u[:, 0] if arg == "u" else x[:, 0]
        return np.interp(base, xs, vs)[:, None]

    return closure


def build_triple(spec: Optional[dict], default=None) -> levy.LevyTriple:
    if spec is None:
        if default is not None:
            return default
        raise ConfigError("problem needs a 'triple' section")
    dim = int(spec.get("dim", len(spec.get("drift", [0.0]))))
    drift = np.asarray(spec.get("drift", [0.0] * dim), float)
    cov = spec.get("covariance")
    jump = spec.get("jump", {"kind": "none"})
    kind = jump.get("kind", "none")
    if kind == "none":
        jspec = None
    elif kind == "alpha_stable":
        jspec = levy.AlphaStable(float(jump["alpha"]),
                                 float(jump.get("scale", 1.0)))
    elif kind == "truncated_stable":
        jspec = levy.TruncatedStable(float(jump["alpha"]),
                                     float(jump.get("scale", 1.0)),
                                     float(jump.get("cutoff", 0.05)))
    elif kind == "compound_poisson_gaussian":
        std = float(jump.get("jump_std", 1.0))
        rate = float(jump.get("rate", 1.0))
        jspec = levy.CompoundPoisson(
            rate=rate,
            sampler=lambda rng, n, s=std: s * rng.standard_normal(n),
            density=lambda z, s=std: np.exp(-z * z / (2 * s * s))
            / math.sqrt(2 * math.pi * s * s),
            symmetric=True,
        )
    else:
        raise ConfigError(f"unknown jump kind '{kind}'")
    return levy.LevyTriple(drift=drift, covariance=cov, jump_spec=jspec,
                           dim=dim)


def _burgers_triple(nu: float, alpha: float) -> levy.LevyTriple:
    """Noise whose generator is the multiplier -nu |xi|^alpha."""
    if not 0 < alpha <= 2:
        raise ConfigError("alpha must lie in (0, 2]")
    if alpha == 2.0:
        return levy.LevyTriple.brownian(np.array([[2.0 * nu]]))
    scale = levy.stable_scale_for_multiplier(alpha, nu)
    return levy.LevyTriple.symmetric_stable(alpha, scale=scale)


def _bounds_from(cfg_bounds: Optional[dict]) -> CoefficientBounds:
    return CoefficientBounds(**(cfg_bounds or {}))


def build_problem(problem_cfg: dict) -> PideProblem:
    """Assemble a PideProblem from the config's problem section."""
    builtin = problem_cfg["builtin"]
    params = problem_cfg.get("params", {}) or {}
    bounds = _bounds_from(problem_cfg.get("bounds"))
    mode_name = problem_cfg.get("mode")

    if builtin == "burgers1d":
        nu = float(params.get("nu", 0.5))
        alpha = float(params.get("alpha", 2.0))
        phi = build_phi(params.get("phi", {"name": "sin"}))
        triple = build_triple(problem_cfg.get("triple"),
                              default=_burgers_triple(nu, alpha))
        mode = SolveMode(mode_name) if mode_name else SolveMode.SEMILINEAR
        return PideProblem(triple=triple, G=lambda t, x, u: -u, F=None,
                           phi=phi, mode=mode, bounds=bounds)

    if builtin == "conservation_law":
        if "g_prime" not in params:
            raise ConfigError("conservation_law needs params.g_prime (a table "
                              "of the flux derivative in u)")
        gp = build_table_closure(params["g_prime"], "u")
        fsrc = build_table_closure(params["f"], "u") if "f" in params else None
        phi = build_phi(params.get("phi"))
        nu = float(params.get("nu", 0.5))
        alpha = float(params.get("alpha", 2.0))
        triple = build_triple(problem_cfg.get("triple"),
                              default=_burgers_triple(nu, alpha))
        mode = SolveMode(mode_name) if mode_name else SolveMode.SEMILINEAR
        return PideProblem(triple=triple, G=gp, F=fsrc, phi=phi, mode=mode,
                           bounds=bounds)

    if builtin == "linear_fk":
        phi = build_phi(params.get("phi"))
        h_scale = float(params.get("h_scale", 0.0))
        fsrc = None
        if "source" in params:
            src_phi = build_phi(params["source"])
            fsrc = lambda t, x, u: src_phi(x)
        nu = float(params.get("nu", 0.5))
        alpha = float(params.get("alpha", 2.0))
        triple = build_triple(problem_cfg.get("triple"),
                              default=_burgers_triple(nu, alpha))
        H = lambda t, x: np.full((x.shape[0], 1, 1), h_scale)
        return PideProblem(triple=triple, G=None, F=fsrc, phi=phi,
                           mode=SolveMode.LINEAR_FK, H=H, bounds=bounds)

    if builtin == "custom":
        if mode_name is None:
            raise ConfigError("custom problems must state a mode")
        mode = SolveMode(mode_name)
        phi = build_phi(params.get("phi"))
        g = (build_table_closure(params["g_table"], "u")
             if "g_table" in params else None)
        if g is not None and mode in (
            SolveMode.QUASILINEAR_GENERAL,
            SolveMode.QUASILINEAR_CONSTANT_BIG_JUMP,
        ):
            base = g
            g = lambda t, x, u: base(t, x, u)[..., None]
        fsrc = build_table_closure(params["f"], "u") if "f" in params else None
        triple = build_triple(problem_cfg.get("triple"))
        return PideProblem(triple=triple, G=g, F=fsrc, phi=phi, mode=mode,
                           bounds=bounds)

    raise ConfigError(f"unknown builtin '{builtin}'")


def build_grids(grids_cfg: dict):
    s = grids_cfg["space"]
    sg = SpaceGrid(s["lower"], s["upper"], tuple(s["points"]))
    t = grids_cfg["time"]
    tg = TimeGrid(float(t["horizon"]), float(t["dt"]))
    return sg, tg


def build_solver_config(cfg: dict) -> SolverConfig:
    sg, tg = build_grids(cfg["grids"])
    sol = cfg["solver"]
    return SolverConfig(
        space_grid=sg,
        time_grid=tg,
        n_particles=int(sol["particles"]),
        seed=int(sol["seed"]),
        tol=float(sol.get("tol", 1e-3)),
        max_iter=int(sol.get("max_iter", 12)),
        window=float(sol.get("window", 0.25)),
        window_floor_steps=int(sol.get("window_floor_steps", 4)),
        interp=sol.get("interp", "cubic"),
        blowup_threshold=sol.get("blowup_threshold"),
    )
