"""Problem description, solver configuration and solve report."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .. import levy
from ..field import SpaceGrid, TimeGrid


class ModeError(RuntimeError):
    """The problem's coupling mode is not admissible for its noise."""


class NonContractionError(RuntimeError):
    """Picard iteration stagnated at the minimal window length.

    Carries the partial report in ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolveMode(Enum):
    SEMILINEAR = "semilinear"
    QUASILINEAR_GENERAL = "quasilinear_general"
    QUASILINEAR_CONSTANT_BIG_JUMP = "quasilinear_constant_big_jump"
    LINEAR_FK = "linear_fk"


@dataclass
class CoefficientBounds:
    """User-declared coefficient bounds, used for diagnostics and step
    heuristics (sup of |G|, |F| and the Lipschitz constants entering the
    contraction estimate); nothing is enforced through them."""

    sup_g: Optional[float] = None
    lip_g: Optional[float] = None
    sup_f: Optional[float] = None
    lip_f: Optional[float] = None
    sup_phi: Optional[float] = None
    lip_phi: Optional[float] = None

    @property
    def declared_kappa(self) -> Optional[float]:
        """sup(|∇G| + |∇F|) + |∇phi| when all three are declared."""
        if None in (self.lip_g, self.lip_f, self.lip_phi):
            return None
        return self.lip_g + self.lip_f + self.lip_phi


@dataclass
class PideProblem:
    """Backward-time problem data on [T, 0] with terminal data at 0.

    The coefficients are vectorized closures:

    * ``G(t, x, u)`` with x (n, d), u (n, k): drift coupling (n, d) in
      semi-linear / linear modes, or noise coefficient (n, d, m) in the
      quasi-linear modes;
    * ``F(t, x, u)`` -> (n, k) source (pass ``None`` for zero);
    * ``phi(x)`` -> (n, k) terminal data;
    * ``H(t, x)`` -> (n, k, k) zero-order weight, linear mode only.

    In ``LINEAR_FK`` mode G must not depend on u (it is called with zeros).
    """

    triple: levy.LevyTriple
    G: Optional[Callable]
    F: Optional[Callable]
    phi: Callable
    mode: SolveMode
    H: Optional[Callable] = None
    space_dim: int = 1
    val_dim: int = 1
    bounds: CoefficientBounds = dc_field(default_factory=CoefficientBounds)
    moment_order: Optional[float] = None  # beta that passed the gate
    notes: list = dc_field(default_factory=list)

    def __post_init__(self):
        if self.G is None:
            zero_g = lambda t, x, u: np.zeros((x.shape[0], self.space_dim))
            self.G = zero_g
        if self.F is None:
            self.F = lambda t, x, u: np.zeros((x.shape[0], self.val_dim))
        if self.mode is SolveMode.LINEAR_FK and self.H is None:
            self.H = lambda t, x: np.broadcast_to(
                np.eye(self.val_dim) * 0.0,
                (x.shape[0], self.val_dim, self.val_dim),
            )
        if self.mode is SolveMode.QUASILINEAR_GENERAL:
            beta = self._moment_gate()
            self.moment_order = beta
            self.notes.append(
                f"general-coupling gate passed with beta={beta:.3g}; the "
                "underlying well-posedness theory assumes more integrability "
                "and smoothness than is checkable on closures"
            )
        if self.mode is SolveMode.QUASILINEAR_CONSTANT_BIG_JUMP:
            if self.bounds.sup_g is None or self.bounds.sup_phi is None:
                self.notes.append(
                    "constant-big-jump mode expects bounded G, phi, f; "
                    "bounds not declared, proceeding on the user's word"
                )

    def _moment_gate(self) -> float:
        """Find beta > 1 with a finite big-jump moment, else ModeError."""
        spec = self.triple.jump_spec
        candidates: list[float]
        if isinstance(spec, (levy.AlphaStable, levy.TruncatedStable)):
            if spec.alpha <= 1.0:
                raise ModeError(
                    f"general coupling needs a finite beta-moment for some "
                    f"beta > 1, impossible for stable index alpha={spec.alpha}"
                )
            candidates = [0.5 * (1.0 + spec.alpha)]
        else:
            candidates = [2.0, 1.5, 1.1]
        for beta in candidates:
            try:
                if levy.check_moment(self.triple, beta) == "finite":
                    return beta
            except levy.UnknownMomentError:
                continue
        raise ModeError(
            "general coupling needs int_{|z|>=1} |z|^beta nu(dz) < inf for "
            "some beta > 1; the moment gate failed"
        )

    # -- helpers ---------------------------------------------------------------

    def phi_values(self, grid: SpaceGrid) -> np.ndarray:
        vals = np.asarray(self.phi(grid.nodes()), float)
        vals = vals.reshape(tuple(grid.points) + (self.val_dim,))
        if not np.all(np.isfinite(vals)):
            raise ValueError("terminal data must be finite on the grid")
        return vals

    def phi_grid_lipschitz(self, grid: SpaceGrid) -> float:
        vals = self.phi_values(grid)
        h = grid.spacing
        best = 0.0
        for a in range(grid.dim):
            d = np.diff(vals, axis=a)
            if d.size:
                best = max(
                    best, float(np.max(np.sqrt(np.sum(d * d, axis=-1)))) / h[a]
                )
        return best


@dataclass
class SolverConfig:
    """Grids, particle budget, iteration control and reproducibility."""

    space_grid: SpaceGrid
    time_grid: TimeGrid
    n_particles: int
    seed: int
    tol: float = 1e-3
    max_iter: int = 12
    window: float = 0.25
    window_floor_steps: int = 4
    interp: str = "cubic"           # "cubic" (1D) or "linear"
    blowup_threshold: Optional[float] = None  # default 25 * |grad phi|_inf
    noise_dtype: str = "float32"
    noise_cache_bytes: float = 4.0e9
    track_sigma: bool = True
    stagnation_ratio: float = 0.95  # ratio >= this counts as non-contraction
    step_budget: Optional[float] = None  # cap on total particle-steps

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("seed is mandatory (no wall-clock seeding)")
        if self.n_particles < 2:
            raise ValueError("need at least 2 particles")
        if self.interp not in ("cubic", "linear"):
            raise ValueError("interp must be 'cubic' or 'linear'")

    @property
    def window_steps(self) -> int:
        w = max(
            self.window_floor_steps,
            int(round(self.window / self.time_grid.dt)),
        )
        return min(w, self.time_grid.n_steps)


@dataclass
class WindowReport:
    t_start: float              # window's earliest time (more negative)
    t_end: float                # window's terminal time (closer to 0)
    n_steps: int
    residuals: list
    iterations: int
    converged: bool
    halvings: int = 0

    @property
    def ratios(self) -> list:
        return [
            self.residuals[i + 1] / self.residuals[i]
            for i in range(len(self.residuals) - 1)
            if self.residuals[i] > 0
        ]


@dataclass
class SolveReport:
    mode: str
    n_particles: int
    seed: int
    windows: list = dc_field(default_factory=list)
    times: list = dc_field(default_factory=list)          # covered time nodes
    sup_norms: list = dc_field(default_factory=list)
    lip_norms: list = dc_field(default_factory=list)
    sigma_max: float = 0.0        # max per-node MC standard error estimate
    sigma_per_time: list = dc_field(default_factory=list)
    blow_up: bool = False
    t_max: Optional[float] = None
    exit_fraction_max: float = 0.0
    apriori_bound: Optional[float] = None   # |phi|_inf + |t| sup|F| at horizon
    apriori_violations: list = dc_field(default_factory=list)
    source_sup: float = 0.0       # max |F| seen along the iteration
    phi_sup: float = 0.0
    phi_lip: float = 0.0
    blowup_threshold: float = 0.0
    warnings: list = dc_field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self, include_wall_time: bool = False) -> dict:
        out = {
            "mode": self.mode,
            "n_particles": self.n_particles,
            "seed": self.seed,
            "windows": [
                {
                    "t_start": w.t_start,
                    "t_end": w.t_end,
                    "n_steps": w.n_steps,
                    "residuals": list(w.residuals),
                    "ratios": w.ratios,
                    "iterations": w.iterations,
                    "converged": w.converged,
                    "halvings": w.halvings,
                }
                for w in self.windows
            ],
            "times": list(self.times),
            "sup_norms": list(self.sup_norms),
            "lip_norms": list(self.lip_norms),
            "sigma_max": self.sigma_max,
            "sigma_per_time": list(self.sigma_per_time),
            "blow_up": self.blow_up,
            "t_max": self.t_max,
            "exit_fraction_max": self.exit_fraction_max,
            "apriori_bound": self.apriori_bound,
            "apriori_violations": list(self.apriori_violations),
            "source_sup": self.source_sup,
            "phi_sup": self.phi_sup,
            "phi_lip": self.phi_lip,
            "blowup_threshold": self.blowup_threshold,
            "warnings": list(self.warnings),
        }
        if include_wall_time:
            out["wall_time"] = self.wall_time
        return out
