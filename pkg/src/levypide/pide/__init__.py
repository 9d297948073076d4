"""Solver core: problem types, fixed-point Monte Carlo solvers, residual
verification and structural probes."""

from .probes import (
    BlowupDecision,
    GradientDecayResult,
    MCNoiseError,
    blow_up_detector,
    gradient_decay_probe,
    smoothed_step,
)
from .problem import (
    CoefficientBounds,
    ModeError,
    NonContractionError,
    PideProblem,
    SolveMode,
    SolveReport,
    SolverConfig,
    WindowReport,
)
from .residuals import (
    StrongResidualReport,
    smooth_bump,
    strong_residual,
    weak_residual,
)
from .solver import (
    feynman_kac_estimate,
    solve,
    solve_linear_fk,
    solve_quasilinear,
    solve_semilinear,
)

__all__ = [
    "BlowupDecision",
    "CoefficientBounds",
    "GradientDecayResult",
    "MCNoiseError",
    "ModeError",
    "NonContractionError",
    "PideProblem",
    "SolveMode",
    "SolveReport",
    "SolverConfig",
    "StrongResidualReport",
    "WindowReport",
    "blow_up_detector",
    "feynman_kac_estimate",
    "gradient_decay_probe",
    "smooth_bump",
    "smoothed_step",
    "solve",
    "solve_linear_fk",
    "solve_quasilinear",
    "solve_semilinear",
    "strong_residual",
    "weak_residual",
]
