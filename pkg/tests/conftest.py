import numpy as np
import pytest

from levypide import levy
from levypide.field import SpaceGrid, TimeGrid
from levypide.pide import PideProblem, SolveMode, SolverConfig, solve_semilinear


@pytest.fixture(scope="session")
def burgers_small():
    """Desk-sized converged Burgers solve shared across test modules:
    alpha = 2, nu = 0.5, phi = sin, on [-2pi, 2pi] with 65 nodes."""
    sg = SpaceGrid([-2 * np.pi], [2 * np.pi], 65)
    tg = TimeGrid(-0.25, 1.0 / 32.0)
    problem = PideProblem(
        triple=levy.LevyTriple.brownian(np.array([[1.0]])),
        G=lambda t, x, u: -u,
        F=None,
        phi=lambda x: np.sin(x[:, :1]),
        mode=SolveMode.SEMILINEAR,
    )
    config = SolverConfig(sg, tg, n_particles=20_000, seed=314, tol=2e-4)
    field, report = solve_semilinear(problem, config)
    return {"problem": problem, "config": config, "field": field,
            "report": report}
