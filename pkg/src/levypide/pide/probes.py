"""Structural probes: blow-up detection and the gradient-decay exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .. import levy


class MCNoiseError(RuntimeError):
    """Monte Carlo noise dominates the probed signal; more particles needed."""

    def __init__(self, message, suggested_particles=None):
        super().__init__(message)
        self.suggested_particles = suggested_particles


@dataclass
class BlowupDecision:
    blown: bool
    t_max: Optional[float] = None
    lip_at_decision: Optional[float] = None


def blow_up_detector(lip_history: Sequence, threshold: float) -> BlowupDecision:
    """Declare blow-up from the per-window Lipschitz norms.

    ``lip_history`` is a sequence of (window start time, Lipschitz norm),
    appended as windows complete (times decreasing).  Blow-up is declared
    when the latest norm exceeds ``threshold`` *and* grew by a factor >= 2
    across the last two windows; the detected maximal time is the latest
    window start.
    """
    if len(lip_history) == 0:
        return BlowupDecision(False)
    t_last, lip_last = lip_history[-1]
    if lip_last <= threshold:
        return BlowupDecision(False)
    if len(lip_history) == 1:
        # no growth history yet: a single huge window norm still counts
        grew = True
    else:
        prev = lip_history[-2][1]
        grew = lip_last >= 2.0 * prev
    if grew:
        return BlowupDecision(True, t_max=t_last, lip_at_decision=lip_last)
    return BlowupDecision(False)


@dataclass
class GradientDecayResult:
    slope: float
    slope_stderr: float
    deltas: np.ndarray
    grad_norms: np.ndarray
    max_rel_noise: float


def smoothed_step(width: float) -> Callable:
    """Indicator-like terminal datum: 0 below 0, 1 above, linear over one
    cell of width ``width`` (bounded, not Lipschitz-small)."""

    def phi(x):
        x = np.asarray(x, float)
        return np.clip(x / width + 0.5, 0.0, 1.0)

    return phi


def gradient_decay_probe(triple: levy.LevyTriple, phi: Callable,
                         deltas: Sequence[float], n_particles: int, seed: int,
                         fd_step: float = 0.005, probe_points: int = 25,
                         probe_halfwidth: Optional[float] = None,
                         drift: Optional[Callable] = None, substeps: int = 8,
                         max_rel_noise: float = 0.2) -> GradientDecayResult:
    """Fit the short-time decay exponent of the smoothed gradient.

    For each time offset delta, estimates grad E phi(X_{t, t+delta}(x)) by
    common-random-number central differences over a probe grid around the
    origin, takes the sup over the grid, and regresses log norm on log
    delta.  For nondegenerate noise of index alpha and bounded step-like
    data the slope is -1/alpha.

    A bounded drift may be supplied; paths then take ``substeps`` Euler
    steps per delta.  Raises MCNoiseError (with a particle-count
    suggestion) when the worst-case standard error of a gradient estimate
    exceeds ``max_rel_noise`` of the fitted norm.
    """
    if triple.dim != 1:
        raise ValueError("gradient probe is 1D")
    deltas = np.asarray(sorted(deltas), float)
    if deltas.size < 2:
        raise ValueError("need at least two time offsets to fit a slope")
    norms = np.empty(deltas.size)
    worst_rel = 0.0
    for i, delta in enumerate(deltas):
        ns = levy.NoiseStream(seed, i)
        if drift is None:
            Y = levy.sample_increments(triple, float(delta), ns, n_particles)[:, 0]
        else:
            dt = float(delta) / substeps
            Y = np.zeros(n_particles)
            for j in range(substeps):
                g = np.asarray(drift(j * dt, Y[:, None]), float).reshape(-1)
                Y = Y + g * dt + levy.sample_increments(
                    triple, dt, ns, n_particles
                )[:, 0]
        # probe the sup of the gradient near the step location
        if probe_halfwidth is None:
            hw = 2.0 * float(np.percentile(np.abs(Y), 60))
        else:
            hw = probe_halfwidth
        xs = np.linspace(-hw, hw, probe_points)
        up = np.asarray(phi(xs[:, None] + fd_step + Y[None, :]), float)
        dn = np.asarray(phi(xs[:, None] - fd_step + Y[None, :]), float)
        diff = (up - dn) / (2.0 * fd_step)
        grads = diff.mean(axis=1)
        sigs = diff.std(axis=1, ddof=1) / math.sqrt(n_particles)
        j = int(np.argmax(np.abs(grads)))
        norms[i] = abs(grads[j])
        if norms[i] > 0:
            worst_rel = max(worst_rel, float(sigs[j]) / norms[i])
    if worst_rel > max_rel_noise:
        need = int(n_particles * (worst_rel / max_rel_noise) ** 2 * 1.5)
        raise MCNoiseError(
            f"gradient estimates carry relative noise {worst_rel:.2f} > "
            f"{max_rel_noise}; rerun with more particles",
            suggested_particles=need,
        )
    lx = np.log(deltas)
    ly = np.log(norms)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef = np.linalg.lstsq(A, ly, rcond=None)[0]
    slope = float(coef[0])
    n = deltas.size
    resid = ly - A @ coef
    denom = float(np.sum((lx - lx.mean()) ** 2))
    stderr = (
        math.sqrt(float(resid @ resid) / max(n - 2, 1) / denom)
        if denom > 0 else float("inf")
    )
    return GradientDecayResult(slope, stderr, deltas, norms, worst_rel)
