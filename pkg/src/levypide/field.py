"""Sampled space-time fields u_t(x) on truncated uniform grids.

Fields are stored on a tensor grid (time node, space nodes..., component),
evaluated by multilinear interpolation in space and linear interpolation in
time, with nearest-node constant extension outside the spatial box.  Constant
extension preserves both the sup norm and the Lipschitz bound of the stored
values, which is what keeps simulated particles that leave the box honest.

Time grids live on the negative axis: terminal data sits at t = 0 and the
nodes decrease from 0 to the horizon T < 0.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
import numpy as np


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform tensor grid on a box [lower, upper] in R^d."""

    lower: np.ndarray
    upper: np.ndarray
    points: tuple

    def __init__(self, lower, upper, points):
        lower = np.atleast_1d(np.asarray(lower, float))
        upper = np.atleast_1d(np.asarray(upper, float))
        if np.isscalar(points) or np.ndim(points) == 0:
            points = (int(points),) * lower.size
        points = tuple(int(p) for p in points)
        if lower.shape != upper.shape or len(points) != lower.size:
            raise ValueError("lower/upper/points shapes disagree")
        if np.any(upper <= lower):
            raise ValueError("each axis needs strictly positive extent")
        if any(p < 2 for p in points):
            raise ValueError("need at least 2 points per axis")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "points", points)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (np.array(self.points) - 1)

    def axis(self, i: int) -> np.ndarray:
        return np.linspace(self.lower[i], self.upper[i], self.points[i])

    def nodes(self) -> np.ndarray:
        """All nodes, shape (prod(points), d), row-major over axes."""
        axes = [self.axis(i) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def locate(self, x: np.ndarray):
        """Cell indices and weights for multilinear interpolation.

        x: (n, d).  Returns (idx, frac) with idx clipped so that idx+1 is a
        valid node; queries outside the box clamp to the boundary value
        (constant extension).
        """
        x = np.asarray(x, float)
        s = (x - self.lower) / self.spacing
        s = np.clip(s, 0.0, np.array(self.points) - 1.0)
        idx = np.minimum(s.astype(np.int64), np.array(self.points) - 2)
        frac = s - idx
        return idx, frac


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes on [T, 0], T < 0, stored decreasing from 0 to T."""

    horizon: float
    dt: float

    def __post_init__(self):
        if not self.horizon < 0:
            raise ValueError("horizon T must be negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        n = round(-self.horizon / self.dt)
        if n < 1 or abs(-self.horizon - n * self.dt) > 1e-9 * self.dt * max(n, 1):
            raise ValueError("horizon must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(-self.horizon / self.dt))

    @property
    def nodes(self) -> np.ndarray:
        """Nodes decreasing from 0 to T, both endpoints included."""
        return -self.dt * np.arange(self.n_steps + 1)

    def restricted(self, t: float) -> np.ndarray:
        """Nodes of this grid lying in [t, 0], decreasing."""
        nodes = self.nodes
        return nodes[nodes >= t - 1e-12 * self.dt]

    def index_of(self, t: float) -> int:
        i = int(round(-t / self.dt))
        if not (0 <= i <= self.n_steps) or abs(-t - i * self.dt) > 1e-8 * self.dt:
            raise ValueError(f"t={t} is not a node of this time grid")
        return i


class SpaceTimeField:
    """Field values of shape (n_time, *space_points, k).

    values[i] is the spatial slice at time ``time_grid.nodes[i]`` (nodes
    decrease from 0).  All stored values must be finite.
    """

    def __init__(self, space_grid: SpaceGrid, time_grid: TimeGrid,
                 values: np.ndarray):
        values = np.asarray(values, float)
        expect = (time_grid.n_steps + 1,) + tuple(space_grid.points)
        if values.shape[: 1 + space_grid.dim] != expect:
            raise ValueError(
                f"values shape {values.shape} incompatible with grids {expect}"
            )
        if values.ndim == 1 + space_grid.dim:
            values = values[..., None]
        if values.ndim != 2 + space_grid.dim:
            raise ValueError("values must be (n_time, *space, k)")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.space_grid = space_grid
        self.time_grid = time_grid
        self.values = values

    # -- basic queries --------------------------------------------------------

    @property
    def n_components(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def from_terminal(cls, space_grid, time_grid, phi_values) -> "SpaceTimeField":
        """Field constant in time equal to the terminal slice."""
        phi_values = np.asarray(phi_values, float)
        if phi_values.ndim == space_grid.dim:
            phi_values = phi_values[..., None]
        vals = np.broadcast_to(
            phi_values, (time_grid.n_steps + 1,) + phi_values.shape
        ).copy()
        return cls(space_grid, time_grid, vals)

    def slice_values(self, t: float) -> np.ndarray:
        return self.values[self.time_grid.index_of(t)]

    def eval_slice(self, i_time: int, x: np.ndarray) -> np.ndarray:
        """Multilinear spatial interpolation of slice i at x (n, d) -> (n, k)."""
        g = self.space_grid
        x = np.atleast_2d(np.asarray(x, float))
        idx, frac = g.locate(x)
        vals = self.values[i_time]
        n = x.shape[0]
        out = np.zeros((n, self.n_components))
        # accumulate the 2^d corner contributions
        for corner in range(1 << g.dim):
            w = np.ones(n)
            ix = []
            for a in range(g.dim):
                bit = (corner >> a) & 1
                w = w * (frac[:, a] if bit else 1.0 - frac[:, a])
                ix.append(idx[:, a] + bit)
            out += w[:, None] * vals[tuple(ix)]
        return out

    def eval(self, t: float, x) -> np.ndarray:
        """u(t, x): multilinear in space, linear in time, constant extension
        outside the spatial box.  t must lie inside the time window."""
        nodes = self.time_grid.nodes
        if t > nodes[0] + 1e-12 or t < nodes[-1] - 1e-12:
            raise ValueError(f"t={t} outside the field's time window")
        dt = self.time_grid.dt
        s = np.clip(-t / dt, 0.0, self.time_grid.n_steps)
        i0 = min(int(s), self.time_grid.n_steps - 1)
        w = s - i0
        single = np.ndim(x) <= 1
        xq = np.atleast_2d(np.asarray(x, float))
        out = (1.0 - w) * self.eval_slice(i0, xq) + w * self.eval_slice(i0 + 1, xq)
        return out[0] if single else out

    # -- norms and derivatives -------------------------------------------------

    def lipschitz_norm(self, t: float) -> float:
        """Discrete Lipschitz norm at a time node: max over adjacent node
        pairs of |u(x) - u(x')| / |x - x'| (Euclidean norm on components).

        Adjacent pairs suffice: a multilinear interpolant attains its
        Lipschitz constant on grid edges.
        """
        vals = self.slice_values(t)
        h = self.space_grid.spacing
        best = 0.0
        for a in range(self.space_grid.dim):
            d = np.diff(vals, axis=a)
            mag = np.sqrt(np.sum(d * d, axis=-1))
            if mag.size:
                best = max(best, float(mag.max()) / h[a])
        return best

    def sup_norm(self, t: float) -> float:
        vals = self.slice_values(t)
        return float(np.max(np.sqrt(np.sum(vals * vals, axis=-1))))

    def estimate_gradient(self, t: float, x) -> np.ndarray:
        """Finite-difference spatial gradient at a grid node, shape (d, k).

        Central differences in the interior, one-sided at the boundary.
        """
        g = self.space_grid
        x = np.atleast_1d(np.asarray(x, float))
        s = (x - g.lower) / g.spacing
        ix = np.round(s).astype(int)
        if np.any(np.abs(s - ix) > 1e-8) or np.any(ix < 0) or np.any(
            ix > np.array(g.points) - 1
        ):
            raise ValueError("x must be a grid node")
        vals = self.slice_values(t)
        out = np.empty((g.dim, self.n_components))
        for a in range(g.dim):
            h = g.spacing[a]
            lo = list(ix)
            hi = list(ix)
            if ix[a] == 0:
                hi[a] += 1
                out[a] = (vals[tuple(hi)] - vals[tuple(lo)]) / h
            elif ix[a] == g.points[a] - 1:
                lo[a] -= 1
                out[a] = (vals[tuple(hi)] - vals[tuple(lo)]) / h
            else:
                lo[a] -= 1
                hi[a] += 1
                out[a] = (vals[tuple(hi)] - vals[tuple(lo)]) / (2.0 * h)
        return out

    def max_gradient_norm(self, t: float) -> float:
        """Max over nodes of the Frobenius norm of the FD gradient."""
        vals = self.slice_values(t)
        grads = np.gradient(
            vals, *[self.space_grid.axis(a) for a in range(self.space_grid.dim)],
            axis=tuple(range(self.space_grid.dim)),
        )
        if self.space_grid.dim == 1:
            grads = [grads] if not isinstance(grads, list) else grads
        sq = sum(gr * gr for gr in grads)
        return float(np.sqrt(np.max(np.sum(sq, axis=-1))))

    # -- serialization ----------------------------------------------------------

    def to_csv(self) -> str:
        """One row per space node: coordinates, then values per time node.

        Numbers carry 17 significant digits so finite float64 fields
        round-trip bit-exactly.
        """
        g = self.space_grid
        nodes = g.nodes()
        nt = self.time_grid.n_steps + 1
        k = self.n_components
        flat = self.values.reshape(nt, -1, k)
        cols = [f"x{a}" for a in range(g.dim)]
        for i in range(nt):
            for c in range(k):
                cols.append(f"u_t{i}_c{c}")
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for j in range(nodes.shape[0]):
            row = [f"{v:.17g}" for v in nodes[j]]
            for i in range(nt):
                row.extend(f"{v:.17g}" for v in flat[i, j])
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def header_json(self) -> str:
        """Self-describing header for the CSV payload."""
        g = self.space_grid
        meta = {
            "kind": "space_time_field",
            "dim": g.dim,
            "components": self.n_components,
            "space": {
                "lower": g.lower.tolist(),
                "upper": g.upper.tolist(),
                "points": list(g.points),
            },
            "time": {
                "horizon": self.time_grid.horizon,
                "dt": self.time_grid.dt,
                "nodes": self.time_grid.nodes.tolist(),
            },
            "csv_columns": "x0..x{d-1}, then u_t{i}_c{c} per time node i, component c",
            "extension": "nearest-node constant outside the box",
        }
        return json.dumps(meta, indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, csv_text: str, header_json: str) -> "SpaceTimeField":
        meta = json.loads(header_json)
        g = SpaceGrid(meta["space"]["lower"], meta["space"]["upper"],
                      tuple(meta["space"]["points"]))
        tg = TimeGrid(meta["time"]["horizon"], meta["time"]["dt"])
        lines = csv_text.strip().split("\n")
        data = np.array(
            [[float(v) for v in line.split(",")] for line in lines[1:]]
        )
        k = meta["components"]
        nt = tg.n_steps + 1
        body = data[:, g.dim:]
        vals = body.reshape(-1, nt, k).transpose(1, 0, 2)
        vals = vals.reshape((nt,) + tuple(g.points) + (k,))
        return cls(g, tg, vals)
