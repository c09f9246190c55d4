"""Uniform box grids with homogeneous Dirichlet boundaries.

Only interior nodes are stored; the boundary value 0 is implicit in the
stencils, so the discrete operators below satisfy a summation-by-parts
identity exactly:  <-lap(u), u> * cell_volume == dirichlet_gradient_sq(u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "GridMismatchError",
    "laplacian",
    "laplacian_array",
    "dirichlet_gradient_sq",
    "inner_space",
    "l2_space",
    "trapezoid_weights",
    "l2_spacetime",
]


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Interior nodes of a box (0, extent)^dim; spacing h = extent / (n + 1)."""

    n: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        if len(self.n) not in (1, 3):
            raise ValueError(f"dimension must be 1 or 3, got {len(self.n)}")
        if len(self.extent) != len(self.n):
            raise ValueError("n and extent must have the same length")
        for v in self.n:
            if v < 3:
                raise ValueError(f"need at least 3 interior nodes per axis, got {v}")
        for L in self.extent:
            if not (L > 0 and math.isfinite(L)):
                raise ValueError(f"extent must be positive and finite, got {L}")

    @classmethod
    def line(cls, n: int, length: float = 1.0) -> "Grid":
        return cls((n,), (length,))

    @classmethod
    def box(cls, n: int, length: float = 1.0) -> "Grid":
        return cls((n, n, n), (length, length, length))

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def n_total(self) -> int:
        return int(np.prod(self.n))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (m + 1) for L, m in zip(self.extent, self.n))

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return h * np.arange(1, self.n[axis] + 1)

    def mesh(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij", sparse=True))

    def node_coordinates(self) -> np.ndarray:
        """(n_total, dim) array of interior node coordinates, row-major order."""
        full = np.meshgrid(
            *[self.axis_coordinates(a) for a in range(self.dim)], indexing="ij"
        )
        return np.stack([f.ravel() for f in full], axis=1)


@dataclass(frozen=True)
class Field:
    """Interior nodal values on a grid; finite by construction."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))


def _require_same_grid(grid: Grid, field: Field) -> None:
    if field.grid != grid:
        raise GridMismatchError("field lives on a different grid")


def laplacian_array(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Second-order central Laplacian with implicit zero boundary."""
    padded = np.pad(values, 1)
    core = (slice(1, -1),) * grid.dim
    out = np.zeros_like(values)
    for axis, h in enumerate(grid.spacing):
        lo = list(core)
        hi = list(core)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out += (padded[tuple(lo)] + padded[tuple(hi)] - 2.0 * values) / (h * h)
    return out


def laplacian(grid: Grid, u: Field) -> Field:
    _require_same_grid(grid, u)
    return Field(grid, laplacian_array(grid, u.values))


def dirichlet_gradient_sq(grid: Grid, values: np.ndarray) -> float:
    """Edge-based squared gradient norm, int |grad u|^2 with u = 0 outside.

    Adjoint to the Laplacian stencil: equals <-lap(u), u> * cell_volume
    exactly, which is what the energy bookkeeping relies on.
    """
    total = 0.0
    for axis, h in enumerate(grid.spacing):
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        d = np.diff(np.pad(values, pad), axis=axis) / h
        total += float(np.sum(d * d))
    return total * grid.cell_volume


def inner_space(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    return grid.cell_volume * float(np.sum(a * b))


def l2_space(grid: Grid, u) -> float:
    """Midpoint-rule L2 norm over the box (weight cell_volume per node)."""
    vals = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    return math.sqrt(grid.cell_volume * float(np.sum(vals * vals)))


def trapezoid_weights(n_levels: int, dt: float) -> np.ndarray:
    if n_levels < 2:
        raise ValueError("need at least two time levels")
    w = np.full(n_levels, dt)
    w[0] = w[-1] = dt / 2.0
    return w


def l2_spacetime(grid: Grid, levels: np.ndarray, dt: float) -> float:
    """Trapezoid-in-time, midpoint-in-space L2 norm of a level stack."""
    levels = np.asarray(levels, dtype=float)
    w = trapezoid_weights(levels.shape[0], dt)
    sq = grid.cell_volume * np.sum(
        levels.reshape(levels.shape[0], -1) ** 2, axis=1
    )
    return math.sqrt(float(np.dot(w, sq)))
