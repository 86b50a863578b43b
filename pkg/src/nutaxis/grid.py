"""Uniform cell-centered grid and the discrete calculus used everywhere else.

All quantities live at cell centers x_i = (i + 1/2) h on (0, L); fluxes and
gradients live on the n + 1 cell faces.  Boundary faces always carry zero
gradient, which is how the no-flux boundary condition enters every operator
built on top of this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform 1D mesh of n cells on the interval (0, length).

    Attributes
    ----------
    length : float
        Domain size L, strictly positive.
    n : int
        Number of cells, at least 4.
    """

    length: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.length) and self.length > 0.0):
            raise ValueError(f"grid length must be positive, got {self.length}")
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"grid needs at least 4 cells, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        """Cell width L / n."""
        return self.length / self.n

    @property
    def centers(self) -> np.ndarray:
        """Cell-center coordinates (i + 1/2) h, strictly inside (0, L)."""
        return (np.arange(self.n) + 0.5) * self.h


@dataclass(frozen=True)
class Field:
    """Immutable sample of a scalar quantity at the cell centers of a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.n,):
            raise ValueError(
                f"field needs {self.grid.n} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.n, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, np.asarray(fn(grid.centers), dtype=float))


def integrate(f: Field) -> float:
    """Midpoint quadrature h * sum(values); exact for piecewise-linear data."""
    return f.grid.h * float(np.sum(f.values))


def face_gradient(f: Field) -> np.ndarray:
    """One-sided differences on the n + 1 faces, zero on the boundary faces.

    Interior face j (between cells j-1 and j) carries (v_j - v_{j-1}) / h;
    faces 0 and n are hard-coded to zero so that no-flux boundaries hold
    structurally rather than through ghost cells.
    """
    g = np.zeros(f.grid.n + 1)
    g[1:-1] = np.diff(f.values) / f.grid.h
    return g


def lp_norm(f: Field, p: float) -> float:
    """Discrete L^p norm (h * sum |values|^p)^(1/p) for p >= 1.

    Non-integer exponents require a nonnegative field; the monitored
    quantity in that case is the p-th power integral of a density.
    """
    if not np.isfinite(p) or p < 1.0:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    if p != np.floor(p) and np.any(f.values < 0.0):
        raise ValueError("non-integer p requires a nonnegative field")
    return float((f.grid.h * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def sup_inf(f: Field) -> Tuple[float, float]:
    """Pointwise (max, min) over the cells."""
    return float(np.max(f.values)), float(np.min(f.values))


def face_average(f: Field) -> np.ndarray:
    """Arithmetic two-cell mean on interior faces, zero on boundary faces."""
    m = np.zeros(f.grid.n + 1)
    m[1:-1] = 0.5 * (f.values[:-1] + f.values[1:])
    return m
