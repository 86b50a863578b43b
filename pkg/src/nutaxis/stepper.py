"""Explicit conservative update for the density equation.

One step does: solve the nutrient balance at the current time, build face
fluxes (arithmetic-mean diffusion coefficient, first-order upwind taxis),
take the stability-bounded dt and apply

    u_next = u + (dt/h) * (F_{i+1/2} - F_{i-1/2}) + dt * u * v.

Boundary faces carry no flux, so summing the update telescopes the flux
terms away and the mass gain per step equals dt * integrate(u v) exactly.
The scheme never clips: a cell dropping below -1e-12 raises instead.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import _kernels
from .grid import Field, Grid
from .elliptic import solve_nutrient


class SchemeError(RuntimeError):
    """The explicit update produced an unusable state."""

    def __init__(self, message: str, time: Optional[float] = None):
        super().__init__(message)
        self.time = time


class PositivityError(SchemeError):
    """A cell went meaningfully negative; dt or the data violate stability."""


@dataclass(frozen=True)
class StepperParams:
    """Stability and diagnostic knobs for the explicit update.

    cfl is the safety factor applied to both stability bounds; values up to
    1/3 keep the update a convex combination even when the diffusive and
    advective bounds bind at the same cell, and values above 1 void the
    stability reasoning entirely.  Oversized factors are still accepted so
    that a forced instability surfaces as a positivity failure at a recorded
    time instead of a constructor error.  dt_max caps the step when the data
    are fully degenerate (both bounds inactive).  positivity_floor is a
    diagnostic threshold: trajectories report whether the density ever
    dropped below it, but nothing is clipped.
    """

    cfl: float = 0.3
    dt_max: float = 0.1
    positivity_floor: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.cfl) and self.cfl > 0.0):
            raise ValueError(f"cfl must be positive, got {self.cfl}")
        if not (self.dt_max > 0.0):
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if self.positivity_floor < 0.0:
            raise ValueError("positivity_floor must be nonnegative")


@dataclass(frozen=True)
class FluxField:
    """Per-face flux sample; boundary faces are identically zero."""

    grid: Grid
    faces: np.ndarray = field(repr=False)

    def __post_init__(self):
        faces = np.array(self.faces, dtype=float, copy=True)
        if faces.shape != (self.grid.n + 1,):
            raise ValueError(f"flux needs {self.grid.n + 1} faces")
        if not np.all(np.isfinite(faces)):
            raise ValueError("flux values must be finite")
        if faces[0] != 0.0 or faces[-1] != 0.0:
            raise ValueError("boundary faces must carry zero flux")
        faces.setflags(write=False)
        object.__setattr__(self, "faces", faces)


def compute_flux(u: Field, v: Field) -> FluxField:
    """Total face flux: diffusive part minus upwinded taxis part."""
    if u.grid != v.grid:
        raise ValueError("u and v must share a grid")
    F, _, _ = _kernels.face_quantities(u.values, v.values, u.grid.h)
    return FluxField(u.grid, F)


def stable_dt(u: Field, v: Field, params: StepperParams) -> float:
    """cfl * min(diffusive bound, advective bound, dt_max).

    The diffusive bound is h^2 / (2 max_face D), the advective one
    h / max_face |W|; fully degenerate data leave both inactive and the
    step falls back to cfl * dt_max.
    """
    if u.grid != v.grid:
        raise ValueError("u and v must share a grid")
    _, D, W = _kernels.face_quantities(u.values, v.values, u.grid.h)
    h = u.grid.h
    dmax = float(np.max(D))
    wmax = float(np.max(np.abs(W)))
    return params.cfl * min(
        h * h / (2.0 * dmax + _kernels.TINY),
        h / (wmax + _kernels.TINY),
        params.dt_max,
    )


def step(u: Field, v: Field, dt: float) -> Field:
    """One explicit update of u against a frozen v; raises on negative cells."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    flux = compute_flux(u, v)
    dd = flux.faces[1:] - flux.faces[:-1]
    un = (u.values + dt / u.grid.h * dd) + dt * u.values * v.values
    worst = float(np.min(un))
    if worst < _kernels.NEGATIVE_TOL:
        raise PositivityError(
            f"cell went negative ({worst:.3e}); dt violates the stability bound"
        )
    return Field(u.grid, un)


@dataclass
class TrajectoryStats:
    """Per-run diagnostics accumulated over every step."""

    steps: int = 0
    min_dt: float = np.inf
    min_u: float = np.inf
    max_consumption_gap: float = 0.0  # relative, worst step
    max_mass_gap: float = 0.0  # relative, worst step
    reaction_integral: float = 0.0  # sum of dt * integrate(u v)
    wall_time: float = 0.0
    below_floor: bool = False


@dataclass
class Trajectory:
    """Snapshots (t, u, v) of one run plus running diagnostics.

    u and v are (snapshots x cells) arrays; dissipation maps each tracked
    exponent p to the accumulated dissipation integral at every snapshot
    time.  source is kept so that downstream checks can reconstruct f.
    """

    grid: Grid
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    source: object
    stats: TrajectoryStats
    dissipation: Dict[float, np.ndarray]
    eps: Optional[float] = None

    def u_field(self, k: int) -> Field:
        return Field(self.grid, self.u[k])

    def v_field(self, k: int) -> Field:
        return Field(self.grid, self.v[k])

    @property
    def snapshot_count(self) -> int:
        return self.times.size


def _source_field(source, grid: Grid, t: float) -> Field:
    return Field(grid, np.asarray(source.values(grid, t), dtype=float))


def advance(
    u0: Field,
    source,
    t_end: float,
    params: StepperParams = StepperParams(),
    snapshot_count: int = 2,
    dissipation_exponents=(),
    eps: Optional[float] = None,
) -> Trajectory:
    """March u from t=0 to t_end, recording snapshot_count states evenly in time.

    source provides f; a separable source (kernel_envelope + space_values)
    runs through the compiled interval loop, anything else exposing
    values(grid, t) goes through the plain per-step path.  Both paths apply
    the identical update and accumulate the same diagnostics.
    """
    if t_end <= 0.0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if snapshot_count < 2:
        raise ValueError("need at least 2 snapshots (initial and final)")
    grid = u0.grid
    if np.any(u0.values <= 0.0):
        raise ValueError("initial density must be strictly positive")

    times = np.linspace(0.0, t_end, snapshot_count)
    exps = np.asarray(sorted(set(float(p) for p in dissipation_exponents)))
    if np.any(exps <= 1.0):
        raise ValueError("dissipation exponents must exceed 1")

    n = grid.n
    K = times.size
    u_snap = np.empty((K, n))
    v_snap = np.empty((K, n))
    diss_snap = np.zeros((exps.size, K))
    stats = TrajectoryStats()

    fast = hasattr(source, "kernel_envelope") and hasattr(source, "space_values")
    started = _time.perf_counter()

    u = u0.values.copy()
    stats.min_u = float(np.min(u))
    u_snap[0] = u
    v_snap[0] = solve_nutrient(Field(grid, u), _source_field(source, grid, 0.0)).values

    if fast:
        g = np.asarray(source.space_values(grid), dtype=float)
        kind, s_a, s_b = source.kernel_envelope()
        for k in range(1, K):
            (u, status, t_fail, steps, min_dt, min_u, max_cons, max_mass,
             reaction, dinc) = _kernels.run_interval(
                u, g, kind, s_a, s_b, times[k - 1], times[k],
                grid.h, params.cfl, params.dt_max, exps,
            )
            stats.steps += steps
            stats.min_dt = min(stats.min_dt, min_dt)
            stats.min_u = min(stats.min_u, min_u)
            stats.max_consumption_gap = max(stats.max_consumption_gap, max_cons)
            stats.max_mass_gap = max(stats.max_mass_gap, max_mass)
            stats.reaction_integral += reaction
            if status == _kernels.NEGATIVE_CELL:
                raise PositivityError(
                    f"cell went negative at t={t_fail:.6g}; "
                    "dt or the data violate the stability bound",
                    time=t_fail,
                )
            if status == _kernels.NOT_FINITE:
                raise SchemeError(
                    f"state stopped being finite at t={t_fail:.6g}", time=t_fail
                )
            diss_snap[:, k] = diss_snap[:, k - 1] + dinc
            u_snap[k] = u
            v_snap[k] = solve_nutrient(
                Field(grid, u), _source_field(source, grid, times[k])
            ).values
    else:
        diss_running = np.zeros(exps.size)
        for k in range(1, K):
            t = times[k - 1]
            target = times[k]
            time_tol = 1e-14 * max(1.0, abs(target))
            while target - t > time_tol:
                uf = Field(grid, u)
                fv = _source_field(source, grid, t)
                v = solve_nutrient(uf, fv)
                dt = stable_dt(uf, v, params)
                dt = min(dt, target - t)
                mass_before = grid.h * float(np.sum(u))
                reaction = grid.h * float(np.sum(u * v.values))
                source_int = grid.h * float(np.sum(fv.values))
                stats.max_consumption_gap = max(
                    stats.max_consumption_gap,
                    abs(reaction - source_int) / (1.0 + source_int),
                )
                if exps.size:
                    gradf = np.zeros(n + 1)
                    gradf[1:-1] = np.diff(u) / grid.h
                    gc = 0.5 * (gradf[:-1] + gradf[1:])
                    for j, p in enumerate(exps):
                        diss_running[j] += dt * grid.h * float(
                            np.sum(u ** (p - 1.0) * v.values * gc * gc)
                        )
                try:
                    u = step(uf, v, dt).values
                except PositivityError as err:
                    raise PositivityError(str(err), time=t) from None
                mass_after = grid.h * float(np.sum(u))
                stats.max_mass_gap = max(
                    stats.max_mass_gap,
                    abs(mass_after - mass_before - dt * reaction) / mass_after,
                )
                stats.reaction_integral += dt * reaction
                stats.min_dt = min(stats.min_dt, dt)
                stats.min_u = min(stats.min_u, float(np.min(u)))
                stats.steps += 1
                t += dt
            diss_snap[:, k] = diss_running
            u_snap[k] = u
            v_snap[k] = solve_nutrient(
                Field(grid, u), _source_field(source, grid, times[k])
            ).values

    stats.wall_time = _time.perf_counter() - started
    stats.below_floor = stats.min_u < params.positivity_floor
    dissipation = {float(p): diss_snap[j].copy() for j, p in enumerate(exps)}
    return Trajectory(
        grid=grid,
        times=times,
        u=u_snap,
        v=v_snap,
        source=source,
        stats=stats,
        dissipation=dissipation,
        eps=eps,
    )
