"""Regularized-family driver: run a ladder of epsilon-shifted problems and
assess whether the trajectories are Cauchy as epsilon decreases.

The construction never extrapolates: the limit candidate is the finest
epsilon run, reported together with the last Cauchy increment as its error
estimate.  All trajectories share one grid and one snapshot schedule so
that fields can be compared directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .grid import Field, lp_norm
from .scenario import Scenario
from .stepper import SchemeError, StepperParams, Trajectory, advance


class FamilyRunError(RuntimeError):
    """One trajectory of the family failed; carries the offending epsilon."""

    def __init__(self, eps: float, cause: SchemeError):
        super().__init__(f"trajectory eps={eps:g} failed: {cause}")
        self.eps = eps
        self.cause = cause


class ExtractionRefusal(RuntimeError):
    """Limit extraction refused; .report holds the convergence evidence."""

    def __init__(self, message: str, report: Optional["ConvergenceReport"] = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class EpsilonFamily:
    """Strictly decreasing epsilon ladder with one trajectory per rung."""

    eps_values: Tuple[float, ...]
    trajectories: Tuple[Trajectory, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        if any(not (0.0 < e < 1.0) for e in eps):
            raise ValueError(f"all eps must lie in (0, 1), got {eps}")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError(f"eps values must strictly decrease, got {eps}")
        if len(self.trajectories) != len(eps):
            raise ValueError("one trajectory per eps value required")
        object.__setattr__(self, "eps_values", eps)
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    def __len__(self) -> int:
        return len(self.eps_values)

    @property
    def finest(self) -> Trajectory:
        return self.trajectories[-1]


def run_family(
    scenario: Scenario,
    params: StepperParams = StepperParams(),
    snapshot_count: Optional[int] = None,
    progress=None,
) -> EpsilonFamily:
    """Run one trajectory per scheduled epsilon on a shared grid and schedule.

    The initial density of rung j is the scenario's u0 plus eps_j, evaluated
    at cell centers.  Any scheme failure aborts the whole family and names
    the offending epsilon.  Trajectories are independent of each other, so
    the loop order carries no state between rungs.
    """
    grid = scenario.grid()
    base = scenario.initial_values(grid)
    count = scenario.snapshot_count if snapshot_count is None else snapshot_count
    eps_values = scenario.eps_values()
    trajectories: List[Trajectory] = []
    for eps in eps_values:
        u0 = Field(grid, base + eps)
        try:
            traj = advance(
                u0,
                scenario.f_spec,
                scenario.t_end,
                params=params,
                snapshot_count=count,
                dissipation_exponents=scenario.lp_exponents,
                eps=eps,
            )
        except SchemeError as err:
            raise FamilyRunError(eps, err) from err
        trajectories.append(traj)
        if progress is not None:
            progress(traj)
    return EpsilonFamily(eps_values, tuple(trajectories))


def snapshot_distances(a: Trajectory, b: Trajectory, q: float) -> np.ndarray:
    """Per-probe-time L^q distance between the density snapshots of two runs."""
    if a.grid != b.grid or not np.array_equal(a.times, b.times):
        raise ValueError("trajectories must share grid and snapshot schedule")
    dists = np.empty(a.times.size)
    for k in range(a.times.size):
        diff = Field(a.grid, np.abs(a.u[k] - b.u[k]))
        dists[k] = lp_norm(diff, q)
    return dists


@dataclass
class ConvergenceReport:
    """Cauchy increments of the epsilon ladder at every probe time.

    u_distances[j, k] is the L^q distance between rungs j and j+1 at probe
    time k; v_distances the max-norm analogue for the nutrient field.  The
    family counts as converging when, at every probe time, the increments
    are nonincreasing in j within 10 percent slack.
    """

    q: float
    eps_values: Tuple[float, ...]
    times: np.ndarray
    u_distances: np.ndarray  # (pairs, times)
    v_distances: np.ndarray  # (pairs, times)
    converging: bool

    @property
    def last_increment(self) -> np.ndarray:
        """Finest Cauchy increment per probe time, the limit error estimate."""
        return self.u_distances[-1]


def cauchy_convergence(family: EpsilonFamily, q: float = 1.0) -> ConvergenceReport:
    """Measure consecutive-rung distances and judge monotone decay."""
    if len(family) < 2:
        raise ExtractionRefusal(
            "need at least two trajectories to assess convergence"
        )
    pairs = len(family) - 1
    times = family.trajectories[0].times
    u_d = np.empty((pairs, times.size))
    v_d = np.empty((pairs, times.size))
    for j in range(pairs):
        a, b = family.trajectories[j], family.trajectories[j + 1]
        u_d[j] = snapshot_distances(a, b, q)
        v_d[j] = np.max(np.abs(a.v - b.v), axis=1)
    scale = 1e-14 * (1.0 + float(np.max(u_d, initial=0.0)))
    converging = bool(
        np.all(u_d[1:] <= 1.1 * u_d[:-1] + scale)
    ) if pairs > 1 else True
    return ConvergenceReport(
        q=q,
        eps_values=family.eps_values,
        times=times.copy(),
        u_distances=u_d,
        v_distances=v_d,
        converging=converging,
    )


@dataclass
class LimitCandidate:
    """Finest-rung fields standing in for the vanishing-epsilon limit."""

    trajectory: Trajectory
    error_estimate: np.ndarray  # per probe time, last Cauchy increment
    report: ConvergenceReport

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @property
    def eps(self) -> float:
        return self.trajectory.eps


def extract_limit(family: EpsilonFamily, q: float = 1.0) -> LimitCandidate:
    """Return the finest run as the limit candidate, or refuse.

    Refusal happens for single-rung families (nothing to compare) and for
    families whose Cauchy increments fail the monotone-decay test; the
    raised error carries the convergence report as evidence.
    """
    if len(family) < 2:
        raise ExtractionRefusal(
            "cannot assess convergence from a single trajectory"
        )
    report = cauchy_convergence(family, q)
    if not report.converging:
        raise ExtractionRefusal(
            "family increments are not decreasing; refusing to name a limit",
            report=report,
        )
    return LimitCandidate(
        trajectory=family.finest,
        error_estimate=report.last_increment.copy(),
        report=report,
    )
