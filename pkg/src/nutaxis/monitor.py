"""Runtime checks of every a-priori estimate the model theory guarantees.

Each check is a pure function of fields plus closed-form scenario data and
returns its measured quantities together with a pass flag.  Identities that
are exact for the discrete scheme (consumption, mass balance) get machine
tolerances; identities broken by discretization (the log-gradient balance)
get truncation-order tolerances; smoothness claims (the Hoelder exponent of
the nutrient field) are fitted from snapshot differences and gated at the
documented threshold.  Every check has a corrupted-input counterpart in the
test suite proving it can fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .driver import (
    ConvergenceReport,
    EpsilonFamily,
    ExtractionRefusal,
    LimitCandidate,
    cauchy_convergence,
    extract_limit,
)
from .grid import Field, face_average, face_gradient, integrate, lp_norm, sup_inf
from .scenario import Scenario
from .stepper import Trajectory

HOLDER_THRESHOLD = 0.2
STEP_IDENTITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# single-time checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassBoundsCheck:
    mass: float
    lower: float
    upper: float
    passed: bool


def check_mass_bounds(
    u: Field, t: float, u0_mass: float, f_sup: float, eps: float, omega: float
) -> MassBoundsCheck:
    """Mass stays between the initial mass and the supply-driven majorant.

    The upper bound is omega * (1 + f_sup * t) + u0_mass + eps * omega with
    f_sup the exact sup of the source over the slab up to t; u0_mass is the
    unshifted initial mass, the eps term accounts for the shift.
    """
    mass = integrate(u)
    tol = 1e-8 * mass
    lower = u0_mass - tol
    upper = omega * (1.0 + f_sup * t) + u0_mass + eps * omega + tol
    return MassBoundsCheck(mass, lower, upper, bool(lower <= mass <= upper))


@dataclass(frozen=True)
class ConsumptionCheck:
    gap: float
    tol: float
    passed: bool


def check_consumption(u: Field, v: Field, f: Field) -> ConsumptionCheck:
    """Total consumption equals total supply, an exact discrete identity."""
    gap = abs(integrate(Field(u.grid, u.values * v.values)) - integrate(f))
    tol = STEP_IDENTITY_TOL * (1.0 + integrate(f))
    return ConsumptionCheck(gap, tol, bool(gap <= tol))


@dataclass(frozen=True)
class LogGradCheck:
    lhs: float
    rhs: float
    gap: float
    tol: float
    passed: bool


def check_loggrad_identity(u: Field, v: Field, f: Field) -> LogGradCheck:
    """Weighted-source plus log-gradient energy balances the density mass.

    lhs = integrate(f / v) + h * sum over interior faces of
    (face gradient of v)^2 / (face mean of v)^2; rhs = integrate(u).  The
    arithmetic face mean breaks the exact telescoping (the geometric mean
    would keep it), leaving a second-order defect, so the gate is the
    generous first-order tolerance (1 + rhs) * h.
    """
    if float(np.min(v.values)) <= 0.0:
        raise ValueError("log-gradient check needs a strictly positive v")
    h = v.grid.h
    g = face_gradient(v)[1:-1]
    m = 0.5 * (v.values[:-1] + v.values[1:])
    lhs = integrate(Field(f.grid, f.values / v.values)) + h * float(
        np.sum(g * g / (m * m))
    )
    rhs = integrate(u)
    gap = abs(lhs - rhs)
    tol = (1.0 + rhs) * h
    return LogGradCheck(lhs, rhs, gap, tol, bool(gap <= tol))


@dataclass(frozen=True)
class HarnackCheck:
    ratio: float
    bound: float
    passed: bool


def check_harnack(u: Field, v: Field, f: Field) -> HarnackCheck:
    """Pointwise comparability of v: sup v <= C * inf v.

    C = exp(L * (integrate(u) + integrate(f / v))), the constant produced by
    integrating the logarithmic gradient bound across the domain.  Any
    honestly computed trajectory satisfies this with a wide margin; a
    failure indicates a scheme bug, not a data property.
    """
    if float(np.min(v.values)) <= 0.0:
        raise ValueError("comparability check needs a strictly positive v")
    hi, lo = sup_inf(v)
    c1 = integrate(u) + integrate(Field(f.grid, f.values / v.values))
    bound = math.exp(v.grid.length * c1)
    return HarnackCheck(hi / lo, bound, bool(hi / lo <= bound * (1.0 + 1e-6)))


@dataclass(frozen=True)
class VBoundsCheck:
    inf_v: float
    sup_v: float
    inf_bound: float  # upper bound on inf v
    sup_bound: float  # lower bound on sup v
    passed: bool
    inf_saturated: bool
    sup_saturated: bool


def check_v_bounds(
    v: Field,
    f: Field,
    t: float,
    u0_mass: float,
    eps: float,
    omega: float,
    f_sup: float,
) -> VBoundsCheck:
    """Two-sided control of the nutrient extremes by supply over mass.

    inf v <= integrate(f(t)) / u0_mass because consumption equals supply and
    mass never decreases; sup v >= integrate(f(t)) / (u0_mass + eps * omega
    + f_sup * omega * t) because the denominator majorizes the mass at time
    t (growth is bounded by the supply).  Homogeneous data saturate the
    second bound, which is flagged.
    """
    f_int = integrate(f)
    inf_v, sup_v = float(np.min(v.values)), float(np.max(v.values))
    inf_bound = f_int / u0_mass if u0_mass > 0.0 else math.inf
    sup_bound = f_int / (u0_mass + eps * omega + f_sup * omega * t)
    ok_inf = inf_v <= inf_bound * (1.0 + 1e-8)
    ok_sup = sup_v >= sup_bound * (1.0 - 1e-8)
    sat = lambda a, b: abs(a - b) <= 1e-6 * max(abs(a), abs(b), 1e-300)
    return VBoundsCheck(
        inf_v=inf_v,
        sup_v=sup_v,
        inf_bound=inf_bound,
        sup_bound=sup_bound,
        passed=bool(ok_inf and ok_sup),
        inf_saturated=bool(math.isfinite(inf_bound) and sat(inf_v, inf_bound)),
        sup_saturated=bool(sat(sup_v, sup_bound)),
    )


# ---------------------------------------------------------------------------
# trajectory-level probes
# ---------------------------------------------------------------------------

def track_lp_dissipation(traj: Trajectory, p: float) -> Tuple[float, float]:
    """(max over time of the p-th power integral, total dissipation integral).

    The dissipation integral accumulates dt * h * sum(u^(p-1) v grad_c(u)^2)
    over every step of the run, so it must have been requested when the
    trajectory was produced.
    """
    if p <= 1.0:
        raise ValueError(f"exponent must exceed 1, got {p}")
    key = float(p)
    if key not in traj.dissipation:
        raise KeyError(f"exponent {p} was not tracked during the run")
    h = traj.grid.h
    powers = h * np.sum(traj.u**key, axis=1)
    return float(np.max(powers)), float(traj.dissipation[key][-1])


@dataclass(frozen=True)
class HolderProbe:
    """Least-squares Hoelder exponent of v in time from snapshot differences."""

    lags: np.ndarray
    sup_diffs: np.ndarray
    alpha: float
    fit_residual: float
    unconstrained: bool
    passed: bool
    threshold: float = HOLDER_THRESHOLD


def fit_holder_exponent(
    traj: Trajectory,
    window: Tuple[float, float],
    lags: Sequence[float],
) -> HolderProbe:
    """Fit sup_x |v(x, t + lag) - v(x, t)| ~ lag^alpha over the window.

    Lags must be integer multiples of the snapshot spacing.  A trajectory
    whose nutrient field never moves (all differences zero) leaves the
    exponent unconstrained and passes by convention.
    """
    t0, t1 = window
    times = traj.times
    span_tol = 1e-9 * max(1.0, abs(times[-1]))
    if t0 < times[0] - span_tol or t1 > times[-1] + span_tol or t0 >= t1:
        raise ValueError(f"window {window} must sit inside the trajectory span")
    lags = np.asarray([float(x) for x in lags])
    if lags.size < 3:
        raise ValueError("need at least 3 lags to fit an exponent")
    if np.any(lags <= 0.0) or np.any(lags >= (t1 - t0) + span_tol):
        raise ValueError("lags must be positive and shorter than the window")

    delta = times[1] - times[0]
    if not np.allclose(np.diff(times), delta, rtol=1e-9, atol=0.0):
        raise ValueError("snapshot schedule must be uniform")

    eff_lags = np.empty(lags.size)
    sup_diffs = np.empty(lags.size)
    for idx, lag in enumerate(lags):
        k = int(round(lag / delta))
        if k < 1 or abs(k * delta - lag) > 1e-8 * max(delta, lag):
            raise ValueError(
                f"lag {lag:g} is not a multiple of the snapshot spacing {delta:g}"
            )
        starts = np.nonzero(
            (times >= t0 - span_tol) & (times + k * delta <= t1 + span_tol)
        )[0]
        starts = starts[starts + k < times.size]
        if starts.size == 0:
            raise ValueError(f"window too short for lag {lag:g}")
        diffs = np.abs(traj.v[starts + k] - traj.v[starts])
        eff_lags[idx] = k * delta
        sup_diffs[idx] = float(np.max(diffs))

    positive = sup_diffs > 0.0
    if np.count_nonzero(positive) < 2:
        return HolderProbe(
            lags=eff_lags,
            sup_diffs=sup_diffs,
            alpha=math.nan,
            fit_residual=0.0,
            unconstrained=True,
            passed=True,
        )
    logl = np.log(eff_lags[positive])
    logd = np.log(sup_diffs[positive])
    coef, res, *_ = np.polyfit(logl, logd, 1, full=True)
    alpha = float(coef[0])
    fit_residual = float(np.sqrt(res[0] / logl.size)) if res.size else 0.0
    return HolderProbe(
        lags=eff_lags,
        sup_diffs=sup_diffs,
        alpha=alpha,
        fit_residual=fit_residual,
        unconstrained=False,
        passed=bool(alpha >= HOLDER_THRESHOLD),
    )


# ---------------------------------------------------------------------------
# weak-form residuals
# ---------------------------------------------------------------------------

def _mollifier(y: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - y^2)) inside |y| < 1, identically zero outside."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    z = y[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z * z))
    return out


def _mollifier_d1(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    z = y[inside]
    w = 1.0 - z * z
    out[inside] = np.exp(1.0 - 1.0 / w) * (-2.0 * z / (w * w))
    return out


def _mollifier_d2(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    z = y[inside]
    w = 1.0 - z * z
    q1 = -2.0 * z / (w * w)
    q2 = -2.0 * (1.0 + 3.0 * z * z) / (w * w * w)
    out[inside] = np.exp(1.0 - 1.0 / w) * (q2 + q1 * q1)
    return out


@dataclass(frozen=True)
class ResidualProbe:
    """Smooth space-time test function phi = amplitude * b(x) * s(t).

    b is a mollifier bump supported on [center - width, center + width] and
    s the matching even mollifier in t/t_cutoff, so phi is C-infinity,
    vanishes near the walls and is identically zero past t_cutoff while
    phi(., 0) is nontrivial.  All derivatives are closed forms.
    """

    center: float
    width: float
    t_cutoff: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.width <= 0.0 or self.t_cutoff <= 0.0:
            raise ValueError("probe width and t_cutoff must be positive")

    def _y(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.width

    def _s(self, t: float) -> float:
        return float(_mollifier(np.array([t / self.t_cutoff]))[0])

    def _s_prime(self, t: float) -> float:
        return float(_mollifier_d1(np.array([t / self.t_cutoff]))[0]) / self.t_cutoff

    def phi(self, x, t: float) -> np.ndarray:
        return self.amplitude * _mollifier(self._y(x)) * self._s(t)

    def phi_t(self, x, t: float) -> np.ndarray:
        return self.amplitude * _mollifier(self._y(x)) * self._s_prime(t)

    def phi_x(self, x, t: float) -> np.ndarray:
        return self.amplitude / self.width * _mollifier_d1(self._y(x)) * self._s(t)

    def phi_xx(self, x, t: float) -> np.ndarray:
        return (
            self.amplitude / self.width**2 * _mollifier_d2(self._y(x)) * self._s(t)
        )


@dataclass(frozen=True)
class WeakResidualResult:
    res_u: float
    res_v: float


def weak_residual(run, probe: ResidualProbe) -> WeakResidualResult:
    """Quadrature imbalance of the two weak formulations along a run.

    res_u tests the space-time identity of the density equation (flux terms
    moved onto the test function, initial data included); res_v is the worst
    per-snapshot imbalance of the nutrient equation.  Space integrals use
    midpoint quadrature at cell centers; time integrals use the interval
    midpoint rule with snapshot averages standing in for midpoint fields.
    Both residuals shrink under joint mesh/schedule refinement; neither is
    exactly zero for honest data.
    """
    traj = run.trajectory if isinstance(run, LimitCandidate) else run
    grid = traj.grid
    L = grid.length
    if not (probe.center - probe.width > 0.0 and probe.center + probe.width < L):
        raise ValueError("test function must vanish near the walls")
    times = traj.times
    if probe.t_cutoff >= times[-1]:
        raise ValueError("temporal cutoff must precede the final snapshot")

    h = grid.h
    x = grid.centers
    K = times.size
    n = grid.n

    g_full = np.zeros((K, n + 1))
    g_full[:, 1:-1] = np.diff(traj.v, axis=1) / h
    vxc = 0.5 * (g_full[:, :-1] + g_full[:, 1:])

    u_m = 0.5 * (traj.u[:-1] + traj.u[1:])
    v_m = 0.5 * (traj.v[:-1] + traj.v[1:])
    vxc_m = 0.5 * (vxc[:-1] + vxc[1:])
    mids = 0.5 * (times[:-1] + times[1:])
    deltas = np.diff(times)

    t1 = t_a = t_b = t_c = t_e = 0.0
    for k in range(K - 1):
        ph = probe.phi(x, mids[k])
        pt = probe.phi_t(x, mids[k])
        px = probe.phi_x(x, mids[k])
        pxx = probe.phi_xx(x, mids[k])
        w = deltas[k] * h
        uk, vk, gk = u_m[k], v_m[k], vxc_m[k]
        t1 += w * float(np.sum(uk * pt))
        t_a += w * float(np.sum(uk * uk * gk * px))
        t_b += w * float(np.sum(uk * uk * vk * pxx))
        t_c += w * float(np.sum(uk * uk * vk * gk * px))
        t_e += w * float(np.sum(uk * vk * ph))
    t2 = h * float(np.sum(traj.u[0] * probe.phi(x, 0.0)))
    res_u = abs(t1 + t2 + 0.5 * t_a + 0.5 * t_b + t_c + t_e)

    res_v = 0.0
    for k in range(K):
        s_val = probe._s(times[k])
        if s_val == 0.0 and times[k] > probe.t_cutoff:
            continue
        ph = probe.phi(x, times[k])
        px = probe.phi_x(x, times[k])
        fk = np.asarray(traj.source.values(grid, times[k]), dtype=float)
        r = h * float(
            np.sum(vxc[k] * px + (traj.u[k] * traj.v[k] - fk) * ph)
        )
        res_v = max(res_v, abs(r))

    return WeakResidualResult(res_u=res_u, res_v=res_v)


# ---------------------------------------------------------------------------
# whole-trajectory and whole-family evaluation
# ---------------------------------------------------------------------------

@dataclass
class EstimateRecord:
    """Every lemma-derived quantity evaluated at one snapshot, with verdicts."""

    t: float
    mass: float
    mass_lower: float
    mass_upper: float
    consumption_gap: float
    loggrad_lhs: float
    loggrad_rhs: float
    sup_v: float
    inf_v: float
    harnack_C: float
    inf_bound: float
    sup_bound: float
    lp_norms: Dict[float, float]
    dissipation_accum: float
    min_u: float
    max_vx: float
    checks: Dict[str, bool] = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass
class TrajectoryAssessment:
    eps: Optional[float]
    records: List[EstimateRecord]
    lp_table: Dict[float, Tuple[float, float]]
    failures: List[str]

    @property
    def passed(self) -> bool:
        return not self.failures


def evaluate_trajectory(traj: Trajectory, scenario: Scenario) -> TrajectoryAssessment:
    """Run the full per-snapshot estimate suite plus the per-step identity gates."""
    grid = traj.grid
    omega = grid.length
    eps = traj.eps if traj.eps is not None else 0.0
    u0_mass = grid.h * float(np.sum(scenario.initial_values(grid)))
    primary_p = scenario.lp_exponents[0]
    failures: List[str] = []
    label = f"eps={traj.eps:g}: " if traj.eps is not None else ""

    if traj.stats.max_consumption_gap > STEP_IDENTITY_TOL:
        failures.append(
            label + "per-step consumption identity drifted to "
            f"{traj.stats.max_consumption_gap:.3e}"
        )
    if traj.stats.max_mass_gap > STEP_IDENTITY_TOL:
        failures.append(
            label + "per-step mass balance drifted to "
            f"{traj.stats.max_mass_gap:.3e}"
        )
    if traj.stats.min_u <= 0.0:
        failures.append(label + f"density lost positivity (min {traj.stats.min_u:.3e})")

    records: List[EstimateRecord] = []
    for k, t in enumerate(traj.times):
        u = traj.u_field(k)
        v = traj.v_field(k)
        f = Field(grid, np.asarray(traj.source.values(grid, float(t)), dtype=float))
        f_sup = scenario.source_supremum_to(float(t))

        mass_chk = check_mass_bounds(u, float(t), u0_mass, f_sup, eps, omega)
        cons_chk = check_consumption(u, v, f)
        checks = {"mass_bounds": mass_chk.passed, "consumption": cons_chk.passed}

        if float(np.min(v.values)) > 0.0:
            lg = check_loggrad_identity(u, v, f)
            ha = check_harnack(u, v, f)
            checks["loggrad"] = lg.passed
            checks["harnack"] = ha.passed
            lg_lhs, lg_rhs, ha_bound = lg.lhs, lg.rhs, ha.bound
        else:
            checks["positivity_v"] = False
            lg_lhs = lg_rhs = ha_bound = math.nan
        vb = check_v_bounds(v, f, float(t), u0_mass, eps, omega, f_sup)
        checks["v_bounds"] = vb.passed

        sup_v, inf_v = sup_inf(v)
        diss = traj.dissipation.get(float(primary_p))
        rec = EstimateRecord(
            t=float(t),
            mass=mass_chk.mass,
            mass_lower=mass_chk.lower,
            mass_upper=mass_chk.upper,
            consumption_gap=cons_chk.gap,
            loggrad_lhs=lg_lhs,
            loggrad_rhs=lg_rhs,
            sup_v=sup_v,
            inf_v=inf_v,
            harnack_C=ha_bound,
            inf_bound=vb.inf_bound,
            sup_bound=vb.sup_bound,
            lp_norms={p: lp_norm(u, p) for p in scenario.lp_exponents},
            dissipation_accum=float(diss[k]) if diss is not None else math.nan,
            min_u=float(np.min(u.values)),
            max_vx=float(np.max(np.abs(face_gradient(v)))),
            checks=checks,
        )
        records.append(rec)
        for name, ok in checks.items():
            if not ok:
                failures.append(label + f"{name} failed at t={t:.6g}")

    lp_table = {}
    for p in scenario.lp_exponents:
        try:
            lp_table[float(p)] = track_lp_dissipation(traj, p)
        except KeyError:
            pass
    return TrajectoryAssessment(
        eps=traj.eps, records=records, lp_table=lp_table, failures=failures
    )


@dataclass(frozen=True)
class SpreadCheck:
    low: float
    high: float
    passed: bool


def _spread(values: Sequence[float]) -> SpreadCheck:
    lo, hi = float(min(values)), float(max(values))
    return SpreadCheck(lo, hi, bool(hi <= 2.0 * lo + 1e-10))


@dataclass
class FamilyAssessment:
    """Everything the monitor concluded about one epsilon family."""

    trajectory_assessments: List[TrajectoryAssessment]
    dissipation_spread: Dict[float, Tuple[SpreadCheck, SpreadCheck]]
    holder: List[HolderProbe]
    cauchy: ConvergenceReport
    weak: Optional[WeakResidualResult]
    failures: List[str]

    @property
    def verdict(self) -> bool:
        return not self.failures


def default_probe(scenario: Scenario) -> ResidualProbe:
    return ResidualProbe(
        center=0.5 * scenario.L,
        width=0.3 * scenario.L,
        t_cutoff=0.75 * scenario.t_end,
    )


def default_lags(times: np.ndarray) -> Tuple[float, ...]:
    """Lag ladder at span fractions 1/64 .. 1/8, snapped to the schedule.

    Each target lag is rounded to a whole number of snapshot intervals; when
    the schedule is too coarse to give four distinct rungs the ladder falls
    back to small powers of two.  Fewer than three resolvable rungs means
    the schedule cannot support a smoothness fit at all.
    """
    K = int(times.size)
    delta = (times[-1] - times[0]) / (K - 1)
    ks = sorted(
        {min(max(1, round((K - 1) / d)), K - 2) for d in (64, 32, 16, 8)}
    )
    if len(ks) < 3:
        ks = sorted({k for k in (1, 2, 4, 8) if k <= K - 2})
    if len(ks) < 3:
        raise ValueError(
            "snapshot schedule too coarse for a smoothness fit; "
            "need at least 6 snapshots"
        )
    return tuple(k * delta for k in ks)


def evaluate_family(
    family: EpsilonFamily,
    scenario: Scenario,
    probe: Optional[ResidualProbe] = None,
    lags: Optional[Sequence[float]] = None,
    window: Optional[Tuple[float, float]] = None,
    q: float = 1.0,
) -> FamilyAssessment:
    """Full monitor suite: per-rung estimates, family spreads, smoothness,
    Cauchy decay and weak residuals on the extracted limit."""
    assessments = [evaluate_trajectory(tr, scenario) for tr in family.trajectories]
    failures = [msg for a in assessments for msg in a.failures]

    spread: Dict[float, Tuple[SpreadCheck, SpreadCheck]] = {}
    for p in scenario.lp_exponents:
        key = float(p)
        rows = [a.lp_table[key] for a in assessments if key in a.lp_table]
        if len(rows) == len(assessments):
            lp_spread = _spread([r[0] for r in rows])
            diss_spread = _spread([r[1] for r in rows])
            spread[key] = (lp_spread, diss_spread)
            if not lp_spread.passed:
                failures.append(
                    f"p={p:g} power integrals spread beyond 2x across the family"
                )
            if not diss_spread.passed:
                failures.append(
                    f"p={p:g} dissipation integrals spread beyond 2x across the family"
                )

    span = (0.0, float(scenario.t_end)) if window is None else window
    shared_times = family.trajectories[0].times
    lag_values = default_lags(shared_times) if lags is None else lags
    holder: List[HolderProbe] = []
    for traj in family.trajectories:
        hp = fit_holder_exponent(traj, span, lag_values)
        holder.append(hp)
        if not hp.passed:
            failures.append(
                f"eps={traj.eps:g}: fitted time-smoothness exponent "
                f"{hp.alpha:.3f} fell below {HOLDER_THRESHOLD}"
            )

    cauchy = cauchy_convergence(family, q)
    if not cauchy.converging:
        failures.append("family increments are not decreasing with epsilon")

    weak: Optional[WeakResidualResult] = None
    if cauchy.converging:
        try:
            limit = extract_limit(family, q)
            weak = weak_residual(limit, probe or default_probe(scenario))
        except ExtractionRefusal as err:
            failures.append(f"limit extraction refused: {err}")

    return FamilyAssessment(
        trajectory_assessments=assessments,
        dissipation_spread=spread,
        holder=holder,
        cauchy=cauchy,
        weak=weak,
        failures=failures,
    )
