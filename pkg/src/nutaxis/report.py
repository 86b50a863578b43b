"""Serialization of runs: the structured report plus plot-ready tables.

Numeric tables are delimited text with a fixed column order and full double
precision (shortest round-trip formatting), so identical scenarios produce
bit-identical files.  Wall-clock measurements live under 'timing' keys in
the report and are the only nondeterministic entries.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .driver import ConvergenceReport, EpsilonFamily
from .monitor import FamilyAssessment
from .scenario import Scenario, scenario_to_dict
from .stepper import Trajectory

_FMT = "%.17g"


def _write_table(path: Path, header: str, columns) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=_FMT)


def trajectory_summary(traj: Trajectory) -> dict:
    s = traj.stats
    return {
        "eps": traj.eps,
        "steps": s.steps,
        "min_dt": s.min_dt,
        "min_u": s.min_u,
        "max_consumption_gap": s.max_consumption_gap,
        "max_mass_gap": s.max_mass_gap,
        "reaction_integral": s.reaction_integral,
        "below_floor": s.below_floor,
        "timing": {"wall_time": s.wall_time},
    }


def _cauchy_to_dict(report: ConvergenceReport) -> dict:
    return {
        "q": report.q,
        "eps_values": list(report.eps_values),
        "times": report.times.tolist(),
        "u_distances": report.u_distances.tolist(),
        "v_distances": report.v_distances.tolist(),
        "converging": report.converging,
        "last_increment": report.last_increment.tolist(),
    }


def build_report(
    scenario: Scenario,
    family: Optional[EpsilonFamily],
    assessment: Optional[FamilyAssessment],
    failures: Optional[list] = None,
) -> dict:
    """Aggregate scenario echo, per-rung ledgers and family verdictions."""
    report = {"scenario": scenario_to_dict(scenario)}
    if family is not None:
        trajectories = []
        for traj, ta in zip(
            family.trajectories,
            assessment.trajectory_assessments if assessment else [None] * len(family),
        ):
            entry = trajectory_summary(traj)
            if ta is not None:
                entry["records"] = [asdict(rec) for rec in ta.records]
                entry["lp_table"] = {
                    str(p): list(val) for p, val in ta.lp_table.items()
                }
            trajectories.append(entry)
        report["trajectories"] = trajectories
    if assessment is not None:
        report["holder"] = [
            {
                "eps": traj.eps,
                "lags": hp.lags.tolist(),
                "sup_diffs": hp.sup_diffs.tolist(),
                "alpha": hp.alpha,
                "fit_residual": hp.fit_residual,
                "unconstrained": hp.unconstrained,
                "passed": hp.passed,
            }
            for traj, hp in zip(family.trajectories, assessment.holder)
        ]
        report["dissipation_spread"] = {
            str(p): {
                "power_integral": asdict(lp_s),
                "dissipation": asdict(d_s),
            }
            for p, (lp_s, d_s) in assessment.dissipation_spread.items()
        }
        report["cauchy"] = _cauchy_to_dict(assessment.cauchy)
        report["weak_residual"] = (
            asdict(assessment.weak) if assessment.weak is not None else None
        )
        report["failures"] = assessment.failures
        report["verdict"] = "pass" if assessment.verdict else "fail"
    if failures is not None:
        report["failures"] = failures
        report["verdict"] = "fail"
    return report


def write_run_outputs(
    outdir: Path,
    scenario: Scenario,
    family: Optional[EpsilonFamily],
    assessment: Optional[FamilyAssessment],
    report: dict,
) -> None:
    """Write report.json plus the delimited-text companions of a run."""
    outdir = Path(outdir)
    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if family is None:
        return

    for j, traj in enumerate(family.trajectories):
        K, n = traj.u.shape
        t_col = np.repeat(traj.times, n)
        x_col = np.tile(traj.grid.centers, K)
        _write_table(
            outdir / f"fields_eps{j}.csv",
            "t,x,u,v",
            (t_col, x_col, traj.u.ravel(), traj.v.ravel()),
        )

    finest = family.finest
    profile_dir = outdir / "profiles"
    profile_dir.mkdir(exist_ok=True)
    for k in range(finest.times.size):
        _write_table(
            profile_dir / f"t{k}.csv",
            "x,u,v",
            (finest.grid.centers, finest.u[k], finest.v[k]),
        )

    if assessment is not None:
        eps_col, lag_col, diff_col, alpha_col = [], [], [], []
        for traj, hp in zip(family.trajectories, assessment.holder):
            eps_col.extend([traj.eps] * hp.lags.size)
            lag_col.extend(hp.lags.tolist())
            diff_col.extend(hp.sup_diffs.tolist())
            alpha_col.extend([hp.alpha] * hp.lags.size)
        _write_table(
            outdir / "holder.csv",
            "eps,lag,sup_diff,alpha",
            (eps_col, lag_col, diff_col, alpha_col),
        )

        cauchy = assessment.cauchy
        times = cauchy.times
        rows_t, rows_ec, rows_ef, rows_u, rows_v = [], [], [], [], []
        for j in range(cauchy.u_distances.shape[0]):
            rows_t.extend(times.tolist())
            rows_ec.extend([cauchy.eps_values[j]] * times.size)
            rows_ef.extend([cauchy.eps_values[j + 1]] * times.size)
            rows_u.extend(cauchy.u_distances[j].tolist())
            rows_v.extend(cauchy.v_distances[j].tolist())
        _write_table(
            outdir / "convergence.csv",
            "t,eps_coarse,eps_fine,u_distance,v_distance",
            (rows_t, rows_ec, rows_ef, rows_u, rows_v),
        )
