"""Command line front end.

    nutaxis run <scenario.json> --out <dir> [--cfl r] [--snapshots k] [--quiet]
    nutaxis converge <scenario.json> --levels m --out <dir> [--quiet]

Exit codes: 0 all checks passed, 1 at least one check or trajectory failed
(the report is still written), 2 unusable input (parse errors, missing
files, missing output directory, insufficient levels).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .driver import ExtractionRefusal, FamilyRunError, extract_limit, run_family
from .elliptic import manufactured_error
from .monitor import (
    check_loggrad_identity,
    default_probe,
    evaluate_family,
    weak_residual,
)
from .grid import Field
from .report import build_report, write_run_outputs, trajectory_summary
from .scenario import Scenario, ScenarioError, load_scenario, scenario_to_dict
from .stepper import StepperParams

_MIN_RESIDUAL_DROP = 1.5
_ELLIPTIC_RATE_BAND = (1.7, 2.3)


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _load(path: str):
    try:
        return load_scenario(path)
    except OSError as err:
        return _fail(f"cannot read scenario: {err}")
    except ScenarioError as err:
        return _fail(f"invalid scenario: {err}")


def _outdir(path: str):
    out = Path(path)
    if not out.is_dir():
        return _fail(f"output directory does not exist: {out}")
    return out


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if isinstance(scenario, int):
        return scenario
    out = _outdir(args.out)
    if isinstance(out, int):
        return out

    kwargs = {}
    if args.cfl is not None:
        kwargs["cfl"] = args.cfl
    try:
        params = StepperParams(**kwargs)
    except ValueError as err:
        return _fail(str(err))
    if args.snapshots is not None:
        try:
            scenario = dataclasses.replace(scenario, snapshot_count=args.snapshots)
        except ScenarioError as err:
            return _fail(str(err))

    def progress(traj):
        if not args.quiet:
            print(
                f"eps={traj.eps:g}: {traj.stats.steps} steps, "
                f"min dt {traj.stats.min_dt:.3e}, "
                f"{traj.stats.wall_time:.2f} s"
            )

    try:
        family = run_family(scenario, params=params, progress=progress)
    except FamilyRunError as err:
        failing_time = getattr(err.cause, "time", None)
        report = build_report(
            scenario,
            None,
            None,
            failures=[str(err)],
        )
        report["failed_eps"] = err.eps
        report["failed_time"] = failing_time
        write_run_outputs(out, scenario, None, None, report)
        if not args.quiet:
            print(f"FAIL: {err}")
        return 1

    try:
        assessment = evaluate_family(family, scenario)
    except ValueError as err:
        return _fail(f"scenario cannot support the check suite: {err}")
    report = build_report(scenario, family, assessment)
    write_run_outputs(out, scenario, family, assessment, report)
    if not args.quiet:
        verdict = "pass" if assessment.verdict else "fail"
        print(f"verdict: {verdict} ({len(assessment.failures)} failures)")
        for msg in assessment.failures:
            print(f"  - {msg}")
    return 0 if assessment.verdict else 1


def cmd_converge(args) -> int:
    scenario = _load(args.scenario)
    if isinstance(scenario, int):
        return scenario
    out = _outdir(args.out)
    if isinstance(out, int):
        return out
    if args.levels < 2:
        return _fail("need at least 2 refinement levels to fit rates")

    base = StepperParams()
    rows = []
    for level in range(args.levels):
        factor = 2**level
        scaled = dataclasses.replace(
            scenario,
            n=scenario.n * factor,
            snapshot_count=(scenario.snapshot_count - 1) * factor + 1,
        )
        params = StepperParams(cfl=base.cfl, dt_max=base.dt_max / factor)
        try:
            family = run_family(scaled, params=params)
        except FamilyRunError as err:
            return _fail(f"level {level} failed: {err}")
        try:
            limit = extract_limit(family)
        except ExtractionRefusal as err:
            return _fail(f"level {level}: {err}")
        weak = weak_residual(limit, default_probe(scaled))

        grid = limit.trajectory.grid
        gap = 0.0
        for k in range(limit.trajectory.times.size):
            u = limit.trajectory.u_field(k)
            v = limit.trajectory.v_field(k)
            f = Field(
                grid,
                np.asarray(
                    limit.trajectory.source.values(
                        grid, float(limit.trajectory.times[k])
                    ),
                    dtype=float,
                ),
            )
            gap = max(gap, check_loggrad_identity(u, v, f).gap)

        rows.append(
            {
                "level": level,
                "n": scaled.n,
                "dt_max": params.dt_max,
                "elliptic_error": manufactured_error(scaled.n, scaled.L),
                "res_u": weak.res_u,
                "res_v": weak.res_v,
                "loggrad_gap": gap,
            }
        )
        if not args.quiet:
            print(
                f"level {level}: n={scaled.n} elliptic={rows[-1]['elliptic_error']:.3e} "
                f"res_u={weak.res_u:.3e} res_v={weak.res_v:.3e} loggrad={gap:.3e}"
            )

    def rate(series):
        series = np.asarray(series, dtype=float)
        ratios = series[:-1] / np.maximum(series[1:], 1e-300)
        levels = np.arange(series.size)
        slope = np.polyfit(levels, np.log2(np.maximum(series, 1e-300)), 1)[0]
        return ratios.tolist(), float(-slope)

    elliptic_ratios, elliptic_rate = rate([r["elliptic_error"] for r in rows])
    res_u_ratios, res_u_rate = rate([r["res_u"] for r in rows])
    res_v_ratios, res_v_rate = rate([r["res_v"] for r in rows])
    loggrad_ratios, loggrad_rate = rate([r["loggrad_gap"] for r in rows])

    failures = []
    lo, hi = _ELLIPTIC_RATE_BAND
    if not (lo <= elliptic_rate <= hi):
        failures.append(
            f"elliptic manufactured rate {elliptic_rate:.2f} outside [{lo}, {hi}]"
        )
    for name, ratios in (("res_u", res_u_ratios), ("res_v", res_v_ratios)):
        if any(r < _MIN_RESIDUAL_DROP for r in ratios):
            failures.append(
                f"{name} dropped by less than {_MIN_RESIDUAL_DROP}x at some level: "
                f"{[f'{r:.2f}' for r in ratios]}"
            )

    report = {
        "scenario": scenario_to_dict(scenario),
        "levels": rows,
        "rates": {
            "elliptic": {"ratios": elliptic_ratios, "fitted": elliptic_rate},
            "res_u": {"ratios": res_u_ratios, "fitted": res_u_rate},
            "res_v": {"ratios": res_v_ratios, "fitted": res_v_rate},
            "loggrad": {"ratios": loggrad_ratios, "fitted": loggrad_rate},
        },
        "failures": failures,
        "verdict": "pass" if not failures else "fail",
    }
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    header = "level,n,dt_max,elliptic_error,res_u,res_v,loggrad_gap"
    with open(out / "convergence.csv", "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(
                f"{r['level']},{r['n']},{r['dt_max']:.17g},"
                f"{r['elliptic_error']:.17g},{r['res_u']:.17g},"
                f"{r['res_v']:.17g},{r['loggrad_gap']:.17g}\n"
            )
    if not args.quiet:
        print(f"verdict: {report['verdict']}")
        for msg in failures:
            print(f"  - {msg}")
    return 0 if not failures else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nutaxis",
        description="Degenerate nutrient-taxis simulator and estimate checker",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and its full check suite")
    p_run.add_argument("scenario", help="path to a JSON scenario document")
    p_run.add_argument("--out", required=True, help="existing output directory")
    p_run.add_argument("--cfl", type=float, default=None, help="stability factor")
    p_run.add_argument(
        "--snapshots", type=int, default=None, help="override snapshot count"
    )
    p_run.add_argument("--quiet", action="store_true", help="suppress progress")
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser(
        "converge", help="rerun under mesh/schedule refinement and fit rates"
    )
    p_conv.add_argument("scenario", help="path to a JSON scenario document")
    p_conv.add_argument("--levels", type=int, required=True, help="refinement levels")
    p_conv.add_argument("--out", required=True, help="existing output directory")
    p_conv.add_argument("--quiet", action="store_true", help="suppress progress")
    p_conv.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    return args.func(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
