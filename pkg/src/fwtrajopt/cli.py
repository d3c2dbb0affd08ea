"""Command-line harness: solve one scenario or benchmark a directory of them.

Usage::

    fwtrajopt solve SCENARIO.json [--steps N] [--max-iter K] [--tol T]
                    [--heading-variant {admm,qp}] [--out DIR]
    fwtrajopt bench DIR [--steps 50,100] [--max-iter K] [--tol T]
                    [--heading-variant {admm,qp}] [--out DIR]

Command-line flags override the scenario file, which overrides the library
defaults. Exit codes: 0 converged, 2 iteration budget exhausted, 3 input
error, 4 numerical failure. ``bench`` exits with the largest code over its
runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .model import ProblemSpec, ValidationError, check_avoidance
from .postprocess import ControlProfile, SolutionMetrics, summarize
from .scenario import ScenarioError, load_scenario_file, parse_heading_variant, with_overrides
from .solver import (
    DegenerateSpecError,
    NumericalError,
    ResidualReport,
    SingularKKTError,
    SolverConfig,
    SolverError,
    TrajectorySolution,
    solve,
)

log = logging.getLogger("fwtrajopt")

EXIT_CONVERGED = 0
EXIT_MAX_ITER = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

TRAJECTORY_COLUMNS = (
    "t", "x", "y", "z", "psi", "gamma", "v",
    "v_dot", "gamma_dot", "phi", "phi_dot", "psi_dot",
)
CONVERGENCE_COLUMNS = ("iter", "r_kinematic", "r_collision", "r_heading_rate")
METRIC_FIELDS = tuple(f.name for f in fields(SolutionMetrics))
AVOIDANCE_MARGIN = 1e-2


@dataclass
class RunReport:
    scenario_id: str
    metrics: SolutionMetrics
    residuals: ResidualReport
    trajectory: np.ndarray
    status: str
    total_time: float
    worst_avoidance: float
    residual_tol: float

    @property
    def exit_code(self) -> int:
        return EXIT_CONVERGED if self.metrics.converged else EXIT_MAX_ITER

    def summary(self) -> dict:
        last = self.residuals.last() if len(self.residuals) else (np.nan,) * 3
        return {
            "scenario": self.scenario_id,
            "n": int(self.trajectory.shape[0]),
            "status": self.status,
            "total_time": self.total_time,
            "residual_tol": self.residual_tol,
            "final_residuals": dict(zip(CONVERGENCE_COLUMNS[1:], map(float, last))),
            "worst_avoidance_lhs": self.worst_avoidance,
            "passes_avoidance": bool(self.worst_avoidance <= AVOIDANCE_MARGIN),
            "metrics": self.metrics.as_dict(),
        }


def trajectory_table(solution: TrajectorySolution, controls: ControlProfile) -> np.ndarray:
    """(n, 12) array in :data:`TRAJECTORY_COLUMNS` order."""
    pos = solution.positions()
    st = solution.state
    return np.column_stack([
        solution.t, pos[:, 0], pos[:, 1], pos[:, 2], solution.psi, st.gamma, st.v,
        controls.v_dot, controls.gamma_dot, controls.phi, controls.phi_dot, controls.psi_dot,
    ])


def _fmt(value) -> str:
    return repr(float(value))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, np.integer)) else _fmt(v) for v in row])


def _json_safe(obj):
    # JSON has no inf/nan; the obstacle-free worst value is -inf
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path: Path, data) -> None:
    Path(path).write_text(json.dumps(_json_safe(data), indent=2, allow_nan=False) + "\n")


def run_scenario(
    spec: ProblemSpec, config: SolverConfig, output_dir, scenario_id: str = "scenario",
) -> RunReport:
    """Solve, recover controls and write ``trajectory.csv``, ``convergence.csv`` and ``summary.json``."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    solution = solve(spec, config)
    controls, metrics = summarize(solution)
    table = trajectory_table(solution, controls)
    _, worst = check_avoidance(*solution.positions().T, spec.obstacles, AVOIDANCE_MARGIN)
    report = RunReport(
        scenario_id=scenario_id,
        metrics=metrics,
        residuals=solution.residuals,
        trajectory=table,
        status=solution.status.value,
        total_time=float(solution.total_time),
        worst_avoidance=float(worst),
        residual_tol=config.residual_tol,
    )
    write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, table)
    write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS, solution.residuals.rows())
    write_json(out / "summary.json", report.summary())
    return report


def aggregate(metric_rows: Sequence[Mapping]) -> dict:
    """Median, min and max of every metric field over the given runs."""
    out = {}
    for name in METRIC_FIELDS:
        values = np.array([float(row[name]) for row in metric_rows])
        if values.size == 0:
            out[name] = {"median": None, "min": None, "max": None}
        else:
            out[name] = {"median": float(np.median(values)), "min": float(values.min()),
                         "max": float(values.max())}
    return out


def _classify(exc: Exception) -> int:
    if isinstance(exc, (NumericalError, SingularKKTError)):
        return EXIT_NUMERICAL
    return EXIT_INPUT


def run_batch(
    scenario_dir, output_dir, steps: Sequence[int] = (50, 100),
    overrides: Optional[Mapping] = None,
) -> dict:
    """Run every ``*.json`` scenario in ``scenario_dir`` at each step count.

    ``overrides`` holds solver settings that take precedence over each
    file's own. Failing scenarios are recorded with their error and the
    batch carries on. The returned summary is also written to
    ``output_dir/summary.json``.
    """
    scenario_dir, out = Path(scenario_dir), Path(output_dir)
    if not scenario_dir.is_dir():
        raise ScenarioError("not a directory", source=str(scenario_dir))
    files = sorted(scenario_dir.glob("*.json"))
    overrides = dict(overrides or {})
    out.mkdir(parents=True, exist_ok=True)
    if not files:
        log.warning("no scenario files in %s", scenario_dir)

    runs = []
    for n in steps:
        for path in files:
            run_id = f"{path.stem}_n{n}"
            entry = {"scenario": path.stem, "n": int(n), "run": run_id}
            try:
                scenario = with_overrides(load_scenario_file(path), n=n, **overrides)
                report = run_scenario(scenario.spec, scenario.config, out / run_id, path.stem)
            except (ValueError, SolverError) as exc:
                log.error("%s: %s", run_id, exc)
                entry.update(status="error", exit_code=_classify(exc), error=str(exc))
            else:
                entry.update(status=report.status, exit_code=report.exit_code,
                             passes_avoidance=report.summary()["passes_avoidance"],
                             metrics=report.metrics.as_dict())
            runs.append(entry)

    summary = {"scenario_dir": str(scenario_dir), "steps": [int(n) for n in steps],
               "runs": runs, "aggregate": {}}
    for n in steps:
        ok = [r["metrics"] for r in runs if r["n"] == n and "metrics" in r]
        summary["aggregate"][str(n)] = {"runs": len(ok), **aggregate(ok)}
    write_json(out / "summary.json", summary)
    return summary


def batch_exit_code(summary: Mapping) -> int:
    return max((r["exit_code"] for r in summary["runs"]), default=EXIT_CONVERGED)


# ---------------------------------------------------------------------------
# Argument handling


def _steps(text: str) -> list:
    try:
        values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("no step counts given")
    return values


def _heading(text: str):
    try:
        return parse_heading_variant(text, "--heading-variant")
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fwtrajopt", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("-q", "--quiet", action="store_true", help="only print errors")
        p.add_argument("--max-iter", type=int, help="iteration budget")
        p.add_argument("--tol", type=float, help="residual threshold for convergence")
        p.add_argument("--heading-variant", type=_heading, metavar="{admm,qp}",
                       help="heading step variant (default: from the scenario, else admm)")

    p = sub.add_parser("solve", help="solve a single scenario")
    p.add_argument("scenario", type=Path)
    p.add_argument("--steps", type=int, help="number of time samples n")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    solver_flags(p)

    p = sub.add_parser("bench", help="solve every scenario in a directory")
    p.add_argument("directory", type=Path)
    p.add_argument("--steps", type=_steps, default=[50, 100], help="comma-separated step counts (default: 50,100)")
    p.add_argument("--out", type=Path, default=Path("bench_out"), help="output directory (default: bench_out)")
    solver_flags(p)
    return parser


def _overrides(args) -> dict:
    return {"max_iter": args.max_iter, "residual_tol": args.tol, "heading_variant": args.heading_variant}


def _print_table(summary: Mapping) -> None:
    for n, agg in summary["aggregate"].items():
        print(f"n={n}: {agg['runs']} runs")
        for name in METRIC_FIELDS:
            s = agg[name]
            if s["median"] is not None:
                print(f"  {name:24s} median {s['median']:.4g}  min {s['min']:.4g}  max {s['max']:.4g}")


def _solve_command(args) -> int:
    try:
        scenario = with_overrides(load_scenario_file(args.scenario), n=args.steps, **_overrides(args))
    except (ScenarioError, ValidationError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    try:
        report = run_scenario(scenario.spec, scenario.config, args.out, scenario.name)
    except DegenerateSpecError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (NumericalError, SingularKKTError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_INPUT
    m = report.metrics
    log.info(
        "%s: %s after %d iterations in %.3f s, goal miss %.2f m, arc length %.1f m",
        report.scenario_id, report.status, m.iterations, m.wall_time,
        m.final_position_residual, m.arc_length,
    )
    return report.exit_code


def _bench_command(args) -> int:
    try:
        summary = run_batch(args.directory, args.out, args.steps, _overrides(args))
    except (ScenarioError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_INPUT
    if not args.quiet:
        _print_table(summary)
    return batch_exit_code(summary)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.command == "solve":
        return _solve_command(args)
    return _bench_command(args)


if __name__ == "__main__":
    sys.exit(main())
