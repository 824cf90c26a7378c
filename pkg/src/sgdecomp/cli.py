"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 a fit did not converge (results
are still written and flagged).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fitting import FitConfig, FitError, fit, fit_both
from .formats import (
    DEFAULT_PRECISION,
    ProfileParseError,
    ReportDocument,
    curve_grid,
    dump_document,
    emit_candidates,
    emit_component_curves,
    emit_report,
    parse_profile_csv,
    round_sig,
)
from .metrics import compute_metrics
from .model import TimeGrid
from .optimize import NonFiniteError, SolverSettings
from .peaks import detect_peaks
from .synthgen import (
    BUNDLED_SCENARIO,
    DayScenario,
    NoiseSpec,
    ScenarioError,
    WeekScenario,
    apply_noise,
    bundled_scenario_text,
    day_series,
    format_scenario,
    parse_scenario,
    series_csv,
)

logger = logging.getLogger("sgdecomp")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2


class UsageError(ValueError):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _float_pair(text: str) -> tuple[float, float]:
    values = _float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lower,upper', got {text!r}")
    return values


def _precision(text: str):
    if text == "full":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("precision must be a positive integer or 'full'") from None
    if value < 1:
        raise argparse.ArgumentTypeError("precision must be >= 1")
    return value


def _add_fit_options(p: argparse.ArgumentParser):
    d = FitConfig()
    s = SolverSettings()
    g = p.add_argument_group("fit configuration")
    g.add_argument("--r1", type=float, default=d.r1_width_target, metavar="HOURS",
                   help="nominal peak width targeted by the width penalty (default: %(default)s)")
    g.add_argument("--r2", type=float, default=d.r2_skew_weight, metavar="WEIGHT",
                   help="skewness penalty weight (default: %(default)s)")
    g.add_argument("--r1-weight", type=float, default=d.r1_weight, metavar="WEIGHT",
                   help="multiplier on the width penalty (default: %(default)s)")
    g.add_argument("--sigma-starts", type=_float_list, default=d.sigma_starts, metavar="LIST",
                   help="initial widths, comma separated (default: 1,2,3)")
    g.add_argument("--alpha-starts", type=_float_list, default=d.alpha_starts, metavar="LIST",
                   help="initial skewnesses, comma separated (default: -1,0,1)")
    g.add_argument("--sigma-bounds", type=_float_pair, default=d.sigma_bounds, metavar="LO,HI",
                   help="width bounds in hours (default: 0.1,10)")
    g.add_argument("--alpha-bounds", type=_float_pair, default=d.alpha_bounds, metavar="LO,HI",
                   help="skewness bounds (default: -5,5)")
    g.add_argument("--amplitude-cap-factor", type=float, default=d.amplitude_cap_factor,
                   metavar="F", help="amplitude upper bound as a multiple of the max flow (default: %(default)s)")
    g.add_argument("--baseline-percentile", type=float, default=d.baseline_cap_percentile,
                   metavar="P", help="baseline upper bound percentile of the flows (default: %(default)s)")
    g.add_argument("--per-peak-combinatorial", action="store_true",
                   help="try every start pair per peak (9**n runs, at most 3 peaks)")
    g.add_argument("--min-prominence", type=float, default=None, metavar="FLOW",
                   help="drop detected candidates less prominent than this (default: off)")
    g.add_argument("--max-iterations", type=int, default=s.max_iterations,
                   help="solver iteration limit per start (default: %(default)s)")
    g.add_argument("--gradient-tolerance", type=float, default=s.gradient_tolerance,
                   help="projected-gradient stopping tolerance (default: %(default)s)")
    g.add_argument("--history-size", type=int, default=s.history_size,
                   help="quasi-Newton memory (default: %(default)s)")
    g.add_argument("--function-tolerance", type=float, default=s.function_tolerance,
                   help="relative per-iteration decrease that counts as a stall (default: %(default)s)")
    g.add_argument("--stall-gradient-tolerance", type=float, default=s.stall_gradient_tolerance,
                   help="projected-gradient level below which a stall counts as converged; "
                        "set it to the gradient tolerance to disable stall exits (default: %(default)s)")


def _config_from_args(args, symmetric: bool = False) -> FitConfig:
    return FitConfig(
        r1_width_target=args.r1,
        r2_skew_weight=args.r2,
        r1_weight=args.r1_weight,
        sigma_starts=args.sigma_starts,
        alpha_starts=args.alpha_starts,
        sigma_bounds=args.sigma_bounds,
        alpha_bounds=args.alpha_bounds,
        amplitude_cap_factor=args.amplitude_cap_factor,
        baseline_cap_percentile=args.baseline_percentile,
        symmetric=symmetric,
        per_peak_combinatorial=args.per_peak_combinatorial,
        min_prominence=args.min_prominence,
        solver=SolverSettings(args.max_iterations, args.gradient_tolerance, args.history_size,
                              args.function_tolerance, args.stall_gradient_tolerance),
    )


def _read_profile(path: str, unit, label):
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    if label is None:
        label = "stdin" if path == "-" else Path(path).stem
    return parse_profile_csv(data, unit=unit, label=label)


def _write(path, data: bytes):
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(data)


def cmd_decompose(args) -> int:
    profile = _read_profile(args.input, args.unit, args.label)
    config = _config_from_args(args, symmetric=args.symmetric)
    if args.emit_curves is not None:
        curve_grid(args.emit_curves)
        curves_path = args.curves_output or _sibling(args.output, "curves.csv")
    if args.emit_peaks:
        _write(args.emit_peaks, emit_candidates(detect_peaks(profile, config.min_prominence)))
    report = fit(profile, config)
    _write(args.output, emit_report(report, args.format, args.precision))
    if args.emit_curves is not None:
        _write(curves_path, emit_component_curves(report.model, args.emit_curves))
    if args.emit_scenario:
        day = DayScenario.from_model(report.model, profile.label or "day")
        _write(args.emit_scenario, format_scenario([day], unit=profile.unit).encode("utf-8"))
    if not report.converged:
        logger.warning("fit did not converge (loss %.6g)", report.loss)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _sibling(output, suffix):
    if output is None or output == "-":
        raise UsageError("--emit-curves needs --curves-output when the report goes to stdout")
    out = Path(output)
    return str(out.with_name(f"{out.stem}.{suffix}"))


def cmd_compare(args) -> int:
    profile = _read_profile(args.input, args.unit, args.label)
    skewed, symmetric = fit_both(profile, _config_from_args(args))
    _write(args.output, dump_document(ReportDocument.from_reports(skewed, symmetric), args.precision))
    if not symmetric.converged:
        logger.warning("symmetric fit did not converge")
    if not (skewed.converged and symmetric.converged):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_scenario(path: str):
    p = Path(path)
    if p.exists():
        return parse_scenario(p.read_text(encoding="utf-8"))
    if p.name == BUNDLED_SCENARIO or path == "table6":
        return parse_scenario(bundled_scenario_text())
    raise UsageError(f"scenario file not found: {path}")


def cmd_generate(args) -> int:
    scenario = _load_scenario(args.scenario)
    if isinstance(scenario, WeekScenario):
        days, noise = scenario.days, scenario.noise
    else:
        days, noise = scenario, None
    if args.noise is not None:
        noise = NoiseSpec(scale=args.noise, seed=args.seed if args.seed is not None else 0)
    elif args.seed is not None and noise is not None:
        noise = NoiseSpec(noise.kind, noise.scale, args.seed)

    if args.grid_step == 1.0:
        grid = TimeGrid()
    else:
        if not 0 < args.grid_step <= 1:
            raise UsageError(f"--grid-step must satisfy 0 < step <= 1, got {args.grid_step}")
        grid = TimeGrid.spanning_day(args.grid_step)
    series = [day_series(d, grid) for d in days]
    values = apply_noise(np.concatenate([s.total for s in series]), noise)
    _write(args.output, series_csv(series, values, components=args.components).encode("utf-8"))
    return EXIT_OK


def cmd_metrics(args) -> int:
    observed = _read_profile(args.observed, args.unit, None)
    predicted = _read_profile(args.predicted, args.unit, None)
    report = compute_metrics(observed.values, predicted.values)
    doc = {key: round_sig(v, args.precision) for key, v in report.as_dict().items()}
    _write(args.output, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgdecomp",
        description="Decompose 24-hour demand profiles into a baseline plus skewed Gaussian peaks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
        p.add_argument("--unit", default=None, help="flow unit tag (default: from header, else m3/h)")
        p.add_argument("--precision", type=_precision, default=DEFAULT_PRECISION,
                       help="significant digits in reports, or 'full' (default: %(default)s)")

    p = sub.add_parser("decompose", help="fit one profile and write a report")
    p.add_argument("input", help="profile CSV ('-' for stdin)")
    p.add_argument("--label", default=None, help="profile label (default: file stem)")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="json report or csv peak table (default: %(default)s)")
    p.add_argument("--symmetric", action="store_true", help="freeze every skewness at 0")
    p.add_argument("--emit-curves", type=float, default=None, metavar="STEP",
                   help="write component curves sampled every STEP hours (0 < STEP <= 1)")
    p.add_argument("--curves-output", default=None, metavar="PATH",
                   help="curve CSV path (default: <output stem>.curves.csv)")
    p.add_argument("--emit-peaks", default=None, metavar="PATH", help="write detected peak candidates")
    p.add_argument("--emit-scenario", default=None, metavar="PATH",
                   help="write the fitted model as a one-day scenario file")
    common(p)
    _add_fit_options(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("compare", help="fit skewed and symmetric models side by side")
    p.add_argument("input", help="profile CSV ('-' for stdin)")
    p.add_argument("--label", default=None, help="profile label (default: file stem)")
    common(p)
    _add_fit_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="generate synthetic series from a scenario file")
    p.add_argument("scenario", help=f"scenario file ('{BUNDLED_SCENARIO}' falls back to the bundled copy)")
    p.add_argument("-o", "--output", default=None, help="output CSV (default: stdout)")
    p.add_argument("--components", action="store_true", help="add baseline and per-peak columns")
    p.add_argument("--noise", type=float, default=None, metavar="SCALE",
                   help="multiplicative Gaussian noise scale (default: scenario setting, else off)")
    p.add_argument("--seed", type=int, default=None, help="noise seed (default: scenario setting, else 0)")
    p.add_argument("--grid-step", type=float, default=1.0, metavar="HOURS",
                   help="sampling step within each day (default: %(default)s)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("metrics", help="error metrics between two profile CSVs")
    p.add_argument("observed")
    p.add_argument("predicted")
    common(p)
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ProfileParseError, ScenarioError, UsageError, FitError, NonFiniteError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
