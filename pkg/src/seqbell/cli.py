"""Command-line front end.

Five subcommands: ``sweep`` (curve/surface tables), ``thresholds`` (noise
thresholds by bisection), ``optimize`` (best strengths), ``simulate``
(synthetic counting statistics with error bars) and ``certify``
(certificates from a coincidence-count file).

All angles are radians.  Exit codes: 0 success, 2 usage error, 3 numeric
domain error, 4 bracketing failure, 5 malformed or unusable count file.
Grid sweeps honor the SEQBELL_THREADS environment variable (default 1)
without changing output bytes.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import plots
from .errors import (
    BracketingError,
    CountTableError,
    InsufficientDataError,
    SeqbellError,
)
from .montecarlo import (
    CountRow,
    CountTable,
    EstimateReport,
    bootstrap,
    default_specs,
    estimate,
    history_to_str,
    outcome_probabilities,
    read_count_table,
    resample_counts,
    sample_counts,
    write_count_table,
    _trial_rng,
)
from .noise import NoiseParams
from .optimize import (
    ThresholdQuery,
    find_threshold,
    maximize,
    sweep_one,
    sweep_two,
    total_entropy,
)
from .protocol import ProtocolConfig

PI4 = float(np.pi / 4)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_BRACKET = 4
EXIT_DATA = 5


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _grid_arg(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:n, got {text!r}")
    try:
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:n, got {text!r}") from exc
    return start, stop, n


def _strengths_arg(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"strengths must be comma-separated numbers, got {text!r}"
        ) from exc


def _criterion_arg(text: str):
    if text in ("xi1", "xi2"):
        return (text, None)
    if text.startswith("bits:"):
        try:
            return ("bits", float(text.split(":", 1)[1]))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad bits target in {text!r}") from exc
    raise argparse.ArgumentTypeError(
        f"criterion must be xi1, xi2 or bits:<x>, got {text!r}"
    )


def _expand_grid(spec: tuple[float, float, int]) -> np.ndarray:
    start, stop, n = spec
    if n < 1:
        raise SeqbellError(f"grid needs at least one point, got n={n}")
    if start > stop:
        raise SeqbellError(f"grid start {start} exceeds stop {stop}")
    return np.linspace(start, stop, n)


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="ascii"), True


def _emit(text: str, path: str | None) -> None:
    fh, close = _open_out(path)
    try:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")
    finally:
        if close:
            fh.close()


def _report_json(report: EstimateReport, seed: int | None = None) -> dict:
    entries = []
    for e in report.entries:
        cert = e.certificate
        entries.append(
            {
                "step": e.step,
                "history": history_to_str(e.history),
                "beta": cert.beta,
                "correlators": {
                    "b0": cert.correlators.b0,
                    "a0b0": cert.correlators.a0b0,
                    "a0b1": cert.correlators.a0b1,
                    "a1b0": cert.correlators.a1b0,
                    "a1b1": cert.correlators.a1b1,
                },
                "i_value": cert.i_value,
                "i_max": cert.i_max,
                "g_max": cert.g_max,
                "h_min": cert.h_min,
                "i_value_std": e.i_value_std,
                "h_min_mean": e.h_min_mean,
                "h_min_std": e.h_min_std,
                "clamp_fraction": e.clamp_fraction,
                "flagged": e.flagged,
                "overshoot": cert.overshoot,
                "low_confidence": cert.low_confidence,
            }
        )
    out = {"trials": report.trials, "entries": entries}
    if seed is not None:
        out["seed"] = seed
    return out


def cmd_sweep(args) -> int:
    xi1 = _expand_grid(args.xi1_grid)
    if args.xi2_grid is None:
        points = sweep_one(args.p, args.c, xi1)
        header = ("xi1", "h1", "h2", "total")
        rows = [(pt.xi1, pt.h1, pt.h2, pt.total) for pt in points]
    else:
        xi2 = _expand_grid(args.xi2_grid)
        points = sweep_two(args.p, args.c, xi1, xi2)
        header = ("xi1", "xi2", "h1", "h2", "h3", "total")
        rows = [(pt.xi1, pt.xi2, pt.h1, pt.h2, pt.h3, pt.total) for pt in points]

    if args.format == "csv":
        lines = [",".join(header)]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        _emit("\n".join(lines), args.out)
    else:
        payload = {
            "p": args.p,
            "c": args.c,
            "points": [dict(zip(header, row)) for row in rows],
        }
        _emit(json.dumps(payload, indent=2), args.out)

    if args.plot:
        if args.xi2_grid is None:
            fig = plots.sweep_curve_figure(points, args.p, args.c)
        else:
            fig = plots.sweep_surface_figure(points, args.p, args.c)
        plots.save_figure(fig, args.plot)
    return EXIT_OK


def cmd_thresholds(args) -> int:
    criterion, bits = args.criterion
    query = ThresholdQuery(
        criterion=criterion,
        bits=bits,
        steps=args.steps,
        bracket=(args.bracket_low, args.bracket_high),
        rel_tol=args.rel_tol,
    )
    result = find_threshold(query)
    label = criterion if bits is None else f"bits:{bits:g}"
    payload = {
        "criterion": label,
        "p_thr": result.p_thr,
        "iterations": result.iterations,
    }
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    result = maximize(args.p, args.c, args.steps)
    config = ProtocolConfig(PI4, result.strengths, NoiseParams(args.p, args.c))
    summary = total_entropy(config)
    payload = {
        "strengths": list(result.strengths),
        "total_bits": result.total_bits,
        "per_step": [
            {"step": e.step, "h_min": e.h_min, "degenerate": e.degenerate}
            for e in summary.per_step
        ],
    }
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = ProtocolConfig(args.theta1, args.strengths, NoiseParams(args.p, args.c))
    specs = default_specs(config, args.counts)
    report = bootstrap(config, specs, args.trials, args.seed)
    _emit(json.dumps(_report_json(report, seed=args.seed), indent=2), args.out)

    if args.dump_counts:
        rng = _trial_rng(args.seed, 0)
        rows = [
            CountRow(spec, tuple(sample_counts(outcome_probabilities(config, spec),
                                               spec.mean_total_counts, rng)))
            for spec in specs
        ]
        write_count_table(args.dump_counts, CountTable(tuple(rows)))
    if args.plot:
        plots.save_figure(plots.report_figure(report), args.plot)
    return EXIT_OK


def cmd_certify(args) -> int:
    table = read_count_table(args.counts_file)
    config = ProtocolConfig(args.theta1, args.strengths)
    if args.trials >= 2:
        report = resample_counts(table, config, args.trials, args.seed)
    else:
        report = estimate(table, config)
    _emit(json.dumps(_report_json(report, seed=args.seed), indent=2), args.out)
    if args.plot:
        plots.save_figure(plots.report_figure(report), args.plot)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqbell",
        description="Sequential weak-measurement randomness: simulation, "
        "optimization and certification.  All angles are radians.",
        epilog="Set SEQBELL_THREADS to parallelize grid sweeps "
        "(results are byte-identical).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="tabulate certified bits over strength grids")
    sweep.add_argument("--p", type=float, required=True, help="depolarization weight")
    sweep.add_argument("--c", type=float, default=0.0, help="decoherence weight")
    sweep.add_argument("--xi1-grid", type=_grid_arg, required=True, metavar="START:STOP:N")
    sweep.add_argument("--xi2-grid", type=_grid_arg, default=None, metavar="START:STOP:N",
                       help="adds a third step and sweeps a surface")
    sweep.add_argument("--out", default=None, help="output path (default stdout)")
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.add_argument("--plot", default=None, metavar="FIG",
                       help="also render the curve/surface to this image file")
    sweep.set_defaults(func=cmd_sweep)

    thresholds = sub.add_parser("thresholds", help="bisect noise thresholds")
    thresholds.add_argument("--criterion", type=_criterion_arg, required=True,
                            metavar="xi1|xi2|bits:<x>")
    thresholds.add_argument("--bracket-low", type=float, default=1e-10)
    thresholds.add_argument("--bracket-high", type=float, default=1e-1)
    thresholds.add_argument("--rel-tol", type=float, default=1e-3)
    thresholds.add_argument("--steps", type=int, default=None, choices=(1, 2, 3))
    thresholds.add_argument("--out", default=None)
    thresholds.set_defaults(func=cmd_thresholds)

    optimize = sub.add_parser("optimize", help="maximize total certified bits")
    optimize.add_argument("--p", type=float, required=True)
    optimize.add_argument("--c", type=float, default=0.0)
    optimize.add_argument("--steps", type=int, required=True, choices=(1, 2, 3))
    optimize.add_argument("--out", default=None)
    optimize.set_defaults(func=cmd_optimize)

    simulate = sub.add_parser("simulate", help="synthetic counting statistics")
    simulate.add_argument("--p", type=float, required=True)
    simulate.add_argument("--c", type=float, default=0.0)
    simulate.add_argument("--strengths", type=_strengths_arg, required=True,
                          metavar="XI1,XI2,...")
    simulate.add_argument("--theta1", type=float, default=PI4)
    simulate.add_argument("--counts", type=float, required=True,
                          help="mean coincidences per setting")
    simulate.add_argument("--trials", type=int, default=100)
    simulate.add_argument("--seed", type=int, default=1)
    simulate.add_argument("--out", default=None)
    simulate.add_argument("--dump-counts", default=None, metavar="CSV",
                          help="also write one sampled count table")
    simulate.add_argument("--plot", default=None, metavar="FIG")
    simulate.set_defaults(func=cmd_simulate)

    certify = sub.add_parser("certify", help="certificates from a count file")
    certify.add_argument("--counts-file", required=True)
    certify.add_argument("--theta1", type=float, default=PI4)
    certify.add_argument("--strengths", type=_strengths_arg, required=True,
                         metavar="XI1,XI2,...")
    certify.add_argument("--trials", type=int, default=200,
                         help="bootstrap resamples around the supplied counts")
    certify.add_argument("--seed", type=int, default=1)
    certify.add_argument("--out", default=None)
    certify.add_argument("--plot", default=None, metavar="FIG")
    certify.set_defaults(func=cmd_certify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BracketingError as exc:
        print(f"seqbell: bracketing error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (CountTableError, InsufficientDataError) as exc:
        print(f"seqbell: count data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SeqbellError as exc:
        print(f"seqbell: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
