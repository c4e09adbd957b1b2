"""Command-line entry point: run, certify and space-sweep registered algorithms."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from src.pdsketch.certify import (
    DEFAULT_ALPHA,
    NULL_OUTPUTS,
    CheckResult,
    OutputDistribution,
    check_entropy,
    check_k_concentrated,
    check_k_pseudodeterministic,
    check_pseudodeterministic,
    check_zero_error,
)
from src.pdsketch.errors import SketchError
from src.pdsketch.oracles import oracle
from src.pdsketch.registry import REGISTRY, parse_param_pairs
from src.pdsketch.reporting import TrialReport, emit_report, report_format, save_space_figure
from src.pdsketch.streams import resolve_stream
from src.pdsketch.trials import DEFAULT_TRIALS, SpaceSweep, TrialConfig, measure_space, run_trials, scaling_slope

EXIT_USAGE = 1
PROPERTIES = ("pd", "k-conc", "k-pd", "zero-error", "entropy")


class _Parser(argparse.ArgumentParser):
    # 2 and 3 are verdict codes; usage problems exit with 1.
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _output_dir(arg: str | None) -> Path:
    if arg:
        return Path(arg)
    return Path(os.getenv("OUTPUT_DIR", "outputs"))


def _resolve_report_path(report: str | None, outputs_dir: Path) -> Path | None:
    if not report:
        return None
    p = Path(report)
    return p if p.is_absolute() else outputs_dir / p


def _add_trial_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alg", required=True, choices=sorted(REGISTRY), help="Registered algorithm id")
    parser.add_argument("--stream", required=True, help="Stream file path or gen:<kind>:k=v,... spec")
    parser.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help=f"Seed count T (default {DEFAULT_TRIALS})")
    parser.add_argument("--seed", default="0", help="Master seed, lowercase hex (default 0)")
    parser.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="Algorithm parameter")
    parser.add_argument("--passes", type=int, default=None, help="Passes for multi-pass algorithms")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes (default 1)")
    parser.add_argument("--report", default=None, help="Report file (.csv or .json), relative to the output dir")


def _trial_config(args: argparse.Namespace) -> TrialConfig:
    return TrialConfig.build(
        args.alg,
        args.stream,
        trials=args.trials,
        master_seed=args.seed,
        params=parse_param_pairs(args.param),
        passes=args.passes,
        workers=args.workers,
    )


def _print_distribution(dist: OutputDistribution, limit: int = 10) -> None:
    for output, count in dist.ranked()[:limit]:
        shown = output if len(output) <= 60 else output[:57] + "..."
        print(f"    {count:>7}  {count / dist.trials:7.4f}  {shown}")
    if len(dist.ranked()) > limit:
        print(f"    ... {len(dist.ranked()) - limit} more outputs")


def _cmd_run(args: argparse.Namespace, outputs_dir: Path) -> int:
    cfg = _trial_config(args)
    outcome = run_trials(cfg)
    print(f"[+] {cfg.algorithm} on {outcome.stream_header} ({outcome.stream_hash[:12]}), T={cfg.trials}")
    print(f"[+] Peak space: {outcome.peak_words} words of {outcome.word_bits} bits")
    _print_distribution(outcome.distribution)

    report_path = _resolve_report_path(args.report, outputs_dir)
    if report_path:
        emit_report([TrialReport.from_outcome(outcome)], report_format(report_path), report_path)
        print(f"[+] Report: {report_path.as_posix()}")
    return 0


def _check(args: argparse.Namespace, dist: OutputDistribution, valid: frozenset[str] | None) -> CheckResult:
    if args.property == "pd":
        return check_pseudodeterministic(dist, args.threshold, args.alpha)
    if args.property == "k-conc":
        return check_k_concentrated(dist, args.k, args.alpha)
    if args.property == "k-pd":
        return check_k_pseudodeterministic(dist, int(args.k), args.alpha)
    if args.property == "entropy":
        return check_entropy(dist, args.max_entropy)
    return check_zero_error(dist, valid or frozenset())


def _cmd_certify(args: argparse.Namespace, outputs_dir: Path) -> int:
    failures = []
    if args.property in ("k-conc", "k-pd") and args.k is None:
        failures.append(f"--property {args.property} needs --k")
    if args.property == "entropy" and args.max_entropy is None:
        failures.append("--property entropy needs --max-entropy")
    if failures:
        raise SketchError("; ".join(failures))

    cfg = _trial_config(args)
    outcome = run_trials(cfg)
    dist = outcome.distribution
    if args.exclude_null:
        dist = dist.without(NULL_OUTPUTS)

    valid = None
    if args.property == "zero-error" or args.oracle:
        valid = oracle(cfg.algorithm, resolve_stream(cfg.stream)).valid
        if args.property == "zero-error" and valid is None:
            raise SketchError(f"{cfg.algorithm} has no validity oracle; zero-error does not apply")

    result = _check(args, dist, valid)
    print(f"[+] {cfg.algorithm} on {outcome.stream_header} ({outcome.stream_hash[:12]}), T={dist.trials}")
    _print_distribution(dist)
    print(f"[+] {result.summary()}")

    report_path = _resolve_report_path(args.report, outputs_dir)
    if report_path:
        emit_report([TrialReport.from_outcome(outcome, result, valid)], report_format(report_path), report_path)
        print(f"[+] Report: {report_path.as_posix()}")
    return result.verdict.exit_code


def _cmd_space(args: argparse.Namespace, outputs_dir: Path) -> int:
    params = parse_param_pairs(args.param)
    if args.passes is not None:
        params["passes"] = str(args.passes)
    sweep = SpaceSweep.parse(
        args.sweep,
        stream_template=args.stream or "",
        params=tuple(sorted(params.items())),
        trials=args.trials,
        master_seed=args.seed,
    )
    frame = measure_space(args.alg, sweep)
    print(frame.to_string(index=False))

    out_csv = Path(args.out) if args.out else outputs_dir / "tables" / f"space_{args.alg}.csv"
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_csv, index=False)
    print(f"[+] Space table: {out_csv.as_posix()}")

    if frame.shape[0] >= 2:
        print(f"[+] log-log slope of peak words vs {sweep.parameter}: {scaling_slope(frame, sweep.parameter):.3f}")
    if args.figure:
        figure = outputs_dir / "figures" / f"space_{args.alg}.png"
        if save_space_figure(frame, x=sweep.parameter, out_path=figure, group="algorithm"):
            print(f"[+] Figure: {figure.as_posix()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pd-sketch", description="Run and certify pseudo-deterministic streaming sketches.")
    parser.add_argument("--output-dir", default=None, help="Output directory (default: ./outputs or env var OUTPUT_DIR)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="Run T seeded trials and print the output distribution")
    _add_trial_arguments(run)

    certify = sub.add_parser("certify", help="Run trials and certify a property of the output distribution")
    _add_trial_arguments(certify)
    certify.add_argument("--property", required=True, choices=PROPERTIES)
    certify.add_argument("--k", type=float, default=None, help="k for k-conc and k-pd")
    certify.add_argument("--threshold", type=float, default=2 / 3, help="Modal mass threshold for pd (default 2/3)")
    certify.add_argument("--max-entropy", type=float, default=None, help="Entropy bound in bits")
    certify.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help=f"Significance (default {DEFAULT_ALPHA})")
    certify.add_argument("--exclude-null", action="store_true", help="Condition on outputs other than ⊥/none/fail")
    certify.add_argument("--oracle", action="store_true", help="Also count zero-error violations in the report")

    space = sub.add_parser("space", help="Measure peak SpaceMeter words across a parameter sweep")
    space.add_argument("--alg", required=True, choices=sorted(REGISTRY))
    space.add_argument("--sweep", required=True, help="Parameter and values, e.g. n=64,256,1024")
    space.add_argument("--stream", default=None, help="Stream template with {name} placeholders")
    space.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    space.add_argument("--passes", type=int, default=None)
    space.add_argument("--trials", type=int, default=1)
    space.add_argument("--seed", default="0")
    space.add_argument("--out", default=None, help="CSV path (default: <output-dir>/tables/space_<alg>.csv)")
    space.add_argument("--figure", action="store_true", help="Also save a log-log figure")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    outputs_dir = _output_dir(args.output_dir)
    commands = {"run": _cmd_run, "certify": _cmd_certify, "space": _cmd_space}
    try:
        return commands[args.command](args, outputs_dir)
    except SketchError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
