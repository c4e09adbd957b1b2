from __future__ import annotations

import argparse
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from src.pdsketch.certify import (
    NULL_OUTPUTS,
    CheckResult,
    OutputDistribution,
    check_entropy,
    check_k_concentrated,
    check_k_pseudodeterministic,
    check_pseudodeterministic,
    check_zero_error,
)
from src.pdsketch.oracles import oracle
from src.pdsketch.reporting import (
    TrialReport,
    reports_frame,
    save_distribution_figure,
    save_space_figure,
    write_markdown_report,
)
from src.pdsketch.streams import resolve_stream
from src.pdsketch.trials import SpaceSweep, TrialConfig, measure_space, run_trials, scaling_slope
from scripts.gen_registry_doc import generate_registry_doc


@dataclass(frozen=True)
class Experiment:
    name: str
    algorithm: str
    stream: str
    property: str
    trials: int
    params: tuple[tuple[str, str], ...] = ()
    k: float | None = None
    max_entropy: float | None = None
    exclude_null: bool = False
    expected: str = "pass"


# Desk-scale instances; baselines are expected to fail pseudo-determinism.
EXPERIMENTS: tuple[Experiment, ...] = (
    Experiment("point_query", "point-query", "gen:zipf-element-stream:n=1000000,m=100,seed=1", "pd", 200,
               (("epsilon", "0.1"),)),
    Experiment("inner_product", "inner-product", "gen:random-sparse-pair:n=10000,m=40,support=5,seed=2", "pd", 200,
               (("epsilon", "1/4"),), exclude_null=True),
    Experiment("l2_trunc", "l2-trunc", "gen:random-turnstile-vector:n=256,m=512,seed=3", "k-pd", 100,
               (("epsilon", "1/4"),), k=2),
    Experiment("dup_conc", "dup-conc", "gen:paired-duplicates:n=1024,seed=5", "k-conc", 500,
               (("s", "4"),), k=8 * 1024 / 4),
    Experiment("dup_conc_zero_error", "dup-conc", "gen:paired-duplicates:n=1024,seed=5", "zero-error", 500,
               (("s", "16"),)),
    Experiment("dup_multipass", "dup-multipass", "gen:random-duplicate-stream:n=1024,seed=6", "zero-error", 10,
               (("passes", "2"),)),
    Experiment("nonzero_row_pd", "nonzero-row-pd", "gen:random-sparse-row-matrix:n=32,d=32,rows=2,noise=4,seed=7",
               "pd", 200),
    Experiment("nonzero_row_rand", "nonzero-row-rand",
               "gen:random-sparse-row-matrix:n=32,d=32,rows=2,noise=4,seed=7", "k-pd", 200, k=2),
    Experiment("nonzero_row_rand_baseline", "nonzero-row-rand",
               "gen:random-sparse-row-matrix:n=32,d=32,rows=2,noise=4,seed=7", "pd", 200, expected="fail"),
    Experiment("recover_basis", "recover-basis", "gen:random-low-rank-matrix:n=64,d=16,k=2,seed=9", "pd", 50,
               (("k", "2"),)),
    Experiment("ams_l2_baseline", "ams-l2", "gen:random-turnstile-vector:n=256,m=512,seed=3", "entropy", 100,
               (("epsilon", "1/4"),), max_entropy=1.0, expected="fail"),
    Experiment("morris_baseline", "morris-count", "gen:all-ones:n=1024", "pd", 200, expected="fail"),
    Experiment("l0_baseline", "l0-sample", "gen:random-turnstile-vector:n=64,m=128,seed=4", "pd", 200,
               expected="fail"),
)

MULTIPASS_SIZES = (64, 256, 1024)
MULTIPASS_PASSES = (1, 2, 3)


def certify(exp: Experiment, dist: OutputDistribution, valid: frozenset[str] | None) -> CheckResult:
    if exp.exclude_null:
        dist = dist.without(NULL_OUTPUTS)
    if exp.property == "pd":
        return check_pseudodeterministic(dist)
    if exp.property == "k-conc":
        return check_k_concentrated(dist, exp.k)
    if exp.property == "k-pd":
        return check_k_pseudodeterministic(dist, int(exp.k))
    if exp.property == "entropy":
        return check_entropy(dist, exp.max_entropy)
    return check_zero_error(dist, valid or frozenset())


def run_experiments(
    experiments: tuple[Experiment, ...], *, outputs_dir: Path, trial_cap: int | None
) -> tuple[pd.DataFrame, list[Path]]:
    figures_dir = outputs_dir / "figures"
    reports: list[TrialReport] = []
    expected: list[str] = []
    figures: list[Path] = []

    for exp in experiments:
        trials = min(exp.trials, trial_cap) if trial_cap else exp.trials
        cfg = TrialConfig.build(exp.algorithm, exp.stream, trials=trials, params=dict(exp.params))
        source = resolve_stream(exp.stream)
        outcome = run_trials(cfg, source)
        valid = oracle(exp.algorithm, source).valid
        result = certify(exp, outcome.distribution, valid)
        reports.append(TrialReport.from_outcome(outcome, result, valid))
        expected.append(exp.expected)
        print(f"[+] {exp.name}: {result.summary()}")

        figure = figures_dir / f"{exp.name}_distribution.png"
        if save_distribution_figure(outcome.distribution, out_path=figure, title=f"{exp.algorithm} output distribution"):
            figures.append(figure)

    frame = reports_frame(reports)
    frame.insert(1, "expected", expected)
    return frame, figures


def run_space_sweep(*, outputs_dir: Path) -> tuple[pd.DataFrame, dict[str, float], Path | None]:
    parts = []
    slopes: dict[str, float] = {}
    for passes in MULTIPASS_PASSES:
        sweep = SpaceSweep(
            "n",
            MULTIPASS_SIZES,
            stream_template="gen:random-duplicate-stream:n={n}",
            params=(("passes", str(passes)),),
        )
        frame = measure_space("dup-multipass", sweep)
        frame.insert(1, "label", f"p={passes}")
        slopes[f"dup-multipass p={passes} (target {1 / passes:.3f})"] = scaling_slope(frame, "n")
        parts.append(frame)

    space = pd.concat(parts, ignore_index=True)
    figure = outputs_dir / "figures" / "space_scaling.png"
    have_figure = save_space_figure(space, x="n", out_path=figure)
    return space, slopes, figure if have_figure else None


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the desk-scale certification suite.")
    parser.add_argument(
        "--output-dir",
        help="Output directory (default: ./outputs or env var OUTPUT_DIR)",
        default=None,
    )
    parser.add_argument("--quick", action="store_true", help="Cap every experiment at 20 trials")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    args = parser.parse_args()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    project_root = Path(__file__).resolve().parents[1]

    # Support OUTPUT_DIR env var for testing
    if args.output_dir:
        outputs_dir = Path(args.output_dir)
    else:
        outputs_dir = Path(os.getenv("OUTPUT_DIR", str(project_root / "outputs")))

    tables_dir = outputs_dir / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)

    certificates, figures = run_experiments(EXPERIMENTS, outputs_dir=outputs_dir, trial_cap=20 if args.quick else None)
    certificates_csv = tables_dir / "certificates.csv"
    certificates.to_csv(certificates_csv, index=False)

    space, slopes, space_figure = run_space_sweep(outputs_dir=outputs_dir)
    space_csv = tables_dir / "space_sweep.csv"
    space.to_csv(space_csv, index=False)
    if space_figure:
        figures.insert(0, space_figure)

    report_path = write_markdown_report(
        path=outputs_dir / "REPORT.md",
        certificates=certificates,
        space=space,
        slopes=slopes,
        figure_paths=figures,
    )

    print("Certification suite completed.")
    print(f"- Report: {report_path.as_posix()}")
    print(f"- Certificates: {certificates_csv.as_posix()}")
    print(f"- Space sweep: {space_csv.as_posix()}")
    print(f"- Figures: {(outputs_dir / 'figures').as_posix()}")

    registry_doc = project_root / "docs" / "algorithm_registry.md"
    generate_registry_doc(output_path=registry_doc)
    print(f"[+] Generated: {registry_doc}")

    return 0


if __name__ == "__main__":
    raise SystemExit(main())
