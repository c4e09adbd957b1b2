from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Collection, Iterable

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .certify import COVER_LEVELS, CheckResult, OutputDistribution, concentration_report
from .errors import InvalidSpecError
from .trials import TrialOutcome


@dataclass(frozen=True)
class TrialReport:
    algorithm: str
    stream: str
    stream_header: str
    stream_hash: str
    trials: int
    master_seed: str
    params: str
    config_hash: str
    peak_words: int
    word_bits: int
    passes_used: int
    distinct_outputs: int
    modal_output: str
    modal_probability: float
    entropy_bits: float
    cover_50: int
    cover_90: int
    cover_99: int
    zero_error_violations: int | None = None
    property: str = ""
    verdict: str = ""
    statistic: float | None = None
    threshold: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None

    @classmethod
    def from_outcome(
        cls,
        outcome: TrialOutcome,
        check: CheckResult | None = None,
        valid: Collection[str] | None = None,
    ) -> TrialReport:
        dist = outcome.distribution
        summary = concentration_report(dist, valid)
        cfg = outcome.config
        covers = [summary.min_cover_size(q) for q in COVER_LEVELS]
        return cls(
            algorithm=cfg.algorithm,
            stream=cfg.stream,
            stream_header=outcome.stream_header,
            stream_hash=outcome.stream_hash,
            trials=cfg.trials,
            master_seed=cfg.master_seed,
            params=cfg.params_text(),
            config_hash=cfg.config_hash,
            peak_words=outcome.peak_words,
            word_bits=outcome.word_bits,
            passes_used=outcome.passes_used,
            distinct_outputs=len(dist.ranked()),
            modal_output=summary.modal_output,
            modal_probability=round(summary.modal_probability, 6),
            entropy_bits=round(summary.entropy_bits, 6),
            cover_50=covers[0],
            cover_90=covers[1],
            cover_99=covers[2],
            zero_error_violations=summary.zero_error_violations,
            property=check.property if check else "",
            verdict=check.verdict.value if check else "",
            statistic=round(check.statistic, 6) if check else None,
            threshold=round(check.threshold, 6) if check else None,
            ci_low=round(check.ci_low, 6) if check else None,
            ci_high=round(check.ci_high, 6) if check else None,
        )


REPORT_FIELDS = tuple(TrialReport.__dataclass_fields__)


def reports_frame(reports: Iterable[TrialReport]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in reports], columns=list(REPORT_FIELDS))


def emit_report(reports: Iterable[TrialReport], fmt: str, path: Path) -> Path:
    """CSV or JSON with a fixed field order; an empty list still writes the header."""
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [asdict(r) for r in reports]
    if fmt == "csv":
        pd.DataFrame(rows, columns=list(REPORT_FIELDS)).to_csv(path, index=False)
    elif fmt == "json":
        payload = {"fields": list(REPORT_FIELDS), "reports": rows}
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    else:
        raise InvalidSpecError(f"report format must be csv or json, got {fmt!r}")
    return path


def load_report(path: Path) -> pd.DataFrame:
    if path.suffix == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        return pd.DataFrame(payload["reports"], columns=payload["fields"])
    return pd.read_csv(path, dtype={"modal_output": str, "master_seed": str}, keep_default_na=False)


def report_format(path: Path) -> str:
    return "json" if path.suffix == ".json" else "csv"


def _markdown_table(frame: pd.DataFrame) -> list[str]:
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    body = ["| " + " | ".join(str(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return [header, rule, *body]


def write_markdown_report(
    *,
    path: Path,
    certificates: pd.DataFrame,
    space: pd.DataFrame | None = None,
    slopes: dict[str, float] | None = None,
    figure_paths: Iterable[Path] = (),
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    lines.append("# Pseudo-Deterministic Streaming Certification Report")
    lines.append("")
    lines.append("Generated by: `python -m scripts.run_all`")
    lines.append("")
    lines.append("## Certificates")
    lines.append("")
    if certificates.empty:
        lines.append("No experiments were run.")
    else:
        shown = certificates[
            ["algorithm", "stream", "trials", "property", "verdict", "statistic", "threshold",
             "modal_output", "entropy_bits", "cover_99", "peak_words"]
        ].copy()
        shown["modal_output"] = shown["modal_output"].map(lambda s: s if len(s) <= 40 else s[:37] + "...")
        lines.extend(_markdown_table(shown))
        verdicts = certificates["verdict"].value_counts()
        lines.append("")
        lines.append(
            "- Verdicts: "
            + ", ".join(f"{v} {int(verdicts.get(v, 0))}" for v in ("pass", "fail", "indeterminate"))
        )
    lines.append("")

    if space is not None and not space.empty:
        lines.append("## Space scaling")
        lines.append("")
        lines.extend(_markdown_table(space))
        lines.append("")
        for label, slope in (slopes or {}).items():
            lines.append(f"- log-log slope for {label}: {slope:.3f}")
        lines.append("")

    figure_paths = list(figure_paths)
    if figure_paths:
        lines.append("## Figures")
        lines.append("")
        for p in figure_paths:
            title = p.stem.replace("_", " ").title()
            lines.append(f"### {title}")
            lines.append("")
            lines.append(f"![{title}](figures/{p.name})")
            lines.append("")

    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def save_space_figure(frame: pd.DataFrame, *, x: str, out_path: Path, group: str = "label") -> bool:
    if frame.empty or x not in frame.columns:
        return False

    out_path.parent.mkdir(parents=True, exist_ok=True)
    plt.figure(figsize=(7, 5))
    groups = frame.groupby(group) if group in frame.columns else [("peak words", frame)]
    for label, part in groups:
        part = part.sort_values(x)
        plt.loglog(part[x], part["peak_words"], marker="o", linewidth=2, label=str(label))
    plt.title("Peak Space vs Universe Size")
    plt.xlabel(x)
    plt.ylabel("Peak words")
    plt.grid(alpha=0.3, which="both")
    plt.legend()
    plt.tight_layout()
    plt.savefig(out_path, dpi=120, bbox_inches="tight")
    plt.close()
    return True


def save_distribution_figure(
    dist: OutputDistribution, *, out_path: Path, title: str, top_n: int = 20
) -> bool:
    frame = dist.to_frame().head(top_n)
    if frame.empty:
        return False

    labels = [o if len(o) <= 16 else o[:13] + "..." for o in frame["output"]]
    out_path.parent.mkdir(parents=True, exist_ok=True)
    plt.figure(figsize=(10, 5))
    plt.bar(np.arange(len(labels)), frame["probability"])
    plt.xticks(np.arange(len(labels)), labels, rotation=45, ha="right")
    plt.title(title)
    plt.xlabel("Output")
    plt.ylabel("Empirical probability")
    plt.grid(axis="y", alpha=0.3)
    plt.tight_layout()
    plt.savefig(out_path, dpi=120, bbox_inches="tight")
    plt.close()
    return True
