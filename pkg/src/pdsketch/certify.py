"""Output distributions and the certificates drawn from them."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Collection, Iterable, Mapping

import pandas as pd
from scipy import stats

from .errors import InvalidSpecError

DEFAULT_ALPHA = 1e-3
NULL_OUTPUTS = frozenset({"⊥", "none", "fail", "promise-violation"})
COVER_LEVELS = (0.5, 0.9, 0.99)


@dataclass(frozen=True)
class OutputDistribution:
    """Counts of canonical output strings over `trials` independent runs."""

    counts: Mapping[str, int]
    trials: int

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise InvalidSpecError(f"a distribution needs at least one trial, got {self.trials}")
        if any(c < 0 for c in self.counts.values()):
            raise InvalidSpecError("output counts must be non-negative")
        if sum(self.counts.values()) != self.trials:
            raise InvalidSpecError(
                f"counts sum to {sum(self.counts.values())}, not the {self.trials} trials"
            )

    @classmethod
    def from_outputs(cls, outputs: Iterable[str]) -> OutputDistribution:
        counts = Counter(outputs)
        return cls(dict(counts), sum(counts.values()))

    def merge(self, other: OutputDistribution) -> OutputDistribution:
        merged = Counter(self.counts)
        merged.update(other.counts)
        return OutputDistribution(dict(merged), self.trials + other.trials)

    def without(self, outputs: Collection[str]) -> OutputDistribution:
        """The distribution conditioned on the output not being one of `outputs`."""
        kept = {o: c for o, c in self.counts.items() if o not in outputs and c}
        if not kept:
            raise InvalidSpecError("no trials remain after conditioning")
        return OutputDistribution(kept, sum(kept.values()))

    def probability(self, output: str) -> float:
        return self.counts.get(output, 0) / self.trials

    def ranked(self) -> list[tuple[str, int]]:
        """Outputs by count descending, ties in lexicographic order."""
        return sorted(((o, c) for o, c in self.counts.items() if c), key=lambda oc: (-oc[1], oc[0]))

    @property
    def modal_output(self) -> str:
        return self.ranked()[0][0]

    @property
    def modal_count(self) -> int:
        return self.ranked()[0][1]

    @property
    def modal_probability(self) -> float:
        return self.modal_count / self.trials

    def top_mass(self, k: int) -> float:
        return sum(c for _, c in self.ranked()[:k]) / self.trials

    def min_cover_size(self, q: float) -> int:
        """Smallest number of outputs whose total mass reaches q."""
        if not 0 < q <= 1:
            raise InvalidSpecError(f"cover level must lie in (0, 1], got {q}")
        covered = 0
        for size, (_, count) in enumerate(self.ranked(), start=1):
            covered += count
            if covered >= q * self.trials:
                return size
        return len(self.ranked())

    def to_frame(self) -> pd.DataFrame:
        ranked = self.ranked()
        return pd.DataFrame(
            {
                "output": [o for o, _ in ranked],
                "count": [c for _, c in ranked],
                "probability": [c / self.trials for _, c in ranked],
            }
        )


def empirical_entropy(dist: OutputDistribution) -> float:
    """Shannon entropy of the observed outputs, in bits."""
    counts = [c for c in dist.counts.values() if c]
    return float(stats.entropy(counts, base=2)) if len(counts) > 1 else 0.0


def binomial_interval(successes: int, trials: int, alpha: float = DEFAULT_ALPHA) -> tuple[float, float]:
    """Exact two-sided Clopper–Pearson bounds at level 1 - alpha."""
    if not 0 <= successes <= trials or trials < 1:
        raise InvalidSpecError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    low = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    high = 1.0 if successes == trials else float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return low, high


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"

    @property
    def exit_code(self) -> int:
        return {Verdict.PASS: 0, Verdict.FAIL: 2, Verdict.INDETERMINATE: 3}[self]


@dataclass(frozen=True)
class CheckResult:
    property: str
    verdict: Verdict
    statistic: float
    threshold: float
    ci_low: float
    ci_high: float
    modal_output: str
    trials: int

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def summary(self) -> str:
        return (
            f"{self.property}: {self.verdict.value} (statistic {self.statistic:.4f} vs threshold "
            f"{self.threshold:.4f}, {1 - DEFAULT_ALPHA:.1%} interval [{self.ci_low:.4f}, {self.ci_high:.4f}], "
            f"modal output {self.modal_output!r}, T={self.trials})"
        )


def _mass_check(
    prop: str, dist: OutputDistribution, successes: int, threshold: float, alpha: float
) -> CheckResult:
    # A threshold inside the interval is reported, not rounded to a verdict.
    statistic = successes / dist.trials
    low, high = binomial_interval(successes, dist.trials, alpha)
    if low >= threshold:
        verdict = Verdict.PASS
    elif high < threshold:
        verdict = Verdict.FAIL
    else:
        verdict = Verdict.INDETERMINATE
    return CheckResult(prop, verdict, statistic, threshold, low, high, dist.modal_output, dist.trials)


def check_pseudodeterministic(
    dist: OutputDistribution, threshold: float = 2 / 3, alpha: float = DEFAULT_ALPHA
) -> CheckResult:
    return _mass_check("pd", dist, dist.modal_count, threshold, alpha)


def check_k_concentrated(dist: OutputDistribution, k: float, alpha: float = DEFAULT_ALPHA) -> CheckResult:
    if k < 1:
        raise InvalidSpecError(f"k must be at least 1, got {k}")
    return _mass_check("k-conc", dist, dist.modal_count, 1 / k, alpha)


def check_k_pseudodeterministic(dist: OutputDistribution, k: int, alpha: float = DEFAULT_ALPHA) -> CheckResult:
    if k < 1:
        raise InvalidSpecError(f"k must be at least 1, got {k}")
    successes = sum(c for _, c in dist.ranked()[:k])
    return _mass_check("k-pd", dist, successes, (k + 1) / (k + 2), alpha)


def check_entropy(dist: OutputDistribution, max_bits: float) -> CheckResult:
    bits = empirical_entropy(dist)
    verdict = Verdict.PASS if bits <= max_bits else Verdict.FAIL
    return CheckResult("entropy", verdict, bits, max_bits, bits, bits, dist.modal_output, dist.trials)


def certify_zero_error(dist: OutputDistribution, valid: Collection[str]) -> int:
    """Trials whose output is neither a null answer nor in the valid set."""
    return sum(c for o, c in dist.counts.items() if o not in NULL_OUTPUTS and o not in valid)


def check_zero_error(dist: OutputDistribution, valid: Collection[str]) -> CheckResult:
    violations = certify_zero_error(dist, valid)
    verdict = Verdict.PASS if violations == 0 else Verdict.FAIL
    return CheckResult(
        "zero-error", verdict, float(violations), 0.0, float(violations), float(violations),
        dist.modal_output, dist.trials,
    )


@dataclass(frozen=True)
class ConcentrationReport:
    entropy_bits: float
    modal_output: str
    modal_probability: float
    covers: dict[float, int] = field(default_factory=dict)
    zero_error_violations: int | None = None

    def min_cover_size(self, q: float) -> int:
        return self.covers[q]


def concentration_report(dist: OutputDistribution, valid: Collection[str] | None = None) -> ConcentrationReport:
    return ConcentrationReport(
        entropy_bits=empirical_entropy(dist),
        modal_output=dist.modal_output,
        modal_probability=dist.modal_probability,
        covers={q: dist.min_cover_size(q) for q in COVER_LEVELS},
        zero_error_violations=None if valid is None else certify_zero_error(dist, valid),
    )
