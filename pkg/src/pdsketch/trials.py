"""Repeated seeded executions of one algorithm on one stream, and space sweeps."""
from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .certify import OutputDistribution
from .errors import InvalidSpecError, raise_if_failures
from .randomness import EntropySource
from .registry import get_algorithm
from .streams import SpaceMeter, StreamSource, resolve_stream

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 1000


@dataclass(frozen=True)
class TrialConfig:
    algorithm: str
    stream: str
    trials: int = DEFAULT_TRIALS
    master_seed: str = "0"
    params: tuple[tuple[str, str], ...] = ()
    passes: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        entry = get_algorithm(self.algorithm)
        failures: list[str] = []
        if self.trials < 1:
            failures.append(f"trials must be at least 1, got {self.trials}")
        if self.workers < 1:
            failures.append(f"workers must be at least 1, got {self.workers}")
        if self.passes is not None and not entry.multipass:
            failures.append(f"{self.algorithm} is a one-pass algorithm; --passes does not apply")
        if self.passes is not None and self.passes < 1:
            failures.append(f"passes must be positive, got {self.passes}")
        try:
            EntropySource.from_hex(self.master_seed)
        except InvalidSpecError as exc:
            failures.append(str(exc))
        raise_if_failures(failures, InvalidSpecError, "Invalid trial configuration")
        entry.resolve_params(self.raw_params())

    @classmethod
    def build(
        cls,
        algorithm: str,
        stream: str,
        *,
        trials: int = DEFAULT_TRIALS,
        master_seed: str = "0",
        params: Mapping[str, object] | None = None,
        passes: int | None = None,
        workers: int = 1,
    ) -> TrialConfig:
        pairs = tuple(sorted((k, str(v)) for k, v in (params or {}).items()))
        return cls(algorithm, stream, trials, master_seed, pairs, passes, workers)

    def raw_params(self) -> dict[str, str]:
        raw = dict(self.params)
        if self.passes is not None:
            raw["passes"] = str(self.passes)
        return raw

    def resolved_params(self) -> dict[str, object]:
        return get_algorithm(self.algorithm).resolve_params(self.raw_params())

    def to_dict(self) -> dict[str, object]:
        """Everything that determines the outcome; worker count is excluded."""
        return {
            "algorithm": self.algorithm,
            "stream": self.stream,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "params": dict(self.params),
            "passes": self.passes,
        }

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def params_text(self) -> str:
        return ";".join(f"{k}={v}" for k, v in sorted(self.raw_params().items()))


@dataclass(frozen=True)
class TrialOutcome:
    config: TrialConfig
    distribution: OutputDistribution
    peak_words: int
    word_bits: int
    stream_hash: str
    stream_header: str
    passes_used: int


def trial_entropy(master_seed: str, index: int, algorithm: str) -> EntropySource:
    return EntropySource.from_hex(master_seed).child("trial", index).child(algorithm)


def _run_indices(
    cfg: TrialConfig, source: StreamSource, indices: Sequence[int]
) -> tuple[Counter[str], int, int]:
    entry = get_algorithm(cfg.algorithm)
    params = cfg.resolved_params()
    outputs: Counter[str] = Counter()
    peak = 0
    passes = 0
    step = max(1, len(indices) // 10)
    for done, index in enumerate(indices, start=1):
        meter = SpaceMeter.for_header(source.header)
        before = source.pass_count
        outputs[entry.run(source, trial_entropy(cfg.master_seed, index, cfg.algorithm), params, meter)] += 1
        peak = max(peak, meter.peak_words)
        passes = max(passes, source.pass_count - before)
        if done % step == 0:
            logger.debug("%s: %d/%d trials", cfg.algorithm, done, len(indices))
    return outputs, peak, passes


def _run_chunk(cfg: TrialConfig, indices: Sequence[int]) -> tuple[Counter[str], int, int]:
    return _run_indices(cfg, resolve_stream(cfg.stream), indices)


def _chunks(total: int, parts: int) -> list[list[int]]:
    return [list(range(start, total, parts)) for start in range(min(parts, total))]


def run_trials(cfg: TrialConfig, source: StreamSource | None = None) -> TrialOutcome:
    """T executions with per-trial seeds derived from the master seed.

    The merged distribution does not depend on how trials are split across
    workers. A pre-resolved `source` must be the stream `cfg.stream` names.
    """
    source = source or resolve_stream(cfg.stream)
    if cfg.workers > 1 and cfg.trials > 1:
        outputs: Counter[str] = Counter()
        peak = passes = 0
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for chunk_outputs, chunk_peak, chunk_passes in pool.map(
                _run_chunk, [cfg] * cfg.workers, _chunks(cfg.trials, cfg.workers)
            ):
                outputs.update(chunk_outputs)
                peak = max(peak, chunk_peak)
                passes = max(passes, chunk_passes)
    else:
        outputs, peak, passes = _run_indices(cfg, source, range(cfg.trials))

    meter = SpaceMeter.for_header(source.header)
    return TrialOutcome(
        config=cfg,
        distribution=OutputDistribution(dict(outputs), cfg.trials),
        peak_words=peak,
        word_bits=meter.word_bits,
        stream_hash=source.content_hash(),
        stream_header=source.header.line(),
        passes_used=passes,
    )


@dataclass(frozen=True)
class SpaceSweep:
    """Values of one parameter to sweep; `{name}` in the stream template is substituted."""

    parameter: str
    values: tuple[int, ...]
    stream_template: str = ""
    params: tuple[tuple[str, str], ...] = ()
    trials: int = 1
    master_seed: str = "0"

    @classmethod
    def parse(cls, text: str, **kwargs: object) -> SpaceSweep:
        """`n=64,256,1024` form."""
        name, sep, values = text.partition("=")
        try:
            parsed = tuple(int(v) for v in values.split(",") if v.strip())
        except ValueError:
            parsed = ()
        if not sep or not name.strip() or not parsed:
            raise InvalidSpecError(f"sweeps look like n=64,256,1024, got {text!r}")
        return cls(name.strip(), parsed, **kwargs)


def measure_space(algorithm: str, sweep: SpaceSweep) -> pd.DataFrame:
    """Peak SpaceMeter words for each swept value."""
    entry = get_algorithm(algorithm)
    template = sweep.stream_template or entry.default_stream
    param_names = {p.name for p in entry.params}
    rows = []
    for value in sweep.values:
        params = dict(sweep.params)
        if sweep.parameter in param_names:
            params[sweep.parameter] = str(value)
        stream = template.format(**{sweep.parameter: value}) if "{" in template else template
        cfg = TrialConfig.build(
            algorithm, stream, trials=sweep.trials, master_seed=sweep.master_seed, params=params
        )
        outcome = run_trials(cfg)
        rows.append(
            {
                "algorithm": algorithm,
                sweep.parameter: value,
                "peak_words": outcome.peak_words,
                "word_bits": outcome.word_bits,
            }
        )
        logger.debug("%s at %s=%d: %d words", algorithm, sweep.parameter, value, outcome.peak_words)
    return pd.DataFrame(rows, columns=["algorithm", sweep.parameter, "peak_words", "word_bits"])


def scaling_slope(frame: pd.DataFrame, x: str, y: str = "peak_words") -> float:
    """Least-squares slope of log y against log x."""
    if frame.shape[0] < 2:
        raise InvalidSpecError("a slope needs at least two sweep points")
    slope, _ = np.polyfit(np.log(frame[x].astype(float)), np.log(frame[y].astype(float)), 1)
    return float(slope)
