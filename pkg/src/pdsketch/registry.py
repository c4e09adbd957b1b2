"""Registered algorithms: ids, parameters, runners and canonical output strings."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .basis import BASIS_ROW_FACTOR, BasisRecoverySketch
from .duplicates import DEFAULT_SPACE_PARAM, ConcentratedDuplicateSketch, multipass_find_duplicate
from .errors import (
    HashCollisionError,
    InvalidSpecError,
    ParameterError,
    PromiseViolationError,
    UnknownAlgorithmError,
    raise_if_failures,
)
from .frequency import InnerProductSketch, PointQuerySketch
from .nonzero_row import NonzeroRowMode, NonzeroRowSketch
from .norms import TruncatedL2Config, l2_concentrated_estimate, l2_truncation_sketch
from .randomness import EntropySource
from .samplers import AmsSketch, L0Sampler, MorrisCounter
from .streams import SpaceMeter, StreamModel, StreamSource

logger = logging.getLogger(__name__)

BOTTOM = "⊥"
NONE = "none"
FAIL = "fail"
PROMISE_VIOLATION = "promise-violation"
EMPTY_BASIS = "empty"

Params = Mapping[str, object]
Runner = Callable[[StreamSource, EntropySource, Params, SpaceMeter], str]


# Canonical output encodings


def format_answer_vector(answers: Iterable[tuple[int, int]]) -> str:
    return ";".join(f"{i}:{f}" for i, f in answers)


def parse_answer_vector(text: str) -> dict[int, int]:
    if not text:
        return {}
    pairs = (item.split(":") for item in text.split(";"))
    return {int(i): int(f) for i, f in pairs}


def format_optional(value: int | None, null: str) -> str:
    return null if value is None else str(int(value))


def format_basis(basis: np.ndarray | Sequence[Sequence[float]]) -> str:
    """Rows at 9 decimals joined by ';', or 'empty'. Negative zero prints as 0."""
    rows = np.asarray(basis, dtype=np.float64)
    if rows.size == 0:
        return EMPTY_BASIS
    rendered = []
    for row in rows:
        cells = [f"{v:.9f}" for v in row]
        rendered.append(",".join("0.000000000" if c == "-0.000000000" else c for c in cells))
    return ";".join(rendered)


# Parameters


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: type
    default: object | None = None
    help: str = ""

    @property
    def required(self) -> bool:
        return self.default is None

    def coerce(self, raw: object) -> object:
        if self.kind is float:
            if isinstance(raw, str):
                return float(Fraction(raw.strip()))
            return float(raw)
        if self.kind is int:
            if isinstance(raw, str):
                return int(raw.strip())
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(f"{raw} is not an integer")
            return int(raw)
        return str(raw)


def parse_param_pairs(pairs: Iterable[str]) -> dict[str, str]:
    """`key=value` strings from the command line; every malformed pair is reported."""
    parsed: dict[str, str] = {}
    failures: list[str] = []
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            failures.append(f"expected key=value, got {pair!r}")
            continue
        if key.strip() in parsed:
            failures.append(f"parameter {key.strip()!r} given twice")
        parsed[key.strip()] = value.strip()
    raise_if_failures(failures, ParameterError, "Invalid --param values")
    return parsed


@dataclass(frozen=True)
class AlgorithmEntry:
    id: str
    summary: str
    model: StreamModel
    runner: Runner = field(repr=False)
    params: tuple[ParamSpec, ...] = ()
    deterministic: bool = False
    output_schema: str = ""
    default_stream: str = ""
    high_probability: str = ""
    entropy_tags: tuple[str, ...] = ()
    multipass: bool = False

    def resolve_params(self, raw: Mapping[str, object]) -> dict[str, object]:
        known = {p.name: p for p in self.params}
        failures = [f"unknown parameter {name!r} for {self.id}" for name in raw if name not in known]
        resolved: dict[str, object] = {}
        for spec in self.params:
            if spec.name in raw:
                try:
                    resolved[spec.name] = spec.coerce(raw[spec.name])
                except (ValueError, ZeroDivisionError, TypeError) as exc:
                    failures.append(f"{spec.name}={raw[spec.name]!r}: {exc}")
            elif spec.required:
                failures.append(f"missing required parameter {spec.name!r} for {self.id}")
            else:
                resolved[spec.name] = spec.default
        raise_if_failures(failures, ParameterError, f"Invalid parameters for {self.id}")
        return resolved

    def run(self, source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
        if source.header.model is not self.model:
            raise InvalidSpecError(
                f"{self.id} reads {self.model.value} streams, got a {source.header.model.value} stream"
            )
        try:
            return self.runner(source, entropy, params, meter)
        except HashCollisionError as exc:
            logger.debug("%s: %s", self.id, exc)
            return FAIL
        except PromiseViolationError as exc:
            logger.debug("%s: %s", self.id, exc)
            return PROMISE_VIOLATION


# Runners


def _run_point_query(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    header = source.header
    sketch = PointQuerySketch(header.n, header.m, params["epsilon"], entropy, meter=meter)
    support: set[int] = set()
    for element in source.replay():
        sketch.update(element)
        support.add(element)
    return format_answer_vector((i, sketch.query(i)) for i in sorted(support))


def _run_inner_product(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    header = source.header
    if header.d != 2:
        raise InvalidSpecError(f"inner-product streams have two columns (x, y), got d = {header.d}")
    sketch = InnerProductSketch(header.n, header.m, params["epsilon"], entropy, meter=meter)
    for update in source.replay():
        sketch.update(update.column, update.coordinate, update.delta)
    return str(sketch.estimate())


def _vector_batch(source: StreamSource) -> tuple[list[int], list[int]]:
    coords, deltas = [], []
    for update in source.replay():
        coords.append(update.coordinate)
        deltas.append(update.delta)
    return coords, deltas


def _run_l2_trunc(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    cfg = TruncatedL2Config(params["epsilon"])
    ams = l2_truncation_sketch(
        source.header.n,
        cfg,
        entropy,
        width=params["width"] or None,
        repetitions=params["repetitions"] or None,
        meter=meter,
    )
    ams.update_many(*_vector_batch(source))
    return repr(l2_concentrated_estimate(ams, cfg))


def _run_ams_l2(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    ams = AmsSketch.for_accuracy(source.header.n, params["epsilon"], entropy, meter=meter)
    ams.update_many(*_vector_batch(source))
    return repr(ams.l2_estimate())


def _run_dup_conc(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    sketch = ConcentratedDuplicateSketch.sample(
        source.header.n,
        entropy,
        space_param=params["s"],
        copies=params["copies"] or None,
        meter=meter,
    )
    sketch.feed(source.replay())
    return format_optional(sketch.output(), BOTTOM)


def _run_dup_multipass(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    return str(multipass_find_duplicate(source, params["passes"], meter))


def _nonzero_row_runner(mode: NonzeroRowMode) -> Runner:
    def run(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
        sketch = NonzeroRowSketch(source.header.n, source.header.d, mode, entropy, meter=meter)
        for update in source.replay():
            sketch.update(update)
        return format_optional(sketch.query(), NONE)

    return run


def _run_recover_basis(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    header = source.header
    sketch = BasisRecoverySketch(
        header.n, header.d, params["k"], entropy, row_factor=params["row_factor"], meter=meter
    )
    sketch.update_many(source.replay())
    return format_basis(sketch.finalize())


def _run_morris(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    counter = MorrisCounter(meter=meter)
    bits = entropy.child("morris")
    for _ in source.replay():
        counter.update(bits)
    return str(int(counter.estimate()))


def _run_l0(source: StreamSource, entropy: EntropySource, params: Params, meter: SpaceMeter) -> str:
    sampler = L0Sampler(source.header.n, entropy, meter=meter)
    for update in source.replay():
        sampler.update(update)
    return format_optional(sampler.query(), NONE)


_EPSILON = ParamSpec("epsilon", float, 0.25, "accuracy parameter ε in (0, 1]; fractions like 1/4 accepted")

REGISTRY: dict[str, AlgorithmEntry] = {
    entry.id: entry
    for entry in (
        AlgorithmEntry(
            id="point-query",
            summary="Misra–Gries over a pairwise hash into [m^3]; answers every streamed element",
            model=StreamModel.ELEMENT,
            runner=_run_point_query,
            params=(ParamSpec("epsilon", float, 0.1, "additive error as a fraction of m"),),
            output_schema="i:f pairs for the distinct streamed elements only, ascending i, joined by ';'; unlisted elements answer 0",
            default_stream="gen:zipf-element-stream:n={n},m=100",
            high_probability="hash injective on the support except with probability 1/m",
            entropy_tags=("hash",),
        ),
        AlgorithmEntry(
            id="inner-product",
            summary="two hashed Misra–Gries summaries; ⟨x'', y''⟩ over the top-1/ε lists",
            model=StreamModel.MATRIX,
            runner=_run_inner_product,
            params=(_EPSILON,),
            output_schema="integer estimate, or 'fail' on a detected hash collision",
            default_stream="gen:random-sparse-pair:n={n},support=5,m=40",
            high_probability="collision-free except with probability 1/m",
            entropy_tags=("hash", "tag-hash"),
        ),
        AlgorithmEntry(
            id="l2-trunc",
            summary="AMS ℓ2 estimate truncated to its leading max(2·log(1/ε), 5) bits",
            model=StreamModel.VECTOR,
            runner=_run_l2_trunc,
            params=(
                _EPSILON,
                ParamSpec("width", int, 0, "AMS width; 0 sizes it from min(2^-20, ε^4) with the cap"),
                ParamSpec("repetitions", int, 0, "AMS repetitions; 0 means ceil(3·log2 n)"),
            ),
            output_schema="repr of the truncated float",
            default_stream="gen:random-turnstile-vector:n={n},m=512",
            high_probability="AMS within its error except with probability 1/n^2",
            entropy_tags=("buckets", "signs"),
        ),
        AlgorithmEntry(
            id="dup-conc",
            summary="s·log n remember-and-watch samplers; the smallest confirmed duplicate",
            model=StreamModel.ELEMENT,
            runner=_run_dup_conc,
            params=(
                ParamSpec("s", int, DEFAULT_SPACE_PARAM, "space parameter s"),
                ParamSpec("copies", int, 0, "sampler copies; 0 means s·ceil(log2 n)"),
            ),
            output_schema="duplicate element, or '⊥'",
            default_stream="gen:paired-duplicates:n={n}",
            high_probability="zero-error; concentration 1 - (1 - 3/(4s))^(s log n)",
            entropy_tags=("dup-targets",),
        ),
        AlgorithmEntry(
            id="dup-multipass",
            summary="deterministic p-pass interval narrowing with ceil(n^(1/p)) counters",
            model=StreamModel.ELEMENT,
            runner=_run_dup_multipass,
            params=(ParamSpec("passes", int, 2, "number of passes p"),),
            deterministic=True,
            output_schema="duplicate element",
            default_stream="gen:random-duplicate-stream:n={n}",
            multipass=True,
        ),
        AlgorithmEntry(
            id="nonzero-row-rand",
            summary="ℓ0 sample of A·x with x read from a Nisan PRG",
            model=StreamModel.MATRIX,
            runner=_nonzero_row_runner(NonzeroRowMode.RANDOMIZED),
            output_schema="row index, or 'none'",
            default_stream="gen:random-sparse-row-matrix:n={n},rows=2,noise=4",
            high_probability="row weights vanish with probability about 1/n^3 per row; ℓ0 failure 1/n^2",
            entropy_tags=("prg", "l0"),
        ),
        AlgorithmEntry(
            id="nonzero-row-pd",
            summary="smallest i with (A·x)_i ≠ 0 for a stored random integer x",
            model=StreamModel.MATRIX,
            runner=_nonzero_row_runner(NonzeroRowMode.PSEUDO_DETERMINISTIC),
            output_schema="row index, or 'none'",
            default_stream="gen:random-sparse-row-matrix:n={n},rows=2,noise=4",
            high_probability="union bound over nonzero rows: 1 - 1/n^2",
            entropy_tags=("row-weights",),
        ),
        AlgorithmEntry(
            id="recover-basis",
            summary="sign sketch S·A, QR, projection, then the reduced row echelon basis",
            model=StreamModel.MATRIX,
            runner=_run_recover_basis,
            params=(
                ParamSpec("k", int, 2, "rank promise k"),
                ParamSpec("row_factor", int, BASIS_ROW_FACTOR, "sketch rows = ceil(row_factor·k·log2 n)"),
            ),
            output_schema="RREF rows at 9 decimals, ',' within and ';' between rows; 'empty' or 'promise-violation'",
            default_stream="gen:random-low-rank-matrix:n={n},d=16,k=2",
            high_probability="S preserves the rank except with probability 1/poly(n)",
            entropy_tags=("basis-signs",),
        ),
        AlgorithmEntry(
            id="morris-count",
            summary="Morris approximate counter of the stream length",
            model=StreamModel.ELEMENT,
            runner=_run_morris,
            output_schema="integer estimate 2^X - 1",
            default_stream="gen:all-ones:n={n}",
            entropy_tags=("morris",),
        ),
        AlgorithmEntry(
            id="l0-sample",
            summary="one ℓ0 sample of the support of a turnstile vector",
            model=StreamModel.VECTOR,
            runner=_run_l0,
            output_schema="coordinate, or 'none'",
            default_stream="gen:random-turnstile-vector:n={n}",
            high_probability="fail probability about 1/n^2 over ceil(2·log2 n) copies",
            entropy_tags=("subsample/<copy>", "fingerprint/<copy>"),
        ),
        AlgorithmEntry(
            id="ams-l2",
            summary="untruncated AMS ℓ2 estimate",
            model=StreamModel.VECTOR,
            runner=_run_ams_l2,
            params=(_EPSILON,),
            output_schema="repr of the float estimate",
            default_stream="gen:random-turnstile-vector:n={n},m=512",
            entropy_tags=("buckets", "signs"),
        ),
    )
}


def get_algorithm(algorithm_id: str) -> AlgorithmEntry:
    try:
        return REGISTRY[algorithm_id]
    except KeyError:
        raise UnknownAlgorithmError(
            f"unknown algorithm {algorithm_id!r}; registered: {', '.join(REGISTRY)}"
        ) from None


def run_once(
    algorithm_id: str,
    source: StreamSource,
    entropy: EntropySource,
    params: Mapping[str, object] | None = None,
    meter: SpaceMeter | None = None,
) -> str:
    """One execution of a registered algorithm, returning its canonical output."""
    entry = get_algorithm(algorithm_id)
    resolved = entry.resolve_params(params or {})
    return entry.run(source, entropy, resolved, meter or SpaceMeter.for_header(source.header))

