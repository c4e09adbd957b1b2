from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from math import ceil, log2
from pathlib import Path
from typing import Callable, Iterable, Iterator, Union

import numpy as np

from .errors import AccountingError, DomainError, InvalidSpecError, StreamFormatError
from .randomness import EntropySource


class StreamModel(str, Enum):
    ELEMENT = "elem"
    VECTOR = "vec"
    MATRIX = "mat"


@dataclass(frozen=True)
class StreamHeader:
    model: StreamModel
    n: int
    m: int
    d: int = 1

    def line(self) -> str:
        if self.model is StreamModel.MATRIX:
            return f"{self.model.value} {self.n} {self.d} {self.m}"
        return f"{self.model.value} {self.n} {self.m}"

    @property
    def entry_bound(self) -> int:
        return self.n**3


@dataclass(frozen=True)
class TurnstileUpdate:
    coordinate: int
    delta: int
    column: int | None = None


Record = Union[int, TurnstileUpdate]


@dataclass(frozen=True)
class ElementStream:
    universe_size: int
    elements: tuple[int, ...]

    def __post_init__(self) -> None:
        for position, element in enumerate(self.elements, start=1):
            if not 1 <= element <= self.universe_size:
                raise DomainError(
                    f"element {element} at position {position} outside [1, {self.universe_size}]"
                )

    @property
    def length(self) -> int:
        return len(self.elements)

    @property
    def is_find_duplicate_instance(self) -> bool:
        return self.universe_size % 2 == 0 and self.length == 3 * self.universe_size // 2


def _check_record(header: StreamHeader, record: Record, running: dict, where: str) -> None:
    if header.model is StreamModel.ELEMENT:
        if not isinstance(record, int) or isinstance(record, bool):
            raise DomainError(f"{where}: element streams hold integers, got {record!r}")
        if not 1 <= record <= header.n:
            raise DomainError(f"{where}: element {record} outside [1, {header.n}]")
        return

    if not isinstance(record, TurnstileUpdate):
        raise DomainError(f"{where}: turnstile streams hold updates, got {record!r}")
    if not 1 <= record.coordinate <= header.n:
        raise DomainError(f"{where}: row {record.coordinate} outside [1, {header.n}]")
    if header.model is StreamModel.MATRIX:
        if record.column is None or not 1 <= record.column <= header.d:
            raise DomainError(f"{where}: column {record.column} outside [1, {header.d}]")
    elif record.column is not None:
        raise DomainError(f"{where}: vector updates carry no column")

    key = (record.coordinate, record.column)
    value = running.get(key, 0) + record.delta
    if abs(value) > header.entry_bound:
        raise DomainError(
            f"{where}: entry {key} reaches {value}, beyond the bound n^3 = {header.entry_bound}"
        )
    running[key] = value


class StreamSource:
    """An immutable, replayable stream.

    Every `replay` returns an independent cursor over the same records and
    bumps `pass_count`.
    """

    def __init__(self, header: StreamHeader, records: Iterable[Record]) -> None:
        self.header = header
        self.records: tuple[Record, ...] = tuple(records)
        self.pass_count = 0
        if len(self.records) != header.m:
            raise InvalidSpecError(
                f"header declares m = {header.m} records but the body has {len(self.records)}"
            )
        running: dict = {}
        for position, record in enumerate(self.records, start=1):
            _check_record(header, record, running, f"record {position}")

    def __repr__(self) -> str:
        return f"StreamSource({self.header.line()!r}, passes={self.pass_count})"

    def replay(self) -> Iterator[Record]:
        self.pass_count += 1
        return iter(self.records)

    def element_stream(self) -> ElementStream:
        if self.header.model is not StreamModel.ELEMENT:
            raise InvalidSpecError(f"{self.header.model.value} stream is not an element stream")
        return ElementStream(self.header.n, tuple(self.records))

    def content_hash(self) -> str:
        """Git-style blob hash of the canonical text."""
        data = format_stream(self).encode("utf-8")
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def replay(source: StreamSource) -> Iterator[Record]:
    return source.replay()


_INT = re.compile(r"^[+-]?\d+$")


def _parse_int(token: str, line_number: int, what: str) -> int:
    if not _INT.match(token):
        raise StreamFormatError(line_number, f"{what} must be an integer, got {token!r}")
    return int(token)


def _parse_header(tokens: list[str], line_number: int) -> tuple[StreamModel, int, int | None, int]:
    verb = tokens[0]
    try:
        model = StreamModel(verb)
    except ValueError:
        raise StreamFormatError(line_number, f"unknown header {verb!r}; expected elem, vec or mat") from None

    sizes = tokens[1:]
    dims = 2 if model is StreamModel.MATRIX else 1
    if len(sizes) not in (dims, dims + 1):
        raise StreamFormatError(line_number, f"header {verb!r} takes {dims} or {dims + 1} sizes")
    values = [_parse_int(t, line_number, "size") for t in sizes]
    if any(v < 0 for v in values) or any(v < 1 for v in values[:dims]):
        raise StreamFormatError(line_number, "sizes must be positive")
    n = values[0]
    d = values[1] if model is StreamModel.MATRIX else 1
    m = values[dims] if len(values) > dims else None
    return model, n, m, d


def parse_stream(text: str) -> StreamSource:
    """Parse the line format; the record count is inferred when the header omits m."""
    header_fields: tuple[StreamModel, int, int | None, int] | None = None
    records: list[Record] = []
    running: dict = {}
    last_line = 0

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        last_line = line_number
        tokens = line.split()

        if header_fields is None:
            header_fields = _parse_header(tokens, line_number)
            continue

        model, n, _, d = header_fields
        partial_header = StreamHeader(model, n, 0, d)
        verb = tokens[0]
        if model is StreamModel.ELEMENT:
            if verb != "e" or len(tokens) != 2:
                raise StreamFormatError(line_number, "element streams take lines 'e <v>'")
            record: Record = _parse_int(tokens[1], line_number, "element")
        else:
            arity = 4 if model is StreamModel.MATRIX else 3
            if verb != "u" or len(tokens) != arity:
                shape = "u <i> <j> <+-delta>" if arity == 4 else "u <i> <+-delta>"
                raise StreamFormatError(line_number, f"{model.value} streams take lines '{shape}'")
            row = _parse_int(tokens[1], line_number, "row")
            column = _parse_int(tokens[2], line_number, "column") if arity == 4 else None
            record = TurnstileUpdate(row, _parse_int(tokens[-1], line_number, "delta"), column)

        _check_record(partial_header, record, running, f"line {line_number}")
        records.append(record)

    if header_fields is None:
        raise StreamFormatError(max(last_line, 1), "missing header line")

    model, n, m, d = header_fields
    if m is not None and m != len(records):
        raise StreamFormatError(last_line, f"header declares m = {m} records but found {len(records)}")
    return StreamSource(StreamHeader(model, n, len(records), d), records)


def format_stream(source: StreamSource) -> str:
    lines = [source.header.line()]
    for record in source.records:
        if isinstance(record, TurnstileUpdate):
            column = f" {record.column}" if record.column is not None else ""
            lines.append(f"u {record.coordinate}{column} {record.delta:+d}")
        else:
            lines.append(f"e {record}")
    return "\n".join(lines) + "\n"


def load_stream(path: Path) -> StreamSource:
    return parse_stream(Path(path).read_text(encoding="utf-8"))


def write_stream(source: StreamSource, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_stream(source), encoding="utf-8")
    return path


def _find_duplicate_length(n: int, m: int | None) -> int:
    if m is not None:
        return m
    if n % 2:
        raise InvalidSpecError(f"Find-Duplicate streams need an even n, got {n}")
    return 3 * n // 2


def _elements(n: int, values: Iterable[int]) -> StreamSource:
    values = [int(v) for v in values]
    return StreamSource(StreamHeader(StreamModel.ELEMENT, n, len(values)), values)


def _updates(header_model: StreamModel, n: int, updates: list[TurnstileUpdate], d: int = 1) -> StreamSource:
    return StreamSource(StreamHeader(header_model, n, len(updates), d), updates)


def _gen_all_ones(n: int, m: int | None, rng: np.random.Generator) -> StreamSource:
    length = m if m is not None else (3 * n // 2 if n % 2 == 0 else n + 1)
    return _elements(n, [1] * length)


def _gen_paired_duplicates(n: int, m: int | None, rng: np.random.Generator) -> StreamSource:
    if n % 4:
        raise InvalidSpecError(f"paired-duplicates needs n divisible by 4, got {n}")
    if m is not None and m != 3 * n // 2:
        raise InvalidSpecError(f"paired-duplicates streams have length 3n/2 = {3 * n // 2}")
    values = rng.choice(np.arange(1, n + 1), size=3 * n // 4, replace=False)
    elements = np.repeat(values, 2)
    rng.shuffle(elements)
    return _elements(n, elements)


def _gen_random_duplicate_stream(n: int, m: int | None, rng: np.random.Generator) -> StreamSource:
    length = _find_duplicate_length(n, m)
    return _elements(n, rng.integers(1, n + 1, size=length))


def _gen_zipf_element_stream(
    n: int, m: int | None, rng: np.random.Generator, distinct: int | None = None
) -> StreamSource:
    length = m if m is not None else n
    distinct = distinct or max(1, min(n, length // 4))
    values = rng.choice(n, size=min(distinct, n), replace=False) + 1
    weights = 1.0 / np.arange(1, len(values) + 1)
    return _elements(n, rng.choice(values, size=length, p=weights / weights.sum()))


def _gen_random_turnstile_vector(
    n: int, m: int | None, rng: np.random.Generator, max_delta: int = 5
) -> StreamSource:
    length = m if m is not None else n
    bound = n**3
    running: dict[int, int] = {}
    updates = []
    for _ in range(length):
        i = int(rng.integers(1, n + 1))
        delta = int(rng.integers(1, max_delta + 1)) * int(rng.choice([-1, 1]))
        if abs(running.get(i, 0) + delta) > bound:
            delta = -delta
        running[i] = running.get(i, 0) + delta
        updates.append(TurnstileUpdate(i, delta))
    return _updates(StreamModel.VECTOR, n, updates)


def _gen_random_sparse_pair(
    n: int, m: int | None, rng: np.random.Generator, support: int = 5
) -> StreamSource:
    length = m if m is not None else 8 * support
    support = min(support, n)
    x_support = rng.choice(n, size=support, replace=False) + 1
    shared = x_support[: ceil(support / 2)]
    others = np.setdiff1d(np.arange(1, n + 1), x_support)
    fresh = rng.choice(others, size=min(support - len(shared), len(others)), replace=False)
    y_support = np.concatenate([shared, fresh])
    updates = []
    for _ in range(length):
        side = int(rng.integers(1, 3))
        pool = x_support if side == 1 else y_support
        updates.append(TurnstileUpdate(int(rng.choice(pool)), 1, side))
    return _updates(StreamModel.MATRIX, n, updates, d=2)


def _gen_random_low_rank_matrix(
    n: int,
    m: int | None,
    rng: np.random.Generator,
    d: int | None = None,
    k: int = 2,
    max_entry: int = 3,
) -> StreamSource:
    d = d or n
    if not 0 <= k <= min(n, d):
        raise InvalidSpecError(f"rank {k} impossible for a {n}x{d} matrix")
    matrix = np.zeros((n, d), dtype=np.int64)
    if k:
        for _ in range(100):
            left = rng.integers(-max_entry, max_entry + 1, size=(n, k))
            right = rng.integers(-max_entry, max_entry + 1, size=(k, d))
            matrix = left @ right
            if np.linalg.matrix_rank(matrix) == k:
                break
        else:
            raise InvalidSpecError(f"could not draw a rank-{k} {n}x{d} matrix")
    rows, cols = np.nonzero(matrix)
    order = rng.permutation(len(rows))
    updates = [TurnstileUpdate(int(rows[t]) + 1, int(matrix[rows[t], cols[t]]), int(cols[t]) + 1) for t in order]
    if m is not None and m != len(updates):
        raise InvalidSpecError(f"random-low-rank-matrix emits {len(updates)} updates, not {m}")
    return _updates(StreamModel.MATRIX, n, updates, d=d)


def _gen_random_sparse_row_matrix(
    n: int,
    m: int | None,
    rng: np.random.Generator,
    d: int | None = None,
    rows: int = 2,
    noise: int = 0,
    max_entry: int = 5,
) -> StreamSource:
    d = d or n
    if not 0 <= rows <= n:
        raise InvalidSpecError(f"cannot pick {rows} nonzero rows out of {n}")
    updates = []
    for i in rng.choice(n, size=rows, replace=False) + 1:
        width = int(rng.integers(1, min(3, d) + 1))
        for j in rng.choice(d, size=width, replace=False) + 1:
            value = int(rng.integers(1, max_entry + 1)) * int(rng.choice([-1, 1]))
            updates.append(TurnstileUpdate(int(i), value, int(j)))
    for _ in range(noise):
        i, j = int(rng.integers(1, n + 1)), int(rng.integers(1, d + 1))
        value = int(rng.integers(1, max_entry + 1))
        updates.extend([TurnstileUpdate(i, value, j), TurnstileUpdate(i, -value, j)])
    # Cancelling pairs stay adjacent so every prefix keeps entries in range.
    if m is not None and m != len(updates):
        raise InvalidSpecError(f"random-sparse-row-matrix emits {len(updates)} updates, not {m}")
    return _updates(StreamModel.MATRIX, n, updates, d=d)


GENERATORS: dict[str, Callable[..., StreamSource]] = {
    "all-ones": _gen_all_ones,
    "paired-duplicates": _gen_paired_duplicates,
    "random-duplicate-stream": _gen_random_duplicate_stream,
    "zipf-element-stream": _gen_zipf_element_stream,
    "random-turnstile-vector": _gen_random_turnstile_vector,
    "random-sparse-pair": _gen_random_sparse_pair,
    "random-low-rank-matrix": _gen_random_low_rank_matrix,
    "random-sparse-row-matrix": _gen_random_sparse_row_matrix,
}


def generator_rng(kind: str, seed: int | str) -> np.random.Generator:
    seed_hex = format(seed, "x") if isinstance(seed, int) else str(seed)
    return EntropySource.from_hex(seed_hex).child("generate", kind).numpy_rng()


def generate(kind: str, n: int, m: int | None = None, seed: int | str = 0, **params: int) -> StreamSource:
    """Synthetic stream; a pure function of (kind, n, m, params, seed)."""
    if kind not in GENERATORS:
        raise InvalidSpecError(f"unknown generator {kind!r}; choose from {', '.join(GENERATORS)}")
    if n < 1:
        raise InvalidSpecError(f"n must be positive, got {n}")
    try:
        return GENERATORS[kind](n, m, generator_rng(kind, seed), **params)
    except TypeError as exc:
        raise InvalidSpecError(f"bad parameters for generator {kind!r}: {exc}") from None


def parse_generator_spec(spec: str) -> tuple[str, dict[str, int | str]]:
    """Split `gen:<kind>:n=64,m=96,seed=7` into the kind and its parameters."""
    parts = spec.split(":", 2)
    if len(parts) < 2 or parts[0] != "gen" or not parts[1]:
        raise InvalidSpecError(f"generator specs look like gen:<kind>:n=..., got {spec!r}")
    params: dict[str, int | str] = {}
    if len(parts) == 3 and parts[2]:
        for item in parts[2].split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or not key or (key != "seed" and not _INT.match(value.strip())):
                raise InvalidSpecError(f"bad generator parameter {item!r} in {spec!r}")
            params[key] = value.strip() if key == "seed" else int(value)
    if "n" not in params:
        raise InvalidSpecError(f"generator spec {spec!r} needs n=")
    return parts[1], params


def resolve_stream(spec: str) -> StreamSource:
    """A file path or a `gen:` spec."""
    if spec.startswith("gen:"):
        kind, params = parse_generator_spec(spec)
        return generate(kind, **params)
    return load_stream(Path(spec))


def word_bits_for(n: int, m: int, d: int = 1) -> int:
    return max(1, ceil(log2(max(n, m, d, 2))))


@dataclass
class SpaceMeter:
    """Persistent-memory ledger in words of `word_bits` bits."""

    word_bits: int = 64
    current_words: int = 0
    peak_words: int = 0

    @classmethod
    def for_header(cls, header: StreamHeader) -> SpaceMeter:
        return cls(word_bits=word_bits_for(header.n, header.m, header.d))

    def charge(self, words: int) -> SpaceMeter:
        balance = self.current_words + words
        if balance < 0:
            raise AccountingError(f"releasing {-words} words leaves a negative balance ({balance})")
        self.current_words = balance
        self.peak_words = max(self.peak_words, balance)
        return self
