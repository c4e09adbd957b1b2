"""Exact answers by direct materialization, for checking sketch outputs.

Nothing here reuses sketch or linear-algebra code: vectors are dictionaries,
row spaces come from a rational Gauss–Jordan elimination written below.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt, sqrt
from typing import Iterable, Sequence

from .errors import InvalidSpecError, OracleRefusedError
from .registry import BOTTOM, format_basis, get_algorithm
from .streams import StreamModel, StreamSource

MATRIX_CELL_CAP = 10**5
UNIVERSE_CAP = 10**7


def _check_caps(source: StreamSource) -> None:
    header = source.header
    if header.model is StreamModel.MATRIX and header.n * header.d > MATRIX_CELL_CAP:
        raise OracleRefusedError(f"{header.n}x{header.d} matrix exceeds the {MATRIX_CELL_CAP}-cell oracle cap")
    if header.n > UNIVERSE_CAP:
        raise OracleRefusedError(f"universe {header.n} exceeds the oracle cap {UNIVERSE_CAP}")


def exact_frequencies(source: StreamSource) -> dict[int, int]:
    _check_caps(source)
    return dict(Counter(source.records))


def exact_duplicates(source: StreamSource) -> frozenset[int]:
    return frozenset(e for e, c in exact_frequencies(source).items() if c >= 2)


def exact_vector(source: StreamSource) -> dict[int, int]:
    """Nonzero coordinates of a vector stream."""
    _check_caps(source)
    totals: Counter[int] = Counter()
    for update in source.records:
        totals[update.coordinate] += update.delta
    return {i: v for i, v in totals.items() if v}


def exact_matrix(source: StreamSource) -> list[list[int]]:
    _check_caps(source)
    header = source.header
    matrix = [[0] * header.d for _ in range(header.n)]
    for update in source.records:
        matrix[update.coordinate - 1][update.column - 1] += update.delta
    return matrix


def exact_inner_product(source: StreamSource) -> int:
    """⟨x, y⟩ for a two-column stream: column 1 is x, column 2 is y."""
    matrix = exact_matrix(source)
    if source.header.d != 2:
        raise InvalidSpecError(f"inner products read two-column streams, got d = {source.header.d}")
    return sum(row[0] * row[1] for row in matrix)


def exact_squared_norm(source: StreamSource) -> int:
    return sum(v * v for v in exact_vector(source).values())


def exact_l2_norm(source: StreamSource) -> float:
    squared = exact_squared_norm(source)
    root = isqrt(squared)
    return float(root) if root * root == squared else sqrt(squared)


def exact_nonzero_rows(source: StreamSource) -> frozenset[int]:
    return frozenset(i for i, row in enumerate(exact_matrix(source), start=1) if any(row))


def rational_rref(rows: Iterable[Sequence[int | Fraction]]) -> list[list[Fraction]]:
    """Reduced row echelon form over the rationals, zero rows dropped."""
    a = [[Fraction(v) for v in row] for row in rows]
    if not a:
        return []
    cols = len(a[0])
    pivot_row = 0
    for col in range(cols):
        pivot = next((r for r in range(pivot_row, len(a)) if a[r][col] != 0), None)
        if pivot is None:
            continue
        a[pivot_row], a[pivot] = a[pivot], a[pivot_row]
        lead = a[pivot_row][col]
        a[pivot_row] = [v / lead for v in a[pivot_row]]
        for r in range(len(a)):
            if r != pivot_row and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [v - factor * p for v, p in zip(a[r], a[pivot_row])]
        pivot_row += 1
        if pivot_row == len(a):
            break
    return a[:pivot_row]


def exact_row_space(source: StreamSource) -> list[list[Fraction]]:
    return rational_rref(exact_matrix(source))


def _rational_inverse(matrix: list[list[Fraction]]) -> list[list[Fraction]]:
    size = len(matrix)
    augmented = [row + [Fraction(int(i == j)) for j in range(size)] for i, row in enumerate(matrix)]
    reduced = rational_rref(augmented)
    return [row[size:] for row in reduced]


def exact_projection(basis: list[list[Fraction]]) -> list[list[Fraction]]:
    """Π = Bᵀ(BBᵀ)⁻¹B onto the span of the rows of B."""
    if not basis:
        return []
    gram = [[sum(x * y for x, y in zip(u, v)) for v in basis] for u in basis]
    inverse = _rational_inverse(gram)
    cols = len(basis[0])
    weighted = [[sum(inverse[i][j] * basis[j][c] for j in range(len(basis))) for c in range(cols)] for i in range(len(basis))]
    return [[sum(basis[i][r] * weighted[i][c] for i in range(len(basis))) for c in range(cols)] for r in range(cols)]


def duplicate_output_distribution(elements: Sequence[int], copies: int) -> dict[str, Fraction]:
    """Exact output law of the min-over-copies duplicate sampler with uniform targets.

    One copy aimed at position t outputs elements[t] when that value occurs
    again later, else ⊥. With ⊥ ranked above every value, the minimum over
    independent copies exceeds v exactly when every copy does.
    """
    if copies < 1:
        raise InvalidSpecError(f"copies must be positive, got {copies}")
    length = len(elements)
    single: Counter[int | None] = Counter()
    for t, value in enumerate(elements):
        single[value if value in elements[t + 1 :] else None] += 1

    law: dict[str, Fraction] = {}
    above = Fraction(1)
    for value in sorted(v for v in single if v is not None):
        above_next = above - Fraction(single[value], length)
        mass = above**copies - above_next**copies
        if mass:
            law[str(value)] = mass
        above = above_next
    bottom = Fraction(single[None], length) ** copies
    if bottom:
        law[BOTTOM] = bottom
    return law


@dataclass(frozen=True)
class OracleAnswer:
    problem: str
    value: object
    valid: frozenset[str] | None = None


def oracle(problem_id: str, source: StreamSource) -> OracleAnswer:
    """The exact answer for a registered problem; `valid` lists the acceptable outputs when defined."""
    entry = get_algorithm(problem_id)
    if source.header.model is not entry.model:
        raise InvalidSpecError(f"{problem_id} reads {entry.model.value} streams")

    if problem_id in ("dup-conc", "dup-multipass"):
        duplicates = exact_duplicates(source)
        return OracleAnswer(problem_id, duplicates, frozenset(str(v) for v in duplicates))
    if problem_id == "point-query":
        return OracleAnswer(problem_id, exact_frequencies(source))
    if problem_id == "inner-product":
        return OracleAnswer(problem_id, exact_inner_product(source))
    if problem_id in ("l2-trunc", "ams-l2"):
        return OracleAnswer(problem_id, exact_l2_norm(source))
    if problem_id in ("nonzero-row-rand", "nonzero-row-pd"):
        rows = exact_nonzero_rows(source)
        return OracleAnswer(problem_id, rows, frozenset(str(i) for i in rows))
    if problem_id == "l0-sample":
        support = frozenset(exact_vector(source))
        return OracleAnswer(problem_id, support, frozenset(str(i) for i in support))
    if problem_id == "recover-basis":
        basis = exact_row_space(source)
        rendered = format_basis([[float(v) for v in row] for row in basis])
        return OracleAnswer(problem_id, basis, frozenset({rendered}))
    if problem_id == "morris-count":
        _check_caps(source)
        return OracleAnswer(problem_id, source.header.m)
    raise InvalidSpecError(f"no oracle for {problem_id}")
