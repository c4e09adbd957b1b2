"""Small dense linear algebra for basis recovery: QR, rank, projections, canonical bases."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

import numpy as np

from .errors import PreconditionError

DEFAULT_TOL = 1e-9


def _as_matrix(matrix: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise PreconditionError(f"expected a 2-d matrix, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise PreconditionError("matrix entries must be finite")
    return array


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _positive_leading(row: np.ndarray, tol: float) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(row) > tol)
    if nonzero.size and row[nonzero[0]] < 0:
        return -row
    return row


def qr_orthonormal_basis(matrix: np.ndarray | Sequence[Sequence[float]], tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal rows spanning the row space, by Gram–Schmidt with one reorthogonalization.

    A row whose residual falls to tol·‖M‖_F is treated as dependent and
    dropped. Each kept row has a positive leading entry.
    """
    if tol <= 0:
        raise PreconditionError(f"tol must be positive, got {tol}")
    array = _as_matrix(matrix)
    cols = array.shape[1]
    scale = float(np.linalg.norm(array))
    if scale == 0.0:
        return _frozen(np.zeros((0, cols)))

    basis: list[np.ndarray] = []
    for row in array:
        residual = row.copy()
        for _ in range(2):
            for q in basis:
                residual -= (q @ residual) * q
        norm = float(np.linalg.norm(residual))
        if norm > tol * scale:
            basis.append(residual / norm)

    if not basis:
        return _frozen(np.zeros((0, cols)))
    return _frozen(np.vstack([_positive_leading(q, tol) for q in basis]))


@dataclass(frozen=True)
class RationalMatrix:
    """Exact matrix of Fractions, row-major."""

    rows: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int | Fraction | str]]) -> RationalMatrix:
        converted = tuple(tuple(Fraction(v) for v in row) for row in rows)
        widths = {len(row) for row in converted}
        if len(widths) > 1:
            raise PreconditionError(f"ragged rows with widths {sorted(widths)}")
        return cls(converted)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0]) if self.rows else 0

    def integer_rows(self) -> list[list[int]]:
        """Each row scaled by the lcm of its denominators."""
        scaled = []
        for row in self.rows:
            factor = lcm(*(v.denominator for v in row)) if row else 1
            scaled.append([int(v * factor) for v in row])
        return scaled

    def rank(self) -> int:
        """Exact rank by fraction-free Bareiss elimination."""
        a = self.integer_rows()
        n_rows, n_cols = self.shape
        rank = 0
        previous = 1
        for col in range(n_cols):
            pivot = next((r for r in range(rank, n_rows) if a[r][col] != 0), None)
            if pivot is None:
                continue
            a[rank], a[pivot] = a[pivot], a[rank]
            for r in range(rank + 1, n_rows):
                for c in range(col + 1, n_cols):
                    a[r][c] = (a[rank][col] * a[r][c] - a[r][col] * a[rank][c]) // previous
                a[r][col] = 0
            previous = a[rank][col]
            rank += 1
            if rank == n_rows:
                break
        return rank


def numeric_rank(matrix: np.ndarray | Sequence[Sequence[float]] | RationalMatrix, tol: float = DEFAULT_TOL) -> int:
    if isinstance(matrix, RationalMatrix):
        return matrix.rank()
    return int(qr_orthonormal_basis(matrix, tol).shape[0])


def projection_from_basis(basis: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Π = QᵀQ for a basis Q stored as orthonormal rows (d×d)."""
    q = np.asarray(basis, dtype=np.float64)
    if q.ndim != 2:
        raise PreconditionError(f"basis must be 2-d, got shape {q.shape}")
    gram = q @ q.T
    if q.shape[0] and np.abs(gram - np.eye(q.shape[0])).max() > 10 * tol:
        raise PreconditionError("basis rows are not orthonormal")
    return _frozen(q.T @ q)


def canonical_subspace_basis(projection: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Reduced row echelon form of a projection matrix: a pure function of its range.

    Partial pivoting picks the largest remaining entry in each column; pivots
    are normalized to 1, entries within tol of zero are snapped to 0, and the
    zero rows are dropped so one row remains per pivot column.
    """
    p = _as_matrix(projection)
    rows, cols = p.shape
    if rows != cols:
        raise PreconditionError(f"projection must be square, got {p.shape}")
    if np.abs(p - p.T).max(initial=0.0) > 10 * tol or np.abs(p @ p - p).max(initial=0.0) > 10 * tol:
        raise PreconditionError("matrix is not a symmetric idempotent projection")

    a = p.copy()
    pivot_row = 0
    for col in range(cols):
        if pivot_row == rows:
            break
        candidate = pivot_row + int(np.argmax(np.abs(a[pivot_row:, col])))
        if abs(a[candidate, col]) <= tol:
            a[pivot_row:, col] = 0.0
            continue
        a[[pivot_row, candidate]] = a[[candidate, pivot_row]]
        a[pivot_row] /= a[pivot_row, col]
        for r in range(rows):
            if r != pivot_row and a[r, col] != 0.0:
                a[r] -= a[r, col] * a[pivot_row]
        pivot_row += 1

    basis = a[:pivot_row]
    basis[np.abs(basis) <= tol] = 0.0
    return _frozen(basis + 0.0)


def embedding_check(orthonormal_columns: np.ndarray, sketch: np.ndarray) -> float:
    """‖(SU)ᵀ(SU) − I‖₂ for a scaled sketch S (rows×n) and U (n×m) with orthonormal columns."""
    u = _as_matrix(orthonormal_columns)
    s = _as_matrix(sketch)
    if s.shape[1] != u.shape[0]:
        raise PreconditionError(f"sketch width {s.shape[1]} does not match basis height {u.shape[0]}")
    su = s @ u
    gap = su.T @ su - np.eye(u.shape[1])
    return float(np.abs(np.linalg.eigvalsh(gap)).max(initial=0.0))
