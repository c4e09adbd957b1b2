"""Streaming row-space recovery for a rank-≤k turnstile matrix."""
from __future__ import annotations

import logging
from math import ceil, log2
from typing import Iterable

import numpy as np

from .errors import DomainError, InvalidSpecError, PromiseViolationError
from .linalg import DEFAULT_TOL, canonical_subspace_basis, projection_from_basis, qr_orthonormal_basis
from .randomness import EntropySource, HashBank, HashFamilySpec, sample_hash_bank
from .samplers import log2_ceil
from .streams import SpaceMeter, TurnstileUpdate

logger = logging.getLogger(__name__)

BASIS_ROW_FACTOR = 8


def sketch_rows(universe_size: int, rank_bound: int, row_factor: int = BASIS_ROW_FACTOR) -> int:
    return max(rank_bound, ceil(row_factor * rank_bound * log2(max(universe_size, 2))))


class BasisRecoverySketch:
    """Keeps S·A for a random sign matrix S with O(k log n) rows.

    Column i of S is recomputed from per-row sign hashes whenever row i of A
    is updated; S itself is never stored. The finalized output is the
    canonical basis of the row space of S·A, which equals the row space of A
    whenever S preserves the rank.
    """

    def __init__(
        self,
        rows: int,
        columns: int,
        rank_bound: int,
        entropy: EntropySource,
        *,
        row_factor: int = BASIS_ROW_FACTOR,
        tol: float = DEFAULT_TOL,
        meter: SpaceMeter | None = None,
    ) -> None:
        failures = []
        if rows < 1 or columns < 1:
            failures.append(f"matrix shape must be positive, got {rows}x{columns}")
        if rank_bound < 1:
            failures.append(f"rank bound k must be positive, got {rank_bound}")
        if row_factor < 1:
            failures.append(f"row factor must be positive, got {row_factor}")
        if failures:
            raise InvalidSpecError("; ".join(failures))
        self.rows = rows
        self.columns = columns
        self.rank_bound = rank_bound
        self.tol = tol
        self.sketch_rows = sketch_rows(rows, rank_bound, row_factor)
        spec = HashFamilySpec.for_sizes(rows, 2, rank_bound + max(1, log2_ceil(rows)))
        self.signs: HashBank = sample_hash_bank(spec, self.sketch_rows, entropy.child("basis-signs"))
        self.sketch = np.zeros((self.sketch_rows, columns), dtype=np.int64)
        self.meter = meter or SpaceMeter()
        self.meter.charge(self.sketch.size + self.signs.words)
        logger.debug("basis sketch: %d rows for n=%d, k=%d", self.sketch_rows, rows, rank_bound)

    def update(self, update: TurnstileUpdate | tuple[int, int, int]) -> BasisRecoverySketch:
        return self.update_many([update])

    def update_many(self, updates: Iterable[TurnstileUpdate | tuple[int, int, int]]) -> BasisRecoverySketch:
        triples = [
            (u.coordinate, u.column, u.delta) if isinstance(u, TurnstileUpdate) else tuple(u) for u in updates
        ]
        triples = [t for t in triples if t[2] != 0]
        if not triples:
            return self
        batch = np.asarray(triples, dtype=np.int64)
        row_ids, col_ids, deltas = batch[:, 0], batch[:, 1], batch[:, 2]
        if row_ids.min() < 1 or row_ids.max() > self.rows:
            raise DomainError(f"rows must lie in [1, {self.rows}]")
        if col_ids.min() < 1 or col_ids.max() > self.columns:
            raise DomainError(f"columns must lie in [1, {self.columns}]")
        contributions = self.signs.signs(row_ids - 1) * deltas[None, :]
        np.add.at(self.sketch.T, col_ids - 1, contributions.T)
        return self

    def sign_matrix(self, scaled: bool = True) -> np.ndarray:
        """S as a dense (sketch_rows × n) matrix, scaled by 1/sqrt(rows) unless asked otherwise."""
        dense = self.signs.signs(np.arange(self.rows)).astype(np.float64)
        return dense / np.sqrt(self.sketch_rows) if scaled else dense

    def finalize(self) -> np.ndarray:
        basis = qr_orthonormal_basis(self.sketch.astype(np.float64), self.tol)
        if basis.shape[0] > self.rank_bound:
            raise PromiseViolationError(
                f"sketch has rank {basis.shape[0]}, above the promised bound {self.rank_bound}"
            )
        if basis.shape[0] == 0:
            return basis
        return canonical_subspace_basis(projection_from_basis(basis, self.tol), self.tol)
