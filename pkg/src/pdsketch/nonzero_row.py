"""Find-Nonzero-Row over a turnstile matrix stream, randomized and pseudo-deterministic."""
from __future__ import annotations

import logging
from enum import Enum
from math import ceil

from .errors import DomainError, InvalidSpecError, ModelViolationError
from .randomness import EntropySource, PrgSpec, prg_int, sample_prg_seed
from .samplers import L0Sampler, log2_ceil
from .streams import SpaceMeter, TurnstileUpdate

logger = logging.getLogger(__name__)

NONZERO_ROW_PRG_FACTOR = 3


class NonzeroRowMode(str, Enum):
    RANDOMIZED = "randomized"
    PSEUDO_DETERMINISTIC = "pd"


def prg_weight_width(universe_size: int) -> int:
    """Bits per column weight: 3·ceil(log2 n) magnitude bits and one sign bit."""
    return 3 * max(1, log2_ceil(universe_size)) + 1


class NonzeroRowSketch:
    """Maintains y = A·x for a random integer vector x.

    A row of A is nonzero exactly when the matching entry of y is, except with
    probability about 1/n^3 per row. The pseudo-deterministic mode stores x and
    y outright and reports the smallest nonzero index. The randomized mode
    reads x from a Nisan PRG and keeps only an ℓ0 sampler of y.
    """

    def __init__(
        self,
        rows: int,
        columns: int,
        mode: NonzeroRowMode | str,
        entropy: EntropySource,
        *,
        meter: SpaceMeter | None = None,
    ) -> None:
        if rows < 1 or columns < 1:
            raise InvalidSpecError(f"matrix shape must be positive, got {rows}x{columns}")
        self.rows = rows
        self.columns = columns
        self.mode = NonzeroRowMode(mode)
        self.bound = rows**3
        self.meter = meter or SpaceMeter()

        if self.mode is NonzeroRowMode.PSEUDO_DETERMINISTIC:
            source = entropy.child("row-weights")
            self.weights = [source.below(2 * self.bound + 1) - self.bound for _ in range(columns)]
            self.y = [0] * rows
            self.meter.charge(columns + rows)
        else:
            self.width = prg_weight_width(rows)
            self.prg_spec = PrgSpec(
                space_param=NONZERO_ROW_PRG_FACTOR * max(1, log2_ceil(rows)),
                output_length=columns * self.width,
            )
            self.seed = sample_prg_seed(self.prg_spec, entropy.child("prg"))
            self.meter.charge(ceil(self.prg_spec.seed_length / self.meter.word_bits))
            self.sampler = L0Sampler(rows, entropy.child("l0"), meter=self.meter)
            logger.debug(
                "nonzero-row PRG: s=%d, r=%d, seed %d bits",
                self.prg_spec.space_param,
                self.prg_spec.output_length,
                self.prg_spec.seed_length,
            )

    def weight(self, column: int) -> int:
        """x_column, either stored or regenerated from the PRG."""
        if not 1 <= column <= self.columns:
            raise DomainError(f"column {column} outside [1, {self.columns}]")
        if self.mode is NonzeroRowMode.PSEUDO_DETERMINISTIC:
            return self.weights[column - 1]
        raw = prg_int(self.seed, column - 1, self.width)
        magnitude = raw & ((1 << (self.width - 1)) - 1)
        return -magnitude if raw >> (self.width - 1) else magnitude

    def update(self, update: TurnstileUpdate | tuple[int, int, int]) -> NonzeroRowSketch:
        if isinstance(update, TurnstileUpdate):
            row, column, delta = update.coordinate, update.column, update.delta
        else:
            row, column, delta = update
        if column is None:
            raise DomainError("matrix updates need a column")
        if not 1 <= row <= self.rows:
            raise DomainError(f"row {row} outside [1, {self.rows}]")
        if abs(delta) > 2 * self.bound:
            raise ModelViolationError(f"delta {delta} cannot keep entries within ±n^3 = ±{self.bound}")
        if delta == 0:
            return self

        contribution = delta * self.weight(column)
        if self.mode is NonzeroRowMode.PSEUDO_DETERMINISTIC:
            self.y[row - 1] += contribution
        elif contribution:
            self.sampler.update((row, contribution))
        return self

    def query(self) -> int | None:
        if self.mode is NonzeroRowMode.PSEUDO_DETERMINISTIC:
            return next((i for i, value in enumerate(self.y, start=1) if value), None)
        return self.sampler.query()
