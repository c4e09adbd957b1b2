"""Randomized building blocks: one-sparse recovery, the ℓ0 sampler, AMS and Morris."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, log2
from typing import Iterable

import numpy as np

from .errors import DomainError, InvalidSpecError
from .randomness import (
    EntropySource,
    HashBank,
    HashFamilySpec,
    HashFunction,
    next_prime,
    sample_hash,
    sample_hash_bank,
)
from .streams import SpaceMeter, TurnstileUpdate

logger = logging.getLogger(__name__)

AMS_MAX_WIDTH = 2**14


def log2_ceil(n: int) -> int:
    return (n - 1).bit_length() if n > 1 else 0


@lru_cache(maxsize=None)
def _warn_width_cap(width: int, epsilon: float, max_width: int) -> None:
    logger.warning("AMS width %d for epsilon=%g capped at %d", width, epsilon, max_width)


def ams_repetitions(universe_size: int) -> int:
    return max(1, ceil(3 * log2(max(universe_size, 2))))


@dataclass
class OneSparseRecoverer:
    weight_sum: int = 0
    index_sum: int = 0
    fingerprint: int = 0

    def absorb(self, coordinate: int, delta: int, z: int, prime: int) -> None:
        self.weight_sum += delta
        self.index_sum += coordinate * delta
        self.fingerprint = (self.fingerprint + delta * pow(z, coordinate, prime)) % prime

    def is_empty(self) -> bool:
        return self.weight_sum == 0 and self.index_sum == 0 and self.fingerprint == 0

    def recover(self, z: int, prime: int, universe_size: int) -> int | None:
        """The single live coordinate, if the fingerprint test confirms one."""
        w = self.weight_sum
        if w == 0 or self.index_sum % w:
            return None
        i = self.index_sum // w
        if not 1 <= i <= universe_size:
            return None
        if self.fingerprint != (w % prime) * pow(z, i, prime) % prime:
            return None
        return i


class L0Sampler:
    """Independent copies of a geometric level structure of one-sparse recoverers.

    Level j of a copy admits coordinate i when the copy's subsample hash of i
    is below R / 2^j, R = 2^(levels-1). A query returns the coordinate recovered
    at the lowest level of the first copy that isolates one.
    """

    def __init__(
        self,
        universe_size: int,
        entropy: EntropySource,
        *,
        repetitions: int | None = None,
        independence: int | None = None,
        fingerprint_prime: int | None = None,
        meter: SpaceMeter | None = None,
    ) -> None:
        if universe_size < 1:
            raise InvalidSpecError(f"universe_size must be positive, got {universe_size}")
        self.universe_size = universe_size
        self.levels = log2_ceil(universe_size) + 1
        self.repetitions = repetitions or max(1, ceil(2 * log2(max(universe_size, 2))))
        self.prime = fingerprint_prime or next_prime(max(2**31, universe_size**4))
        if self.prime <= universe_size:
            raise InvalidSpecError(f"fingerprint prime {self.prime} must exceed n = {universe_size}")

        self._range = 1 << (self.levels - 1)
        spec = HashFamilySpec.for_sizes(
            universe_size, self._range, independence or max(2, log2_ceil(universe_size))
        )
        self.subsample: list[HashFunction] = []
        self.points: list[int] = []
        for copy in range(self.repetitions):
            self.subsample.append(sample_hash(spec, entropy.child("subsample", copy)))
            self.points.append(1 + entropy.child("fingerprint", copy).below(self.prime - 1))
        self.recoverers = [
            [OneSparseRecoverer() for _ in range(self.levels)] for _ in range(self.repetitions)
        ]
        self.meter = meter or SpaceMeter()
        self.meter.charge(self.words)

    @property
    def words(self) -> int:
        hash_words = self.repetitions * (self.subsample[0].spec.independence + 1)
        return hash_words + 3 * self.repetitions * self.levels

    def _admitted_levels(self, copy: int, coordinate: int) -> int:
        value = self.subsample[copy].field_value(coordinate - 1) % self._range
        depth = 1
        while depth < self.levels and value < (self._range >> depth):
            depth += 1
        return depth

    def update(self, update: TurnstileUpdate | tuple[int, int]) -> L0Sampler:
        coordinate, delta = (
            (update.coordinate, update.delta) if isinstance(update, TurnstileUpdate) else update
        )
        if not 1 <= coordinate <= self.universe_size:
            raise DomainError(f"coordinate {coordinate} outside [1, {self.universe_size}]")
        if delta == 0:
            return self
        for copy in range(self.repetitions):
            z = self.points[copy]
            for level in range(self._admitted_levels(copy, coordinate)):
                self.recoverers[copy][level].absorb(coordinate, delta, z, self.prime)
        return self

    def query(self) -> int | None:
        for copy in range(self.repetitions):
            z = self.points[copy]
            for recoverer in self.recoverers[copy]:
                found = recoverer.recover(z, self.prime, self.universe_size)
                if found is not None:
                    return found
        return None


class AmsSketch:
    """Bucketed AMS second-moment sketch.

    Repetition r hashes coordinates into `width` buckets with a pairwise hash
    and signs them with a 4-wise hash. Its estimate of ‖x‖² is the sum of its
    squared counters; the sketch reports the median over repetitions.
    """

    def __init__(
        self,
        universe_size: int,
        entropy: EntropySource,
        *,
        width: int,
        repetitions: int,
        meter: SpaceMeter | None = None,
    ) -> None:
        failures = []
        if width < 1:
            failures.append(f"width must be positive, got {width}")
        if repetitions < 1:
            failures.append(f"repetitions must be positive, got {repetitions}")
        if failures:
            raise InvalidSpecError("; ".join(failures))
        self.universe_size = universe_size
        self.width = width
        self.repetitions = repetitions
        self.buckets: HashBank = sample_hash_bank(
            HashFamilySpec.for_sizes(universe_size, width, 2), repetitions, entropy.child("buckets")
        )
        self.sign_hashes: HashBank = sample_hash_bank(
            HashFamilySpec.for_sizes(universe_size, 2, 4), repetitions, entropy.child("signs")
        )
        self.counters = np.zeros((repetitions, width), dtype=np.int64)
        self.meter = meter or SpaceMeter()
        self.meter.charge(repetitions * width + self.buckets.words + self.sign_hashes.words)

    @classmethod
    def for_accuracy(
        cls,
        universe_size: int,
        epsilon: float,
        entropy: EntropySource,
        *,
        repetitions: int | None = None,
        max_width: int = AMS_MAX_WIDTH,
        meter: SpaceMeter | None = None,
    ) -> AmsSketch:
        """Width ceil(6/ε²) (capped), ceil(3·log2 n) repetitions by default."""
        if not 0 < epsilon <= 1:
            raise InvalidSpecError(f"epsilon must lie in (0, 1], got {epsilon}")
        width = ceil(6 / epsilon**2)
        if width > max_width:
            _warn_width_cap(width, epsilon, max_width)
            width = max_width
        reps = repetitions or ams_repetitions(universe_size)
        return cls(universe_size, entropy, width=width, repetitions=reps, meter=meter)

    def update(self, update: TurnstileUpdate | tuple[int, int]) -> AmsSketch:
        coordinate, delta = (
            (update.coordinate, update.delta) if isinstance(update, TurnstileUpdate) else update
        )
        return self.update_many([coordinate], [delta])

    def update_many(self, coordinates: Iterable[int], deltas: Iterable[int]) -> AmsSketch:
        coords = np.asarray(list(coordinates), dtype=np.int64)
        values = np.asarray(list(deltas), dtype=np.int64)
        if coords.size == 0:
            return self
        if coords.min() < 1 or coords.max() > self.universe_size:
            raise DomainError(f"coordinates must lie in [1, {self.universe_size}]")
        buckets = self.buckets.evaluate(coords - 1)
        signed = self.sign_hashes.signs(coords - 1) * values[None, :]
        rows = np.repeat(np.arange(self.repetitions), coords.size)
        np.add.at(self.counters, (rows, buckets.reshape(-1).astype(np.int64)), signed.reshape(-1))
        return self

    def repetition_estimates(self) -> np.ndarray:
        squares = self.counters.astype(np.float64) ** 2
        return squares.sum(axis=1)

    def estimate(self) -> float:
        """Median estimate of ‖x‖²."""
        return float(np.median(self.repetition_estimates()))

    def l2_estimate(self) -> float:
        return float(np.sqrt(self.estimate()))


@dataclass
class MorrisCounter:
    exponent: int = 0
    meter: SpaceMeter = field(default_factory=SpaceMeter, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.meter.charge(1)

    def update(self, entropy: EntropySource) -> MorrisCounter:
        # X fresh bits are all zero with probability exactly 2^-X.
        if entropy.bits(self.exponent) == 0:
            self.exponent += 1
        return self

    def estimate(self) -> float:
        return float(2**self.exponent - 1)
