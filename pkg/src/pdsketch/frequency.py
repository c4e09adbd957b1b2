"""Frequency summaries: Misra–Gries, hashed point queries and inner products."""
from __future__ import annotations

import logging
from enum import Enum
from fractions import Fraction
from math import ceil
from typing import Iterable

import numpy as np

from .errors import DomainError, HashCollisionError, InvalidSpecError, ModelViolationError
from .randomness import EntropySource, HashFamilySpec, HashFunction, eval_hash, sample_hash
from .streams import SpaceMeter

logger = logging.getLogger(__name__)


def capacity_for(epsilon: float) -> int:
    """ceil(1/ε), computed on the rational nearest to ε."""
    if not 0 < epsilon <= 1:
        raise InvalidSpecError(f"epsilon must lie in (0, 1], got {epsilon}")
    return ceil(1 / Fraction(epsilon).limit_denominator(10**9))


class MisraGriesSummary:
    """Deterministic frequent-items summary with at most `capacity` counters.

    An arriving key joins with a provisional counter equal to its weight. When
    the table is full every counter, the provisional one included, drops by the
    smallest of them and zeros are removed. Nothing depends on key order, so
    relabeling keys commutes with every answer.

    With `track_tags` a live key remembers the tag it was stored with, and an
    arrival carrying another tag is recorded as a collision. Tags leave with
    their keys: a key evicted to zero and later stored again takes the new
    tag, so only collisions among resident keys are detected.
    """

    def __init__(self, capacity: int, meter: SpaceMeter | None = None, *, track_tags: bool = False) -> None:
        if capacity < 1:
            raise InvalidSpecError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.entries: dict[int, int] = {}
        self.tags: dict[int, int] = {}
        self.track_tags = track_tags
        self.total = 0
        self.collision: tuple[int, int, int] | None = None
        self.meter = meter or SpaceMeter()
        self._entry_words = 3 if track_tags else 2

    @classmethod
    def for_epsilon(cls, epsilon: float, meter: SpaceMeter | None = None, **kwargs: bool) -> MisraGriesSummary:
        return cls(capacity_for(epsilon), meter, **kwargs)

    def _store(self, key: int, count: int, tag: int | None) -> None:
        self.entries[key] = count
        if self.track_tags and tag is not None:
            self.tags[key] = tag
        self.meter.charge(self._entry_words)

    def _drop(self, key: int) -> None:
        del self.entries[key]
        self.tags.pop(key, None)
        self.meter.charge(-self._entry_words)

    def update(self, key: int, weight: int = 1, tag: int | None = None) -> MisraGriesSummary:
        if weight <= 0:
            raise ModelViolationError(f"Misra-Gries takes positive weights, got {weight}")
        self.total += weight

        if key in self.entries:
            if self.track_tags and tag is not None and self.tags.get(key) != tag and self.collision is None:
                self.collision = (key, self.tags[key], tag)
                logger.debug("hashed id %d carries tags %d and %d", key, self.tags[key], tag)
            self.entries[key] += weight
            return self

        if len(self.entries) < self.capacity:
            self._store(key, weight, tag)
            return self

        decrement = min(min(self.entries.values()), weight)
        for stored in list(self.entries):
            self.entries[stored] -= decrement
            if self.entries[stored] == 0:
                self._drop(stored)
        if weight > decrement:
            self._store(key, weight - decrement, tag)
        return self

    def count(self, key: int) -> int:
        return self.entries.get(key, 0)

    def items(self) -> list[tuple[int, int]]:
        return sorted(self.entries.items())


class PointQuerySketch:
    """Misra–Gries over h(element) with h pairwise independent into [m³]."""

    def __init__(
        self,
        universe_size: int,
        stream_length: int,
        epsilon: float,
        entropy: EntropySource,
        *,
        meter: SpaceMeter | None = None,
        hash_function: HashFunction | None = None,
    ) -> None:
        self.universe_size = universe_size
        self.stream_length = stream_length
        self.meter = meter or SpaceMeter()
        spec = HashFamilySpec.for_sizes(universe_size, max(stream_length, 1) ** 3, 2)
        self.hash = hash_function or sample_hash(spec, entropy.child("hash"))
        self.meter.charge(self.hash.spec.independence + 1)
        self.summary = MisraGriesSummary.for_epsilon(epsilon, self.meter)
        self.m_seen = 0

    def hashed_id(self, element: int) -> int:
        if not 1 <= element <= self.universe_size:
            raise DomainError(f"element {element} outside [1, {self.universe_size}]")
        return eval_hash(self.hash, element - 1)

    def update(self, element: int) -> PointQuerySketch:
        if self.m_seen >= self.stream_length:
            raise ModelViolationError(f"stream exceeds its declared length {self.stream_length}")
        self.summary.update(self.hashed_id(element))
        self.m_seen += 1
        return self

    def query(self, element: int) -> int:
        return self.summary.count(self.hashed_id(element))

    def answer_vector(self, queries: Iterable[int]) -> tuple[int, ...]:
        return tuple(self.query(i) for i in queries)


class Side(str, Enum):
    X = "x"
    Y = "y"

    @classmethod
    def coerce(cls, side: Side | str | int) -> Side:
        if side in (1, "1"):
            return cls.X
        if side in (2, "2"):
            return cls.Y
        return cls(side)


class InnerProductSketch:
    """Two hashed Misra–Gries summaries sharing one hash, for ⟨x, y⟩.

    Every stored key also keeps a tag g(element) from a second hash; an arrival
    whose live key carries another tag is a detected collision and turns the
    estimate into a failure.
    """

    def __init__(
        self,
        universe_size: int,
        stream_length: int,
        epsilon: float,
        entropy: EntropySource,
        *,
        meter: SpaceMeter | None = None,
    ) -> None:
        self.universe_size = universe_size
        self.stream_length = stream_length
        self.epsilon = epsilon
        self.meter = meter or SpaceMeter()
        spec = HashFamilySpec.for_sizes(universe_size, max(stream_length, 1) ** 3, 2)
        self.hash = sample_hash(spec, entropy.child("hash"))
        self.tag_hash = sample_hash(spec, entropy.child("tag-hash"))
        self.meter.charge(2 * spec.independence)
        self.summaries = {
            side: MisraGriesSummary.for_epsilon(epsilon, self.meter, track_tags=True) for side in Side
        }

    @property
    def top_size(self) -> int:
        return capacity_for(self.epsilon)

    def update(self, side: Side | str | int, coordinate: int, delta: int) -> InnerProductSketch:
        if delta <= 0:
            raise ModelViolationError(f"inner-product streams are insertion-only, got delta {delta}")
        if not 1 <= coordinate <= self.universe_size:
            raise DomainError(f"coordinate {coordinate} outside [1, {self.universe_size}]")
        key = eval_hash(self.hash, coordinate - 1)
        tag = eval_hash(self.tag_hash, coordinate - 1)
        self.summaries[Side.coerce(side)].update(key, delta, tag)
        return self

    def top_list(self, side: Side | str, hashed: np.ndarray) -> list[tuple[int, int]]:
        """(hashed id, value) of the largest answers over [n]: value desc, id asc."""
        summary = self.summaries[Side.coerce(side)]
        if not summary.entries:
            return []
        keys = np.fromiter(summary.entries, dtype=np.int64)
        reachable = np.unique(hashed[np.isin(hashed, keys)])
        ranked = sorted(((summary.entries[int(k)], int(k)) for k in reachable), key=lambda vk: (-vk[0], vk[1]))
        return [(key, value) for value, key in ranked[: self.top_size]]

    def estimate(self) -> int:
        for summary in self.summaries.values():
            if summary.collision is not None:
                raise HashCollisionError(*summary.collision)
        hashed = self.hash.evaluate_many(np.arange(self.universe_size))
        x_top = dict(self.top_list(Side.X, hashed))
        y_top = dict(self.top_list(Side.Y, hashed))
        return sum(x_top[key] * y_top[key] for key in x_top.keys() & y_top.keys())
