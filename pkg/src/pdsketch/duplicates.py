"""Find-Duplicate: the concentrated zero-error sampler and the multi-pass search."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from math import ceil
from typing import Iterable, Sequence

from .errors import DomainError, InvalidSpecError, ModelViolationError
from .randomness import EntropySource
from .samplers import log2_ceil
from .streams import SpaceMeter, StreamModel, StreamSource

logger = logging.getLogger(__name__)

DEFAULT_SPACE_PARAM = 4


@dataclass
class DuplicateSampler:
    """Remembers the element at one position and watches for a later repeat."""

    target_position: int
    remembered: int | None = None
    seen_again: bool = False

    def observe(self, position: int, element: int) -> None:
        if position == self.target_position:
            self.remembered = element
        elif position > self.target_position and element == self.remembered:
            self.seen_again = True

    def output(self) -> int | None:
        return self.remembered if self.seen_again else None


def find_duplicate_length(universe_size: int) -> int:
    if universe_size < 2 or universe_size % 2:
        raise InvalidSpecError(f"Find-Duplicate needs an even n >= 2, got {universe_size}")
    return 3 * universe_size // 2


class ConcentratedDuplicateSketch:
    """s·ceil(log2 n) independent samplers; the answer is the smallest repeat found.

    Samplers are indexed by target position and by remembered element so one
    update touches only the samplers it can affect.
    """

    def __init__(
        self,
        universe_size: int,
        targets: Sequence[int],
        *,
        meter: SpaceMeter | None = None,
    ) -> None:
        self.universe_size = universe_size
        self.length = find_duplicate_length(universe_size)
        if not targets:
            raise InvalidSpecError("at least one sampler copy is required")
        bad = [t for t in targets if not 1 <= t <= self.length]
        if bad:
            raise InvalidSpecError(f"target positions {bad} outside [1, {self.length}]")
        self.samplers = [DuplicateSampler(t) for t in targets]
        self._by_target: dict[int, list[DuplicateSampler]] = defaultdict(list)
        for sampler in self.samplers:
            self._by_target[sampler.target_position].append(sampler)
        self._waiting: dict[int, list[DuplicateSampler]] = defaultdict(list)
        self.position = 0
        self.meter = meter or SpaceMeter()
        self.meter.charge(2 * len(self.samplers) + 1)

    @classmethod
    def sample(
        cls,
        universe_size: int,
        entropy: EntropySource,
        *,
        space_param: int = DEFAULT_SPACE_PARAM,
        copies: int | None = None,
        meter: SpaceMeter | None = None,
    ) -> ConcentratedDuplicateSketch:
        length = find_duplicate_length(universe_size)
        count = copies or max(1, space_param * log2_ceil(universe_size))
        source = entropy.child("dup-targets")
        targets = [1 + source.below(length) for _ in range(count)]
        return cls(universe_size, targets, meter=meter)

    @classmethod
    def with_targets(
        cls, universe_size: int, targets: Sequence[int], meter: SpaceMeter | None = None
    ) -> ConcentratedDuplicateSketch:
        return cls(universe_size, targets, meter=meter)

    @property
    def copies(self) -> int:
        return len(self.samplers)

    def update(self, position: int, element: int) -> ConcentratedDuplicateSketch:
        if position > self.length:
            raise ModelViolationError(f"position {position} beyond the stream length 3n/2 = {self.length}")
        if position != self.position + 1:
            raise ModelViolationError(f"expected position {self.position + 1}, got {position}")
        if not 1 <= element <= self.universe_size:
            raise DomainError(f"element {element} outside [1, {self.universe_size}]")
        self.position = position

        for sampler in self._waiting.pop(element, ()):
            sampler.seen_again = True
        for sampler in self._by_target.get(position, ()):
            sampler.remembered = element
            self._waiting[element].append(sampler)
        return self

    def feed(self, elements: Iterable[int]) -> ConcentratedDuplicateSketch:
        for element in elements:
            self.update(self.position + 1, int(element))
        return self

    def output(self) -> int | None:
        found = [s.remembered for s in self.samplers if s.seen_again]
        return min(found) if found else None


def duplicate_concentration_bound(universe_size: int, space_param: int) -> tuple[float, int]:
    """(probability the answer falls among the first values, how many values that is).

    A single copy lands at or below the smallest value a whose pair mass reaches
    n/(2s) with probability at least 3/(4s); s·log2 n copies miss it with
    probability (1 - 3/(4s))^(s log2 n).
    """
    copies = max(1, space_param * log2_ceil(universe_size))
    hit = 1.0 - (1.0 - 3.0 / (4.0 * space_param)) ** copies
    return hit, max(1, ceil(universe_size / (2 * space_param)))


def duplicate_modal_lower_bound(universe_size: int, space_param: int) -> float:
    """Pigeonhole floor on the modal output mass: the hit probability spread over the low values."""
    hit, support = duplicate_concentration_bound(universe_size, space_param)
    return hit / support


def multipass_find_duplicate(source: StreamSource, passes: int, meter: SpaceMeter | None = None) -> int:
    """Deterministic p-pass search with ceil(n^(1/p)) counters per pass.

    Each pass splits the live interval into subintervals, counts stream
    elements falling in each, and keeps the lowest one whose count exceeds its
    width. The live interval always holds more elements than values.
    """
    if source.header.model is not StreamModel.ELEMENT:
        raise InvalidSpecError("multi-pass Find-Duplicate reads element streams")
    if passes < 1:
        raise InvalidSpecError(f"passes must be positive, got {passes}")
    n = source.header.n
    if source.header.m <= n:
        raise InvalidSpecError(f"a stream of {source.header.m} elements over [{n}] need not repeat")

    branching = 1
    while branching**passes < n:
        branching += 1
    meter = meter or SpaceMeter.for_header(source.header)

    lo, hi = 1, n
    meter.charge(2)
    for pass_index in range(passes):
        if lo == hi:
            break
        width = ceil((hi - lo + 1) / branching)
        buckets = ceil((hi - lo + 1) / width)
        counts = [0] * buckets
        meter.charge(buckets)
        for element in source.replay():
            if lo <= element <= hi:
                counts[(element - lo) // width] += 1
        for b, count in enumerate(counts):
            start = lo + b * width
            stop = min(hi, start + width - 1)
            if count > stop - start + 1:
                lo, hi = start, stop
                break
        else:
            raise ModelViolationError("no subinterval exceeds its width; the stream has no duplicate")
        meter.charge(-buckets)
        logger.debug("pass %d narrowed the search to [%d, %d]", pass_index + 1, lo, hi)

    if lo != hi:
        raise ModelViolationError(f"{passes} passes left the interval [{lo}, {hi}] unresolved")
    return lo
