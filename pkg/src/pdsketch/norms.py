from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, InvalidSpecError
from .randomness import EntropySource
from .samplers import AMS_MAX_WIDTH, AmsSketch, ams_repetitions
from .streams import SpaceMeter

MAX_BITS_KEPT = 53


@dataclass(frozen=True)
class TruncatedL2Config:
    epsilon: float

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 1:
            raise InvalidSpecError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.bits_kept > MAX_BITS_KEPT:
            raise InvalidSpecError(f"epsilon {self.epsilon} needs more than {MAX_BITS_KEPT} bits")

    @property
    def bits_kept(self) -> int:
        inverse = 1 / Fraction(self.epsilon).limit_denominator(10**9)
        log2_ceil = (math.ceil(inverse) - 1).bit_length()
        return max(2 * log2_ceil, 5)

    @property
    def ams_epsilon(self) -> float:
        return min(2.0**-20, self.epsilon**4)

    @property
    def relative_error(self) -> float:
        return 2.0 ** (1 - self.bits_kept)


def _at_least_power_of_two(num: int, den: int, exponent: int) -> bool:
    if exponent >= 0:
        return num >= den << exponent
    return num << -exponent >= den


def truncate_l2(raw_estimate: float | Fraction | int, cfg: TruncatedL2Config) -> float:
    """Keep the leading `bits_kept` significant bits of the binary expansion.

    Works on the exact rational value of the input, so the cut never depends on
    float rounding.
    """
    value = Fraction(raw_estimate)
    if value <= 0:
        raise DomainError(f"truncation needs a positive estimate, got {raw_estimate}")
    num, den = value.numerator, value.denominator
    exponent = num.bit_length() - den.bit_length()
    if not _at_least_power_of_two(num, den, exponent):
        exponent -= 1

    shift = cfg.bits_kept - 1 - exponent
    if shift >= 0:
        kept = Fraction((num << shift) // den, 1 << shift)
    else:
        kept = Fraction((num // (den << -shift)) << -shift)
    return float(kept)


def l2_truncation_sketch(
    universe_size: int,
    cfg: TruncatedL2Config,
    entropy: EntropySource,
    *,
    width: int | None = None,
    repetitions: int | None = None,
    meter: SpaceMeter | None = None,
) -> AmsSketch:
    """AMS sized for the truncation argument (error min(2^-20, ε^4), width capped)."""
    if width is not None:
        reps = repetitions or ams_repetitions(universe_size)
        return AmsSketch(universe_size, entropy, width=width, repetitions=reps, meter=meter)
    return AmsSketch.for_accuracy(
        universe_size, cfg.ams_epsilon, entropy, repetitions=repetitions, max_width=AMS_MAX_WIDTH, meter=meter
    )


def l2_concentrated_estimate(ams: AmsSketch, cfg: TruncatedL2Config) -> float:
    squared = ams.estimate()
    if squared == 0:
        return 0.0
    return truncate_l2(math.sqrt(squared), cfg)
