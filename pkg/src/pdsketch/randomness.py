"""Hash families, sign hashes, the entropy source and a space-bounded PRG.

Every random choice a sketch makes flows from an `EntropySource`. Sources are
derived from a hex master seed by a counter-mode SHA-256 split; each consumer
asks for a child under its own tag so that adding a consumer never shifts the
bits another one sees.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from functools import cached_property
from math import ceil, log2
from typing import Iterable, Iterator

import numpy as np
from scipy import stats

from .errors import DomainError, InvalidSpecError, raise_if_failures

# Horner steps stay below 2**62 while p < 2**31, so int64 arithmetic is exact.
_INT64_SAFE_PRIME = 2**31
_MILLER_RABIN_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
FAMILY_ENUMERATION_CAP = 10**6


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MILLER_RABIN_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MILLER_RABIN_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    candidate = max(n, 2)
    while not is_prime(candidate):
        candidate += 1
    return candidate


def bits_for(bound: int) -> int:
    """Number of bits needed to write every value in [0, bound)."""
    return max(1, (bound - 1).bit_length())


class EntropySource:
    """Counter-mode SHA-256 bit source.

    Block c is sha256(key || c as 8 little-endian bytes). Bits are consumed
    little-endian from a buffer; `child` derives an independent source whose
    key depends only on this key and the tags, never on how many bits were
    already consumed.
    """

    def __init__(self, key: bytes, label: str = "") -> None:
        self._key = key
        self._label = label
        self._counter = 0
        self._buffer = 0
        self._buffered = 0
        self.bits_drawn = 0

    @classmethod
    def from_hex(cls, seed_hex: str) -> EntropySource:
        text = seed_hex.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if not text or any(ch not in "0123456789abcdef" for ch in text):
            raise InvalidSpecError(f"seed must be a lowercase hex string, got {seed_hex!r}")
        if len(text) % 2:
            text = "0" + text
        return cls(hashlib.sha256(b"pd-sketch/" + bytes.fromhex(text)).digest(), label=text)

    @property
    def label(self) -> str:
        return self._label

    def child(self, *tags: object) -> EntropySource:
        path = "/".join(str(t) for t in tags)
        key = hashlib.sha256(self._key + b"/" + path.encode("utf-8")).digest()
        return EntropySource(key, label=f"{self._label}/{path}" if self._label else path)

    def _next_block(self) -> int:
        digest = hashlib.sha256(self._key + self._counter.to_bytes(8, "little")).digest()
        self._counter += 1
        return int.from_bytes(digest, "little")

    def bits(self, k: int) -> int:
        if k < 0:
            raise DomainError(f"cannot draw {k} bits")
        while self._buffered < k:
            self._buffer |= self._next_block() << self._buffered
            self._buffered += 256
        out = self._buffer & ((1 << k) - 1)
        self._buffer >>= k
        self._buffered -= k
        self.bits_drawn += k
        return out

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection sampling."""
        if bound < 1:
            raise DomainError(f"bound must be positive, got {bound}")
        if bound == 1:
            return 0
        width = (bound - 1).bit_length()
        while True:
            value = self.bits(width)
            if value < bound:
                return value

    def random(self) -> float:
        return self.bits(53) / float(1 << 53)

    def numpy_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.bits(128))


@dataclass(frozen=True)
class HashFamilySpec:
    universe_size: int
    range_size: int
    independence: int
    prime: int

    def __post_init__(self) -> None:
        failures: list[str] = []
        if self.universe_size < 1:
            failures.append(f"universe_size must be positive, got {self.universe_size}")
        if self.range_size < 1:
            failures.append(f"range_size must be positive, got {self.range_size}")
        if self.independence < 1:
            failures.append(f"independence must be at least 1, got {self.independence}")
        if not is_prime(self.prime):
            failures.append(f"modulus {self.prime} is not prime")
        elif self.prime < max(self.universe_size, self.range_size):
            failures.append(
                f"prime {self.prime} is below max(n, d) = {max(self.universe_size, self.range_size)}"
            )
        raise_if_failures(failures, InvalidSpecError, "Invalid hash family")

    @classmethod
    def for_sizes(cls, universe_size: int, range_size: int, independence: int) -> HashFamilySpec:
        return cls(
            universe_size=universe_size,
            range_size=range_size,
            independence=independence,
            prime=next_prime(max(universe_size, range_size, 2)),
        )

    @property
    def coefficient_bits(self) -> int:
        return ceil(log2(self.prime))

    @property
    def seed_bits(self) -> int:
        return self.independence * self.coefficient_bits


def _as_field_array(xs: Iterable[int] | np.ndarray, prime: int) -> np.ndarray:
    dtype = np.int64 if prime < _INT64_SAFE_PRIME else object
    return np.asarray(xs, dtype=dtype).reshape(-1)


def _check_inputs(values: np.ndarray, universe_size: int) -> None:
    if values.size and (values.min() < 0 or values.max() >= universe_size):
        bad = values[(values < 0) | (values >= universe_size)][0]
        raise DomainError(f"hash input {bad} outside [0, {universe_size})")


def _horner(coefficients: np.ndarray, xs: np.ndarray, prime: int) -> np.ndarray:
    """Field values of each coefficient row at each x, shape (rows, len(xs))."""
    acc = np.zeros((coefficients.shape[0], xs.shape[0]), dtype=xs.dtype)
    for k in range(coefficients.shape[1] - 1, -1, -1):
        acc = (acc * xs[None, :] + coefficients[:, k : k + 1]) % prime
    return acc


@dataclass(frozen=True)
class HashFunction:
    spec: HashFamilySpec
    coefficients: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.coefficients) != self.spec.independence:
            raise InvalidSpecError(
                f"expected {self.spec.independence} coefficients, got {len(self.coefficients)}"
            )
        if any(not 0 <= c < self.spec.prime for c in self.coefficients):
            raise InvalidSpecError(f"coefficients must lie in [0, {self.spec.prime})")

    @property
    def seed_bits(self) -> int:
        return self.spec.seed_bits

    def field_value(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coefficients):
            acc = (acc * x + c) % self.spec.prime
        return acc

    def __call__(self, x: int) -> int:
        return eval_hash(self, x)

    def evaluate_many(self, xs: Iterable[int] | np.ndarray) -> np.ndarray:
        values = _as_field_array(xs, self.spec.prime)
        _check_inputs(values, self.spec.universe_size)
        coefficients = np.asarray([self.coefficients], dtype=values.dtype)
        return _horner(coefficients, values, self.spec.prime)[0] % self.spec.range_size


def sample_hash(spec: HashFamilySpec, entropy: EntropySource) -> HashFunction:
    coefficients = tuple(entropy.below(spec.prime) for _ in range(spec.independence))
    return HashFunction(spec, coefficients)


def eval_hash(h: HashFunction, x: int) -> int:
    if not 0 <= x < h.spec.universe_size:
        raise DomainError(f"hash input {x} outside [0, {h.spec.universe_size})")
    return h.field_value(x) % h.spec.range_size


def enumerate_family(spec: HashFamilySpec) -> Iterator[HashFunction]:
    """Every function of a small family, in lexicographic coefficient order."""
    if spec.prime**spec.independence > FAMILY_ENUMERATION_CAP:
        raise InvalidSpecError(
            f"family of size {spec.prime}^{spec.independence} exceeds the enumeration cap"
        )
    for coefficients in itertools.product(range(spec.prime), repeat=spec.independence):
        yield HashFunction(spec, coefficients)


@dataclass(frozen=True)
class SignHash:
    base: HashFunction

    def __call__(self, x: int) -> int:
        return 1 if eval_hash(self.base, x) == 0 else -1

    def evaluate_many(self, xs: Iterable[int] | np.ndarray) -> np.ndarray:
        return np.where(self.base.evaluate_many(xs) == 0, 1, -1).astype(np.int64)


def sample_sign_hash(universe_size: int, independence: int, entropy: EntropySource) -> SignHash:
    if independence < 2:
        raise InvalidSpecError(f"sign hashes need independence >= 2, got {independence}")
    spec = HashFamilySpec.for_sizes(universe_size, 2, independence)
    return SignHash(sample_hash(spec, entropy))


@dataclass(frozen=True, eq=False)
class HashBank:
    """`count` functions of one family evaluated together."""

    spec: HashFamilySpec
    coefficients: np.ndarray

    @property
    def count(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def words(self) -> int:
        return self.count * self.spec.independence

    def member(self, index: int) -> HashFunction:
        return HashFunction(self.spec, tuple(int(c) for c in self.coefficients[index]))

    def evaluate(self, xs: Iterable[int] | np.ndarray) -> np.ndarray:
        values = _as_field_array(xs, self.spec.prime)
        _check_inputs(values, self.spec.universe_size)
        coefficients = self.coefficients.astype(values.dtype)
        return _horner(coefficients, values, self.spec.prime) % self.spec.range_size

    def signs(self, xs: Iterable[int] | np.ndarray) -> np.ndarray:
        return np.where(self.evaluate(xs) == 0, 1, -1).astype(np.int64)


def sample_hash_bank(spec: HashFamilySpec, count: int, entropy: EntropySource) -> HashBank:
    rows = [sample_hash(spec, entropy).coefficients for _ in range(count)]
    dtype = np.int64 if spec.prime < _INT64_SAFE_PRIME else object
    coefficients = np.asarray(rows, dtype=dtype).reshape(count, spec.independence)
    coefficients.setflags(write=False)
    return HashBank(spec, coefficients)


@dataclass(frozen=True)
class PrgSpec:
    """Nisan generator shape: s-bit blocks stretched to r output bits.

    Each recursion level doubles the number of blocks and costs one pairwise
    hash description of 3s - 1 bits (a Hankel matrix plus an offset).
    """

    space_param: int
    output_length: int

    def __post_init__(self) -> None:
        failures: list[str] = []
        if self.space_param < 1:
            failures.append(f"space_param must be positive, got {self.space_param}")
        if self.output_length < 1:
            failures.append(f"output_length must be positive, got {self.output_length}")
        raise_if_failures(failures, InvalidSpecError, "Invalid PRG spec")

    @property
    def blocks(self) -> int:
        return ceil(self.output_length / self.space_param)

    @property
    def levels(self) -> int:
        return (self.blocks - 1).bit_length()

    @property
    def hash_bits(self) -> int:
        return 3 * self.space_param - 1

    @property
    def seed_length(self) -> int:
        return self.space_param + self.levels * self.hash_bits


@dataclass(frozen=True)
class _LevelHash:
    rows: tuple[int, ...]
    offset: int

    def apply(self, x: int) -> int:
        out = self.offset
        for i, row in enumerate(self.rows):
            if (row & x).bit_count() & 1:
                out ^= 1 << i
        return out


@dataclass(frozen=True)
class PrgSeed:
    spec: PrgSpec
    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits < (1 << self.spec.seed_length):
            raise InvalidSpecError(f"seed does not fit in {self.spec.seed_length} bits")

    @property
    def base(self) -> int:
        return self.bits & ((1 << self.spec.space_param) - 1)

    @cached_property
    def level_hashes(self) -> tuple[_LevelHash, ...]:
        s = self.spec.space_param
        mask = (1 << s) - 1
        hashes = []
        for level in range(self.spec.levels):
            description = self.bits >> (s + level * self.spec.hash_bits)
            diagonals = description & ((1 << (2 * s - 1)) - 1)
            offset = (description >> (2 * s - 1)) & mask
            rows = tuple((diagonals >> i) & mask for i in range(s))
            hashes.append(_LevelHash(rows, offset))
        return tuple(hashes)

    @property
    def hex(self) -> str:
        return format(self.bits, "x")


def sample_prg_seed(spec: PrgSpec, entropy: EntropySource) -> PrgSeed:
    return PrgSeed(spec, entropy.bits(spec.seed_length))


def prg_block(seed: PrgSeed, block: int) -> int:
    if not 0 <= block < seed.spec.blocks:
        raise DomainError(f"block {block} outside [0, {seed.spec.blocks})")
    x = seed.base
    for level in range(seed.spec.levels, 0, -1):
        if (block >> (level - 1)) & 1:
            x = seed.level_hashes[level - 1].apply(x)
    return x


def prg_bit(seed: PrgSeed, index: int) -> int:
    if not 0 <= index < seed.spec.output_length:
        raise DomainError(f"PRG index {index} outside [0, {seed.spec.output_length})")
    block, offset = divmod(index, seed.spec.space_param)
    return (prg_block(seed, block) >> offset) & 1


def prg_int(seed: PrgSeed, position: int, width: int) -> int:
    """Bits [position*width, (position+1)*width) read as a little-endian integer."""
    start = position * width
    if position < 0 or width < 1 or start + width > seed.spec.output_length:
        raise DomainError(
            f"bit group {position} of width {width} exceeds output length {seed.spec.output_length}"
        )
    s = seed.spec.space_param
    value = 0
    taken = 0
    while taken < width:
        block, offset = divmod(start + taken, s)
        chunk = min(s - offset, width - taken)
        value |= ((prg_block(seed, block) >> offset) & ((1 << chunk) - 1)) << taken
        taken += chunk
    return value


def prg_blocks(seed: PrgSeed) -> list[int]:
    """Every s-bit block in output order, built level by level."""
    blocks = [seed.base]
    for level in range(seed.spec.levels, 0, -1):
        h = seed.level_hashes[level - 1]
        blocks = [y for x in blocks for y in (x, h.apply(x))]
    return blocks


def prg_ones(seed: PrgSeed) -> int:
    """Number of ones among the r output bits."""
    blocks = prg_blocks(seed)
    full, tail = divmod(seed.spec.output_length, seed.spec.space_param)
    ones = sum(b.bit_count() for b in blocks[:full])
    if tail:
        ones += (blocks[full] & ((1 << tail) - 1)).bit_count()
    return ones


def prg_expand(seed: PrgSeed) -> np.ndarray:
    """All r output bits, matching `prg_bit` index for index."""
    blocks = prg_blocks(seed)
    s = seed.spec.space_param
    bits = np.zeros(len(blocks) * s, dtype=np.uint8)
    for b, value in enumerate(blocks):
        for k in range(s):
            bits[b * s + k] = (value >> k) & 1
    return bits[: seed.spec.output_length]


def counting_automaton_state(bits: Iterable[int], space_param: int) -> int:
    """Final state of the 2^s-state automaton counting ones modulo 2^s."""
    return int(sum(int(b) for b in bits)) % (1 << space_param)


def counting_automaton_distribution(output_length: int, space_param: int) -> np.ndarray:
    """Exact final-state distribution of the counting automaton on uniform bits."""
    ones = np.arange(output_length + 1)
    pmf = stats.binom.pmf(ones, output_length, 0.5)
    return np.bincount(ones % (1 << space_param), weights=pmf, minlength=1 << space_param)


def empirical_tv_noise(exact: np.ndarray, samples: int) -> tuple[float, float]:
    """Mean and standard deviation of the empirical TV distance of `samples` draws from `exact`.

    Each state count is treated as a normal deviation with variance p(1-p)/N,
    whose absolute value has mean sqrt(2/pi)·sd and variance (1 - 2/pi)·sd².
    """
    sd = np.sqrt(exact * (1 - exact) / samples)
    mean = 0.5 * float(np.sqrt(2 / np.pi) * sd.sum())
    spread = 0.5 * float(np.sqrt((1 - 2 / np.pi) * (sd**2).sum()))
    return mean, spread


@dataclass(frozen=True)
class DistinguisherResult:
    space_param: int
    samples: int
    prg_tv: float
    random_tv: float
    noise_mean: float
    noise_sd: float

    @property
    def bound(self) -> float:
        """2^-s plus the sampling floor of the empirical TV and three standard deviations."""
        return 2.0**-self.space_param + self.noise_mean + 3 * self.noise_sd

    @property
    def fooled(self) -> bool:
        return self.prg_tv <= self.bound


def prg_distinguisher_tv(spec: PrgSpec, samples: int, entropy: EntropySource) -> DistinguisherResult:
    """TV distance of PRG-fed and truly random automaton runs from the exact law."""
    exact = counting_automaton_distribution(spec.output_length, spec.space_param)
    states = 1 << spec.space_param
    prg_counts = np.zeros(states)
    random_counts = np.zeros(states)
    seeds = entropy.child("prg-seeds")
    uniform = entropy.child("uniform-bits")
    for _ in range(samples):
        seed = sample_prg_seed(spec, seeds)
        prg_counts[prg_ones(seed) % states] += 1
        ones = uniform.bits(spec.output_length).bit_count()
        random_counts[ones % states] += 1
    noise_mean, noise_sd = empirical_tv_noise(exact, samples)
    return DistinguisherResult(
        space_param=spec.space_param,
        samples=samples,
        prg_tv=float(0.5 * np.abs(prg_counts / samples - exact).sum()),
        random_tv=float(0.5 * np.abs(random_counts / samples - exact).sum()),
        noise_mean=noise_mean,
        noise_sd=noise_sd,
    )
