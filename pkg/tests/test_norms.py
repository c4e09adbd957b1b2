"""Test ℓ2 truncation and the concentrated ℓ2 estimate."""
from fractions import Fraction

import numpy as np
import pytest

from src.pdsketch.certify import OutputDistribution
from src.pdsketch.errors import DomainError, InvalidSpecError
from src.pdsketch.norms import (
    TruncatedL2Config,
    l2_concentrated_estimate,
    l2_truncation_sketch,
    truncate_l2,
)
from src.pdsketch.oracles import exact_l2_norm
from src.pdsketch.randomness import EntropySource
from src.pdsketch.samplers import AMS_MAX_WIDTH
from src.pdsketch.streams import generate


def sketch_stream(source, cfg: TruncatedL2Config, entropy: EntropySource):
    ams = l2_truncation_sketch(source.header.n, cfg, entropy)
    coords = [u.coordinate for u in source.records]
    deltas = [u.delta for u in source.records]
    return ams.update_many(coords, deltas)


def test_bits_kept():
    """Test b = max(2·ceil(log2(1/ε)), 5)."""
    assert TruncatedL2Config(0.25).bits_kept == 5
    assert TruncatedL2Config(1 / 16).bits_kept == 8
    assert TruncatedL2Config(1e-3).bits_kept == 20
    assert TruncatedL2Config(0.25).relative_error == 2.0**-4


def test_config_rejects_bad_epsilon():
    """Test that ε outside (0, 1] and ε needing too many bits are refused."""
    for bad in (0.0, -0.5, 1.5, 1e-12):
        with pytest.raises(InvalidSpecError):
            TruncatedL2Config(bad)


def test_truncation_examples():
    """Test truncation of 1000 and 1.46484375 to 5 significant bits."""
    cfg = TruncatedL2Config(0.25)
    assert truncate_l2(1000, cfg) == 992.0
    assert truncate_l2(1.46484375, cfg) == 1.4375
    assert truncate_l2(16, cfg) == 16.0


def test_truncation_is_idempotent_and_monotone():
    """Test that truncating twice changes nothing and order is preserved."""
    cfg = TruncatedL2Config(1 / 16)
    values = np.geomspace(1e-3, 1e6, 400)
    cut = [truncate_l2(float(v), cfg) for v in values]
    assert cut == sorted(cut)
    assert all(truncate_l2(c, cfg) == c for c in cut)


def test_truncation_relative_error():
    """Test 0 ≤ (x − trunc(x))/x < 2^(1−b)."""
    cfg = TruncatedL2Config(0.25)
    rng = np.random.default_rng(0)
    for v in rng.uniform(0.01, 1e5, size=500):
        v = float(v)
        cut = truncate_l2(v, cfg)
        assert 0 <= (v - cut) / v < cfg.relative_error


def test_truncation_uses_exact_rationals():
    """Test that a value just below a power of two keeps its lower exponent."""
    cfg = TruncatedL2Config(0.25)
    assert truncate_l2(Fraction(1023, 1024), cfg) == 0.96875
    with pytest.raises(DomainError):
        truncate_l2(0, cfg)


def test_zero_vector_estimates_zero():
    """Test that an empty sketch estimates 0."""
    cfg = TruncatedL2Config(0.25)
    ams = l2_truncation_sketch(64, cfg, EntropySource.from_hex("1"))
    assert l2_concentrated_estimate(ams, cfg) == 0.0


def test_sketch_width_is_capped():
    """Test that the AMS width stops at the cap for small ε."""
    cfg = TruncatedL2Config(0.25)
    ams = l2_truncation_sketch(64, cfg, EntropySource.from_hex("1"))
    assert ams.width == AMS_MAX_WIDTH
    small = l2_truncation_sketch(64, cfg, EntropySource.from_hex("1"), width=32, repetitions=3)
    assert (small.width, small.repetitions) == (32, 3)


def test_concentrated_estimate_takes_at_most_two_values():
    """Test that seeds agree on at most two truncated values, each near ‖x‖₂."""
    source = generate("random-turnstile-vector", 256, 512, seed=3)
    truth = exact_l2_norm(source)
    cfg = TruncatedL2Config(0.25)
    outputs = set()
    raw = set()
    for i in range(20):
        ams = sketch_stream(source, cfg, EntropySource.from_hex("3").child("l2", i))
        raw.add(ams.estimate())
        value = l2_concentrated_estimate(ams, cfg)
        outputs.add(value)
        assert abs(value - truth) <= 0.25 * truth
    assert len(outputs) <= 2
    # The untruncated estimates scatter across seeds.
    assert len(raw) > len(outputs)


def test_concentrated_estimate_over_many_vectors():
    """Test twenty vectors: two values take nearly every seed, each within a factor 1 + ε of ‖x‖₂."""
    cfg = TruncatedL2Config(0.25)
    for vector in range(20):
        source = generate("random-turnstile-vector", 256, 512, seed=100 + vector)
        truth = exact_l2_norm(source)
        outputs = []
        for i in range(50):
            ams = sketch_stream(source, cfg, EntropySource.from_hex("4").child(vector, i))
            value = l2_concentrated_estimate(ams, cfg)
            assert truth / 1.25 <= value <= 1.25 * truth, (vector, value, truth)
            outputs.append(repr(value))
        assert OutputDistribution.from_outputs(outputs).top_mass(2) >= 0.98, vector
