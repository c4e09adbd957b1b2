"""Test Misra–Gries, the hashed point query and the inner-product sketch."""
import itertools
from collections import Counter

import pytest

from src.pdsketch.errors import DomainError, HashCollisionError, InvalidSpecError, ModelViolationError
from src.pdsketch.frequency import (
    InnerProductSketch,
    MisraGriesSummary,
    PointQuerySketch,
    Side,
    capacity_for,
)
from src.pdsketch.oracles import exact_frequencies, exact_inner_product
from src.pdsketch.randomness import EntropySource, HashFamilySpec, HashFunction
from src.pdsketch.streams import SpaceMeter, generate


def seeded(i: int, tag: str = "t") -> EntropySource:
    return EntropySource.from_hex("f00d").child(tag, i)


def summarize(stream, capacity: int) -> MisraGriesSummary:
    summary = MisraGriesSummary(capacity)
    for key in stream:
        summary.update(key)
    return summary


def test_capacity():
    """Test ceil(1/ε) on exact and decimal inputs."""
    assert capacity_for(0.1) == 10
    assert capacity_for(1 / 3) == 3
    assert capacity_for(0.5) == 2
    with pytest.raises(InvalidSpecError):
        capacity_for(0)


def test_empty_summary_answers_zero():
    """Test that an empty summary answers 0."""
    assert MisraGriesSummary(3).count(7) == 0
    sketch = PointQuerySketch(10, 5, 0.5, seeded(0))
    assert sketch.query(4) == 0


def test_single_key_is_exact():
    """Test that [5, 5, 5, 5] at ε = 1/2 answers 4."""
    sketch = PointQuerySketch(10, 4, 0.5, seeded(1))
    for element in [5, 5, 5, 5]:
        sketch.update(element)
    assert sketch.query(5) == 4


def test_no_evictions_is_exact():
    """Test that [1, 1, 2, 3] at ε = 1/3 answers 2 for element 1."""
    sketch = PointQuerySketch(10, 4, 1 / 3, seeded(2))
    for element in [1, 1, 2, 3]:
        sketch.update(element)
    assert sketch.query(1) == 2
    assert sketch.answer_vector([1, 2, 3, 4]) == (2, 1, 1, 0)


def test_misra_gries_guarantee_exhaustive():
    """Test stored ≤ true and true − stored ≤ εm on every stream over [3] up to m = 6."""
    for m in range(1, 7):
        for stream in itertools.product(range(1, 4), repeat=m):
            summary = summarize(stream, 2)
            truth = Counter(stream)
            assert len(summary.entries) <= 2
            for key in range(1, 4):
                assert 0 <= truth[key] - summary.count(key) <= m / 2


def test_permutation_invariance_exhaustive():
    """Test that relabeling keys commutes with every answer, over all streams on [4] up to m = 6."""
    perms = list(itertools.permutations(range(1, 5)))
    for m in range(1, 7):
        for stream in itertools.product(range(1, 5), repeat=m):
            base = summarize(stream, 2)
            for perm in perms:
                relabel = dict(zip(range(1, 5), perm))
                moved = summarize([relabel[s] for s in stream], 2)
                assert all(moved.count(relabel[s]) == base.count(s) for s in range(1, 5))


def test_weighted_updates():
    """Test that a heavy arrival survives the batch decrement with its remainder."""
    summary = MisraGriesSummary(2)
    summary.update(1, 3).update(2, 1).update(3, 5)
    assert summary.items() == [(1, 2), (3, 4)]
    with pytest.raises(ModelViolationError):
        summary.update(1, 0)


def test_tag_collisions_are_tracked_while_resident(caplog):
    """Test that an evicted key takes a fresh tag and a later clash is still caught."""
    summary = MisraGriesSummary(1, track_tags=True)
    summary.update(5, tag=1).update(7, tag=2)
    assert summary.items() == []
    assert summary.tags == {}

    summary.update(5, tag=3)
    assert summary.collision is None
    assert summary.tags == {5: 3}

    with caplog.at_level("DEBUG", logger="src.pdsketch.frequency"):
        summary.update(5, tag=1).update(5, tag=4)
    assert summary.collision == (5, 3, 1)
    assert summary.count(5) == 3
    assert "hashed id 5 carries tags 3 and 1" in caplog.text


def test_point_query_matches_raw_misra_gries():
    """Test that an injective hash gives exactly the raw Misra–Gries answers."""
    stream = [3, 1, 4, 1, 5, 9, 2, 6]
    spec = HashFamilySpec.for_sizes(10, len(stream) ** 3, 2)
    sketch = PointQuerySketch(10, len(stream), 1 / 3, seeded(3), hash_function=HashFunction(spec, (3, 7)))
    for element in stream:
        sketch.update(element)
    raw = summarize(stream, 3)
    assert sketch.answer_vector(range(1, 11)) == tuple(raw.count(i) for i in range(1, 11))


def test_point_query_space():
    """Test that peak space is at most 2·ceil(1/ε) words plus the hash."""
    meter = SpaceMeter()
    sketch = PointQuerySketch(10**6, 100, 0.1, seeded(4), meter=meter)
    for element in generate("zipf-element-stream", 10**6, 100, seed=1).records:
        sketch.update(element)
    assert meter.peak_words <= 2 * 10 + 3


def test_point_query_domain_and_length():
    """Test range and declared-length checks."""
    sketch = PointQuerySketch(10, 1, 0.5, seeded(5))
    with pytest.raises(DomainError):
        sketch.update(11)
    sketch.update(1)
    with pytest.raises(ModelViolationError):
        sketch.update(1)


def test_point_query_pseudo_determinism():
    """Test that 200 seeds agree on the answer vector and every answer is within εm."""
    source = generate("zipf-element-stream", 10**6, 100, seed=1)
    truth = exact_frequencies(source)
    support = sorted(truth)
    vectors: Counter[tuple[int, ...]] = Counter()
    out_of_bound = 0
    for i in range(200):
        sketch = PointQuerySketch(10**6, 100, 0.1, seeded(i, "pq"))
        for element in source.records:
            sketch.update(element)
        answers = sketch.answer_vector(support)
        out_of_bound += any(abs(a - truth[s]) > 10 for a, s in zip(answers, support))
        vectors[answers] += 1
    # Only a collision inside [m³] can move an answer.
    assert out_of_bound <= 2
    assert vectors.most_common(1)[0][1] >= 197


def test_inner_product_zero():
    """Test that empty x and y estimate 0."""
    assert InnerProductSketch(100, 4, 0.25, seeded(6)).estimate() == 0


def test_inner_product_single_key():
    """Test that x = y = 4·e_7 gives exactly 16."""
    sketch = InnerProductSketch(100, 2, 0.25, seeded(7))
    sketch.update(Side.X, 7, 4).update("y", 7, 4)
    assert sketch.estimate() == 16


def test_inner_product_sides_are_separate():
    """Test that an x update leaves the y summary untouched."""
    sketch = InnerProductSketch(100, 8, 0.25, seeded(8))
    sketch.update(1, 3, 2)
    assert sketch.summaries[Side.Y].entries == {}
    assert sum(sketch.summaries[Side.X].entries.values()) == 2


def test_inner_product_interleaving():
    """Test that interleaved updates equal separated updates."""
    updates = [(Side.X, 1, 1), (Side.Y, 2, 1), (Side.X, 3, 2), (Side.Y, 1, 3), (Side.X, 1, 1)]
    interleaved = InnerProductSketch(10, 10, 0.5, seeded(9))
    for u in updates:
        interleaved.update(*u)
    separated = InnerProductSketch(10, 10, 0.5, seeded(9))
    for u in sorted(updates, key=lambda u: u[0].value):
        separated.update(*u)
    for side in Side:
        assert interleaved.summaries[side].entries == separated.summaries[side].entries


def test_inner_product_is_insertion_only():
    """Test that a negative delta is a model violation."""
    with pytest.raises(ModelViolationError):
        InnerProductSketch(10, 4, 0.5, seeded(10)).update(Side.X, 1, -1)


def test_inner_product_reports_collisions():
    """Test that two elements under one hashed id with distinct tags raise."""
    sketch = InnerProductSketch(10, 8, 0.5, seeded(11))
    spec = sketch.hash.spec
    sketch.hash = HashFunction(spec, (0, 0))
    sketch.tag_hash = HashFunction(spec, (0, 1))
    sketch.update(Side.X, 1, 1).update(Side.X, 2, 1)
    with pytest.raises(HashCollisionError) as excinfo:
        sketch.estimate()
    assert excinfo.value.hashed_id == 0
    assert excinfo.value.pair == (0, 1)


def test_inner_product_error_bound():
    """Test |estimate − ⟨x, y⟩| ≤ ε‖x‖₁‖y‖₁ on every non-fail seed."""
    for instance in range(5):
        source = generate("random-sparse-pair", 10**4, 40, seed=instance, support=5)
        truth = exact_inner_product(source)
        x_mass = sum(u.delta for u in source.records if u.column == 1)
        y_mass = sum(u.delta for u in source.records if u.column == 2)
        fails = 0
        for i in range(40):
            sketch = InnerProductSketch(10**4, 40, 0.25, seeded(i, f"ip{instance}"))
            for u in source.records:
                sketch.update(u.column, u.coordinate, u.delta)
            try:
                estimate = sketch.estimate()
            except HashCollisionError:
                fails += 1
                continue
            assert abs(estimate - truth) <= 0.25 * x_mass * y_mass
        assert fails <= 2
