"""Test output distributions, the interval rule and every certificate."""
import pytest

from src.pdsketch.certify import (
    NULL_OUTPUTS,
    OutputDistribution,
    Verdict,
    binomial_interval,
    certify_zero_error,
    check_entropy,
    check_k_concentrated,
    check_k_pseudodeterministic,
    check_pseudodeterministic,
    check_zero_error,
    concentration_report,
    empirical_entropy,
)
from src.pdsketch.errors import InvalidSpecError


def uniform(outputs: int, each: int) -> OutputDistribution:
    return OutputDistribution({str(i): each for i in range(outputs)}, outputs * each)


def test_deterministic_algorithm_certifies():
    """Test that a constant output passes pd with zero entropy."""
    dist = OutputDistribution.from_outputs(["7"] * 100)
    result = check_pseudodeterministic(dist)
    assert result.verdict is Verdict.PASS
    assert result.statistic == 1.0
    assert empirical_entropy(dist) == 0.0
    assert check_entropy(dist, 0.0).passed


def test_fair_coin_fails_pd():
    """Test that a 50/50 output split fails pd at T = 1000."""
    result = check_pseudodeterministic(OutputDistribution({"0": 500, "1": 500}, 1000))
    assert result.verdict is Verdict.FAIL
    assert result.ci_high < 2 / 3
    assert empirical_entropy(uniform(2, 500)) == pytest.approx(1.0)


def test_small_samples_are_indeterminate():
    """Test that uniform over 4 with k = 3 is indeterminate at T = 40 and fails at T = 400."""
    small = check_k_concentrated(uniform(4, 10), 3)
    assert small.verdict is Verdict.INDETERMINATE
    assert small.ci_low < 1 / 3 < small.ci_high
    assert check_k_concentrated(uniform(4, 100), 3).verdict is Verdict.FAIL


def test_point_estimate_above_threshold_is_not_enough():
    """Test that 19/20 is indeterminate for pd while 20/20 and 49/50 pass."""
    borderline = check_pseudodeterministic(OutputDistribution({"a": 19, "b": 1}, 20))
    assert borderline.statistic == 0.95
    assert borderline.ci_low < 2 / 3
    assert borderline.verdict is Verdict.INDETERMINATE
    assert check_pseudodeterministic(uniform(1, 20)).verdict is Verdict.PASS
    assert check_pseudodeterministic(OutputDistribution({"a": 49, "b": 1}, 50)).verdict is Verdict.PASS


def test_k_pseudodeterministic():
    """Test that two outputs pass 2-pd with threshold 3/4 and fail 1-pd."""
    dist = OutputDistribution({"a": 500, "b": 480, "c": 20}, 1000)
    two = check_k_pseudodeterministic(dist, 2)
    assert two.threshold == 0.75
    assert two.statistic == 0.98
    assert two.verdict is Verdict.PASS
    assert check_k_pseudodeterministic(dist, 1).verdict is Verdict.FAIL
    with pytest.raises(InvalidSpecError):
        check_k_pseudodeterministic(dist, 0)
    with pytest.raises(InvalidSpecError):
        check_k_concentrated(dist, 0.5)


def test_binomial_interval():
    """Test Clopper–Pearson endpoints against closed forms."""
    low, high = binomial_interval(0, 10, alpha=0.05)
    assert low == 0.0
    assert high == pytest.approx(1 - 0.025 ** (1 / 10))
    low, high = binomial_interval(10, 10, alpha=0.05)
    assert low == pytest.approx(0.025 ** (1 / 10))
    assert high == 1.0
    low, high = binomial_interval(37, 100)
    assert low < 0.37 < high
    with pytest.raises(InvalidSpecError):
        binomial_interval(11, 10)


def test_ranking_and_covers():
    """Test count-descending ranking with lexicographic ties and cover sizes."""
    dist = OutputDistribution({"b": 3, "a": 3, "c": 4}, 10)
    assert dist.ranked() == [("c", 4), ("a", 3), ("b", 3)]
    assert dist.modal_output == "c"
    assert dist.top_mass(2) == 0.7
    assert [dist.min_cover_size(q) for q in (0.4, 0.5, 0.6, 1.0)] == [1, 2, 2, 3]
    assert list(dist.to_frame()["output"]) == ["c", "a", "b"]
    with pytest.raises(InvalidSpecError):
        dist.min_cover_size(0)


def test_distribution_validation_and_algebra():
    """Test count checks, merging and conditioning."""
    with pytest.raises(InvalidSpecError):
        OutputDistribution({"a": 2}, 3)
    with pytest.raises(InvalidSpecError):
        OutputDistribution({}, 0)
    merged = OutputDistribution({"a": 2}, 2).merge(OutputDistribution({"a": 1, "fail": 1}, 2))
    assert merged.counts == {"a": 3, "fail": 1}
    assert merged.without(NULL_OUTPUTS).trials == 3
    with pytest.raises(InvalidSpecError):
        OutputDistribution({"fail": 2}, 2).without({"fail"})


def test_zero_error_counts_invalid_non_null_outputs():
    """Test that null answers are admissible and wrong answers are counted."""
    dist = OutputDistribution({"1": 5, "2": 1, "⊥": 3, "none": 1}, 10)
    assert certify_zero_error(dist, {"1"}) == 1
    assert check_zero_error(dist, {"1", "2"}).verdict is Verdict.PASS
    assert check_zero_error(dist, {"1"}).verdict is Verdict.FAIL


def test_entropy_check():
    """Test the entropy cap against a four-way uniform law."""
    dist = uniform(4, 25)
    assert check_entropy(dist, 2.001).passed
    assert check_entropy(dist, 1.5).verdict is Verdict.FAIL


def test_concentration_report():
    """Test the fields of the diagnostic report."""
    dist = OutputDistribution({"x": 60, "y": 35, "z": 5}, 100)
    report = concentration_report(dist, valid={"x", "y"})
    assert report.modal_output == "x"
    assert report.modal_probability == 0.6
    assert report.covers == {0.5: 1, 0.9: 2, 0.99: 3}
    assert report.min_cover_size(0.9) == 2
    assert report.zero_error_violations == 5
    assert concentration_report(dist).zero_error_violations is None


def test_exit_codes():
    """Test the verdict exit codes."""
    assert [v.exit_code for v in Verdict] == [0, 2, 3]
    summary = check_pseudodeterministic(uniform(1, 50)).summary()
    assert summary.startswith("pd: pass")
