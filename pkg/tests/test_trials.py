"""Test trial configuration, seeded execution and space sweeps."""
import pandas as pd
import pytest

from src.pdsketch.errors import InvalidSpecError, ParameterError
from src.pdsketch.trials import (
    SpaceSweep,
    TrialConfig,
    measure_space,
    run_trials,
    scaling_slope,
    trial_entropy,
)

TURNSTILE = "gen:random-turnstile-vector:n=64,m=128,seed=4"


def test_config_validation_collects_problems():
    """Test trials, workers, passes and seed checks in one error."""
    with pytest.raises(InvalidSpecError) as excinfo:
        TrialConfig.build("l0-sample", TURNSTILE, trials=0, workers=0, passes=2, master_seed="zz")
    message = str(excinfo.value)
    assert "trials" in message
    assert "workers" in message
    assert "one-pass" in message
    with pytest.raises(ParameterError):
        TrialConfig.build("l0-sample", TURNSTILE, params={"epsilon": "0.1"})


def test_config_hash_ignores_workers():
    """Test that the hash covers the outcome-determining fields only."""
    base = TrialConfig.build("l0-sample", TURNSTILE, trials=10)
    assert TrialConfig.build("l0-sample", TURNSTILE, trials=10, workers=4).config_hash == base.config_hash
    assert TrialConfig.build("l0-sample", TURNSTILE, trials=11).config_hash != base.config_hash
    assert TrialConfig.build("dup-multipass", "gen:random-duplicate-stream:n=8", passes=3).params_text() == "passes=3"


def test_trial_entropy_is_a_function_of_seed_index_and_algorithm():
    """Test per-trial seed derivation."""
    assert trial_entropy("ab", 3, "l0-sample").bits(64) == trial_entropy("ab", 3, "l0-sample").bits(64)
    assert trial_entropy("ab", 3, "l0-sample").bits(64) != trial_entropy("ab", 4, "l0-sample").bits(64)
    assert trial_entropy("ab", 3, "l0-sample").bits(64) != trial_entropy("ab", 3, "ams-l2").bits(64)


def test_deterministic_algorithm_has_one_output():
    """Test that a multi-pass run reports one output and its pass count."""
    cfg = TrialConfig.build("dup-multipass", "gen:random-duplicate-stream:n=64,seed=1", trials=5, passes=2)
    outcome = run_trials(cfg)
    assert len(outcome.distribution.counts) == 1
    assert outcome.passes_used == 2
    assert outcome.stream_header.startswith("elem 64 96")


def test_outcomes_are_reproducible():
    """Test that one master seed reproduces the distribution and another changes it."""
    first = run_trials(TrialConfig.build("l0-sample", TURNSTILE, trials=30, master_seed="1"))
    again = run_trials(TrialConfig.build("l0-sample", TURNSTILE, trials=30, master_seed="1"))
    other = run_trials(TrialConfig.build("l0-sample", TURNSTILE, trials=30, master_seed="2"))
    assert first.distribution == again.distribution
    assert first.distribution != other.distribution
    assert first.stream_hash == other.stream_hash


def test_workers_do_not_change_the_distribution():
    """Test that splitting trials across processes merges to the same counts."""
    serial = run_trials(TrialConfig.build("l0-sample", TURNSTILE, trials=12))
    parallel = run_trials(TrialConfig.build("l0-sample", TURNSTILE, trials=12, workers=3))
    assert dict(serial.distribution.counts) == dict(parallel.distribution.counts)
    assert serial.peak_words == parallel.peak_words


def test_sweep_parsing():
    """Test the name=v1,v2 form."""
    sweep = SpaceSweep.parse("n=64,256,1024", trials=2)
    assert (sweep.parameter, sweep.values, sweep.trials) == ("n", (64, 256, 1024), 2)
    for bad in ("n", "=1,2", "n=", "n=a,b"):
        with pytest.raises(InvalidSpecError):
            SpaceSweep.parse(bad)


def test_pd_nonzero_row_space_is_linear():
    """Test that the stored-weight sketch uses exactly 2n words."""
    frame = measure_space("nonzero-row-pd", SpaceSweep.parse("n=16,32,64"))
    assert list(frame["peak_words"]) == [32, 64, 128]
    assert scaling_slope(frame, "n") == pytest.approx(1.0)


def test_point_query_space_is_flat_in_n():
    """Test that point-query space does not grow with the universe."""
    frame = measure_space("point-query", SpaceSweep.parse("n=1000,10000,100000"))
    assert abs(scaling_slope(frame, "n")) < 0.1


def test_scaling_slope():
    """Test the log-log fit on a square-root law."""
    frame = pd.DataFrame({"n": [16, 64, 256], "peak_words": [4, 8, 16]})
    assert scaling_slope(frame, "n") == pytest.approx(0.5)
    with pytest.raises(InvalidSpecError):
        scaling_slope(frame.head(1), "n")
