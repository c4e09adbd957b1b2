"""Test the algorithm registry, parameter handling and canonical outputs."""
import pytest

from src.pdsketch.errors import InvalidSpecError, ParameterError, UnknownAlgorithmError
from src.pdsketch.randomness import EntropySource
from src.pdsketch.registry import (
    BOTTOM,
    REGISTRY,
    ParamSpec,
    format_answer_vector,
    format_basis,
    get_algorithm,
    parse_answer_vector,
    parse_param_pairs,
    run_once,
)
from src.pdsketch.streams import SpaceMeter, generate, parse_stream

SEED = EntropySource.from_hex("beef")


def test_required_algorithms_are_registered():
    """Test that every stable id resolves, with the baselines alongside."""
    for algorithm_id in (
        "point-query",
        "inner-product",
        "l2-trunc",
        "dup-conc",
        "dup-multipass",
        "nonzero-row-rand",
        "nonzero-row-pd",
        "recover-basis",
        "morris-count",
        "l0-sample",
        "ams-l2",
    ):
        assert get_algorithm(algorithm_id).id == algorithm_id
    assert REGISTRY["dup-multipass"].deterministic
    assert REGISTRY["dup-multipass"].multipass
    with pytest.raises(UnknownAlgorithmError):
        get_algorithm("quantum-sort")


def test_answer_vector_encoding():
    """Test the i:f encoding and its parser."""
    assert format_answer_vector([(1, 2), (3, 1)]) == "1:2;3:1"
    assert parse_answer_vector("1:2;3:1") == {1: 2, 3: 1}
    assert parse_answer_vector("") == {}


def test_basis_encoding():
    """Test 9-decimal rows, negative zero and the empty basis."""
    assert format_basis([[1.0, -0.0], [0.0, 0.5]]) == "1.000000000,0.000000000;0.000000000,0.500000000"
    assert format_basis([[-1e-12, 1.0]]) == "0.000000000,1.000000000"
    assert format_basis([]) == "empty"


def test_parameter_coercion():
    """Test fractions, integers and strings."""
    assert ParamSpec("epsilon", float).coerce("1/4") == 0.25
    assert ParamSpec("k", int).coerce(" 3 ") == 3
    assert ParamSpec("k", int).coerce(2.0) == 2
    with pytest.raises(ValueError):
        ParamSpec("k", int).coerce(2.5)


def test_param_pairs_report_every_problem():
    """Test that malformed and repeated pairs are collected into one error."""
    assert parse_param_pairs(["epsilon=1/4", " s = 4 "]) == {"epsilon": "1/4", "s": "4"}
    with pytest.raises(ParameterError) as excinfo:
        parse_param_pairs(["epsilon", "s=1", "s=2", "=3"])
    message = str(excinfo.value)
    assert "'epsilon'" in message
    assert "given twice" in message


def test_resolve_params():
    """Test defaults, unknown names and bad values."""
    entry = get_algorithm("dup-conc")
    assert entry.resolve_params({}) == {"s": 4, "copies": 0}
    assert entry.resolve_params({"s": "8"})["s"] == 8
    with pytest.raises(ParameterError) as excinfo:
        entry.resolve_params({"s": "many", "depth": "2"})
    assert "depth" in str(excinfo.value)
    assert "s='many'" in str(excinfo.value)


def test_point_query_output():
    """Test the answer vector over the streamed elements."""
    elements = [1] * 20 + [2] * 10 + [3] * 10
    source = parse_stream("elem 10 40\n" + "".join(f"e {e}\n" for e in elements))
    output = run_once("point-query", source, SEED, {"epsilon": "1/3"})
    assert output == "1:20;2:10;3:10"
    assert set(parse_answer_vector(output)) == {1, 2, 3}
    assert "unlisted elements answer 0" in get_algorithm("point-query").output_schema


def test_inner_product_output():
    """Test that x = y = 4·e_7 gives 16."""
    source = parse_stream("mat 100 2\nu 7 1 +4\nu 7 2 +4\n")
    assert run_once("inner-product", source, SEED, {"epsilon": "1/4"}) == "16"


def test_duplicate_outputs():
    """Test the multi-pass answer and the concentrated output alphabet."""
    source = parse_stream("elem 4 6\ne 1\ne 2\ne 3\ne 4\ne 4\ne 3\n")
    assert run_once("dup-multipass", source, SEED) == "3"
    outputs = {run_once("dup-conc", source, SEED.child(i), {"copies": 1}) for i in range(40)}
    assert outputs <= {"3", "4", BOTTOM}
    assert BOTTOM in outputs


def test_null_outputs():
    """Test none and promise-violation encodings."""
    zero = parse_stream("mat 4 4\nu 2 2 +1\nu 2 2 -1\n")
    assert run_once("nonzero-row-pd", zero, SEED) == "none"
    assert run_once("nonzero-row-rand", zero, SEED) == "none"
    identity = parse_stream("mat 4 4\n" + "".join(f"u {i} {i} +1\n" for i in range(1, 5)))
    assert run_once("recover-basis", identity, SEED, {"k": 1}) == "promise-violation"
    assert run_once("recover-basis", zero, SEED, {"k": 1}) == "empty"


def test_vector_outputs():
    """Test the ℓ0, ℓ2 and Morris encodings on tiny inputs."""
    single = parse_stream("vec 8\nu 5 +3\n")
    assert run_once("l0-sample", single, SEED) == "5"
    assert float(run_once("ams-l2", single, SEED)) == 3.0
    assert float(run_once("l2-trunc", single, SEED, {"width": 16, "repetitions": 3})) == 3.0
    assert run_once("morris-count", generate("all-ones", 2, 1), SEED) == "1"


def test_runs_are_reproducible():
    """Test that one seed always gives one output and the meter sees the space."""
    source = generate("random-turnstile-vector", 64, 128, seed=4)
    first = run_once("l0-sample", source, SEED.child("r"))
    assert all(run_once("l0-sample", source, SEED.child("r")) == first for _ in range(3))
    meter = SpaceMeter()
    run_once("l0-sample", source, SEED, meter=meter)
    assert meter.peak_words > 0


def test_model_mismatch():
    """Test that an algorithm refuses a stream of the wrong model."""
    with pytest.raises(InvalidSpecError):
        run_once("point-query", parse_stream("vec 4\nu 1 +1\n"), SEED)
