import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relmachine import corpus
from relmachine.machine import (
    Action, MachineConfig, MachineHalted, MachineSpec, MalformedEncoding, QueryBinding,
    QueryStateError, SpecError, UndefinedTransition, compose, decode_machine, dump_machine,
    encode_machine, load_machine, run, spec_from_json, spec_to_json, step,
)
from relmachine.tape import Tape

# regression constant: any change to the bit layout must be deliberate
UNARY_INCREMENT_BITS = 316


def _run(spec, text, steps=100, rng=None):
    t = Tape(set(spec.alphabet))
    t.write_string(0, text)
    return run(spec, MachineConfig(0, spec.start, t), steps, rng)


def test_unary_increment():
    result = _run(corpus.unary_increment(), "11")
    assert result.outcome == "accept"
    assert result.steps == 3
    assert result.config.tape.symbols((0, 3)) == "111"


@pytest.mark.parametrize("text, outcome", [
    ("000", "accept"), ("101", "accept"), ("011", "reject"), ("010", "accept"), ("1_1", "accept"), ("_00", "reject"),
])
def test_equality_checker(text, outcome):
    assert _run(corpus.equality_checker(), text).outcome == outcome


def test_undefined_transition():
    spec = MachineSpec(["START", "ACCEPT", "REJECT"], "01_", {("1", "START"): Action("1", "ACCEPT", "R")})
    with pytest.raises(UndefinedTransition):
        _run(spec, "0")


def test_halted_machine_does_not_step():
    spec = corpus.accept_immediately()
    cfg = MachineConfig(0, "ACCEPT", Tape())
    with pytest.raises(MachineHalted):
        step(spec, cfg)


def test_query_state_needs_the_global_machine():
    spec = corpus.tell_me_detector()
    with pytest.raises(QueryStateError):
        step(spec, MachineConfig(0, "ASK", Tape()))


@pytest.mark.parametrize("kwargs", [
    dict(states=["START", "ACCEPT", "REJECT"], alphabet="01"),  # no blank
    dict(states=["START", "ACCEPT"], alphabet="01_"),  # no reject
    dict(states=["START", "ACCEPT", "REJECT"], alphabet=["0", "11", "_"]),
])
def test_invalid_specs(kwargs):
    with pytest.raises(SpecError):
        MachineSpec(transitions={}, **kwargs)


def test_transition_out_of_halting_state_rejected():
    with pytest.raises(SpecError):
        MachineSpec(["START", "ACCEPT", "REJECT"], "01_", {("0", "ACCEPT"): Action("0", "START", "R")})


def test_probabilities_must_sum_to_one():
    bad = ((Action("0", "ACCEPT", "R"), 0.5), (Action("1", "ACCEPT", "R"), 0.4))
    with pytest.raises(SpecError):
        MachineSpec(["START", "ACCEPT", "REJECT"], "01_", {}, probabilistic={("_", "START"): bad})


def test_bad_move():
    with pytest.raises(SpecError):
        Action("0", "START", "S")


def test_fair_coin_frequency(rng):
    spec = corpus.fair_coin()
    ones = sum(_run(spec, "", rng=rng).config.tape.read(1) == "1" for _ in range(2000))
    assert 900 < ones < 1100


def test_compose_runs_second_after_first():
    spec = compose(corpus.unary_increment(), corpus.constant_detector("1"))
    result = _run(spec, "1")
    # unary increment leaves the head past the new 1; the detector then writes there
    assert result.outcome == "accept"
    assert result.config.tape.symbols((0, 3)) == "111"


def test_encoding_length_is_frozen():
    assert len(encode_machine(corpus.unary_increment())) == UNARY_INCREMENT_BITS


@pytest.mark.parametrize("factory", [
    corpus.unary_increment, corpus.equality_checker, corpus.fair_coin, corpus.tell_me_detector,
    corpus.majority_detector, corpus.oscillator,
])
def test_corpus_roundtrip(factory):
    spec = factory()
    assert decode_machine(encode_machine(spec)) == spec


def test_random_machine_roundtrip_corpus():
    rng = np.random.default_rng(1)
    for i in range(1000):
        spec = corpus.random_machine(rng, n_states=int(rng.integers(1, 7)), p_random=0.2)
        bits = encode_machine(spec)
        assert set(bits) <= {"0", "1"}
        assert decode_machine(bits) == spec, i


def test_query_binding_roundtrip():
    q = QueryBinding("ASK", "parity", ((0, 3), (5, 7)), (8, 9), "ACCEPT")
    spec = MachineSpec(["ASK", "ACCEPT", "REJECT"], "01_", {}, start="ASK", query_states={"ASK": q})
    assert decode_machine(encode_machine(spec)).query_states["ASK"] == q


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_corrupted_encodings_fail_cleanly(data):
    bits = encode_machine(corpus.equality_checker())
    flips = data.draw(st.sets(st.integers(0, len(bits) - 1), min_size=1, max_size=4))
    mutated = "".join(("1" if b == "0" else "0") if i in flips else b for i, b in enumerate(bits))
    try:
        decode_machine(mutated)
    except MalformedEncoding:
        pass


@given(st.integers(0, 315))
def test_truncated_encoding_is_malformed(cut):
    bits = encode_machine(corpus.unary_increment())
    with pytest.raises(MalformedEncoding):
        decode_machine(bits[:cut])


def test_trailing_bits_are_malformed():
    with pytest.raises(MalformedEncoding):
        decode_machine(encode_machine(corpus.unary_increment()) + "0")


def test_json_roundtrip(tmp_path):
    for spec in (corpus.fair_coin(), corpus.tell_me_detector(), corpus.equality_checker()):
        assert spec_from_json(spec_to_json(spec)) == spec
        path = tmp_path / "m.json"
        dump_machine(spec, path)
        assert load_machine(path) == spec


def test_json_needs_schema_version():
    doc = spec_to_json(corpus.unary_increment())
    del doc["schema_version"]
    with pytest.raises(SpecError, match="schema_version"):
        spec_from_json(doc)
