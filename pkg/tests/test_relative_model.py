import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relmachine import corpus
from relmachine.machine import MachineSpec, QueryBinding
from relmachine.oracles import OracleError, busy_oracle, identity_oracle, parity_oracle
from relmachine.relative_model import (
    AtomicInterpreter, LayoutTooSmall, LocalHalted, RelativeModel, preserves_same_cell_order,
    replay_writes_permuted, uniform_padding,
)
from relmachine.tape import GuardViolation, TapeLayout


def query_spec(oracle, arg, out):
    q = QueryBinding("ASK", oracle, arg, out, "ACCEPT")
    return MachineSpec(["ASK", "ACCEPT", "REJECT"], "01_", {}, start="ASK", query_states={"ASK": q})


def test_direct_interpreter_costs_four_steps():
    m = RelativeModel(corpus.unary_increment(), "11")
    assert m.run_local(10) == "accept"
    assert m.K == [4, 8, 12]
    assert m.local_symbols().rstrip("_") == "111"
    assert m.trace.invariant_violations() == []


def test_padded_atomic_run_dilates_second_update():
    m = RelativeModel(corpus.unary_increment(), "11", interpreter=AtomicInterpreter(), padding=[0, 8])
    m.advance_local()
    assert (m.t, m.tau) == (1, 1)
    for _ in range(8):
        m.global_step()
        assert m.tau == 1
    m.global_step()
    assert (m.t, m.tau) == (10, 2)
    assert m.K == [1, 10]


def test_runtime_sets_hold_full_tape_snapshots():
    m = RelativeModel(corpus.unary_increment(), "1", padding=2)
    m.advance_local()
    delta = m.trace.runtime_sets[0]
    assert len(delta) == m.K[0] - 1 == 5
    enc = m.layout.encoding
    assert all(any(i in enc for i, _ in snap.cells) for snap in delta)


def test_local_frame_excludes_scrap():
    m = RelativeModel(corpus.unary_increment(), "1", padding=3)
    m.run_local(5)
    for frame in m.trace.local_frames:
        assert frame.tape.region == m.layout.local
        assert all(i in m.layout.local for i, _ in frame.tape.cells)


def test_summary_mode_keeps_clocks_drops_snapshots():
    full = RelativeModel(corpus.unary_increment(), "111", padding=[3, 1, 4, 1])
    summ = RelativeModel(corpus.unary_increment(), "111", padding=[3, 1, 4, 1], snapshots="summary")
    full.run_local(10)
    summ.run_local(10)
    assert full.K == summ.K
    assert full.trace.space_per_tau == summ.trace.space_per_tau
    assert summ.trace.runtime_sets == [[] for _ in summ.trace.runtime_sets]
    assert summ.trace.steps == []
    assert summ.trace.invariant_violations() == []


def test_writes_recorded_only_for_local_region():
    m = RelativeModel(corpus.unary_increment(), "1", padding=4)
    m.run_local(5)
    for ops in m.trace.write_ops:
        assert all(op.index in m.layout.local for op in ops)
    assert set(m.trace.K) <= set(m.trace.K_tilde)
    assert m.tau_tilde == len(m.trace.K_tilde)


def test_padding_does_not_perturb_local_randomness():
    finals = set()
    for pad in (0, 1, 9, 30):
        m = RelativeModel(corpus.fair_coin(), "", seed=11, padding=pad)
        m.run_local(5)
        finals.add(m.local_symbols())
        assert [u for _, u in m.trace.rng_log]
    assert len(finals) == 1


def test_random_padding_draws_from_adversary_stream():
    a = RelativeModel(corpus.unary_increment(), "1111", seed=3, padding=uniform_padding(0, 20))
    b = RelativeModel(corpus.unary_increment(), "1111", seed=3, padding=uniform_padding(0, 20))
    a.run_local(10)
    b.run_local(10)
    assert a.K == b.K
    assert len(set(np.diff([0, *a.K]))) > 1


def test_probe_past_local_region_hits_guard():
    m = RelativeModel(corpus.timing_probe_detector(), "", local_size=8)
    with pytest.raises(GuardViolation) as err:
        m.run_local(100)
    assert err.value.actor == "local"
    assert err.value.region == "scrap"


def test_halted_model_refuses_to_step():
    m = RelativeModel(corpus.accept_immediately(), "")
    m.run_local(3)
    with pytest.raises(LocalHalted):
        m.global_step()


def test_layout_too_small():
    with pytest.raises(LayoutTooSmall):
        RelativeModel(corpus.unary_increment(), "1", layout=TapeLayout((0, 10), (10, 20), (20, 30)))
    with pytest.raises(LayoutTooSmall):
        RelativeModel(corpus.unary_increment(), "1" * 10, local_size=4)


def test_encoded_spec_is_what_runs():
    spec = corpus.equality_checker()
    m = RelativeModel(spec, "000")
    assert m.local_spec == spec
    assert m.local_spec is not spec


def test_query_is_one_local_step():
    spec = query_spec("identity", (0, 5), (5, 10))
    m = RelativeModel(spec, "10110", oracles=[identity_oracle(5)])
    m.query_oracle()
    assert m.tau == 1
    assert m.halted
    assert m.local_symbols()[:10] == "1011010110"
    assert m.K == [5 + 5 + 1]


def test_query_workspace_lands_in_scrap():
    spec = query_spec("busy", (0, 2), (2, 4))
    m = RelativeModel(spec, "11", oracles=[busy_oracle(2, 40)])
    m.query_oracle()
    assert m.trace.space_per_tau == [40 + 2]
    assert all(c in m.layout.scrap for c in m.trace.scrap_footprint)


def test_unbound_oracle():
    with pytest.raises(OracleError):
        RelativeModel(query_spec("parity", (0, 3), (3, 4)), "101")


def test_output_region_must_match_declared_length():
    with pytest.raises(OracleError):
        RelativeModel(query_spec("parity", (0, 3), (3, 5)), "101", oracles=[parity_oracle()])


def test_parity_footprint():
    m = RelativeModel(query_spec("parity", (0, 6), (6, 7)), "110100", oracles=[parity_oracle()])
    m.query_oracle()
    assert m.local_symbols()[6] == "1"
    assert m.trace.space_per_tau == [6 + 2]


def test_spoof_installs_in_one_local_step():
    m = RelativeModel(corpus.equality_checker(), "011")
    res = m.spoof_accept(horizon=3, candidate_bound=8, width=3)
    assert res.found and res.install_steps == 1
    assert res.tape[:3] == "000"
    assert m.run_local(3) == "accept"


def test_spoof_fails_on_reject_all():
    m = RelativeModel(corpus.reject_all(), "")
    res = m.spoof_accept(horizon=3, candidate_bound=8, width=3)
    assert not res.found
    assert res.candidates_tried == 8
    assert m.tau == 0


def test_permuted_replay_matches_original():
    m = RelativeModel(query_spec("identity", (0, 6), (6, 12)), "101101", oracles=[identity_oracle(6)])
    m.query_oracle()
    target = m.trace.local_frames[1].tape
    ops = m.trace.write_ops[0]
    for perm in itertools.permutations(range(len(ops))):
        assert replay_writes_permuted(m.trace, 0, perm) == target


def test_same_cell_order_detection():
    from relmachine.tape import WriteOp
    ops = [WriteOp("1", 0, 1), WriteOp("0", 1, 2), WriteOp("0", 0, 3)]
    assert preserves_same_cell_order(ops, [1, 0, 2])
    assert not preserves_same_cell_order(ops, [2, 1, 0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), pads=st.lists(st.integers(0, 6), max_size=12))
def test_invariants_hold_for_random_machines(seed, pads):
    rng = np.random.default_rng(seed)
    spec = corpus.random_machine(rng, n_states=3, p_random=0.2)
    m = RelativeModel(spec, "".join(rng.choice(list("01_"), size=6)), seed=seed, padding=pads,
                      local_size=64)
    try:
        m.run_local(30)
    except GuardViolation:
        pass
    tr = m.trace
    assert tr.invariant_violations() == []
    assert len(tr.K) == m.tau


def test_same_seed_same_trace():
    def records(seed):
        m = RelativeModel(corpus.fair_coin(), "1", seed=seed, padding=uniform_padding(0, 5))
        m.run_local(5)
        return m.trace_records()

    assert records(5) == records(5)
