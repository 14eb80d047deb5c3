import pytest
from hypothesis import given, strategies as st

from relmachine.tape import (
    BLANK, GLOBAL, LOCAL, AccessGuard, GuardViolation, Interval, LayoutError, LayoutOverlapError,
    SymbolError, Tape, TapeLayout, TapeState, WriteOp, check_layout, rle_decode, rle_encode,
)

LAYOUT = TapeLayout((0, 10), (10, 20), (20, 30))


def test_unwritten_cells_read_blank():
    t = Tape()
    assert t.read(-5) == BLANK
    assert t.read(10**9) == BLANK


def test_write_then_read():
    t = Tape()
    t.apply_write(WriteOp("1", 3))
    assert t.read(3) == "1"
    t.apply_write(WriteOp(BLANK, 3))
    assert 3 not in t.cells


def test_symbol_outside_alphabet():
    with pytest.raises(SymbolError):
        Tape().apply_write(WriteOp("x", 0))
    with pytest.raises(SymbolError):
        Tape().write_string(0, "01x")


def test_overlapping_regions_name_the_pair():
    with pytest.raises(LayoutOverlapError) as err:
        check_layout(TapeLayout((0, 10), (5, 15), (20, 30)))
    assert err.value.pair == ("encoding", "local")


def test_measurement_region_must_sit_inside_local():
    with pytest.raises(LayoutOverlapError):
        check_layout(TapeLayout((0, 10), (10, 20), (20, 30), measurement=(18, 22)))
    check_layout(TapeLayout((0, 10), (10, 20), (20, 30), measurement=(12, 14)))


def test_interval_rejects_reversed_bounds():
    with pytest.raises(LayoutError):
        Interval(5, 4)
    assert len(Interval(3, 3)) == 0


def test_scrap_cannot_grow_into_other_regions():
    layout = TapeLayout((100, 110), (110, 120), (0, 10))
    assert layout.grow_scrap(50).scrap == Interval(0, 50)
    with pytest.raises(LayoutError):
        layout.grow_scrap(105)


@pytest.mark.parametrize("index, region", [(5, "encoding"), (25, "scrap"), (99, "unassigned")])
def test_local_access_outside_local_region_is_refused(index, region):
    t = Tape(guard=AccessGuard(LAYOUT))
    with pytest.raises(GuardViolation) as err:
        t.read(index, LOCAL)
    assert err.value.region == region
    with pytest.raises(GuardViolation):
        t.apply_write(WriteOp("1", index), LOCAL)


def test_global_actor_is_unrestricted():
    t = Tape(guard=AccessGuard(LAYOUT))
    for i in (0, 15, 25, 99):
        t.apply_write(WriteOp("1", i), GLOBAL)
        assert t.read(i, GLOBAL) == "1"
    assert t.read(15, LOCAL) == "1"


def test_snapshot_restore_roundtrip():
    t = Tape()
    t.write_string(0, "10_1")
    snap = t.snapshot()
    t.write_string(0, "0000")
    t.restore(snap)
    assert t.symbols(Interval(0, 4)) == "10_1"


def test_region_restore_leaves_outside_untouched():
    t = Tape()
    t.write_string(0, "1111")
    snap = t.snapshot(Interval(0, 2))
    t.write_string(0, "0000")
    t.restore(snap)
    assert t.symbols(Interval(0, 4)) == "1100"


def test_tape_state_equality_ignores_blanks():
    assert TapeState(((0, "1"),)) == TapeState(((0, "1"),))
    assert TapeState(((0, "1"),)) != TapeState(((1, "1"),))


@given(st.text(alphabet="01_", max_size=60))
def test_rle_roundtrip(symbols):
    assert rle_decode(rle_encode(symbols)) == symbols


@given(st.text(alphabet="01_", min_size=1, max_size=40))
def test_state_json_roundtrip(symbols):
    t = Tape()
    t.write_string(7, symbols)
    region = Interval(7, 7 + len(symbols))
    snap = t.snapshot(region)
    back = TapeState.from_json(snap.to_json())
    assert back == snap
    assert back.symbols() == symbols


def test_rle_rejects_garbage():
    with pytest.raises(ValueError):
        rle_decode("3x1")
