import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relmachine import corpus
from relmachine.experiments import (
    GameSetupError, config_hash, double, image_contains, midpoint_approximation,
    offset_approximation, pauli_x_scenario, run_measure_game, run_oracle_benchmark,
    run_psimtime_game, run_quantum_check, run_scenario, run_schrodinger_scenario,
    run_simtime_game, run_spoof_accept_scenario, wilson_interval,
)


def wilson_by_hand(k, n, z=1.959963984540054):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


@pytest.mark.parametrize("k, n", [(0, 10), (5000, 10000), (7, 9), (10, 10)])
def test_wilson_matches_formula(k, n):
    assert wilson_interval(k, n) == pytest.approx(wilson_by_hand(k, n), abs=1e-12)


@pytest.mark.parametrize("pads", [[5, 5], [3], [1, 2, 3]])
def test_degenerate_pads_rejected(pads):
    with pytest.raises(GameSetupError):
        run_simtime_game(corpus.constant_detector(), pads, 10, 0)


def test_trials_must_be_positive():
    with pytest.raises(GameSetupError):
        run_simtime_game(corpus.constant_detector(), [1, 9], 0, 0)


def test_control_arm_is_perfect():
    r = run_simtime_game(corpus.tell_me_detector(), [1, 9], 300, 4)
    assert r.accuracy == 1.0


def test_probe_detector_always_aborts():
    r = run_simtime_game(corpus.timing_probe_detector(), [1, 9], 50, 4)
    assert r.aborted == 50 and r.successes == 0


def test_seeded_rerun_is_identical():
    a = run_simtime_game(corpus.majority_detector(), [1, 9], 200, 9).to_json()
    b = run_simtime_game(corpus.majority_detector(), [1, 9], 200, 9).to_json()
    assert a == b
    c = run_simtime_game(corpus.majority_detector(), [1, 9], 200, 10).to_json()
    assert c["trial_log_sha256"] != a["trial_log_sha256"]


def test_psimtime_with_deterministic_machine_matches_simtime():
    det = corpus.constant_detector()
    p = run_psimtime_game(det, [1, 9], corpus.rewind_noop(), 300, 2)
    s = run_simtime_game(det, [1, 9], 300, 2)
    assert p.successes == s.successes
    assert "chi2_p" in p.extra


def test_psimtime_reports_independence():
    r = run_psimtime_game(corpus.constant_detector(), [1, 9], corpus.fair_coin(), 400, 3)
    assert 0.0 <= r.extra["chi2_p"] <= 1.0
    assert r.extra["chi2_dof"] >= 1


def test_measure_exact_case_is_decidable():
    r = run_measure_game(double, midpoint_approximation(double), 32, 300, 1)
    assert r.accuracy == 1.0


def test_measure_out_of_envelope_is_caught():
    r = run_measure_game(double, offset_approximation(double), 8, 300, 1)
    assert r.extra["f_tilde_accuracy"] == 1.0
    assert r.extra["envelope_violations"] == r.extra["f_tilde_trials"]


def test_measure_midpoint_stays_in_envelope():
    r = run_measure_game(double, midpoint_approximation(double), 8, 500, 1)
    assert r.extra["envelope_violations"] == 0


@settings(max_examples=60, deadline=None)
@given(lo=st.integers(0, 2**12), width=st.integers(1, 2**13), target=st.integers(0, 2**14))
def test_bisection_agrees_with_enumeration(lo, width, target):
    bits = 12
    interval = (lo / 2**bits, (lo + width) / 2**bits)
    y = target / 2**bits
    assert image_contains(double, interval, bits, y, enumerate_limit=10**6) == \
        image_contains(double, interval, bits, y, enumerate_limit=0)


def test_spoof_scenario():
    r = run_spoof_accept_scenario(corpus.equality_checker(), 3, 8, 0)
    assert r["found"] and r["accepted"]
    assert r["install_local_steps"] == 1
    assert r["search_global_steps"] > r["install_local_steps"]


def test_spoof_not_found():
    r = run_spoof_accept_scenario(corpus.reject_all(), 3, 8, 0)
    assert not r["found"] and r["candidates_tried"] == 8


def test_spoof_requires_halting():
    with pytest.raises(GameSetupError):
        run_spoof_accept_scenario(corpus.oscillator(), 5, 8, 0)


def test_empty_benchmark():
    prof = run_oracle_benchmark(["parity"], [], 0)["parity"]
    assert prof.rows == []


def test_identity_space_equals_output_length():
    prof = run_oracle_benchmark(["identity"], [3, 5, 7], 0)["identity"]
    for row in prof.rows:
        assert row.scrap == 0 and row.output_cells == row.n


def test_schrodinger_scenario_random_two_qubits():
    r = run_schrodinger_scenario(2, 10, 1e-9, 32, 3)
    assert r["local_steps"] == 10
    assert r["max_evolve_error"] <= 1e-9
    assert r["max_tape_deviation"] <= 1e-9 + 2 * r["quantization_bound"]


def test_schrodinger_step_mode():
    r = run_schrodinger_scenario(1, 3, 1e-9, 32, 5, mode="step")
    assert r["local_steps"] == 3
    assert r["max_tape_deviation"] <= 1e-8


def test_schrodinger_limits():
    with pytest.raises(GameSetupError):
        run_schrodinger_scenario(11, 1, 1e-9, 8, 0)
    with pytest.raises(GameSetupError):
        run_schrodinger_scenario(1, 1, 1e-9, 8, 0, mode="sideways")


def test_pauli_x_final_state():
    r = pauli_x_scenario()
    final = np.array([complex(*z) for z in r["final_state"]])
    assert np.linalg.norm(final - [0, -1j]) <= 1e-9 + 2 * r["quantization_bound"]


def test_quantum_check_small():
    r = run_quantum_check(0, 20)
    assert r["max_evolve_error"] <= 1e-9


def test_scenario_dispatch_and_hash():
    cfg = {"scenario": "spoof", "seed": 1}
    out = run_scenario(cfg)
    assert out["environment"]["config_hash"] == config_hash({**cfg, "output": "x.json"})
    with pytest.raises(GameSetupError):
        run_scenario({"scenario": "nope"})
    with pytest.raises(GameSetupError):
        run_scenario({"scenario": "simtime", "detector": "psychic", "seed": 0})
