import json
import subprocess
import sys

import pytest

from relmachine import schemas
from relmachine.cli import main
from relmachine.machine import spec_to_json
from relmachine import corpus
from relmachine.tape import TapeState


def run_cli(*args):
    return main([str(a) for a in args])


def lines(path):
    return [json.loads(l) for l in path.read_text().splitlines()]


def test_simulate_unary_increment(tmp_path):
    out = tmp_path / "t.jsonl"
    assert run_cli("simulate", "corpus:unary_increment", "--input", "11", "--max-local-steps", 5,
                   "--out", out) == 0
    recs = lines(out)
    for rec in recs:
        assert schemas.errors(rec, "trace_record") == []
    final = recs[-1]
    assert final["type"] == "final" and final["outcome"] == "accept"
    assert TapeState.from_json(final["local_tape"]).symbols().startswith("111_")


def test_simulate_machine_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(spec_to_json(corpus.equality_checker())))
    out = tmp_path / "t.jsonl"
    assert run_cli("simulate", path, "--input", "101", "--out", out) == 0
    assert lines(out)[-1]["outcome"] == "accept"


def test_step_limit_is_not_an_error(tmp_path):
    out = tmp_path / "t.jsonl"
    assert run_cli("simulate", "corpus:oscillator", "--max-local-steps", 7, "--out", out) == 0
    assert lines(out)[-1]["outcome"] == "timeout"


def test_malformed_machine_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"schema_version": 1,\n  "states": [}')
    assert run_cli("simulate", path) == 2
    assert "bad.json:2:14" in capsys.readouterr().err


def test_schema_violation_is_malformed(tmp_path, capsys):
    path = tmp_path / "m.json"
    doc = spec_to_json(corpus.unary_increment())
    doc["transitions"][0]["move"] = "S"
    path.write_text(json.dumps(doc))
    assert run_cli("simulate", path) == 2
    assert "move" in capsys.readouterr().err


def test_guard_violation_exit_code(tmp_path):
    assert run_cli("simulate", "corpus:detector_timing_probe", "--local-size", 8,
                   "--out", tmp_path / "t.jsonl") == 3


def test_unknown_oracle_is_malformed(tmp_path):
    doc = spec_to_json(corpus.tell_me_detector())
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    assert run_cli("simulate", path) == 2


def test_metrics_from_padded_trace(tmp_path):
    trace, out = tmp_path / "t.jsonl", tmp_path / "m.json"
    run_cli("simulate", "corpus:unary_increment", "--input", "11", "--interpreter", "atomic",
            "--pad", "0,8,8", "--out", trace)
    assert run_cli("metrics", trace, "--out", out) == 0
    report = json.loads(out.read_text())
    assert schemas.errors(report, "metrics") == []
    assert report["K"] == [1, 10, 19]
    assert [r["gamma_t"] for r in report["per_tau"]] == [9, 9]


def test_metrics_csv_matches_json(tmp_path):
    from relmachine.metrics import report_from_csv
    trace = tmp_path / "t.jsonl"
    run_cli("simulate", "corpus:unary_increment", "--input", "111", "--pad", "3,0,5,1", "--out", trace)
    run_cli("metrics", trace, "--out", tmp_path / "m.json")
    run_cli("metrics", trace, "--format", "csv", "--out", tmp_path / "m.csv")
    as_json = json.loads((tmp_path / "m.json").read_text())["per_tau"]
    assert report_from_csv((tmp_path / "m.csv").read_text()) == as_json


def test_metrics_summary_trace_needs_time_only(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    run_cli("simulate", "corpus:unary_increment", "--input", "11", "--snapshots", "summary", "--out", trace)
    assert run_cli("metrics", trace) == 2
    assert "--time-only" in capsys.readouterr().err
    assert run_cli("metrics", trace, "--time-only", "--out", tmp_path / "m.json") == 0


def test_metrics_empty_trace(tmp_path):
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    assert run_cli("metrics", empty) == 2
    trace = tmp_path / "t.jsonl"
    run_cli("simulate", "corpus:accept_immediately", "--max-local-steps", 0, "--out", trace)
    assert run_cli("metrics", trace) == 2


def test_scenario_roundtrip(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "simtime", "detector": "majority", "trials": 100, "seed": 42}))
    out = tmp_path / "r.json"
    assert run_cli("scenario", cfg, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert schemas.errors(doc, "report") == []
    from jsonschema import Draft202012Validator
    stat = schemas.load("report")["$defs"]["stat_report"]
    assert list(Draft202012Validator(stat).iter_errors(doc["report"])) == []


def test_scenario_overrides_and_output_field(tmp_path):
    out = tmp_path / "from_config.json"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "simtime", "trials": 5, "seed": 1, "output": str(out)}))
    assert run_cli("scenario", cfg, "--trials", 7, "--seed", 3) == 0
    assert json.loads(out.read_text())["report"]["trials"] == 7


@pytest.mark.parametrize("doc", [
    {"scenario": "nope", "seed": 1},
    {"scenario": "simtime"},
    {"scenario": "simtime", "seed": 1, "detector": "psychic"},
    {"scenario": "simtime", "seed": 1, "adversary": {"pads": [4, 4]}},
    [1, 2],
])
def test_bad_scenarios_exit_2(tmp_path, doc):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    assert run_cli("scenario", cfg) == 2


def test_quantum_check_corpus(tmp_path):
    out = tmp_path / "q.json"
    assert run_cli("quantum-check", "--seed", 1, "--trials", 30, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert schemas.errors(doc, "report") == []
    assert doc["report"]["within_bounds"]


def test_quantum_check_hamiltonian_file(tmp_path):
    h = tmp_path / "h.json"
    h.write_text(json.dumps({"n_qubits": 1, "entries": [[0, 1, 1.0, 0.0]]}))
    out = tmp_path / "q.json"
    assert run_cli("quantum-check", "--hamiltonian", h, "--tau", 1.5707963267948966, "--out", out) == 0
    state = json.loads(out.read_text())["report"]["per_tau"][0]["state"]
    assert state[1][1] == pytest.approx(-1.0, abs=1e-9)


def test_quantum_check_non_hermitian(tmp_path):
    h = tmp_path / "h.json"
    h.write_text(json.dumps({"n_qubits": 1, "entries": [[0, 0, 1.0, 0.5]]}))
    assert run_cli("quantum-check", "--hamiltonian", h) == 2


def test_console_script_and_log_env(tmp_path):
    out = tmp_path / "t.jsonl"
    proc = subprocess.run(
        [sys.executable, "-m", "relmachine.cli", "simulate", "corpus:unary_increment", "--input", "1",
         "--out", str(out)],
        capture_output=True, text=True, env={"RELMACHINE_LOG": "info", "PATH": ""},
    )
    assert proc.returncode == 0
    assert "outcome=accept" in proc.stderr


def test_all_schemas_are_valid():
    for name in schemas.NAMES:
        schemas.validator(name)
