"""Command line: ``relmachine simulate | scenario | metrics | quantum-check``.

Exit codes: 0 success (including a local step limit), 1 a quantum check
exceeded its bound, 2 malformed input, 3 access-guard violation, 4 any
other runtime error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__, corpus, schemas
from .experiments import GameSetupError, config_hash, run_quantum_check, run_scenario
from .machine import MachineSpec, MalformedEncoding, SpecError, spec_from_json
from .metrics import MetricsError, per_tau_rows, report_to_csv, space_from_records
from .oracles import OracleError, identity_oracle, parity_oracle
from .quantum import (
    DimensionError, NotHermitianError, evolve, evolve_exact, hamiltonian_from_json, norm,
    remainder_bound, state_from_json, state_to_json, taylor_order_for,
)
from .relative_model import INTERPRETERS, RelativeModel
from .tape import GuardViolation, LayoutError, SymbolError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_MALFORMED = 2
EXIT_GUARD = 3
EXIT_RUNTIME = 4

log = logging.getLogger("relmachine")


class InputError(Exception):
    """Malformed or unusable input; maps to exit code 2."""


MALFORMED = (InputError, SpecError, MalformedEncoding, GameSetupError, LayoutError, SymbolError,
             DimensionError, NotHermitianError, MetricsError)


def timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- input -----------------------------------------------------------------------

def read_json(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def read_jsonl(path: str) -> list[dict]:
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    records = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{lineno}:{exc.colno}: {exc.msg}") from None
    return records


def validated(doc, schema: str, where: str):
    problems = schemas.errors(doc, schema)
    if problems:
        raise InputError(f"{where}: " + "; ".join(problems[:5]))
    return doc


_CORPUS_MACHINES = {
    "unary_increment": corpus.unary_increment,
    "accept_immediately": corpus.accept_immediately,
    "oscillator": corpus.oscillator,
    "first_cell_is_one": corpus.first_cell_is_one,
    "equality_checker": corpus.equality_checker,
    "reject_all": corpus.reject_all,
    "fair_coin": corpus.fair_coin,
    "rewind_noop": corpus.rewind_noop,
    **{f"detector_{k}": v for k, v in corpus.DETECTORS.items() if k != "tell_me"},
}


def load_machine_arg(arg: str) -> MachineSpec:
    """A machine file path, or ``corpus:NAME`` for a shipped machine."""
    if arg.startswith("corpus:"):
        name = arg.split(":", 1)[1]
        if name not in _CORPUS_MACHINES:
            raise InputError(f"unknown corpus machine {name!r}; known: {', '.join(sorted(_CORPUS_MACHINES))}")
        return _CORPUS_MACHINES[name]()
    return spec_from_json(validated(read_json(arg), "machine", arg))


def bind_oracles(spec: MachineSpec) -> list:
    bindings = {}
    for q in spec.query_states.values():
        if q.oracle == "identity":
            bindings[q.oracle] = identity_oracle(len(q.out_region))
        elif q.oracle == "parity":
            bindings[q.oracle] = parity_oracle()
        else:
            raise InputError(f"query state {q.state!r} names oracle {q.oracle!r}; "
                             "the command line binds only 'identity' and 'parity'")
    return list(bindings.values())


def parse_padding(text: str | None):
    if text is None:
        return None
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"--pad expects integers separated by commas, got {text!r}") from None
    if any(v < 0 for v in values):
        raise InputError("--pad values must be non-negative")
    return values[0] if len(values) == 1 else values


@contextmanager
def output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# -- commands ----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec = load_machine_arg(args.machine)
    bits = args.input
    if set(bits) - set(spec.alphabet):
        raise InputError(f"input {bits!r} uses symbols outside the alphabet {list(spec.alphabet)}")
    model = RelativeModel(
        spec, bits, oracles=bind_oracles(spec), seed=args.seed,
        interpreter=INTERPRETERS[args.interpreter](), snapshots=args.snapshots,
        padding=parse_padding(args.pad), local_size=max(args.local_size, len(bits)),
    )
    try:
        outcome = model.run_local(args.max_local_steps)
    finally:
        log.info("t=%d tau=%d state=%s", model.t, model.tau, model.local_config.state)
    records = model.trace_records()
    records[-1]["outcome"] = outcome
    with output(args.out) as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    log.info("outcome=%s local tape=%r", outcome, model.local_symbols().rstrip("_"))
    return EXIT_OK


def cmd_scenario(args) -> int:
    config = read_json(args.config)
    if not isinstance(config, dict):
        raise InputError(f"{args.config}: scenario config must be a JSON object")
    if args.seed is not None:
        config["seed"] = args.seed
    if args.trials is not None:
        config["trials"] = args.trials
    if args.epsilon is not None:
        config.setdefault("adversary", {})["epsilon"] = args.epsilon
    if args.precision is not None:
        config.setdefault("adversary", {})["precision"] = args.precision
    validated(config, "scenario", args.config)
    result = run_scenario(config)
    result["generated_at"] = timestamp()
    with output(args.out or config.get("output")) as fh:
        fh.write(dump(result))
    return EXIT_OK


def trace_parts(records: list[dict], where: str):
    for i, rec in enumerate(records, 1):
        validated(rec, "trace_record", f"{where} record {i}")
    headers = [r for r in records if r["type"] == "header"]
    if len(headers) != 1:
        raise InputError(f"{where}: expected one header record, found {len(headers)}")
    summaries = sorted((r for r in records if r["type"] == "summary"), key=lambda r: r["tau"])
    if not summaries:
        raise InputError(f"{where}: empty trace (no completed local steps)")
    steps = [r for r in records if r["type"] == "step"]
    return headers[0], summaries, steps


def cmd_metrics(args) -> int:
    records = read_jsonl(args.trace)
    if not records:
        raise InputError(f"{args.trace}: empty trace")
    header, summaries, steps = trace_parts(records, args.trace)
    K = [r["k_tau"] for r in summaries]
    g = None
    if not args.time_only:
        if header["mode"] != "full":
            raise InputError(
                f"{args.trace}: space metrics need per-step records, which a summary-mode trace "
                "omits; rerun simulate with --snapshots full, or pass --time-only"
            )
        g = space_from_records(steps, header["layout"], K)
        recorded = [r["g_tau"] for r in summaries]
        if g != recorded:
            raise RuntimeError(f"recounted g {g} disagrees with the recorded {recorded}")
    report = {
        "per_tau": per_tau_rows(K, g, args.output_length),
        "profile": [], "slope_estimate": None, "K": K, "output_length": args.output_length,
    }
    with output(args.out) as fh:
        if args.format == "csv":
            fh.write(report_to_csv(report))
        else:
            digest = hashlib.sha256(json.dumps(records, sort_keys=True).encode()).hexdigest()
            report["environment"] = {"artifact_version": __version__, "config_hash": digest}
            report["generated_at"] = timestamp()
            fh.write(dump(report))
    return EXIT_OK


def _hamiltonian_check(args) -> dict:
    H = hamiltonian_from_json(read_json(args.hamiltonian))
    if args.state:
        psi = state_from_json(read_json(args.state))
    else:
        psi = np.zeros(H.shape[0], dtype=complex)
        psi[0] = 1.0
    if abs(norm(psi) - 1.0) > 1e-9:
        raise InputError(f"state has norm {norm(psi):.12g}, expected a unit vector")
    rows = []
    for tau in args.tau:
        approx = evolve(psi, H, tau, args.epsilon)
        J = taylor_order_for(H, tau, args.epsilon)
        rows.append({
            "tau": tau, "order": J, "remainder_bound": remainder_bound(H, tau, J),
            "evolve_error": float(np.linalg.norm(approx - evolve_exact(psi, H, tau))),
            "unitarity_drift": abs(norm(approx) - norm(psi)),
            "state": state_to_json(approx),
        })
    return {
        "epsilon": args.epsilon, "dimension": H.shape[0], "matrix_entries": H.size, "per_tau": rows,
        "max_evolve_error": max(r["evolve_error"] for r in rows),
        "max_unitarity_drift": max(r["unitarity_drift"] for r in rows),
    }


def cmd_quantum_check(args) -> int:
    if args.hamiltonian:
        body = _hamiltonian_check(args)
        ok = body["max_evolve_error"] <= args.epsilon
        config = {"command": "quantum-check", "hamiltonian": read_json(args.hamiltonian),
                  "state": read_json(args.state) if args.state else None,
                  "tau": args.tau, "epsilon": args.epsilon}
    else:
        count = 100 if args.trials is None else args.trials
        body = run_quantum_check(args.seed, count, args.epsilon)
        ok = (body["max_evolve_error"] <= args.epsilon
              and body["max_unitarity_drift"] <= args.epsilon + 1e-12
              and body["max_semigroup_error"] <= 2 * args.epsilon + 1e-10
              and body["max_linearity_error"] <= 2 * args.epsilon + 1e-10)
        config = {"command": "quantum-check", "seed": args.seed, "trials": count, "epsilon": args.epsilon}
    body["within_bounds"] = ok
    result = {"command": "quantum-check", "report": body, "generated_at": timestamp(),
              "environment": {"artifact_version": __version__, "config_hash": config_hash(config)}}
    with output(args.out) as fh:
        fh.write(dump(result))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# -- wiring ------------------------------------------------------------------------------

def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relmachine", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a local machine inside a relative model")
    p.add_argument("machine", help="machine JSON file, or corpus:NAME")
    p.add_argument("--input", default="", help="initial local tape")
    p.add_argument("--max-local-steps", type=int, default=100)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--snapshots", choices=("full", "summary"), default="full")
    p.add_argument("--interpreter", choices=sorted(INTERPRETERS), default="direct")
    p.add_argument("--pad", help="scrap padding per update: N, or a comma schedule like 0,8")
    p.add_argument("--local-size", type=int, default=64)
    p.add_argument("--out", help="trace JSON-lines path (stdout when omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", help="run a game or demonstration from a config file")
    p.add_argument("config")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--trials", type=_positive)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--precision", type=_positive)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("metrics", help="Lorentz factors from a simulate trace")
    p.add_argument("trace")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output-length", type=_positive, default=1,
                   help="output length that normalises the space factor")
    p.add_argument("--time-only", action="store_true", help="skip space metrics")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("quantum-check", help="check truncated evolution against eigendecomposition")
    p.add_argument("--hamiltonian", help="Hamiltonian JSON file; omit for the seeded random corpus")
    p.add_argument("--state", help="state JSON file ([[re, im], ...]); default |0...0>")
    p.add_argument("--tau", type=float, nargs="+", default=[1.0])
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--trials", type=_positive)
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--precision", type=_positive, help="accepted for symmetry; unused here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_quantum_check)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("RELMACHINE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MALFORMED as exc:
        print(f"relmachine: error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except GuardViolation as exc:
        print(f"relmachine: guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (OracleError, Exception) as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"relmachine: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
