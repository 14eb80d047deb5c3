"""Adversarial games and end-to-end scenarios over relative models.

Undecidability cannot be shown by running code.  What these scenarios do
show is the two halves of the argument in operational form: the access
guard makes the hidden information unreachable from the local frame, and
natural detectors that stay inside the guard score at chance.  Control
arms that are handed the answer score perfectly.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2_contingency
from statsmodels.stats.proportion import proportion_confint

from . import __version__, corpus
from .machine import MachineConfig, MachineSpec, QueryBinding, compose, run
from .metrics import ComplexityProfile, complexity_profile, lorentz_space, lorentz_time
from .oracles import OracleBinding, identity_oracle, parity_oracle, reveal_oracle
from .quantum import (
    PAULI_X, TIME_INT_BITS, decode_time, encode_amplitudes, encode_time, evolve, evolve_exact, measure_with_uncertainty, norm, quantization_bound,
    random_hermitian, random_state, schrodinger_oracle_binding,
)
from .relative_model import RelativeModel, default_layout
from .tape import GuardViolation, Interval, Tape


class GameSetupError(ValueError):
    pass


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


@dataclass
class StatReport:
    name: str
    trials: int
    successes: int
    aborted: int = 0
    extra: dict = field(default_factory=dict)
    log: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.trials < 1:
            raise GameSetupError("a game needs at least one trial")

    @property
    def accuracy(self) -> float:
        return self.successes / self.trials

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)

    def contains_chance(self, p: float = 0.5) -> bool:
        lo, hi = self.interval
        return lo <= p <= hi

    @property
    def log_digest(self) -> str:
        h = hashlib.sha256()
        for row in self.log:
            h.update(json.dumps(row, sort_keys=True).encode())
            h.update(b"\n")
        return h.hexdigest()

    def to_json(self) -> dict:
        lo, hi = self.interval
        return {
            "name": self.name, "trials": self.trials, "successes": self.successes,
            "accuracy": self.accuracy, "interval": [lo, hi], "confidence": 0.95,
            "aborted": self.aborted, "extra": self.extra, "trial_log_sha256": self.log_digest,
        }


def _trial_rngs(seed: int, trials: int):
    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        yield rng, int(rng.integers(2**32))


# -- SIMTIME / pSIMTIME ---------------------------------------------------------------

def _timing_game(name: str, spec: MachineSpec, padding: Sequence[int], trials: int, seed: int,
                 history_bits: int = 3, local_size: int = 16, max_local_steps: int = 500,
                 interpreter=None) -> tuple[StatReport, list[str]]:
    pads = list(padding)
    if len(pads) != 2 or pads[0] == pads[1]:
        raise GameSetupError("the padding game needs two distinct equiprobable pad values")
    layout = default_layout(spec, local_size)
    report = StatReport(name, trials, 0)
    finals = []
    for trial, (rng, model_seed) in enumerate(_trial_rngs(seed, trials)):
        coin = int(rng.integers(2))
        history = "".join(rng.choice(["0", "1"], size=history_bits))
        oracle = reveal_oracle(lambda c=coin: str(c))
        model = RelativeModel(spec, "_" + history, layout, oracles=[oracle], seed=model_seed,
                              snapshots="summary", padding=pads[coin], interpreter=interpreter)
        try:
            model.run_local(max_local_steps)
        except GuardViolation as exc:
            report.aborted += 1
            finals.append("<aborted>")
            report.log.append([trial, coin, None, f"guard:{exc.region}"])
            continue
        guess = model.local_symbols()[corpus.GUESS_CELL]
        report.successes += guess == str(coin)
        finals.append(model.local_symbols())
        report.log.append([trial, coin, guess, model.t])
    return report, finals


def run_simtime_game(detector: MachineSpec, padding_distribution: Sequence[int], trials: int,
                     seed: int, **kw) -> StatReport:
    """Binary guessing game: which of two pads did the adversary apply?"""
    report, _ = _timing_game("simtime", detector, padding_distribution, trials, seed, **kw)
    return report


def run_psimtime_game(detector: MachineSpec, padding_distribution: Sequence[int],
                      probabilistic_local_spec: MachineSpec, trials: int, seed: int,
                      **kw) -> StatReport:
    """As :func:`run_simtime_game` with a probabilistic machine run before the detector.

    Adds a chi-square test of independence between the pad choice and the
    final local tape.
    """
    spec = compose(probabilistic_local_spec, detector)
    report, finals = _timing_game("psimtime", spec, padding_distribution, trials, seed, **kw)
    coins = [row[1] for row in report.log]
    report.extra.update(independence_test(coins, finals))
    return report


def independence_test(coins: Sequence[int], finals: Sequence[str]) -> dict:
    tapes = sorted(set(finals))
    if len(tapes) < 2 or len(set(coins)) < 2:
        return {"chi2": 0.0, "chi2_dof": 0, "chi2_p": 1.0}
    table = np.zeros((2, len(tapes)))
    col = {t: i for i, t in enumerate(tapes)}
    for c, f in zip(coins, finals):
        table[c, col[f]] += 1
    stat, p, dof, _ = chi2_contingency(table)
    return {"chi2": float(stat), "chi2_dof": int(dof), "chi2_p": float(p)}


# -- MEASURE --------------------------------------------------------------------------

def _grid_range(interval: tuple[float, float], x_bits: int) -> tuple[int, int]:
    """Indices i with i / 2**x_bits inside the half-open interval."""
    lo, hi = interval
    scale = 2 ** x_bits
    return math.ceil(lo * scale), math.ceil(hi * scale) - 1


def image_contains(f: Callable[[float], float], interval, x_bits: int, y: float,
                   enumerate_limit: int = 4096) -> bool:
    """Is ``y`` = f(x~) for some grid point x~ in the uncertainty interval?

    Enumerates small candidate sets; larger ones are searched by bisection,
    which assumes ``f`` is monotone.
    """
    a, b = _grid_range(interval, x_bits)
    if b < a:
        return False
    scale = 2.0 ** x_bits
    if b - a + 1 <= enumerate_limit:
        return any(f(i / scale) == y for i in range(a, b + 1))
    increasing = f(b / scale) >= f(a / scale)
    lo, hi = a, b
    while lo <= hi:
        mid = (lo + hi) // 2
        v = f(mid / scale)
        if v == y:
            return True
        if (v < y) == increasing:
            lo = mid + 1
        else:
            hi = mid - 1
    return False


def interval_membership_detector(f: Callable[[float], float], x_bits: int):
    """Guess 'approximated' exactly when y falls outside f's image over X~."""

    def detect(x_measured: float, interval, y: float) -> int:
        return int(not image_contains(f, interval, x_bits, y))

    return detect


def double(x: float) -> float:
    return 2.0 * x


def midpoint_approximation(f):
    """Global machine's shortcut: evaluate f at the middle of X~."""
    return lambda x, interval: f((interval[0] + interval[1]) / 2)


def offset_approximation(f, delta: float = 1.0):
    return lambda x, interval: f(x) + delta


def run_measure_game(f: Callable[[float], float], f_tilde, k_bits: int, trials: int, seed: int,
                     x_bits: int = 32, detector=None) -> StatReport:
    """Hidden x, k-bit measurement, fair coin between f(x) and f~(x)."""
    detector = detector or interval_membership_detector(f, x_bits)
    report = StatReport("measure", trials, 0)
    tilde_trials = tilde_hits = violations = caught = 0
    for trial, (rng, _) in enumerate(_trial_rngs(seed, trials)):
        x = int(rng.integers(2 ** x_bits)) / 2 ** x_bits
        x_measured, interval = measure_with_uncertainty(x, k_bits)
        use_tilde = int(rng.integers(2))
        y = f_tilde(x, interval) if use_tilde else f(x)
        guess = detector(x_measured, interval, y)
        ok = guess == use_tilde
        report.successes += ok
        if use_tilde:
            tilde_trials += 1
            tilde_hits += ok
            if not image_contains(f, interval, x_bits, y):
                violations += 1
                caught += ok
        report.log.append([trial, use_tilde, guess])
    report.extra.update({
        "k_bits": k_bits, "x_bits": x_bits,
        "f_tilde_trials": tilde_trials, "f_tilde_successes": tilde_hits,
        "f_tilde_accuracy": tilde_hits / tilde_trials if tilde_trials else None,
        "envelope_violations": violations, "violations_caught": caught,
    })
    return report


# -- spoof-accept ------------------------------------------------------------------------

def halts_within(spec: MachineSpec, tape: str, horizon: int, head: int = 0) -> str | None:
    """Outcome of running ``spec`` on ``tape`` for at most ``horizon`` steps, or None."""
    t = Tape(set(spec.alphabet))
    t.write_string(0, tape)
    result = run(spec, MachineConfig(head, spec.start, t), horizon)
    return result.outcome if result.halted else None


def run_spoof_accept_scenario(local_spec: MachineSpec, horizon_T: int, candidate_bound: int,
                              seed: int, width: int = 3, local_input: str = "") -> dict:
    for cand in itertools.product("01", repeat=width):
        if halts_within(local_spec, "".join(cand) + local_input[width:], horizon_T) is None:
            raise GameSetupError(f"machine does not halt within {horizon_T} steps on {''.join(cand)}")
    model = RelativeModel(local_spec, local_input, seed=seed, local_size=max(width, len(local_input)) + 8)
    t_before = model.t
    result = model.spoof_accept(horizon_T, candidate_bound, width)
    report = {
        "found": result.found, "tape": result.tape[:width] if result.tape else None,
        "candidates_tried": result.candidates_tried, "search_global_steps": result.search_steps,
        "install_global_steps": result.install_writes, "install_local_steps": result.install_steps,
        "accepted": False, "local_steps_to_halt": None, "global_to_local_ratio": None,
    }
    if result.found:
        tau0 = model.tau
        outcome = model.run_local(horizon_T)
        report["accepted"] = outcome == "accept"
        report["local_steps_to_halt"] = model.tau - tau0
        report["global_to_local_ratio"] = (model.t - t_before) / model.tau
    return report


# -- relative oracle benchmark ------------------------------------------------------------

def query_machine(arg: Sequence[Interval], out: Interval, oracle: str) -> MachineSpec:
    q = QueryBinding("ASK", oracle, tuple(arg), out, "ACCEPT")
    return MachineSpec(["ASK", "ACCEPT", "REJECT"], corpus.SYMBOLS, {}, start="ASK",
                       query_states={"ASK": q})


def oracle_query_run(binding: OracleBinding, x: str, snapshots: str = "summary", seed: int = 0,
                     padding=None) -> RelativeModel:
    """One query of ``binding`` on argument ``x``; returns the finished model."""
    n = len(x)
    out = Interval(n, n + binding.declared_output_length)
    spec = query_machine([Interval(0, n)], out, binding.identifier)
    model = RelativeModel(spec, x, oracles=[binding], seed=seed, snapshots=snapshots,
                          local_size=out.stop, padding=padding)
    model.query_oracle()
    return model


def oracle_for_size(oracle_id: str, n: int, rng: np.random.Generator,
                    epsilon: float = 1e-9, precision: int = 16) -> tuple[OracleBinding, str]:
    """Binding and a random argument of size ``n`` (qubits for schrodinger)."""
    if oracle_id == "identity":
        return identity_oracle(n), "".join(rng.choice(["0", "1"], size=n))
    if oracle_id == "parity":
        return parity_oracle(), "".join(rng.choice(["0", "1"], size=n))
    if oracle_id == "schrodinger":
        H = random_hermitian(rng, n)
        binding = schrodinger_oracle_binding(H, epsilon, precision)
        return binding, binding.encode_query(random_state(rng, n), 0.5)
    raise GameSetupError(f"unknown oracle {oracle_id!r}")


def run_oracle_benchmark(oracle_ids: Sequence[str], sizes: Sequence[int] | Mapping[str, Sequence[int]],
                         seed: int, epsilon: float = 1e-9, precision: int = 16) -> dict[str, ComplexityProfile]:
    profiles = {}
    for k, oracle_id in enumerate(oracle_ids):
        ns = sizes[oracle_id] if isinstance(sizes, Mapping) else sizes
        rng = np.random.default_rng([seed, k])
        runs = {}
        for n in ns:
            binding, x = oracle_for_size(oracle_id, n, rng, epsilon, precision)
            runs[n] = oracle_query_run(binding, x).trace
        profile = complexity_profile(runs, oracle_id)
        if any(r.local != 1 for r in profile.rows):
            raise AssertionError(f"{oracle_id}: a query cost more than one local step")
        profiles[oracle_id] = profile
    return profiles


# -- Schrödinger scenario ---------------------------------------------------------------------

def schrodinger_machine(steps: int, state_bits: int, time_bits: int, mode: str) -> MachineSpec:
    """Local machine issuing one Schrödinger query per local step.

    Local tape: [psi(0) | tau_1 | ... | tau_steps | output].  In restart mode
    each query evolves psi(0) for tau_j; in step mode it evolves the previous
    output for tau_j, where the tau slots then hold increments.
    """
    psi = Interval(0, state_bits)
    out_start = state_bits + steps * time_bits
    out = Interval(out_start, out_start + state_bits)
    states = [f"Q{j}" for j in range(steps)] + ["ACCEPT", "REJECT"]
    queries = {}
    for j in range(steps):
        slot = Interval(state_bits + j * time_bits, state_bits + (j + 1) * time_bits)
        source = psi if mode == "restart" or j == 0 else out
        queries[f"Q{j}"] = QueryBinding(f"Q{j}", "schrodinger", (source, slot), out,
                                        f"Q{j + 1}" if j + 1 < steps else "ACCEPT")
    return MachineSpec(states, corpus.SYMBOLS, {}, start="Q0", query_states=queries)


def run_schrodinger_scenario(n_qubits: int, steps: int, epsilon: float, precision: int, seed: int,
                             H=None, psi0=None, taus: Sequence[float] | None = None,
                             mode: str = "restart") -> dict:
    if n_qubits > 10:
        raise GameSetupError("desk scale only: n_qubits <= 10")
    if mode not in ("restart", "step"):
        raise GameSetupError("mode must be 'restart' or 'step'")
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n_qubits) if H is None else np.asarray(H, dtype=complex)
    if psi0 is None:
        psi0 = random_state(rng, n_qubits)
    taus = [0.1 * (j + 1) for j in range(steps)] if taus is None else list(taus)
    if len(taus) != steps:
        raise GameSetupError("need one tau per step")
    binding = schrodinger_oracle_binding(H, epsilon, precision)
    state_bits = binding.declared_output_length
    time_bits = TIME_INT_BITS + binding.time_frac_bits
    slots = taus if mode == "restart" else [b - a for a, b in zip([0.0, *taus], taus)]
    tape = encode_amplitudes(psi0, precision) + "".join(encode_time(s, binding.time_frac_bits) for s in slots)
    spec = schrodinger_machine(steps, state_bits, time_bits, mode)
    model = RelativeModel(spec, tape, oracles=[binding], seed=seed, snapshots="summary",
                          local_size=len(tape) + state_bits)
    out = Interval(len(tape), len(tape) + state_bits)
    psi_in = prev_out = binding.decode_output(tape[:state_bits])
    tau_in = 0.0
    rows = []
    for j in range(steps):
        model.advance_local()
        slot = tape[state_bits + j * time_bits: state_bits + (j + 1) * time_bits]
        dt = decode_time(slot, binding.time_frac_bits)
        tau_in = dt if mode == "restart" else tau_in + dt
        src = psi_in if mode == "restart" else prev_out
        approx = evolve(src, H, dt, epsilon)
        exact = evolve_exact(src, H, dt)
        on_tape = binding.decode_output(model.local_symbols()[out.start:out.stop])
        rows.append({
            "tau": tau_in,
            "evolve_error": float(np.linalg.norm(approx - exact)),
            "tape_deviation": float(np.linalg.norm(on_tape - exact)),
            "unitarity_drift": abs(norm(approx) - norm(src)),
        })
        prev_out = on_tape
    K = model.trace.K
    for j, row in enumerate(rows):
        tau = j + 1
        row["gamma_t"] = lorentz_time(model.trace, tau) if tau < len(K) else None
        row["gamma_g"] = float(lorentz_space(model.trace, tau, state_bits)) if tau < len(K) else None
        row["global_steps"] = K[j] - (K[j - 1] if j else 0)
    final = binding.decode_output(model.local_symbols()[out.start:out.stop])
    return {
        "n_qubits": n_qubits, "steps": steps, "epsilon": epsilon, "precision": precision,
        "mode": mode, "local_steps": model.tau, "global_steps": model.t,
        "quantization_bound": quantization_bound(n_qubits, precision),
        "time_quantization": 2.0 ** -(binding.time_frac_bits + 1),
        "max_evolve_error": max(r["evolve_error"] for r in rows),
        "max_tape_deviation": max(r["tape_deviation"] for r in rows),
        "max_unitarity_drift": max(r["unitarity_drift"] for r in rows),
        "per_step": rows,
        "final_state": [[float(a.real), float(a.imag)] for a in final],
    }


def pauli_x_scenario(epsilon: float = 1e-9, precision: int = 40) -> dict:
    taus = [np.pi / 8, np.pi / 4, 3 * np.pi / 8, np.pi / 2]
    return run_schrodinger_scenario(1, 4, epsilon, precision, 0, H=PAULI_X,
                                    psi0=np.array([1, 0], dtype=complex), taus=taus)


def quantum_corpus(seed: int, count: int = 100, qubits: Sequence[int] = (1, 2, 3),
                   tau_range: tuple[float, float] = (-2.0, 2.0)):
    """Seeded (H, psi, tau) triples, each from its own child seed."""
    for child in np.random.SeedSequence(seed).spawn(count):
        rng = np.random.default_rng(child)
        n = int(rng.choice(qubits))
        yield random_hermitian(rng, n), random_state(rng, n), float(rng.uniform(*tau_range))


def run_quantum_check(seed: int, count: int = 100, epsilon: float = 1e-9,
                      qubits: Sequence[int] = (1, 2, 3)) -> dict:
    """Accuracy, unitarity, semigroup and linearity of :func:`evolve` over a seeded corpus."""
    err = drift = semigroup = linearity = 0.0
    rng = np.random.default_rng([seed, 1])
    for H, psi, tau in quantum_corpus(seed, count, qubits):
        approx = evolve(psi, H, tau, epsilon)
        err = max(err, float(np.linalg.norm(approx - evolve_exact(psi, H, tau))))
        drift = max(drift, abs(norm(approx) - norm(psi)))
        s = float(rng.uniform(0, 1))
        split = evolve(evolve(psi, H, s * tau, epsilon), H, (1 - s) * tau, epsilon)
        semigroup = max(semigroup, float(np.linalg.norm(split - approx)))
        other = random_state(rng, psi.shape[0].bit_length() - 1)
        a, b = np.exp(1j * rng.uniform(0, 2 * np.pi, size=2)) / np.sqrt(2)
        lhs = evolve(a * psi + b * other, H, tau, epsilon)
        rhs = a * approx + b * evolve(other, H, tau, epsilon)
        linearity = max(linearity, float(np.linalg.norm(lhs - rhs)))
    flipped = evolve(np.array([1, 0], dtype=complex), PAULI_X, np.pi / 2, epsilon)
    return {
        "count": count, "epsilon": epsilon, "max_evolve_error": err, "max_unitarity_drift": drift,
        "max_semigroup_error": semigroup, "max_linearity_error": linearity,
        "pauli_x_half_pi": [[float(z.real), float(z.imag)] for z in flipped],
        "pauli_x_error": float(np.linalg.norm(flipped - np.array([0, -1j]))),
    }


# -- config-driven dispatch ----------------------------------------------------------------------

def config_hash(config: Mapping) -> str:
    body = {k: v for k, v in config.items() if k != "output"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _detector(name: str) -> MachineSpec:
    try:
        return corpus.DETECTORS[name]()
    except KeyError:
        raise GameSetupError(f"unknown detector {name!r}") from None


_LOCAL_MACHINES = {
    "fair_coin": corpus.fair_coin,
    "rewind_noop": corpus.rewind_noop,
    "equality_checker": corpus.equality_checker,
    "first_cell_is_one": corpus.first_cell_is_one,
    "reject_all": corpus.reject_all,
}

_APPROXIMATIONS = {"midpoint": midpoint_approximation, "offset": offset_approximation}


def _local_machine(name: str) -> MachineSpec:
    try:
        return _LOCAL_MACHINES[name]()
    except KeyError:
        raise GameSetupError(f"unknown local machine {name!r}") from None


def run_scenario(config: Mapping) -> dict:
    """Run a scenario described by a config document; returns the report body."""
    name = config.get("scenario")
    adversary = dict(config.get("adversary") or {})
    seed = int(config.get("seed", 0))
    trials = int(config.get("trials", 1))
    if name == "simtime":
        body = run_simtime_game(_detector(config.get("detector", "constant")),
                                adversary.get("pads", [1, 9]), trials, seed).to_json()
    elif name == "psimtime":
        body = run_psimtime_game(_detector(config.get("detector", "constant")),
                                 adversary.get("pads", [1, 9]),
                                 _local_machine(adversary.get("local", "fair_coin")), trials, seed).to_json()
    elif name == "measure":
        approx = _APPROXIMATIONS.get(adversary.get("f_tilde", "midpoint"))
        if approx is None:
            raise GameSetupError(f"unknown approximation {adversary.get('f_tilde')!r}")
        body = run_measure_game(double, approx(double), int(adversary.get("k_bits", 8)), trials, seed,
                                x_bits=int(adversary.get("x_bits", 32))).to_json()
    elif name == "spoof":
        body = run_spoof_accept_scenario(_local_machine(adversary.get("machine", "equality_checker")),
                                         int(adversary.get("horizon", 3)),
                                         int(adversary.get("candidate_bound", 8)), seed,
                                         width=int(adversary.get("width", 3)))
    elif name == "oracle_benchmark":
        profiles = run_oracle_benchmark(adversary.get("oracles", ["identity", "parity"]),
                                        adversary.get("sizes", [4, 8, 16, 32]), seed)
        body = {k: {"profile": p.to_json(), "slope_estimate": p.slope_estimate} for k, p in profiles.items()}
    elif name == "quantum_check":
        body = run_quantum_check(seed, trials if "trials" in config else 100,
                                 float(adversary.get("epsilon", 1e-9)))
    elif name == "schrodinger":
        body = run_schrodinger_scenario(int(adversary.get("n_qubits", 1)), int(adversary.get("steps", 4)),
                                        float(adversary.get("epsilon", 1e-9)),
                                        int(adversary.get("precision", 32)), seed,
                                        mode=adversary.get("mode", "restart"))
    else:
        raise GameSetupError(f"unknown scenario {name!r}")
    return {"scenario": name, "report": body,
            "environment": {"artifact_version": __version__, "config_hash": config_hash(config)}}
