"""Turing machine specifications, single-step semantics and the bit encoding.

A :class:`MachineSpec` carries a partial deterministic transition table,
an optional probabilistic table and optional oracle query states.  Query
states have no transitions of their own; only a relative model can service
them.
"""
from __future__ import annotations

import functools
import json
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .tape import BLANK, LOCAL_ALPHABET, Interval, Tape, WriteOp

SCHEMA_VERSION = 1
ENCODING_VERSION = 1

LEFT, RIGHT = "L", "R"
_MOVES = {LEFT: -1, RIGHT: 1}


class MachineError(Exception):
    pass


class SpecError(MachineError, ValueError):
    """Structurally invalid machine specification."""


class UndefinedTransition(MachineError):
    def __init__(self, symbol: str, state: str):
        self.symbol = symbol
        self.state = state
        super().__init__(f"no transition for symbol {symbol!r} in state {state!r}")


class MachineHalted(MachineError):
    """Step requested from ACCEPT or REJECT."""


class QueryStateError(MachineError):
    """A query state can only be serviced by a relative model."""


class MalformedEncoding(MachineError, ValueError):
    pass


@dataclass(frozen=True)
class Action:
    write: str
    next: str
    move: str

    def __post_init__(self):
        if self.move not in _MOVES:
            raise SpecError(f"move must be 'L' or 'R', got {self.move!r}")


@dataclass(frozen=True)
class QueryBinding:
    """Query state bound to an oracle.

    Regions are offsets into the local tape.  The argument may span several
    intervals; they are concatenated in order.
    """

    state: str
    oracle: str
    arg_region: tuple[Interval, ...]
    out_region: Interval
    next: str

    def __post_init__(self):
        regions = self.arg_region
        if isinstance(regions, Interval) or (
            len(regions) == 2 and all(isinstance(v, int) for v in regions)
        ):
            regions = (regions,)
        object.__setattr__(self, "arg_region", tuple(Interval.coerce(r) for r in regions))
        object.__setattr__(self, "out_region", Interval.coerce(self.out_region))

    @property
    def arg_length(self) -> int:
        return sum(len(r) for r in self.arg_region)


Key = tuple  # (read symbol, state)


@dataclass(frozen=True)
class MachineSpec:
    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    transitions: Mapping[Key, Action]
    start: str = "START"
    accept: str = "ACCEPT"
    reject: str = "REJECT"
    probabilistic: Mapping[Key, tuple[tuple[Action, float], ...]] = field(default_factory=dict)
    query_states: Mapping[str, QueryBinding] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "transitions", dict(self.transitions))
        object.__setattr__(
            self, "probabilistic",
            {k: tuple((a, float(p)) for a, p in v) for k, v in self.probabilistic.items()},
        )
        object.__setattr__(self, "query_states", dict(self.query_states))
        self._validate()

    def _validate(self):
        states, alphabet = set(self.states), set(self.alphabet)
        if len(states) != len(self.states):
            raise SpecError("duplicate state names")
        if len(alphabet) != len(self.alphabet):
            raise SpecError("duplicate alphabet symbols")
        if BLANK not in alphabet:
            raise SpecError(f"alphabet must contain the blank {BLANK!r}")
        if any(len(s) != 1 for s in alphabet):
            raise SpecError("alphabet symbols must be single characters")
        for name in (self.start, self.accept, self.reject):
            if name not in states:
                raise SpecError(f"state {name!r} missing from Q")
        if self.accept == self.reject:
            raise SpecError("ACCEPT and REJECT must differ")
        halting = {self.accept, self.reject}
        for table in (self.transitions, self.probabilistic):
            for symbol, state in table:
                if symbol not in alphabet or state not in states:
                    raise SpecError(f"transition key ({symbol!r}, {state!r}) outside Γ × Q")
                if state in halting:
                    raise SpecError(f"transition defined on halting state {state!r}")
                if state in self.query_states:
                    raise SpecError(f"transition defined on query state {state!r}")
        both = set(self.transitions) & set(self.probabilistic)
        if both:
            raise SpecError(f"keys with both deterministic and probabilistic rules: {sorted(both)}")
        actions = list(self.transitions.values())
        for key, successors in self.probabilistic.items():
            if not successors:
                raise SpecError(f"empty successor list for {key}")
            probs = [p for _, p in successors]
            if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
                raise SpecError(f"successor probabilities for {key} must be >= 0 and sum to 1")
            actions.extend(a for a, _ in successors)
        for action in actions:
            if action.write not in alphabet or action.next not in states:
                raise SpecError(f"action {action} outside Γ × Q")
        for state, binding in self.query_states.items():
            if state != binding.state:
                raise SpecError(f"query binding keyed {state!r} names {binding.state!r}")
            if state not in states or state in halting:
                raise SpecError(f"query state {state!r} must be a non-halting state of Q")
            if binding.next not in states:
                raise SpecError(f"query state {state!r} continues to unknown state {binding.next!r}")

    def is_halting(self, state: str) -> bool:
        return state in (self.accept, self.reject)

    @property
    def is_probabilistic(self) -> bool:
        return bool(self.probabilistic)


@dataclass(frozen=True)
class MachineConfig:
    head: int
    state: str
    tape: Tape


@dataclass(frozen=True)
class RunResult:
    outcome: str  # "accept" | "reject" | "timeout"
    steps: int
    config: MachineConfig

    @property
    def halted(self) -> bool:
        return self.outcome != "timeout"


def transition(spec: MachineSpec, symbol: str, state: str, rng=None) -> Action:
    """Look up (or sample) the action for ``(symbol, state)``."""
    action = spec.transitions.get((symbol, state))
    if action is not None:
        return action
    successors = spec.probabilistic.get((symbol, state))
    if successors is None:
        raise UndefinedTransition(symbol, state)
    if len(successors) == 1:
        return successors[0][0]
    if rng is None:
        raise MachineError("probabilistic transition needs a random source")
    u = rng.random()
    acc = 0.0
    for action, p in successors:
        acc += p
        if u < acc:
            return action
    return successors[-1][0]


def step(spec: MachineSpec, config: MachineConfig, rng=None) -> MachineConfig:
    if spec.is_halting(config.state):
        raise MachineHalted(f"machine already halted in {config.state!r}")
    if config.state in spec.query_states:
        raise QueryStateError(f"state {config.state!r} is a query state")
    symbol = config.tape.read(config.head)
    action = transition(spec, symbol, config.state, rng)
    config.tape.apply_write(WriteOp(action.write, config.head))
    return MachineConfig(config.head + _MOVES[action.move], action.next, config.tape)


def run(spec: MachineSpec, config: MachineConfig, max_steps: int, rng=None) -> RunResult:
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    steps = 0
    while not spec.is_halting(config.state):
        if steps == max_steps:
            return RunResult("timeout", steps, config)
        config = step(spec, config, rng)
        steps += 1
    return RunResult("accept" if config.state == spec.accept else "reject", steps, config)


def move_offset(move: str) -> int:
    return _MOVES[move]


def compose(first: MachineSpec, second: MachineSpec, prefixes=("a.", "b.")) -> MachineSpec:
    """Run ``first`` and continue with ``second`` wherever ``first`` halts."""
    pa, pb = prefixes
    bridge = pb + second.start

    def rename_a(state):
        return bridge if first.is_halting(state) else pa + state

    def act_a(action):
        return Action(action.write, rename_a(action.next), action.move)

    def act_b(action):
        return Action(action.write, pb + action.next, action.move)

    states = [pa + s for s in first.states if not first.is_halting(s)] + [pb + s for s in second.states]
    alphabet = list(first.alphabet) + [s for s in second.alphabet if s not in first.alphabet]
    transitions = {(sym, pa + st): act_a(a) for (sym, st), a in first.transitions.items()}
    transitions.update({(sym, pb + st): act_b(a) for (sym, st), a in second.transitions.items()})
    probabilistic = {
        (sym, pa + st): tuple((act_a(a), p) for a, p in succ)
        for (sym, st), succ in first.probabilistic.items()
    }
    probabilistic.update({
        (sym, pb + st): tuple((act_b(a), p) for a, p in succ)
        for (sym, st), succ in second.probabilistic.items()
    })
    queries = {}
    for st, q in first.query_states.items():
        queries[pa + st] = replace(q, state=pa + st, next=rename_a(q.next))
    for st, q in second.query_states.items():
        queries[pb + st] = replace(q, state=pb + st, next=pb + q.next)
    return MachineSpec(
        states, alphabet, transitions,
        start=rename_a(first.start), accept=pb + second.accept, reject=pb + second.reject,
        probabilistic=probabilistic, query_states=queries,
    )


# -- bit encoding -----------------------------------------------------------
#
# version(4) | names(Q) | names(Γ) | start accept reject | det rows |
# prob rows | query rows.  Counts and lengths are 16-bit, name lengths
# 8-bit, state/symbol references use the minimal fixed width for |Q|/|Γ|.

_COUNT = 16
_NAME = 8


def _width(n: int) -> int:
    return max(1, (n - 1).bit_length())


class _BitWriter:
    def __init__(self):
        self.parts: list[str] = []

    def uint(self, value: int, width: int):
        if value < 0 or value >= 1 << width:
            raise SpecError(f"value {value} does not fit in {width} bits")
        self.parts.append(format(value, f"0{width}b"))

    def name(self, text: str):
        raw = text.encode("utf-8")
        self.uint(len(raw), _NAME)
        for byte in raw:
            self.uint(byte, 8)

    def double(self, value: float):
        self.uint(int.from_bytes(struct.pack(">d", value), "big"), 64)

    def bits(self) -> str:
        return "".join(self.parts)


class _BitReader:
    def __init__(self, bits: str):
        self.bits = bits
        self.pos = 0

    def uint(self, width: int) -> int:
        end = self.pos + width
        if end > len(self.bits):
            raise MalformedEncoding("bitstring ended inside a field")
        chunk = self.bits[self.pos:end]
        self.pos = end
        return int(chunk, 2)

    def name(self) -> str:
        n = self.uint(_NAME)
        raw = bytes(self.uint(8) for _ in range(n))
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedEncoding("name field is not UTF-8") from exc

    def double(self) -> float:
        return struct.unpack(">d", self.uint(64).to_bytes(8, "big"))[0]

    def ref(self, table: Sequence[str], width: int) -> str:
        i = self.uint(width)
        if i >= len(table):
            raise MalformedEncoding(f"reference {i} outside a table of {len(table)}")
        return table[i]


def encode_machine(spec: MachineSpec) -> str:
    """Self-delimiting binary encoding of ``spec`` as a '0'/'1' string."""
    cached = spec.__dict__.get("_encoding")
    if cached is None:
        cached = _encode(spec)
        object.__setattr__(spec, "_encoding", cached)
    return cached


def _encode(spec: MachineSpec) -> str:
    w = _BitWriter()
    w.uint(ENCODING_VERSION, 4)
    q_index = {s: i for i, s in enumerate(spec.states)}
    g_index = {s: i for i, s in enumerate(spec.alphabet)}
    wq, wg = _width(len(spec.states)), _width(len(spec.alphabet))
    for table in (spec.states, spec.alphabet):
        w.uint(len(table), _COUNT)
        for name in table:
            w.name(name)
    for name in (spec.start, spec.accept, spec.reject):
        w.uint(q_index[name], wq)

    def action(a: Action):
        w.uint(g_index[a.write], wg)
        w.uint(q_index[a.next], wq)
        w.uint(a.move == RIGHT, 1)

    def key(k):
        w.uint(g_index[k[0]], wg)
        w.uint(q_index[k[1]], wq)

    rows = sorted(spec.transitions.items(), key=lambda kv: (g_index[kv[0][0]], q_index[kv[0][1]]))
    w.uint(len(rows), _COUNT)
    for k, a in rows:
        key(k)
        action(a)
    rows = sorted(spec.probabilistic.items(), key=lambda kv: (g_index[kv[0][0]], q_index[kv[0][1]]))
    w.uint(len(rows), _COUNT)
    for k, successors in rows:
        key(k)
        w.uint(len(successors), _COUNT)
        for a, p in successors:
            action(a)
            w.double(p)
    bindings = sorted(spec.query_states.values(), key=lambda b: q_index[b.state])
    w.uint(len(bindings), _COUNT)
    for b in bindings:
        w.uint(q_index[b.state], wq)
        w.name(b.oracle)
        w.uint(len(b.arg_region), _NAME)
        for r in (*b.arg_region, b.out_region):
            w.uint(r.start, _COUNT)
            w.uint(r.stop, _COUNT)
        w.uint(q_index[b.next], wq)
    return w.bits()


@functools.lru_cache(maxsize=256)
def decode_machine(bits: str) -> MachineSpec:
    """Inverse of :func:`encode_machine`; raises :class:`MalformedEncoding`."""
    if not bits:
        raise MalformedEncoding("empty bitstring")
    if set(bits) - {"0", "1"}:
        raise MalformedEncoding("bitstring contains symbols other than 0/1")
    r = _BitReader(bits)
    try:
        if r.uint(4) != ENCODING_VERSION:
            raise MalformedEncoding("unknown encoding version")
        tables = []
        for _ in range(2):
            tables.append([r.name() for _ in range(r.uint(_COUNT))])
        states, alphabet = tables
        if not states or not alphabet:
            raise MalformedEncoding("empty state set or alphabet")
        wq, wg = _width(len(states)), _width(len(alphabet))
        start, accept, reject = (r.ref(states, wq) for _ in range(3))

        def action():
            return Action(r.ref(alphabet, wg), r.ref(states, wq), RIGHT if r.uint(1) else LEFT)

        transitions = {}
        for _ in range(r.uint(_COUNT)):
            k = (r.ref(alphabet, wg), r.ref(states, wq))
            if k in transitions:
                raise MalformedEncoding(f"duplicate transition row {k}")
            transitions[k] = action()
        probabilistic = {}
        for _ in range(r.uint(_COUNT)):
            k = (r.ref(alphabet, wg), r.ref(states, wq))
            if k in probabilistic:
                raise MalformedEncoding(f"duplicate probabilistic row {k}")
            successors = []
            for _ in range(r.uint(_COUNT)):
                a = action()
                p = r.double()
                if not math.isfinite(p):
                    raise MalformedEncoding("non-finite probability")
                successors.append((a, p))
            probabilistic[k] = tuple(successors)
        queries = {}
        for _ in range(r.uint(_COUNT)):
            state = r.ref(states, wq)
            oracle = r.name()
            regions = [Interval(r.uint(_COUNT), r.uint(_COUNT)) for _ in range(r.uint(_NAME) + 1)]
            if state in queries:
                raise MalformedEncoding(f"duplicate query state {state!r}")
            queries[state] = QueryBinding(state, oracle, tuple(regions[:-1]), regions[-1], r.ref(states, wq))
        if r.pos != len(bits):
            raise MalformedEncoding(f"{len(bits) - r.pos} trailing bits")
        return MachineSpec(states, alphabet, transitions, start, accept, reject, probabilistic, queries)
    except MalformedEncoding:
        raise
    except (MachineError, ValueError) as exc:
        raise MalformedEncoding(str(exc)) from exc


# -- JSON machine files -------------------------------------------------------

def _region_json(r: Interval) -> list[int]:
    return [r.start, r.stop]


def spec_to_json(spec: MachineSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "states": list(spec.states),
        "start": spec.start,
        "accept": spec.accept,
        "reject": spec.reject,
        "alphabet": list(spec.alphabet),
        "transitions": [
            {"read": k[0], "state": k[1], "write": a.write, "next": a.next, "move": a.move}
            for k, a in spec.transitions.items()
        ],
        "probabilistic": [
            {
                "read": k[0], "state": k[1],
                "successors": [
                    {"write": a.write, "next": a.next, "move": a.move, "p": p} for a, p in succ
                ],
            }
            for k, succ in spec.probabilistic.items()
        ],
        "query_states": [
            {
                "state": b.state, "oracle": b.oracle,
                "arg_region": [_region_json(r) for r in b.arg_region],
                "out_region": _region_json(b.out_region),
                "next": b.next,
            }
            for b in spec.query_states.values()
        ],
    }


def spec_from_json(doc: Mapping) -> MachineSpec:
    """Build a spec from a machine-definition document; raises SpecError."""
    try:
        version = doc["schema_version"]
    except (KeyError, TypeError):
        raise SpecError("machine file lacks the mandatory schema_version field") from None
    if version != SCHEMA_VERSION:
        raise SpecError(f"unsupported schema_version {version!r}")
    try:
        transitions = {
            (row["read"], row["state"]): Action(row["write"], row["next"], row["move"])
            for row in doc.get("transitions", [])
        }
        probabilistic = {
            (row["read"], row["state"]): tuple(
                (Action(s["write"], s["next"], s["move"]), s["p"]) for s in row["successors"]
            )
            for row in doc.get("probabilistic", [])
        }
        queries = {}
        for row in doc.get("query_states", []):
            arg = row["arg_region"]
            if arg and isinstance(arg[0], int):
                arg = [arg]
            out = row.get("out_region", arg[0] if arg else [0, 0])
            queries[row["state"]] = QueryBinding(
                row["state"], row["oracle"], tuple(Interval.coerce(a) for a in arg),
                Interval.coerce(out), row.get("next", doc["accept"]),
            )
        return MachineSpec(
            doc["states"], doc.get("alphabet", LOCAL_ALPHABET), transitions,
            doc["start"], doc["accept"], doc["reject"], probabilistic, queries,
        )
    except KeyError as exc:
        raise SpecError(f"machine file missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(str(exc)) from exc


def load_machine(path) -> MachineSpec:
    with open(path) as fh:
        return spec_from_json(json.load(fh))


def dump_machine(spec: MachineSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_json(spec), fh, indent=2)
        fh.write("\n")
