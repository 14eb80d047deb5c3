"""Nested simulation: a global machine interpreting an encoded local machine.

The global machine is driven one micro-operation at a time.  Each call to
:meth:`RelativeModel.global_step` advances the global clock ``t`` by one and
executes exactly one micro-op (a read, a write, or a commit that installs
the local machine's next state).  The local clock ``tau`` moves only when a
commit completes an application of the local transition function, and
``K`` collects the global times at which that happens.

Global-machine behaviour is supplied by plan generators: an interpreter
yields the micro-ops for one ordinary local step, the model yields the
micro-ops for oracle queries and spoofing, and an optional padding
adversary prefixes every update with scrap-region busywork.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .machine import (
    MachineConfig, MachineError, MachineSpec, QueryBinding, decode_machine, encode_machine,
    move_offset, step as machine_step, transition,
)
from .oracles import OracleBinding, OracleError
from .tape import (
    GLOBAL, LOCAL, LOCAL_ALPHABET, AccessGuard, Interval, LayoutError, Tape, TapeLayout,
    TapeState, WriteOp, check_layout,
)

# fixed scrap offsets
PAD_CELL = 0
REGISTER_CELL = 1
WORKSPACE = 2


class LayoutTooSmall(LayoutError):
    pass


class LocalHalted(MachineError):
    pass


# -- micro-operations ----------------------------------------------------------

@dataclass(frozen=True)
class Read:
    cell: int
    actor: str = GLOBAL


@dataclass(frozen=True)
class Write:
    cell: int
    symbol: str
    tag: str = "write"


@dataclass(frozen=True)
class Commit:
    """Install the local machine's next state (and optionally one last write)."""

    state: str
    head: int
    write: tuple[int, str] | None = None


@dataclass(frozen=True)
class StepRecord:
    t: int
    actor: str
    op: str
    cell: int | None
    symbol: str | None
    state: str
    tau: int
    tau_tilde: int

    def to_json(self) -> dict:
        return {"type": "step", "t": self.t, "actor": self.actor, "op": self.op,
                "cell": self.cell, "symbol": self.symbol, "state": self.state,
                "tau": self.tau, "tau_tilde": self.tau_tilde}


@dataclass(frozen=True)
class LocalFrame:
    """What the local machine can see at a local tick: S', q' and its head."""

    tape: TapeState
    state: str
    head: int


# -- interpreters --------------------------------------------------------------

class DirectInterpreter:
    """Reference global machine: read, stash in a register, write, commit.

    Every local step costs the same four global steps.
    """

    name = "direct"
    cost = 4

    def plan(self, model: "RelativeModel") -> Iterator:
        cfg = model.local_config
        symbol = yield Read(cfg.head, LOCAL)
        yield Write(model.scrap_cell(REGISTER_CELL), symbol)
        action = transition(model.local_spec, symbol, cfg.state, model.local_rng)
        yield Write(cfg.head, action.write)
        yield Commit(action.next, cfg.head + move_offset(action.move))


class AtomicInterpreter:
    """Performs a whole local step in a single global step."""

    name = "atomic"
    cost = 1

    def plan(self, model: "RelativeModel") -> Iterator:
        cfg = model.local_config
        symbol = model.tape.read(cfg.head, LOCAL)
        action = transition(model.local_spec, symbol, cfg.state, model.local_rng)
        yield Commit(action.next, cfg.head + move_offset(action.move), (cfg.head, action.write))


INTERPRETERS = {"direct": DirectInterpreter, "atomic": AtomicInterpreter}


# -- padding adversaries ---------------------------------------------------------

Padding = Callable[[np.random.Generator], int]


def constant_padding(n: int) -> Padding:
    if n < 0:
        raise ValueError("padding must be non-negative")
    return lambda rng: n


def schedule_padding(values: Sequence[int], then: int = 0) -> Padding:
    """Pads the k-th update by ``values[k]``, later ones by ``then``."""
    it = iter(list(values))
    return lambda rng: next(it, then)


def uniform_padding(low: int, high: int) -> Padding:
    return lambda rng: int(rng.integers(low, high + 1))


def choice_padding(values: Sequence[int]) -> Padding:
    values = list(values)
    return lambda rng: int(values[rng.integers(len(values))])


def as_padding(distribution) -> Padding | None:
    if distribution is None or callable(distribution):
        return distribution
    if isinstance(distribution, (int, np.integer)):
        return constant_padding(int(distribution))
    return schedule_padding(distribution)


class _LoggedRandom:
    def __init__(self, gen: np.random.Generator, log: list, clock: Callable[[], int]):
        self.gen = gen
        self.log = log
        self.clock = clock

    def random(self) -> float:
        u = float(self.gen.random())
        self.log.append((self.clock(), u))
        return u


# -- trace -----------------------------------------------------------------------

@dataclass
class Trace:
    """Instrumentation record of a run.

    Interval ``i`` is ``(k_i, k_{i+1}]`` with ``k_0 = 0``; ``runtime_sets[i]``,
    ``delta_sizes[i]`` and ``write_ops[i]`` belong to it.  ``space_per_tau[i]``
    is ``g_{i+1}``, the footprint of the interval ending at ``K[i]``.
    """

    mode: str
    layout: TapeLayout
    K: list[int] = field(default_factory=list)
    K_tilde: list[int] = field(default_factory=list)
    runtime_sets: list[list[TapeState]] = field(default_factory=list)
    delta_sizes: list[int] = field(default_factory=list)
    write_ops: list[list[WriteOp]] = field(default_factory=list)
    space_per_tau: list[int] = field(default_factory=list)
    local_frames: list[LocalFrame] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    rng_log: list[tuple[int, float]] = field(default_factory=list)
    scrap_footprint: set[int] = field(default_factory=set)

    @property
    def full(self) -> bool:
        return self.mode == "full"

    def k(self, tau: int) -> int:
        """k_tau, with k_0 = 0."""
        return 0 if tau == 0 else self.K[tau - 1]

    def invariant_violations(self) -> list[str]:
        bad = []
        if any(b <= a for a, b in zip(self.K, self.K[1:])):
            bad.append("K is not strictly increasing")
        for i, k in enumerate(self.K):
            size = self.delta_sizes[i]
            if k - self.k(i) != size + 1:
                bad.append(f"interval {i}: k diff {k - self.k(i)} != |Delta| + 1 = {size + 1}")
            if self.full and len(self.runtime_sets[i]) != size:
                bad.append(f"interval {i}: {len(self.runtime_sets[i])} snapshots, count {size}")
            for op in self.write_ops[i]:
                if not self.k(i) < op.global_time <= k:
                    bad.append(f"interval {i}: write at t={op.global_time} outside ({self.k(i)}, {k}]")
        times = [op.global_time for ops in self.write_ops for op in ops]
        if any(b <= a for a, b in zip(times, times[1:])):
            bad.append("write times are not strictly increasing")
        kt = set(self.K_tilde)
        if not set(self.K) <= kt or not set(times) <= kt:
            bad.append("K_tilde misses a write or completion time")
        if [k for k in self.K_tilde if k in set(self.K)] != self.K:
            bad.append("K_tilde restricted to completions differs from K")
        return bad

    def summary_records(self) -> list[dict]:
        return [
            {"type": "summary", "tau": i + 1, "k_tau": k, "g_tau": self.space_per_tau[i],
             "write_count": len(self.write_ops[i]), "delta_size": self.delta_sizes[i]}
            for i, k in enumerate(self.K)
        ]


# -- the model ---------------------------------------------------------------------

def default_layout(local_spec: MachineSpec, local_size: int, scrap_size: int = 64) -> TapeLayout:
    n = len(encode_machine(local_spec))
    return TapeLayout(Interval(0, n), Interval(n, n + local_size),
                      Interval(n + local_size, n + local_size + scrap_size))


@dataclass
class SpoofResult:
    found: bool
    tape: str | None
    candidates_tried: int
    search_steps: int
    install_steps: int
    install_writes: int = 0


class RelativeModel:
    """A global machine simulating ``local_spec`` encoded on its own tape.

    Parameters
    ----------
    local_spec
        The local machine.  It is encoded into the encoding region and the
        model runs the spec decoded back from the tape.
    local_input
        Initial contents of the local region (offset 0 onwards).
    layout
        Region layout; :func:`default_layout` when omitted.
    oracles
        Bindings for every oracle named by the spec's query states.
    seed
        Seeds two independent streams: the local machine's own randomness
        and the adversary's.
    snapshots
        ``"full"`` keeps every runtime tape set and per-step records,
        ``"summary"`` keeps only counts.
    """

    def __init__(self, local_spec: MachineSpec, local_input: str = "", layout: TapeLayout | None = None,
                 oracles: Iterable[OracleBinding] = (), seed: int = 0, interpreter=None,
                 snapshots: str = "full", head: int = 0, padding=None, local_size: int | None = None):
        if snapshots not in ("full", "summary"):
            raise ValueError("snapshots must be 'full' or 'summary'")
        if layout is None:
            layout = default_layout(local_spec, local_size or max(len(local_input), 1) + 64)
        check_layout(layout)
        bits = encode_machine(local_spec)
        if len(bits) > len(layout.encoding):
            raise LayoutTooSmall(f"encoding needs {len(bits)} cells, region has {len(layout.encoding)}")
        if len(local_input) > len(layout.local):
            raise LayoutTooSmall(f"input needs {len(local_input)} cells, local region has {len(layout.local)}")
        if head not in range(len(layout.local)):
            raise LayoutTooSmall("initial head outside the local region")
        self.layout = layout
        self.tape = Tape(set(LOCAL_ALPHABET) | set(local_spec.alphabet), guard=AccessGuard(layout))
        self.tape.write_string(layout.encoding.start, bits)
        self.tape.write_string(layout.local.start, local_input)
        self.local_spec = decode_machine(self.tape.symbols(Interval(layout.encoding.start,
                                                                     layout.encoding.start + len(bits))))
        self.oracles = {o.identifier: o for o in oracles}
        for q in self.local_spec.query_states.values():
            self._check_binding(q)
        self.seed = seed
        local_seq, adversary_seq = np.random.SeedSequence(seed).spawn(2)
        self.t = 0
        self.tau = 0
        self.tau_tilde = 0
        self.trace = Trace(snapshots, layout)
        self.local_rng = _LoggedRandom(np.random.default_rng(local_seq), self.trace.rng_log,
                                       lambda: self.t + 1)
        self.adversary_rng = np.random.default_rng(adversary_seq)
        self.interpreter = interpreter or DirectInterpreter()
        self.padding = as_padding(padding)
        self.local_config = MachineConfig(layout.local.start + head, self.local_spec.start, self.tape)
        self._plan: Iterator | None = None
        self._reply = None
        self._open_interval()
        self.trace.local_frames.append(self._frame())

    # -- addressing -----------------------------------------------------------

    def local_cell(self, offset: int) -> int:
        return self.layout.local.start + offset

    def scrap_cell(self, offset: int) -> int:
        cell = self.layout.scrap.start + offset
        if cell >= self.layout.scrap.stop:
            self.layout = self.layout.grow_scrap(cell + 1)
            self.tape.guard.layout = self.layout
            self.trace.layout = self.layout
        return cell

    def local_tape(self) -> TapeState:
        return self.tape.snapshot(self.layout.local)

    def local_symbols(self) -> str:
        return self.tape.symbols(self.layout.local)

    @property
    def halted(self) -> bool:
        return self.local_spec.is_halting(self.local_config.state)

    @property
    def K(self) -> list[int]:
        return self.trace.K

    def _frame(self) -> LocalFrame:
        cfg = self.local_config
        return LocalFrame(self.local_tape(), cfg.state, cfg.head - self.layout.local.start)

    def _check_binding(self, q: QueryBinding) -> OracleBinding:
        oracle = self.oracles.get(q.oracle)
        if oracle is None:
            raise OracleError(f"query state {q.state!r} names unbound oracle {q.oracle!r}")
        n = len(self.layout.local)
        for r in (*q.arg_region, q.out_region):
            if r.stop > n:
                raise LayoutTooSmall(f"query region {r} exceeds local region of {n} cells")
        if len(q.out_region) != oracle.declared_output_length:
            raise OracleError(
                f"output region of {len(q.out_region)} cells for oracle {q.oracle!r} "
                f"declaring {oracle.declared_output_length} bits"
            )
        return oracle

    # -- plans ----------------------------------------------------------------

    def pad_adversarially(self, distribution, rng: np.random.Generator | None = None) -> "RelativeModel":
        self.padding = as_padding(distribution)
        if rng is not None:
            self.adversary_rng = rng
        return self

    def _padding_ops(self) -> Iterator:
        n = 0 if self.padding is None else int(self.padding(self.adversary_rng))
        if n < 0:
            raise ValueError("padding distribution produced a negative value")
        cell = self.scrap_cell(PAD_CELL)
        for i in range(n):
            yield Write(cell, "1" if i % 2 == 0 else "0", "pad")

    def _update_plan(self) -> Iterator:
        yield from self._padding_ops()
        binding = self.local_spec.query_states.get(self.local_config.state)
        if binding is not None:
            yield from self._query_plan(binding)
        else:
            yield from self.interpreter.plan(self)

    def _query_plan(self, binding: QueryBinding) -> Iterator:
        oracle = self._check_binding(binding)
        x = []
        for region in binding.arg_region:
            for i in region:
                x.append((yield Read(self.local_cell(i))))
        x = "".join(x)
        for offset, symbol in oracle.workspace(x):
            yield Write(self.scrap_cell(WORKSPACE + offset), symbol)
        y = oracle(x)
        if len(y) > len(binding.out_region):
            raise OracleError(f"output of {len(y)} bits overflows region {binding.out_region}")
        for i, b in zip(binding.out_region, y):
            yield Write(self.local_cell(i), b)
        cfg = self.local_config
        yield Commit(binding.next, cfg.head)

    # -- execution --------------------------------------------------------------

    def _open_interval(self):
        tr = self.trace
        tr.runtime_sets.append([])
        tr.delta_sizes.append(0)
        tr.write_ops.append([])
        self._scrap_touched: set[int] = set()
        self._local_written: set[int] = set()

    def _touch(self, cell: int):
        if cell in self.layout.scrap:
            self._scrap_touched.add(cell)
            self.trace.scrap_footprint.add(cell)

    def _write(self, cell: int, symbol: str, now: int):
        op = WriteOp(symbol, cell, now)
        self.tape.apply_write(op, GLOBAL)
        self._touch(cell)
        if cell in self.layout.local:
            self.trace.write_ops[-1].append(op)
            self._local_written.add(cell)
            self._mark_update(now)

    def _mark_update(self, now: int):
        if not self.trace.K_tilde or self.trace.K_tilde[-1] != now:
            self.trace.K_tilde.append(now)
            self.tau_tilde += 1

    def global_step(self) -> "RelativeModel":
        """Execute one global micro-operation."""
        if self._plan is None:
            if self.halted:
                raise LocalHalted(f"local machine halted in {self.local_config.state!r}")
            self._plan = self._update_plan()
            self._reply = None
        return self._execute(self._next_op())

    def _next_op(self):
        try:
            return self._plan.send(self._reply)
        except BaseException:
            self._plan = None
            raise

    def _execute(self, op) -> "RelativeModel":
        now = self.t + 1
        reply = None
        if isinstance(op, Read):
            reply = self.tape.read(op.cell, op.actor)
            self._touch(op.cell)
            record = (op.actor, "read", op.cell, reply)
        elif isinstance(op, Write):
            self._write(op.cell, op.symbol, now)
            record = (GLOBAL, op.tag, op.cell, op.symbol)
        elif isinstance(op, Commit):
            record = (GLOBAL, "commit", None, None)
            if op.write is not None:
                self._write(*op.write, now)
                record = (GLOBAL, "commit", *op.write)
        else:
            raise TypeError(f"unknown micro-op {op!r}")
        self.t = now
        self._reply = reply
        tr = self.trace
        if isinstance(op, Commit):
            self.local_config = MachineConfig(op.head, op.state, self.tape)
            self._mark_update(now)
            self._complete_update(now)
        else:
            tr.delta_sizes[-1] += 1
            if tr.full:
                tr.runtime_sets[-1].append(self.tape.snapshot())
        if tr.full:
            actor, kind, cell, symbol = record
            tr.steps.append(StepRecord(now, actor, kind, cell, symbol, self.local_config.state,
                                       self.tau, self.tau_tilde))
        return self

    def _complete_update(self, now: int):
        self._plan = None
        self.tau += 1
        self.trace.K.append(now)
        self.trace.space_per_tau.append(len(self._scrap_touched) + len(self._local_written))
        self.trace.local_frames.append(self._frame())
        self._open_interval()

    def advance_local(self) -> "RelativeModel":
        """Run global steps until the local clock ticks once."""
        if self._plan is None and self.halted:
            raise LocalHalted(f"local machine halted in {self.local_config.state!r}")
        tau = self.tau
        while self.tau == tau:
            self.global_step()
        return self

    def run_local(self, max_local_steps: int) -> str:
        """Advance until the local machine halts or ``max_local_steps`` ticks pass."""
        for _ in range(max_local_steps):
            if self.halted:
                break
            self.advance_local()
        if self.halted:
            return "accept" if self.local_config.state == self.local_spec.accept else "reject"
        return "timeout"

    def query_oracle(self, binding: OracleBinding | None = None) -> "RelativeModel":
        """Service the pending query state; costs exactly one local step."""
        q = self.local_spec.query_states.get(self.local_config.state)
        if q is None:
            raise OracleError(f"local state {self.local_config.state!r} is not a query state")
        if binding is not None:
            self.oracles[q.oracle] = binding
        return self.advance_local()

    # -- spoofing ----------------------------------------------------------------

    def spoof_accept(self, horizon: int, candidate_bound: int, width: int | None = None) -> SpoofResult:
        """Search scrap for a local tape that forces ACCEPT, then install it.

        Candidates are binary strings over the first ``width`` local cells in
        lexicographic order; each is simulated for at most ``horizon`` local
        steps from the current local state and head.  The install is one
        local step.
        """
        if self._plan is not None:
            raise RuntimeError("spoofing must start between local updates")
        if self.halted:
            raise LocalHalted("local machine already halted")
        width = len(self.layout.local) if width is None else width
        t0, tau0 = self.t, self.tau
        result = SpoofResult(False, None, 0, 0, 0)
        self._plan = self._spoof_plan(horizon, candidate_bound, width, result)
        self._reply = None
        while self._plan is not None:
            try:
                op = self._plan.send(self._reply)
            except StopIteration:
                self._plan = None
                break
            self._execute(op)
        result.install_steps = self.tau - tau0
        result.search_steps = self.t - t0 - result.install_writes
        return result

    def _spoof_plan(self, horizon: int, bound: int, width: int, result: SpoofResult) -> Iterator:
        cfg = self.local_config
        head0 = cfg.head - self.layout.local.start
        current = self.local_symbols()
        size = len(current)
        for cand in itertools.islice(itertools.product("01", repeat=width), bound):
            result.candidates_tried += 1
            cand = "".join(cand)
            for i, s in enumerate(cand):
                yield Write(self.scrap_cell(WORKSPACE + i), s)
            sim = Tape(self.tape.alphabet)
            sim.write_string(0, cand + current[width:])
            sim_cfg = MachineConfig(head0, cfg.state, sim)
            for _ in range(horizon):
                if self.local_spec.is_halting(sim_cfg.state):
                    break
                if sim_cfg.head not in range(size):
                    break
                before = sim_cfg.head
                try:
                    sim_cfg = machine_step(self.local_spec, sim_cfg)
                except MachineError:
                    break
                # scrap mirrors the simulated tape
                yield Write(self.scrap_cell(WORKSPACE + before), sim.read(before))
            if sim_cfg.state == self.local_spec.accept:
                result.found = True
                result.tape = cand + current[width:]
                writes = [(i, s) for i, s in enumerate(cand) if current[i] != s]
                result.install_writes = len(writes) + 1
                for i, s in writes:
                    yield Write(self.local_cell(i), s)
                yield Commit(cfg.state, cfg.head)
                return

    # -- export -----------------------------------------------------------------

    def trace_records(self) -> list[dict]:
        tr = self.trace
        header = {
            "type": "header", "mode": tr.mode, "seed": self.seed,
            "interpreter": self.interpreter.name,
            "layout": {name: [r.start, r.stop] for name, r in
                       (("encoding", self.layout.encoding), ("local", self.layout.local),
                        ("scrap", self.layout.scrap))},
        }
        final = {"type": "final", "t": self.t, "tau": self.tau, "tau_tilde": self.tau_tilde,
                 "state": self.local_config.state, "local_tape": self.local_tape().to_json(),
                 "K_tilde": list(tr.K_tilde)}
        steps = [s.to_json() for s in tr.steps] if tr.full else []
        return [header, *steps, *tr.summary_records(), final]

    def write_trace(self, fh) -> None:
        for rec in self.trace_records():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def replay_writes_permuted(trace: Trace, tau: int, permutation: Sequence[int]) -> TapeState:
    """Apply W_tau in permuted order to S'_{k_tau}; returns the local tape."""
    ops = trace.write_ops[tau]
    if sorted(permutation) != list(range(len(ops))):
        raise ValueError("permutation is not a bijection on the write indices")
    base = trace.local_frames[tau].tape
    tape = Tape(set(s for _, s in base.cells) | set(op.symbol for op in ops) | set(LOCAL_ALPHABET))
    tape.restore(base)
    for i in permutation:
        tape.apply_write(ops[i])
    return tape.snapshot(base.region)


def preserves_same_cell_order(ops: Sequence[WriteOp], permutation: Sequence[int]) -> bool:
    """True when the permutation keeps repeated writes to a cell in their original order."""
    last: dict[int, int] = {}
    for i in permutation:
        cell = ops[i].index
        if cell in last and last[cell] > i:
            return False
        last[cell] = i
    return True
