"""Global tape, its disjoint regions, write operations and snapshots.

The tape is two-way unbounded and stored sparsely; every cell that was
never written reads as ``BLANK``.  Regions are half-open intervals fixed
when a model is built.  An optional :class:`AccessGuard` tags each access
with the actor performing it and aborts local-machine accesses that leave
the local region.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

BLANK = "_"
LOCAL_ALPHABET = ("0", "1", BLANK)

GLOBAL = "global"
LOCAL = "local"


class TapeError(Exception):
    pass


class SymbolError(TapeError, ValueError):
    """Write of a symbol outside the tape alphabet."""


class LayoutError(TapeError, ValueError):
    pass


class LayoutOverlapError(LayoutError):
    def __init__(self, first: str, second: str):
        self.pair = (first, second)
        if second == "local" and first == "measurement":
            msg = "measurement region lies outside the local region"
        else:
            msg = f"regions {first!r} and {second!r} overlap"
        super().__init__(msg)


class GuardViolation(TapeError):
    """A local-machine access left the local region."""

    def __init__(self, actor: str, kind: str, index: int, region: str):
        self.actor = actor
        self.kind = kind
        self.index = index
        self.region = region
        super().__init__(f"{actor} {kind} of cell {index} in {region} region")


@dataclass(frozen=True, order=True)
class Interval:
    start: int
    stop: int

    def __post_init__(self):
        if self.stop < self.start:
            raise LayoutError(f"empty interval with stop < start: [{self.start}, {self.stop})")

    def __len__(self) -> int:
        return self.stop - self.start

    def __contains__(self, index) -> bool:
        return self.start <= index < self.stop

    def __iter__(self):
        return iter(range(self.start, self.stop))

    def overlaps(self, other: "Interval") -> bool:
        return self.start < other.stop and other.start < self.stop

    def within(self, other: "Interval") -> bool:
        return other.start <= self.start and self.stop <= other.stop

    @classmethod
    def coerce(cls, value) -> "Interval":
        if isinstance(value, Interval):
            return value
        start, stop = value
        return cls(int(start), int(stop))


@dataclass(frozen=True)
class TapeLayout:
    encoding: Interval
    local: Interval
    scrap: Interval
    measurement: Interval | None = None

    def __post_init__(self):
        for name in ("encoding", "local", "scrap", "measurement"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, Interval.coerce(value))

    def region_of(self, index: int) -> str | None:
        if index in self.encoding:
            return "encoding"
        if index in self.local:
            return "local"
        if index in self.scrap:
            return "scrap"
        return None

    def grow_scrap(self, stop: int) -> "TapeLayout":
        """Layout whose scrap region extends rightward to ``stop``."""
        if stop <= self.scrap.stop:
            return self
        grown = Interval(self.scrap.start, stop)
        for name, region in (("encoding", self.encoding), ("local", self.local)):
            if grown.overlaps(region):
                raise LayoutError(f"scrap region cannot grow into the {name} region")
        return TapeLayout(self.encoding, self.local, grown, self.measurement)


def check_layout(layout: TapeLayout) -> None:
    """Raise :class:`LayoutOverlapError` unless the regions are disjoint."""
    regions = [("encoding", layout.encoding), ("local", layout.local), ("scrap", layout.scrap)]
    for i, (name_a, a) in enumerate(regions):
        for name_b, b in regions[i + 1:]:
            if a.overlaps(b):
                raise LayoutOverlapError(name_a, name_b)
    if layout.measurement is not None and not layout.measurement.within(layout.local):
        raise LayoutOverlapError("measurement", "local")


@dataclass(frozen=True)
class WriteOp:
    symbol: str
    index: int
    global_time: int = 0


class AccessGuard:
    """Aborts local-machine accesses outside the local region."""

    def __init__(self, layout: TapeLayout):
        self.layout = layout

    def check(self, actor: str, kind: str, index: int) -> None:
        if actor == LOCAL and index not in self.layout.local:
            raise GuardViolation(actor, kind, index, self.layout.region_of(index) or "unassigned")


@dataclass(frozen=True, eq=False)
class TapeState:
    """Immutable snapshot of a tape (or of one region of it).

    Two snapshots are equal when their non-blank cells agree; the region
    they were taken over only matters for serialization.
    """

    cells: tuple[tuple[int, str], ...]
    region: Interval | None = None

    def __eq__(self, other):
        if not isinstance(other, TapeState):
            return NotImplemented
        return self.cells == other.cells

    def __hash__(self):
        return hash(self.cells)

    def __getitem__(self, index: int) -> str:
        return dict(self.cells).get(index, BLANK)

    def as_dict(self) -> dict[int, str]:
        return dict(self.cells)

    def span(self) -> Interval:
        if self.region is not None:
            return self.region
        if not self.cells:
            return Interval(0, 0)
        return Interval(self.cells[0][0], self.cells[-1][0] + 1)

    def symbols(self, region: Interval | None = None) -> str:
        """Cells of ``region`` (default: the snapshot span) as one string."""
        region = self.span() if region is None else Interval.coerce(region)
        lookup = dict(self.cells)
        return "".join(lookup.get(i, BLANK) for i in region)

    def to_json(self) -> dict:
        span = self.span()
        return {"start": span.start, "stop": span.stop, "rle": rle_encode(self.symbols(span))}

    @classmethod
    def from_json(cls, payload: Mapping) -> "TapeState":
        region = Interval(int(payload["start"]), int(payload["stop"]))
        text = rle_decode(payload["rle"])
        if len(text) != len(region):
            raise ValueError(f"run-length payload covers {len(text)} cells, region has {len(region)}")
        cells = tuple((region.start + i, s) for i, s in enumerate(text) if s != BLANK)
        return cls(cells, region)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def rle_encode(symbols: str) -> str:
    """Run-length encode a symbol string as ``count:symbol`` runs joined by commas."""
    runs = []
    i = 0
    while i < len(symbols):
        j = i
        while j < len(symbols) and symbols[j] == symbols[i]:
            j += 1
        runs.append(f"{j - i}:{symbols[i]}")
        i = j
    return ",".join(runs)


def rle_decode(text: str) -> str:
    if not text:
        return ""
    out = []
    for run in text.split(","):
        count, sep, symbol = run.partition(":")
        if not sep or len(symbol) != 1 or not count.isdigit():
            raise ValueError(f"bad run {run!r}")
        out.append(symbol * int(count))
    return "".join(out)


@dataclass
class Tape:
    """Sparse two-way unbounded tape over a finite alphabet."""

    alphabet: frozenset = frozenset(LOCAL_ALPHABET)
    cells: dict = field(default_factory=dict)
    guard: AccessGuard | None = None

    def __post_init__(self):
        self.alphabet = frozenset(self.alphabet) | {BLANK}

    def read(self, index: int, actor: str = GLOBAL) -> str:
        if self.guard is not None:
            self.guard.check(actor, "read", index)
        return self.cells.get(index, BLANK)

    def apply_write(self, op: WriteOp, actor: str = GLOBAL) -> "Tape":
        if op.symbol not in self.alphabet:
            raise SymbolError(f"symbol {op.symbol!r} not in alphabet")
        if self.guard is not None:
            self.guard.check(actor, "write", op.index)
        if op.symbol == BLANK:
            self.cells.pop(op.index, None)
        else:
            self.cells[op.index] = op.symbol
        return self

    def write_string(self, start: int, symbols: Iterable[str], actor: str = GLOBAL) -> None:
        symbols = "".join(symbols)
        bad = set(symbols) - self.alphabet
        if bad:
            raise SymbolError(f"symbols {sorted(bad)!r} not in alphabet")
        if self.guard is not None and symbols:
            self.guard.check(actor, "write", start)
            self.guard.check(actor, "write", start + len(symbols) - 1)
        for offset, s in enumerate(symbols):
            if s == BLANK:
                self.cells.pop(start + offset, None)
            else:
                self.cells[start + offset] = s

    def snapshot(self, region: Interval | None = None) -> TapeState:
        if region is None:
            return TapeState(tuple(sorted(self.cells.items())))
        region = Interval.coerce(region)
        if len(region) < len(self.cells):
            items = ((i, self.cells[i]) for i in region if i in self.cells)
        else:
            items = ((i, s) for i, s in sorted(self.cells.items()) if i in region)
        return TapeState(tuple(items), region)

    def restore(self, state: TapeState) -> None:
        """Overwrite the snapshot's region (or the whole tape) with its contents."""
        if state.region is None:
            self.cells = dict(state.cells)
            return
        for i in state.region:
            self.cells.pop(i, None)
        self.cells.update(state.cells)

    def symbols(self, region: Interval) -> str:
        return "".join(self.cells.get(i, BLANK) for i in Interval.coerce(region))

    def copy(self) -> "Tape":
        return Tape(self.alphabet, dict(self.cells), self.guard)


def read(tape: Tape, index: int, actor: str = GLOBAL) -> str:
    return tape.read(index, actor)


def apply_write(tape: Tape, op: WriteOp, actor: str = GLOBAL) -> Tape:
    return tape.apply_write(op, actor)


def snapshot(tape: Tape, region: Interval | None = None) -> TapeState:
    return tape.snapshot(region)
