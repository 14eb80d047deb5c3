"""Oracle bindings serviced by the global machine on behalf of query states.

A binding pairs a pure evaluator with a *workspace* description: the
sequence of scrap-region writes the global machine performs while
computing the answer.  The workspace is what makes global cost visible in
the trace; the evaluator is what ends up on the local tape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

Workspace = Callable[[str], Iterable[tuple[int, str]]]


class OracleError(Exception):
    pass


def _no_workspace(x: str) -> Iterator[tuple[int, str]]:
    return iter(())


@dataclass(frozen=True)
class OracleBinding:
    identifier: str
    evaluator: Callable[[str], str]
    declared_output_length: int
    workspace: Workspace = _no_workspace
    cost_model: str = "exact"  # or "approximate"
    epsilon: float | None = None

    def __post_init__(self):
        if self.declared_output_length < 1:
            raise OracleError("declared output length must be at least one bit")
        if self.cost_model not in ("exact", "approximate"):
            raise OracleError(f"unknown cost model {self.cost_model!r}")
        if self.cost_model == "approximate" and not self.epsilon:
            raise OracleError("approximate oracles must declare epsilon")

    def __call__(self, x: str) -> str:
        y = self.evaluator(x)
        if len(y) != self.declared_output_length:
            raise OracleError(
                f"oracle {self.identifier!r} produced {len(y)} bits, "
                f"declared {self.declared_output_length}"
            )
        return y


def _bits(x: str) -> str:
    # blanks in an argument region read as 0
    return x.replace("_", "0")


def identity_oracle(n: int) -> OracleBinding:
    """f(x) = x over ``n`` bits; writes its output and nothing else."""
    return OracleBinding("identity", _bits, n)


def _parity(x: str) -> str:
    return str(_bits(x).count("1") % 2)


def _parity_workspace(x: str):
    # copy the argument next to a single accumulator cell, then fold it
    x = _bits(x)
    for i, b in enumerate(x):
        yield i + 1, b
    acc = 0
    yield 0, "0"
    for b in x:
        acc ^= b == "1"
        yield 0, str(acc)


def parity_oracle() -> OracleBinding:
    return OracleBinding("parity", _parity, 1, _parity_workspace)


def busy_oracle(n_out: int, scrap_cells: int, identifier: str = "busy") -> OracleBinding:
    """Identity-shaped oracle that first scribbles over ``scrap_cells`` fresh cells."""

    def workspace(x):
        for i in range(scrap_cells):
            yield i, "1"

    return OracleBinding(identifier, lambda x: _bits(x)[:n_out].ljust(n_out, "0"), n_out, workspace)


def reveal_oracle(secret: Callable[[], str], identifier: str = "reveal") -> OracleBinding:
    """Control-arm oracle: answers with a bit only the global machine knows."""
    return OracleBinding(identifier, lambda x: secret(), 1)


def builtin_oracles(sizes: dict[str, int] | None = None) -> dict[str, OracleBinding]:
    sizes = sizes or {}
    return {
        "identity": identity_oracle(sizes.get("identity", 8)),
        "parity": parity_oracle(),
    }
