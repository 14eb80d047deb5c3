"""Nested Turing-machine simulation with separate global and local clocks."""

__version__ = "0.1.0"

from .machine import Action, MachineSpec, QueryBinding, decode_machine, encode_machine
from .relative_model import RelativeModel, Trace
from .tape import GuardViolation, Interval, TapeLayout

__all__ = [
    "Action", "GuardViolation", "Interval", "MachineSpec", "QueryBinding", "RelativeModel",
    "TapeLayout", "Trace", "__version__", "decode_machine", "encode_machine",
]
