"""Reference machines used across tests, demos and the scenario harness."""
from __future__ import annotations

import numpy as np

from .machine import LEFT, RIGHT, Action, MachineSpec, QueryBinding
from .tape import BLANK, LOCAL_ALPHABET

SYMBOLS = LOCAL_ALPHABET
HALT = ("ACCEPT", "REJECT")


def _spec(states, transitions, **kw) -> MachineSpec:
    states = list(states)
    for h in HALT:
        if h not in states:
            states.append(h)
    return MachineSpec(states, SYMBOLS, transitions, **kw)


def unary_increment() -> MachineSpec:
    """Scan right over 1s, write a 1 on the first blank, accept."""
    return _spec(["START"], {
        ("1", "START"): Action("1", "START", RIGHT),
        (BLANK, "START"): Action("1", "ACCEPT", RIGHT),
    })


def accept_immediately() -> MachineSpec:
    return _spec(["START"], {(s, "START"): Action(s, "ACCEPT", RIGHT) for s in SYMBOLS})


def oscillator() -> MachineSpec:
    """Bounces between two cells forever."""
    t = {}
    for s in SYMBOLS:
        t[(s, "START")] = Action(s, "BACK", RIGHT)
        t[(s, "BACK")] = Action(s, "START", LEFT)
    return _spec(["START", "BACK"], t)


def first_cell_is_one() -> MachineSpec:
    return _spec(["START"], {
        ("1", "START"): Action("1", "ACCEPT", RIGHT),
        ("0", "START"): Action("0", "REJECT", RIGHT),
        (BLANK, "START"): Action(BLANK, "REJECT", RIGHT),
    })


def equality_checker() -> MachineSpec:
    """Accepts iff cell 0 equals cell 2 (blanks never match)."""
    t = {(BLANK, "START"): Action(BLANK, "REJECT", RIGHT)}
    for b in "01":
        t[(b, "START")] = Action(b, f"SAW{b}", RIGHT)
        for s in SYMBOLS:
            t[(s, f"SAW{b}")] = Action(s, f"CMP{b}", RIGHT)
            t[(s, f"CMP{b}")] = Action(s, "ACCEPT" if s == b else "REJECT", RIGHT)
    return _spec(["START", "SAW0", "SAW1", "CMP0", "CMP1"], t)


def reject_all() -> MachineSpec:
    return _spec(["START"], {(s, "START"): Action(s, "REJECT", RIGHT) for s in SYMBOLS})


def fair_coin() -> MachineSpec:
    """Writes a fair coin into cell 1 and halts with the head back on cell 0."""
    t = {(s, "START"): Action(s, "FLIP", RIGHT) for s in SYMBOLS}
    coin = tuple((Action(b, "ACCEPT", LEFT), 0.5) for b in "01")
    return _spec(["START", "FLIP"], t, probabilistic={(s, "FLIP"): coin for s in SYMBOLS})


def rewind_noop() -> MachineSpec:
    """Steps right and back without touching the tape."""
    t = {}
    for s in SYMBOLS:
        t[(s, "START")] = Action(s, "BACK", RIGHT)
        t[(s, "BACK")] = Action(s, "ACCEPT", LEFT)
    return _spec(["START", "BACK"], t)


# -- detector suite ----------------------------------------------------------
#
# Every detector starts on local cell 0 and leaves its guess bit in cell 0.

GUESS_CELL = 0


def constant_detector(bit: str = "0") -> MachineSpec:
    return _spec(["START"], {(s, "START"): Action(bit, "ACCEPT", RIGHT) for s in SYMBOLS})


def majority_detector(window: int = 3) -> MachineSpec:
    """Guesses the majority bit of the history cells 1..window."""
    t = {(s, "START"): Action(s, "R0_0", RIGHT) for s in SYMBOLS}
    states = ["START"]
    # R{i}_{ones}: on cell i+1, having seen ``ones`` 1s in cells 1..i
    for i in range(window):
        for ones in range(i + 1):
            name = f"R{i}_{ones}"
            states.append(name)
            for s in SYMBOLS:
                seen = ones + (s == "1")
                if i + 1 < window:
                    t[(s, name)] = Action(s, f"R{i + 1}_{seen}", RIGHT)
                else:
                    t[(s, name)] = Action(s, f"B{int(2 * seen > window)}_{window - 1}", LEFT)
    # B{bit}_{k}: on cell k walking back to cell 0
    for bit in "01":
        for k in range(window):
            name = f"B{bit}_{k}"
            states.append(name)
            for s in SYMBOLS:
                if k == 0:
                    t[(s, name)] = Action(bit, "ACCEPT", RIGHT)
                else:
                    t[(s, name)] = Action(s, f"B{bit}_{k - 1}", LEFT)
    return _spec(states, t)


def step_counter_detector(loops: int = 5) -> MachineSpec:
    """Counts its own local steps while oscillating, then writes the count parity."""
    t = {}
    states = []
    for i in range(loops):
        out, back = f"O{i}", f"I{i}"
        states += [out, back]
        nxt = f"O{i + 1}" if i + 1 < loops else "DONE"
        for s in SYMBOLS:
            t[(s, out)] = Action(s, back, RIGHT)
            t[(s, back)] = Action(s, nxt, LEFT)
    states.append("DONE")
    for s in SYMBOLS:
        t[(s, "DONE")] = Action(str((2 * loops) % 2), "ACCEPT", RIGHT)
    return _spec(states, t, start="O0")


def timing_probe_detector(reach: int = 64) -> MachineSpec:
    """Walks right past the end of its own tape looking for the scrap region."""
    t = {}
    states = []
    for i in range(reach):
        name = f"P{i}"
        states.append(name)
        nxt = f"P{i + 1}" if i + 1 < reach else "ACCEPT"
        for s in SYMBOLS:
            t[(s, name)] = Action(s, nxt, RIGHT)
    return _spec(states, t, start="P0")


def tell_me_detector(oracle: str = "reveal") -> MachineSpec:
    """Control arm: asks the global machine for the answer."""
    q = QueryBinding("ASK", oracle, ((0, 0),), (GUESS_CELL, GUESS_CELL + 1), "ACCEPT")
    return _spec(["ASK"], {}, start="ASK", query_states={"ASK": q})


DETECTORS = {
    "constant": constant_detector,
    "majority": majority_detector,
    "step_counter": step_counter_detector,
    "timing_probe": timing_probe_detector,
    "tell_me": tell_me_detector,
}


def random_machine(rng: np.random.Generator, n_states: int = 4, p_halt: float = 0.05,
                   p_random: float = 0.0) -> MachineSpec:
    """Total random machine over {0,1,_}; some rows may be probabilistic."""
    names = [f"S{i}" for i in range(n_states)]
    names[0] = "START"
    t, prob = {}, {}

    def action():
        nxt = rng.choice(list(HALT)) if rng.random() < p_halt else rng.choice(names)
        return Action(str(rng.choice(SYMBOLS)), str(nxt), str(rng.choice([LEFT, RIGHT])))

    for state in names:
        for s in SYMBOLS:
            if rng.random() < p_random:
                p = float(rng.uniform(0.1, 0.9))
                prob[(s, state)] = ((action(), p), (action(), 1.0 - p))
            else:
                t[(s, state)] = action()
    return _spec(names, t, probabilistic=prob)
