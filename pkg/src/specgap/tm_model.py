"""Classical reversible Turing machines on a bounded tape.

Cells are numbered 1..w. A step reads the cell under the head, writes,
changes state and moves L, N or R. Entering the final state is a halt.
Moving past either end of the tape is reported as ``out_of_tape``.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

MOVES = {"L": -1, "N": 0, "R": 1}


class MalformedMachineError(RuntimeError):
    """A run needed a transition the table does not define."""


@dataclass(frozen=True)
class Rule:
    write: str
    next: str
    move: str


@dataclass(frozen=True)
class TMDefinition:
    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    initial: str
    final: str
    rules: Mapping[tuple[str, str], Rule]
    flag: str | None = None
    blank: str = "0"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        rules = {}
        for (q, a), r in dict(self.rules).items():
            r = r if isinstance(r, Rule) else Rule(*r)
            if q not in self.states or r.next not in self.states:
                raise ValueError(f"rule ({q}, {a}) refers to an unknown state")
            if a not in self.alphabet or r.write not in self.alphabet:
                raise ValueError(f"rule ({q}, {a}) refers to an unknown symbol")
            if r.move not in MOVES:
                raise ValueError(f"bad move {r.move!r}")
            rules[(q, a)] = r
        object.__setattr__(self, "rules", rules)
        for s in (self.initial, self.final) + ((self.flag,) if self.flag else ()):
            if s not in self.states:
                raise ValueError(f"unknown state {s!r}")

    def __hash__(self):
        return hash((self.name, self.states, self.alphabet, tuple(sorted(self.rules.items()))))

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_symbols(self) -> int:
        return len(self.alphabet)

    def to_json(self) -> dict:
        return {
            "name": self.name, "states": list(self.states), "alphabet": list(self.alphabet),
            "initial": self.initial, "final": self.final, "flag": self.flag, "blank": self.blank,
            "rules": [{"state": q, "read": a, "write": r.write, "next": r.next, "move": r.move}
                      for (q, a), r in sorted(self.rules.items())],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TMDefinition":
        rules = {(r["state"], r["read"]): Rule(r["write"], r["next"], r["move"]) for r in obj["rules"]}
        return cls(tuple(obj["states"]), tuple(obj["alphabet"]), obj["initial"], obj["final"], rules,
                   obj.get("flag"), obj.get("blank", "0"), obj.get("name", ""))

    @classmethod
    def load(cls, path) -> "TMDefinition":
        return cls.from_json(json.loads(Path(path).read_text()))

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


@dataclass(frozen=True)
class WellFormedReport:
    reversible: bool
    unidirectional: bool
    normal_form: bool
    problems: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.reversible and self.unidirectional and self.normal_form


def check_well_formed(tm: TMDefinition) -> WellFormedReport:
    """Local reversibility test.

    Unidirectional: every state is entered with a single move direction.
    Given that, the forward map is injective iff no two rules entering the
    same state write the same symbol (the predecessor is then recoverable
    from the current state and the cell the head came from).
    """
    problems = []
    entering = defaultdict(list)
    for (q, a), r in tm.rules.items():
        entering[r.next].append((q, a, r))
    unidirectional = True
    for s, lst in entering.items():
        moves = {r.move for _, _, r in lst}
        if len(moves) > 1:
            unidirectional = False
            problems.append(f"state {s} entered with moves {sorted(moves)}")
    reversible = unidirectional
    for s, lst in entering.items():
        seen = {}
        for q, a, r in lst:
            key = (r.move, r.write)
            if key in seen:
                reversible = False
                problems.append(f"rules {seen[key]} and {(q, a)} both enter {s} writing {r.write}")
            seen[key] = (q, a)
    normal = True
    for a in tm.alphabet:
        r = tm.rules.get((tm.final, a))
        if r is None or r != Rule(a, tm.initial, "N"):
            normal = False
            problems.append(f"final-state rule on {a!r} is {r}")
    return WellFormedReport(reversible, unidirectional, normal, tuple(problems))


def _with_normal_form(rules: dict, alphabet, initial="q0", final="qf") -> dict:
    rules = dict(rules)
    for a in alphabet:
        rules[(final, a)] = Rule(a, initial, "N")
    return rules


def sweeper_tm() -> TMDefinition:
    """Sweep right to the end of the 1s, step into the flag state, sweep back and halt."""
    alphabet = ("#", "0", "1")
    rules = {
        ("q0", "1"): Rule("#", "q1", "R"),
        ("q1", "0"): Rule("0", "q?", "L"),
        ("q1", "1"): Rule("1", "q1", "R"),
        ("q?", "1"): Rule("1", "q2", "R"),
        ("q2", "0"): Rule("0", "q3", "L"),
        ("q3", "#"): Rule("1", "qf", "N"),
        ("q3", "1"): Rule("1", "q3", "L"),
    }
    return TMDefinition(("q0", "q1", "q?", "q2", "q3", "qf"), alphabet, "q0", "qf",
                        _with_normal_form(rules, alphabet), flag="q?", blank="0", name="sweeper")


def immediate_halt() -> TMDefinition:
    alphabet = ("#", "0", "1")
    rules = {("q0", a): Rule(a, "qf", "N") for a in alphabet}
    return TMDefinition(("q0", "qf"), alphabet, "q0", "qf", _with_normal_form(rules, alphabet),
                        name="immediate_halt")


def never_halt() -> TMDefinition:
    """Marks the first cell and runs right forever; only the tape end stops it."""
    alphabet = ("#", "0", "1")
    rules = {("q0", "0"): Rule("#", "q1", "R")}
    rules.update({("q1", a): Rule(a, "q1", "R") for a in ("0", "1")})
    return TMDefinition(("q0", "q1", "qf"), alphabet, "q0", "qf", _with_normal_form(rules, alphabet),
                        name="never_halt")


def consume_k(k: int) -> TMDefinition:
    """Walk over ``k`` cells and halt on the k-th."""
    if k < 1:
        raise ValueError("k must be >= 1")
    alphabet = ("#", "0", "1")
    states = tuple(f"q{i}" for i in range(k)) + ("qf",)
    rules = {}
    for i in range(k - 1):
        rules.update({(f"q{i}", a): Rule(a, f"q{i + 1}", "R") for a in alphabet})
    rules.update({(f"q{k - 1}", a): Rule(a, "qf", "N") for a in alphabet})
    return TMDefinition(states, alphabet, "q0", "qf", _with_normal_form(rules, alphabet),
                        name=f"consume_{k}")


def unary_counter() -> TMDefinition:
    """Append one 1 to a unary number and return to the left end."""
    alphabet = ("#", "0", "1")
    rules = {
        ("q0", "1"): Rule("#", "q1", "R"),
        ("q1", "1"): Rule("1", "q1", "R"),
        ("q1", "0"): Rule("1", "q2", "R"),
        ("q2", "0"): Rule("0", "q3", "L"),
        ("q3", "1"): Rule("1", "q3", "L"),
        ("q3", "#"): Rule("1", "qf", "N"),
    }
    return TMDefinition(("q0", "q1", "q2", "q3", "qf"), alphabet, "q0", "qf",
                        _with_normal_form(rules, alphabet), name="unary_counter")


MACHINES = {
    "sweeper": sweeper_tm,
    "immediate_halt": immediate_halt,
    "never_halt": never_halt,
    "unary_counter": unary_counter,
}


def get_machine(name: str) -> TMDefinition:
    if name.startswith("consume_"):
        return consume_k(int(name.split("_", 1)[1]))
    if name in MACHINES:
        return MACHINES[name]()
    path = Path(name)
    if path.exists():
        return TMDefinition.load(path)
    raise KeyError(f"unknown machine {name!r}")


@dataclass(frozen=True)
class Configuration:
    state: str
    head: int
    tape: tuple[str, ...]


@dataclass
class RunTrace:
    outcome: str
    steps: int
    tape_used: int
    configurations: list[Configuration] = field(default_factory=list)

    @property
    def halted(self) -> bool:
        return self.outcome == "halted"


def prepare_tape(tm: TMDefinition, tape: str | Sequence[str], w: int) -> tuple[str, ...]:
    cells = list(tape)
    if len(cells) > w:
        raise ValueError(f"input of length {len(cells)} does not fit {w} cells")
    return tuple(cells + [tm.blank] * (w - len(cells)))


def run_bounded(tm: TMDefinition, tape, w: int, t_max: int | None = None,
                record: bool = True) -> RunTrace:
    """Deterministic run from the initial state at cell 1.

    ``steps`` counts attempted transitions, including the one that would
    leave the tape.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if t_max is None:
        t_max = runtime_bound(tm, w)
    cells = list(prepare_tape(tm, tape, w))
    state, head, used = tm.initial, 1, 1
    configs = [Configuration(state, head, tuple(cells))] if record else []
    t = 0
    while t < t_max:
        rule = tm.rules.get((state, cells[head - 1]))
        if rule is None:
            raise MalformedMachineError(f"no rule for ({state}, {cells[head - 1]!r}) at cell {head}")
        t += 1
        new_head = head + MOVES[rule.move]
        if new_head < 1 or new_head > w:
            return RunTrace("out_of_tape", t, used, configs)
        cells[head - 1] = rule.write
        state, head = rule.next, new_head
        used = max(used, head)
        if record:
            configs.append(Configuration(state, head, tuple(cells)))
        if state == tm.final:
            return RunTrace("halted", t, used, configs)
    return RunTrace("out_of_time", t, used, configs)


def runtime_bound(tm_or_q, w: int, num_symbols: int | None = None) -> int:
    """Number of distinct configurations: states x head positions x tapes."""
    if isinstance(tm_or_q, TMDefinition):
        q, a = tm_or_q.num_states, tm_or_q.num_symbols
    else:
        q, a = int(tm_or_q), int(num_symbols)
    return q * w * a**w


@dataclass(frozen=True)
class HaltingProfile:
    w_halt: int | None
    T_halt: int | None

    def __post_init__(self):
        if (self.w_halt is None) != (self.T_halt is None):
            raise ValueError("w_halt and T_halt are defined together")


def halting_profile(tm: TMDefinition, tape="", w_max: int = 16) -> HaltingProfile:
    """Smallest tape on which the machine halts, with the halting time."""
    for w in range(max(1, len(tape)), w_max + 1):
        try:
            tr = run_bounded(tm, tape, w, record=False)
        except MalformedMachineError:
            continue
        if tr.halted:
            return HaltingProfile(w, tr.steps)
    return HaltingProfile(None, None)
