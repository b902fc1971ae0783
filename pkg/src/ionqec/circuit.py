"""Circuit representation for a linear ion string.

Ions are addressed by 0-based index; the string position of ion i is i+1.
Events are immutable; every transformation returns a new :class:`Circuit`.

Text format (one event per line, ``#`` starts a comment)::

    ROT <X|Y|Z> <angle> <ion> [dur=<us>] [blk=<id>]
    MS <angle> <ion> <ion> [half=1|2] [dur=<us>] [blk=<id>]
    PREP <ion> [dur=<us>]
    MEAS <ion> <cbit> [dur=<us>]
    REPUMP <ion> [dur=<us>]
    BARRIER
    CNOT <control> <target>      (macro, expanded by compile_circuit)

``blk`` tags the events of one refocus block (written by the refocus pass).
Angles accept plain numbers and expressions in ``pi`` such as ``-pi/2`` or
``3*pi/4``.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field, replace

import numpy as np

KINDS = ("ROT", "MS", "PREP", "MEAS", "REPUMP", "BARRIER", "CNOT")


@dataclass(frozen=True)
class DurationTable:
    """Operation durations in microseconds."""

    ms_gate: float = 15.0
    one_qubit: float = 1.0
    measurement: float = 30.0
    reset: float = 10.0
    recool: float = 100.0
    repump: float = 20.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0:
                raise ValueError(f"duration {k} must be positive, got {v}")

    def of(self, ev: "Event") -> float:
        if ev.duration is not None:
            return ev.duration
        if ev.kind == "ROT":
            return self.one_qubit
        if ev.kind == "MS":
            return self.ms_gate / 2 if ev.half else self.ms_gate
        if ev.kind == "PREP":
            return self.reset
        if ev.kind == "MEAS":
            return self.measurement
        if ev.kind == "REPUMP":
            return self.repump
        return 0.0


@dataclass(frozen=True)
class Event:
    kind: str
    ions: tuple[int, ...] = ()
    axis: str = ""
    theta: float = 0.0
    cbit: int = -1
    half: int = 0          # 1 or 2 for the halves of a refocused MS
    block: int = -1        # refocus block id, -1 outside blocks
    duration: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class IonLayout:
    """Roles and neighbours on a 1-d string."""

    num_ions: int
    roles: tuple[str, ...]

    def __post_init__(self):
        if len(self.roles) != self.num_ions:
            raise ValueError("one role per ion required")
        if len(set(self.roles)) != len(self.roles):
            raise ValueError("roles must be unique")

    @classmethod
    def default(cls) -> "IonLayout":
        # a1 at position 1, data 1..7 at positions 2..8, a2 and a3 at 9 and 10
        return cls(10, ("a1", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "a2", "a3"))

    @classmethod
    def plain(cls, n: int) -> "IonLayout":
        return cls(n, tuple(f"q{i}" for i in range(n)))

    @property
    def role_map(self) -> dict[int, str]:
        """String position (1-based) to role."""
        return {i + 1: r for i, r in enumerate(self.roles)}

    def ion(self, role: str) -> int:
        return self.roles.index(role)

    def data(self, k: int) -> int:
        return self.ion(f"d{k}")

    def neighbors(self, i: int) -> set[int]:
        return {j for j in (i - 1, i + 1) if 0 <= j < self.num_ions}

    def spectators(self, a: int, b: int) -> tuple[list[int], set[int]]:
        """Neighbours of a gate pair and the subset lying between the two ions."""
        nb = (self.neighbors(a) | self.neighbors(b)) - {a, b}
        lo, hi = min(a, b), max(a, b)
        doubled = {v for v in nb if lo < v < hi}
        return sorted(nb), doubled


@dataclass(frozen=True)
class Circuit:
    events: tuple[Event, ...] = ()
    num_ions: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for k, ev in enumerate(self.events):
            for q in ev.ions:
                if not 0 <= q < self.num_ions:
                    raise ValueError(f"event {k} references ion {q} outside 0..{self.num_ions - 1}")

    def __len__(self):
        return len(self.events)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.events + other.events, max(self.num_ions, other.num_ions))

    def count(self, kind: str) -> int:
        return sum(ev.kind == kind for ev in self.events)


# ------------------------------------------------------------ builders

def rot(axis: str, theta: float, ion: int, **kw) -> Event:
    return Event("ROT", (ion,), axis=axis.upper(), theta=float(theta), **kw)


def ms(theta: float, a: int, b: int, **kw) -> Event:
    if a == b:
        raise ValueError("MS needs two distinct ions")
    return Event("MS", (a, b), theta=float(theta), **kw)


def prep(ion: int) -> Event:
    return Event("PREP", (ion,))


def meas(ion: int, cbit: int) -> Event:
    return Event("MEAS", (ion,), cbit=cbit)


def repump(ion: int) -> Event:
    return Event("REPUMP", (ion,))


def barrier() -> Event:
    return Event("BARRIER")


def cnot(c: int, t: int) -> Event:
    if c == t:
        raise ValueError("CNOT needs two distinct ions")
    return Event("CNOT", (c, t))


HALF_PI = math.pi / 2


def compile_cnot(control: int, target: int) -> list[Event]:
    """Native sequence equal to CNOT(control, target) up to a global phase."""
    if control == target:
        raise ValueError("control and target must differ")
    return [
        rot("Y", HALF_PI, control),
        ms(HALF_PI, control, target),
        rot("X", -HALF_PI, control),
        rot("X", -HALF_PI, target),
        rot("Y", -HALF_PI, control),
    ]


def compile_circuit(circ: Circuit) -> Circuit:
    out: list[Event] = []
    for ev in circ.events:
        if ev.kind == "CNOT":
            out.extend(compile_cnot(*ev.ions))
        else:
            out.append(ev)
    return Circuit(tuple(out), circ.num_ions)


def insert_refocussing(circ: Circuit, layout: IonLayout) -> Circuit:
    """Split every full MS into two halves with Z(pi) echoes on the spectators."""
    out: list[Event] = []
    block = max([ev.block for ev in circ.events] + [-1]) + 1
    for ev in circ.events:
        if ev.kind != "MS" or ev.half:
            out.append(ev)
            continue
        a, b = ev.ions
        spec, _ = layout.spectators(a, b)
        half = replace(ev, theta=ev.theta / 2, block=block, duration=None)
        out.append(replace(half, half=1))
        out.extend(rot("Z", math.pi, v, block=block) for v in spec)
        out.append(replace(half, half=2))
        out.extend(rot("Z", math.pi, v, block=block) for v in spec)
        block += 1
    return Circuit(tuple(out), circ.num_ions)


# ------------------------------------------------------------ scheduling

@dataclass
class Schedule:
    starts: list[float]                    # start time per event
    durations: list[float]                 # own duration per event
    total: float
    lead_idle: list[dict[int, float]]      # idle time of each ion just before the event
    tail_idle: dict[int, float]            # idle time after the last event
    idle_total: dict[int, float] = field(default_factory=dict)


def schedule(circ: Circuit, durations: DurationTable | None = None) -> Schedule:
    """Slot events in order and compute per-ion idle intervals.

    MS gates run alone in their slot.  Consecutive non-MS events on disjoint
    ions share a slot lasting as long as the longest of them.  Inside a refocus
    block the gate ions count as busy from the first half to the last echo.
    """
    durations = durations or DurationTable()
    n_ev = len(circ.events)
    starts = [0.0] * n_ev
    own = [durations.of(ev) for ev in circ.events]
    t = 0.0
    slot_start = 0.0
    slot_len = 0.0
    slot_ions: set[int] | None = None   # None means the current slot is closed
    for k, ev in enumerate(circ.events):
        if ev.kind == "BARRIER":
            t = slot_start + slot_len if slot_ions is not None else t
            slot_ions = None
            starts[k] = t
            continue
        if ev.kind == "CNOT":
            raise ValueError("compile CNOT macros before scheduling")
        shared = (ev.kind != "MS" and slot_ions is not None and not (set(ev.ions) & slot_ions))
        if shared:
            starts[k] = slot_start
            slot_len = max(slot_len, own[k])
            slot_ions |= set(ev.ions)
        else:
            if slot_ions is not None:
                t = slot_start + slot_len
            slot_start = t
            slot_len = own[k]
            starts[k] = t
            slot_ions = set(ev.ions)
            if ev.kind == "MS":
                t = slot_start + slot_len
                slot_ions = None
    total = slot_start + slot_len if slot_ions is not None else t
    total = max([total] + [starts[k] + own[k] for k in range(n_ev)])

    # refocus gate ions stay busy from the first half to the end of the block
    block_end: dict[int, float] = {}
    for k, ev in enumerate(circ.events):
        if ev.block >= 0:
            block_end[ev.block] = max(block_end.get(ev.block, 0.0), starts[k] + own[k])
    lead: list[dict[int, float]] = [dict() for _ in range(n_ev)]
    last_end = {q: 0.0 for q in range(circ.num_ions)}
    idle_total = {q: 0.0 for q in range(circ.num_ions)}
    for k, ev in enumerate(circ.events):
        for q in ev.ions:
            st, en = starts[k], starts[k] + own[k]
            if ev.kind == "MS" and ev.half == 1 and ev.block >= 0:
                en = block_end[ev.block]
            gap = max(0.0, st - last_end[q])
            lead[k][q] = gap
            idle_total[q] += gap
            last_end[q] = max(last_end[q], en)
    tail = {}
    for q in range(circ.num_ions):
        tail[q] = max(0.0, total - last_end[q])
        idle_total[q] += tail[q]
    return Schedule(starts, own, total, lead, tail, idle_total)


# ------------------------------------------------------------ unitary helper

def circuit_unitary(circ: Circuit, crosstalk: float = 0.0, layout: IonLayout | None = None) -> np.ndarray:
    """Dense unitary of a measurement-free circuit (qubit 0 least significant).

    With ``crosstalk`` > 0 every MS event is accompanied by the coherent
    spectator coupling exp(-i (theta*eps/2) X_g X_n) on each gate/neighbour
    pair, doubled for neighbours between the gate ions.
    """
    from .dense import DenseState

    n = circ.num_ions
    layout = layout or IonLayout.plain(n)
    dim = 2**n
    cols = []
    for k in range(dim):
        st = DenseState(n)
        st.psi[:] = 0
        st.psi[k] = 1
        for ev in compile_circuit(circ).events:
            if ev.kind == "ROT":
                st.apply_rotation(ev.axis, ev.theta, ev.ions[0])
            elif ev.kind == "MS":
                st.apply_xx(ev.theta, *ev.ions)
                if crosstalk:
                    spec, dbl = layout.spectators(*ev.ions)
                    st.apply_crosstalk_unitary(crosstalk, ev.theta, ev.ions, spec, dbl)
            elif ev.kind == "BARRIER":
                continue
            else:
                raise ValueError(f"{ev.kind} has no unitary")
        cols.append(st.psi)
    return np.array(cols).T


def unitary_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Phase-insensitive overlap |tr(u^dag v)| / d."""
    return float(abs(np.trace(u.conj().T @ v)) / u.shape[0])


# ------------------------------------------------------------ text format

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_angle(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"bad angle expression {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ValueError(f"bad angle expression {text!r}") from exc


def format_angle(theta: float) -> str:
    k = theta / (math.pi / 4)
    kr = round(k)
    if abs(k - kr) < 1e-12:
        from fractions import Fraction

        f = Fraction(int(kr), 4)
        if f == 0:
            return "0"
        num, den = f.numerator, f.denominator
        s = "-" if num < 0 else ""
        num = abs(num)
        body = "pi" if num == 1 else f"{num}*pi"
        return s + body + ("" if den == 1 else f"/{den}")
    return repr(float(theta))


class CircuitParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def parse_circuit(text: str, num_ions: int | None = None) -> Circuit:
    events: list[Event] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kw = {}
        pos = []
        for tk in toks[1:]:
            if "=" in tk:
                k, v = tk.split("=", 1)
                kw[k] = v
            else:
                pos.append(tk)
        op = toks[0].upper()
        try:
            extra = {}
            if "dur" in kw:
                extra["duration"] = float(kw.pop("dur"))
            if "blk" in kw:
                extra["block"] = int(kw.pop("blk"))
            if op == "ROT":
                if len(pos) != 3 or pos[0].upper() not in ("X", "Y", "Z"):
                    raise ValueError("expected ROT <X|Y|Z> <angle> <ion>")
                ev = rot(pos[0], parse_angle(pos[1]), int(pos[2]), **extra)
            elif op == "MS":
                if len(pos) != 3:
                    raise ValueError("expected MS <angle> <ion> <ion>")
                half = int(kw.pop("half", 0))
                if half not in (0, 1, 2):
                    raise ValueError("half must be 1 or 2")
                ev = ms(parse_angle(pos[0]), int(pos[1]), int(pos[2]), half=half, **extra)
            elif op in ("PREP", "REPUMP"):
                if len(pos) != 1:
                    raise ValueError(f"expected {op} <ion>")
                ev = Event(op, (int(pos[0]),), **extra)
            elif op == "MEAS":
                if len(pos) != 2:
                    raise ValueError("expected MEAS <ion> <cbit>")
                ev = Event("MEAS", (int(pos[0]),), cbit=int(pos[1].lstrip("c")), **extra)
            elif op == "BARRIER":
                if pos:
                    raise ValueError("BARRIER takes no arguments")
                ev = barrier()
            elif op == "CNOT":
                if len(pos) != 2:
                    raise ValueError("expected CNOT <control> <target>")
                ev = cnot(int(pos[0]), int(pos[1]))
            else:
                raise ValueError(f"unknown operation {toks[0]!r}")
            if kw:
                raise ValueError(f"unknown options {sorted(kw)}")
            if any(q < 0 for q in ev.ions):
                raise ValueError("negative ion index")
        except ValueError as exc:
            raise CircuitParseError(lineno, str(exc)) from None
        events.append(ev)
    top = max((q for ev in events for q in ev.ions), default=-1) + 1
    if num_ions is None:
        num_ions = top
    elif top > num_ions:
        raise CircuitParseError(0, f"ion {top - 1} outside a {num_ions}-ion string")
    return Circuit(tuple(events), num_ions)


def format_circuit(circ: Circuit) -> str:
    lines = []
    for ev in circ.events:
        dur = f" dur={ev.duration!r}" if ev.duration is not None else ""
        if ev.block >= 0:
            dur += f" blk={ev.block}"
        if ev.kind == "ROT":
            lines.append(f"ROT {ev.axis} {format_angle(ev.theta)} {ev.ions[0]}{dur}")
        elif ev.kind == "MS":
            half = f" half={ev.half}" if ev.half else ""
            lines.append(f"MS {format_angle(ev.theta)} {ev.ions[0]} {ev.ions[1]}{half}{dur}")
        elif ev.kind == "MEAS":
            lines.append(f"MEAS {ev.ions[0]} c{ev.cbit}{dur}")
        elif ev.kind == "BARRIER":
            lines.append("BARRIER")
        elif ev.kind == "CNOT":
            lines.append(f"CNOT {ev.ions[0]} {ev.ions[1]}")
        else:
            lines.append(f"{ev.kind} {ev.ions[0]}{dur}")
    return "\n".join(lines) + ("\n" if lines else "")
