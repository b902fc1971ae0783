"""Steane [[7,1,3]] colour code: circuits, frame propagation and decoding.

Ion string (0-based): flag/syndrome ancilla a1 at 0, data qubits 1..7 at
ions 1..7, ancillas a2 and a3 at 8 and 9.  Data qubit k sits on ion k.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .circuit import Circuit, Event, IonLayout, cnot, compile_circuit, meas, prep, repump, rot
from .pauli import PauliString
from .tableau import quarter_turns

SUPPORTS = ((1, 2, 3, 4), (2, 3, 5, 6), (3, 4, 6, 7))
LOGICAL_SUPPORT = (5, 6, 7)
NUM_IONS = 10
A1, A2, A3 = 0, 8, 9
ANCILLAS = (A1, A2, A3)
DATA_IONS = tuple(range(1, 8))
HALF_PI = math.pi / 2
TARGETS = ("plus", "zero")

# CNOT orderings of the two parallel flagged groups, (control, target) ions.
# Group A: a1 reads X on P1, a2/a3 read Z on P2/P3.  Group B: the reverse.
GROUP_A_ORDER = ((0, 2), (0, 3), (0, 1), (6, 9), (6, 8), (5, 8), (0, 4), (7, 9), (2, 8), (3, 8), (4, 9), (3, 9))
GROUP_B_ORDER = ((8, 2), (8, 3), (1, 0), (9, 6), (2, 0), (8, 5), (8, 6), (9, 7), (4, 0), (3, 0), (9, 4), (9, 3))
# encoder for |0>_L: pivots 1, 5, 7 start in |+>
ENCODER = ((1, 2), (1, 3), (1, 4), (5, 2), (5, 3), (5, 6), (7, 3), (7, 4), (7, 6))
VERIFY = (1, 3, 6)       # weight-3 logical representative checked by the prep flag


def _mask(qubits) -> int:
    m = 0
    for q in qubits:
        m |= 1 << q
    return m


@dataclass(frozen=True)
class SteaneCode:
    x_stabilisers: tuple[tuple[int, ...], ...]
    z_stabilisers: tuple[tuple[int, ...], ...]
    logical_x: tuple[int, ...]
    logical_z: tuple[int, ...]

    n: int = 7

    def stabiliser_paulis(self) -> list[PauliString]:
        out = [PauliString.from_sparse(self.n, {q - 1: "X" for q in s}) for s in self.x_stabilisers]
        out += [PauliString.from_sparse(self.n, {q - 1: "Z" for q in s}) for s in self.z_stabilisers]
        return out

    def logical_paulis(self) -> tuple[PauliString, PauliString]:
        return (PauliString.from_sparse(self.n, {q - 1: "X" for q in self.logical_x}),
                PauliString.from_sparse(self.n, {q - 1: "Z" for q in self.logical_z}))

    def syndrome(self, p: PauliString) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """(X-stabiliser bits, Z-stabiliser bits) excited by a data Pauli."""
        sx = tuple(int(not p.commutes(s)) for s in self.stabiliser_paulis()[:3])
        sz = tuple(int(not p.commutes(s)) for s in self.stabiliser_paulis()[3:])
        return sx, sz

    def distance(self) -> int:
        """Minimum weight of a nontrivial logical operator (brute force)."""
        stabs = self.stabiliser_paulis()
        lx, lz = self.logical_paulis()
        for w in range(1, self.n + 1):
            for qs in itertools.combinations(range(self.n), w):
                for letters in itertools.product("XYZ", repeat=w):
                    p = PauliString.from_sparse(self.n, dict(zip(qs, letters)))
                    if all(p.commutes(s) for s in stabs) and not (p.commutes(lx) and p.commutes(lz)):
                        return w
        return self.n


def define_code() -> SteaneCode:
    return SteaneCode(SUPPORTS, SUPPORTS, LOGICAL_SUPPORT, LOGICAL_SUPPORT)


# ------------------------------------------------------------------ circuits

def _to_plus(q):
    return rot("Y", HALF_PI, q)


def _x_readout(q):
    return rot("Y", -HALF_PI, q)


def prep_circuit(target: str) -> Circuit:
    """Encoder plus single-flag verification; the flag is classical bit 0."""
    _check_target(target)
    ev: list[Event] = [prep(q) for q in range(NUM_IONS)]
    pivots = (1, 5, 7)
    if target == "zero":
        ev += [_to_plus(q) for q in pivots]
        ev += [cnot(c, t) for c, t in ENCODER]
        ev += [cnot(d, A1) for d in VERIFY]
    else:
        ev += [_to_plus(q) for q in DATA_IONS if q not in pivots]
        ev += [cnot(t, c) for c, t in ENCODER]
        ev.append(_to_plus(A1))
        ev += [cnot(A1, d) for d in VERIFY]
        ev.append(_x_readout(A1))
    ev.append(meas(A1, 0))
    return Circuit(tuple(ev), NUM_IONS)


def _repump_all() -> list[Event]:
    return [repump(q) for q in range(NUM_IONS)]


def group_circuit(group: str) -> Circuit:
    """Repump, then one parallel flagged group.  Bits: a1 -> 0, a2 -> 1, a3 -> 2."""
    ev = _repump_all() + [prep(q) for q in ANCILLAS]
    if group == "A":
        xanc, flag_pairs, order = (A1,), ((A1, A2), (A1, A3)), GROUP_A_ORDER
    elif group == "B":
        xanc, flag_pairs, order = (A2, A3), ((A2, A1), (A3, A1)), GROUP_B_ORDER
    else:
        raise ValueError(f"unknown group {group!r}")
    ev += [_to_plus(q) for q in xanc]
    ev += [cnot(*p) for p in flag_pairs]
    ev += [cnot(*p) for p in order]
    ev += [cnot(*p) for p in flag_pairs]
    ev += [_x_readout(q) for q in xanc]
    ev += [meas(q, k) for k, q in enumerate(ANCILLAS)]
    return Circuit(tuple(ev), NUM_IONS)


def unflagged_circuit() -> Circuit:
    """Repump, X-type stabilisers on bits 0..2, then Z-type on bits 3..5."""
    ev = _repump_all() + [prep(q) for q in ANCILLAS] + [_to_plus(q) for q in ANCILLAS]
    for a, s in zip(ANCILLAS, SUPPORTS):
        ev += [cnot(a, d) for d in s]
    ev += [_x_readout(q) for q in ANCILLAS]
    ev += [meas(q, k) for k, q in enumerate(ANCILLAS)]
    ev += [prep(q) for q in ANCILLAS]
    for a, s in zip(ANCILLAS, SUPPORTS):
        ev += [cnot(d, a) for d in s]
    ev += [meas(q, 3 + k) for k, q in enumerate(ANCILLAS)]
    return Circuit(tuple(ev), NUM_IONS)


def readout_circuit(target: str) -> Circuit:
    """Transversal data measurement in the logical basis; data k -> bit k-1."""
    _check_target(target)
    ev: list[Event] = []
    if target == "plus":
        ev += [_x_readout(q) for q in DATA_IONS]
    ev += [meas(q, q - 1) for q in DATA_IONS]
    return Circuit(tuple(ev), NUM_IONS)


def _check_target(target):
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}, got {target!r}")


def group_bits_meaning(group: str) -> tuple[tuple[str, int], ...]:
    """Which stabiliser each group bit reports: ('X' or 'Z', support index)."""
    return (("X", 0), ("Z", 1), ("Z", 2)) if group == "A" else (("Z", 0), ("X", 1), ("X", 2))


# ---------------------------------------------------------- frame propagation

_AX = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


def _anticommutes(x, z, q, axis):
    px, pz = _AX[axis]
    return ((x >> q & 1) & pz) ^ ((z >> q & 1) & px)


def propagate(circ: Circuit, x: int = 0, z: int = 0, faults: dict | None = None, start: int = 0):
    """Push a Pauli frame through a compiled circuit.

    ``faults`` maps an event index i to a frame ``(fx, fz)`` multiplied in just
    after event i (index -1 means before the first event).  Returns the dict
    of flipped classical bits and the final frame.
    """
    faults = faults or {}
    flips: dict[int, int] = {}
    if -1 in faults:
        x ^= faults[-1][0]
        z ^= faults[-1][1]
    for i in range(start, len(circ.events)):
        ev = circ.events[i]
        k = ev.kind
        if k == "ROT":
            q = ev.ions[0]
            if quarter_turns(ev.theta) % 2 and _anticommutes(x, z, q, ev.axis):
                px, pz = _AX[ev.axis]
                x ^= px << q
                z ^= pz << q
        elif k == "MS":
            a, b = ev.ions
            theta = ev.theta * (2 if ev.half else 1)
            if ev.half == 1:
                pass
            elif quarter_turns(theta) % 2 and ((z >> a & 1) ^ (z >> b & 1)):
                x ^= (1 << a) | (1 << b)
        elif k == "PREP":
            q = ev.ions[0]
            x &= ~(1 << q)
            z &= ~(1 << q)
        elif k == "MEAS":
            flips[ev.cbit] = x >> ev.ions[0] & 1
        elif k == "CNOT":
            c, t = ev.ions
            if x >> c & 1:
                x ^= 1 << t
            if z >> t & 1:
                z ^= 1 << c
        if i in faults:
            x ^= faults[i][0]
            z ^= faults[i][1]
    return flips, x, z


def data_part(mask: int) -> int:
    """Ion bit mask -> 7-bit data mask (bit k-1 for data qubit k)."""
    return (mask >> 1) & 0x7F


def data_to_ions(mask7: int) -> int:
    return (mask7 & 0x7F) << 1


_SUP7 = tuple(_mask(q - 1 for q in s) for s in SUPPORTS)
_LOG7 = _mask(q - 1 for q in LOGICAL_SUPPORT)


def _parity(v: int) -> int:
    return bin(v).count("1") & 1


def syndrome_bits(mask7: int) -> tuple[int, int, int]:
    return tuple(_parity(mask7 & s) for s in _SUP7)


def _span(gens):
    s = {0}
    for g in gens:
        s |= {a ^ g for a in s}
    return frozenset(s)


STAB_SPAN = _span(_SUP7)
_LOOKUP = {syndrome_bits(1 << k): k for k in range(7)}


def min_weight_rep(mask7: int) -> int:
    return min((mask7 ^ s for s in STAB_SPAN), key=lambda v: (bin(v).count("1"), v))


def weight1_flip(bits: tuple[int, int, int]) -> int:
    """Single-qubit mask matching a nonzero syndrome (0 for the zero syndrome)."""
    if not any(bits):
        return 0
    return 1 << _LOOKUP[tuple(bits)]


def weight1_correction(unf_bits) -> tuple[int, int]:
    """Naive decoder from the six unflagged bits: (x mask, z mask) on data."""
    sx = tuple(unf_bits[0:3])
    sz = tuple(unf_bits[3:6])
    return weight1_flip(sz), weight1_flip(sx)


def decode_readout(bits7: int, target: str, corr: tuple[int, int] = (0, 0)) -> int:
    """Logical value from raw readout bits after a Pauli correction.

    The correction flips the readout bits it anticommutes with; the
    remaining classical syndrome is fixed with a weight-1 flip.
    """
    flip = corr[0] if target == "zero" else corr[1]
    b = bits7 ^ flip
    b ^= weight1_flip(syndrome_bits(b))
    return _parity(b & _LOG7)


# --------------------------------------------------------------- decode table

class DecodeError(RuntimeError):
    pass


@dataclass
class DecodeTable:
    """(group, 3 group bits, 6 unflagged bits) -> data correction (x, z).

    One table per target state; residuals are compared only on the Pauli
    type the readout is sensitive to.
    """
    target: str
    entries: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def lookup(self, group: str, gbits, unf_bits) -> tuple[int, int]:
        key = (group, tuple(int(b) for b in gbits), tuple(int(b) for b in unf_bits))
        if key in self.entries:
            return self.entries[key]
        return weight1_correction(key[2])

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def keys_for(self, group: str):
        return [k for k in self.entries if k[0] == group]


def _single_faults(circ: Circuit, all_qubits: bool = True):
    """Frames for every single fault location of a compiled circuit.

    Yields ``(event index, fx, fz, tag)``.  Gate locations get every Pauli on
    the gate's ions (15 for MS); idle locations get single Paulis on every
    ion after every event; measurement flips act just before the readout.
    """
    singles = [(1, 0), (1, 1), (0, 1)]
    for i, ev in enumerate(circ.events):
        if ev.kind == "MEAS":
            q = ev.ions[0]
            yield i - 1, 1 << q, 0, ("meas", i)
        if ev.kind == "MS":
            a, b = ev.ions
            for (xa, za), (xb, zb) in itertools.product([(0, 0)] + singles, repeat=2):
                if xa or za or xb or zb:
                    yield i, (xa << a) | (xb << b), (za << a) | (zb << b), ("ms", i)
        qubits = range(circ.num_ions) if all_qubits else ev.ions
        for q in qubits:
            for px, pz in singles:
                yield i, px << q, pz << q, ("pauli", i, q)


def _inputs():
    """Every data frame with X weight <= 1 and Z weight <= 1 (ion masks)."""
    out = []
    for a in range(8):
        for b in range(8):
            x = (1 << a) if a else 0      # ion a is data qubit a
            z = (1 << b) if b else 0
            out.append((x, z))
    return out


def build_decode_table(target: str, code: SteaneCode | None = None) -> DecodeTable:
    """Enumerate single faults through prep, group A and group B.

    Every (group bits, unflagged syndrome) signature gets the residual data
    error it must undo.  Two faults with the same signature must leave
    residuals equal up to stabilisers on the relevant Pauli type; otherwise
    the circuits are not fault tolerant and this raises ``DecodeError``.
    """
    _check_target(target)
    code = code or define_code()
    rel = 0 if target == "zero" else 1          # 0: X part matters, 1: Z part
    table = DecodeTable(target)
    prep_c = compile_circuit(prep_circuit(target))
    ga = compile_circuit(group_circuit("A"))
    gb = compile_circuit(group_circuit("B"))

    prep_res = {(0, 0)}
    for i, fx, fz, tag in _single_faults(prep_c):
        flips, x, z = propagate(prep_c, faults={i: (fx, fz)})
        if flips.get(0, 0):
            continue
        prep_res.add((data_part(x), data_part(z)))

    def add(group, gbits, rx, rz, tag):
        unf = syndrome_bits(rz) + syndrome_bits(rx)
        key = (group, gbits, unf)
        res = (rx, rz)
        if key in table.entries:
            old = table.entries[key]
            if (old[rel] ^ res[rel]) not in STAB_SPAN:
                raise DecodeError(f"signature {key}: {tag} conflicts with {table.sources[key]}")
            return
        table.entries[key] = (min_weight_rep(rx), min_weight_rep(rz))
        table.sources[key] = tag

    inputs = [(data_to_ions(x), data_to_ions(z)) for x, z in prep_res] + _inputs()
    passed = []
    runs = [(x, z, {}, ("input", x, z)) for x, z in inputs]
    runs += [(0, 0, {i: (fx, fz)}, ("A",) + tag) for i, fx, fz, tag in _single_faults(ga)]
    for x0, z0, f, tag in runs:
        flips, x, z = propagate(ga, x0, z0, f)
        gbits = tuple(flips[k] for k in range(3))
        rx, rz = data_part(x), data_part(z)
        if any(gbits):
            add("A", gbits, rx, rz, tag)
        else:
            passed.append((data_to_ions(rx), data_to_ions(rz)))
    runs = [(x, z, {}, ("input", x, z)) for x, z in set(passed) | set(inputs)]
    runs += [(0, 0, {i: (fx, fz)}, ("B",) + tag) for i, fx, fz, tag in _single_faults(gb)]
    for x0, z0, f, tag in runs:
        flips, x, z = propagate(gb, x0, z0, f)
        gbits = tuple(flips[k] for k in range(3))
        if any(gbits):
            add("B", gbits, data_part(x), data_part(z), tag)
    for g in ("A", "B"):
        table.entries[(g, (0, 0, 0), (0,) * 6)] = (0, 0)
    return table
