"""Stabiliser tableau simulator with bit-packed rows.

Layout: ``x`` and ``z`` are ``uint64`` arrays of shape ``(2n+1, W)`` with
``W = ceil(n/64)``; row ``i < n`` is destabiliser i, row ``n+i`` is
stabiliser i and row ``2n`` is scratch.  ``r`` holds the sign bit of each row.
Qubit q lives in word ``q >> 6`` at bit ``q & 63``.

All kernels are numba functions acting in place, so the batch engine can call
them directly.  Rotations are only supported at multiples of pi/2.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .pauli import PauliString

ONE = np.uint64(1)


# ---------------------------------------------------------------- kernels

@njit(cache=True, inline="always")
def popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return int((v * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True, inline="always")
def getbit(a, row, q):
    return int((a[row, q >> 6] >> np.uint64(q & 63)) & ONE)


@njit(cache=True, inline="always")
def flipbit(a, row, q):
    a[row, q >> 6] ^= ONE << np.uint64(q & 63)


@njit(cache=True)
def tab_reset(x, z, r, n):
    """Set the tableau to |0...0>."""
    x[:, :] = 0
    z[:, :] = 0
    r[:] = 0
    for i in range(n):
        flipbit(x, i, i)
        flipbit(z, n + i, i)


def new_arrays(n: int):
    w = (n + 63) // 64
    x = np.zeros((2 * n + 1, w), dtype=np.uint64)
    z = np.zeros((2 * n + 1, w), dtype=np.uint64)
    r = np.zeros(2 * n + 1, dtype=np.uint8)
    tab_reset(x, z, r, n)
    return x, z, r


@njit(cache=True)
def _phase_g(x, z, i, h):
    """Sum of i-exponents for the product row_i * row_h."""
    g = 0
    for w in range(x.shape[1]):
        x1 = x[i, w]
        z1 = z[i, w]
        x2 = x[h, w]
        z2 = z[h, w]
        pos = (x1 & z1 & z2 & ~x2) | (x1 & ~z1 & x2 & z2) | (~x1 & z1 & x2 & ~z2)
        neg = (x1 & z1 & x2 & ~z2) | (x1 & ~z1 & ~x2 & z2) | (~x1 & z1 & x2 & z2)
        g += popcount64(pos) - popcount64(neg)
    return g


@njit(cache=True)
def rowsum(x, z, r, h, i):
    """row_h <- row_i * row_h (rows must commute or the product is non-Hermitian)."""
    e = 2 * int(r[h]) + 2 * int(r[i]) + _phase_g(x, z, i, h)
    e %= 4
    r[h] = 1 if e == 2 else 0
    for w in range(x.shape[1]):
        x[h, w] ^= x[i, w]
        z[h, w] ^= z[i, w]


@njit(cache=True, inline="always")
def _g1(x1, z1, x2, z2):
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    if z1 == 1:
        return x2 * (1 - 2 * z2)
    return 0


@njit(cache=True)
def pauli1(x, z, r, n, q, p):
    """Apply Pauli p (1=X, 2=Y, 3=Z) on qubit q: flip anticommuting rows."""
    px = 1 if (p == 1 or p == 2) else 0
    pz = 1 if (p == 2 or p == 3) else 0
    for i in range(2 * n):
        a = (getbit(x, i, q) & pz) ^ (getbit(z, i, q) & px)
        if a:
            r[i] ^= 1


@njit(cache=True)
def rot1(x, z, r, n, q, axis, k):
    """exp(-i k (pi/4) P_q) with axis 0=X, 1=Y, 2=Z and k an integer."""
    k = k % 4
    if k == 0:
        return
    px = 1 if axis != 2 else 0
    pz = 1 if axis != 0 else 0
    if k == 2:
        pauli1(x, z, r, n, q, axis + 1)
        return
    extra = 1 if k == 1 else 3
    for i in range(2 * n):
        xi = getbit(x, i, q)
        zi = getbit(z, i, q)
        if ((xi & pz) ^ (zi & px)) == 0:
            continue
        e = (extra + 2 * int(r[i]) + _g1(xi, zi, px, pz)) % 4
        r[i] = 1 if e == 2 else 0
        if px:
            flipbit(x, i, q)
        if pz:
            flipbit(z, i, q)


@njit(cache=True)
def rotxx(x, z, r, n, q1, q2, k):
    """exp(-i k (pi/4) X_q1 X_q2)."""
    k = k % 4
    if k == 0:
        return
    if k == 2:
        pauli1(x, z, r, n, q1, 1)
        pauli1(x, z, r, n, q2, 1)
        return
    extra = 1 if k == 1 else 3
    for i in range(2 * n):
        za = getbit(z, i, q1)
        zb = getbit(z, i, q2)
        if (za ^ zb) == 0:
            continue
        xa = getbit(x, i, q1)
        xb = getbit(x, i, q2)
        e = (extra + 2 * int(r[i]) + _g1(xa, za, 1, 0) + _g1(xb, zb, 1, 0)) % 4
        r[i] = 1 if e == 2 else 0
        flipbit(x, i, q1)
        flipbit(x, i, q2)


@njit(cache=True)
def hadamard(x, z, r, n, q):
    for i in range(2 * n):
        xi = getbit(x, i, q)
        zi = getbit(z, i, q)
        r[i] ^= xi & zi
        if xi != zi:
            flipbit(x, i, q)
            flipbit(z, i, q)


@njit(cache=True)
def phase_s(x, z, r, n, q):
    for i in range(2 * n):
        xi = getbit(x, i, q)
        zi = getbit(z, i, q)
        r[i] ^= xi & zi
        if xi:
            flipbit(z, i, q)


@njit(cache=True)
def cnot(x, z, r, n, c, t):
    for i in range(2 * n):
        xc = getbit(x, i, c)
        zc = getbit(z, i, c)
        xt = getbit(x, i, t)
        zt = getbit(z, i, t)
        r[i] ^= xc & zt & (xt ^ zc ^ 1)
        if xc:
            flipbit(x, i, t)
        if zt:
            flipbit(z, i, c)


@njit(cache=True)
def measure(x, z, r, n, q, forced, u):
    """Z measurement of qubit q.

    Returns ``(outcome, p1)`` where p1 is the prior probability of outcome 1
    (0, 1 or 0.5).  ``forced`` in {0, 1} fixes a random outcome; -1 samples it
    from the uniform ``u``.
    """
    p = -1
    for i in range(n, 2 * n):
        if getbit(x, i, q):
            p = i
            break
    if p >= 0:
        for i in range(2 * n):
            if i != p and getbit(x, i, q):
                rowsum(x, z, r, i, p)
        for w in range(x.shape[1]):
            x[p - n, w] = x[p, w]
            z[p - n, w] = z[p, w]
            x[p, w] = 0
            z[p, w] = 0
        r[p - n] = r[p]
        flipbit(z, p, q)
        if forced >= 0:
            out = forced
        else:
            out = 1 if u < 0.5 else 0
        r[p] = out
        return out, 0.5
    s = 2 * n
    for w in range(x.shape[1]):
        x[s, w] = 0
        z[s, w] = 0
    r[s] = 0
    for i in range(n):
        if getbit(x, i, q):
            rowsum(x, z, r, s, i + n)
    out = int(r[s])
    return out, float(out)


@njit(cache=True)
def pauli_masks(x, z, r, n, mx, mz):
    """Apply the Pauli with x-part ``mx`` and z-part ``mz`` (word arrays)."""
    for i in range(2 * n):
        a = 0
        for w in range(x.shape[1]):
            a += popcount64((x[i, w] & mz[w]) ^ (z[i, w] & mx[w]))
        if a & 1:
            r[i] ^= 1


# ---------------------------------------------------------------- class API

CLIFFORD_GATES = ("H", "S", "SDG", "X", "Y", "Z", "CNOT", "MS", "RX", "RY", "RZ")
_AXIS = {"RX": 0, "RY": 1, "RZ": 2}


def quarter_turns(theta: float, tol: float = 1e-9) -> int:
    """Return k with theta = k*pi/2, or raise if theta is not Clifford."""
    k = theta / (math.pi / 2)
    kr = round(k)
    if abs(k - kr) > tol:
        raise ValueError(f"angle {theta!r} is not a multiple of pi/2; requires dense backend")
    return int(kr) % 4


class StabilizerTableau:
    """An n-qubit stabiliser state, initialised to |0...0>."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one qubit")
        self.n = n
        self.x, self.z, self.r = new_arrays(n)
        self._half: dict[tuple[int, int], int] = {}

    def copy(self) -> "StabilizerTableau":
        t = StabilizerTableau.__new__(StabilizerTableau)
        t.n = self.n
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        t._half = dict(self._half)
        return t

    def _check_targets(self, targets):
        for q in targets:
            if not 0 <= q < self.n:
                raise IndexError(f"qubit {q} out of range for {self.n} qubits")
        if len(set(targets)) != len(targets):
            raise ValueError("targets must be distinct")
        for pair in self._half:
            if set(pair) & set(targets) and tuple(sorted(targets)) != pair:
                raise ValueError(f"pending half MS on {pair} not completed")

    def apply(self, gate: str, targets, theta: float | None = None) -> "StabilizerTableau":
        gate = gate.upper()
        targets = [int(t) for t in targets]
        self._check_targets(targets)
        n, x, z, r = self.n, self.x, self.z, self.r
        if gate == "H":
            hadamard(x, z, r, n, targets[0])
        elif gate == "S":
            phase_s(x, z, r, n, targets[0])
        elif gate == "SDG":
            rot1(x, z, r, n, targets[0], 2, 3)
        elif gate in ("X", "Y", "Z"):
            pauli1(x, z, r, n, targets[0], "XYZ".index(gate) + 1)
        elif gate == "CNOT":
            if len(targets) != 2:
                raise ValueError("CNOT needs two targets")
            cnot(x, z, r, n, targets[0], targets[1])
        elif gate in _AXIS:
            if theta is None:
                raise ValueError(f"{gate} needs an angle")
            rot1(x, z, r, n, targets[0], _AXIS[gate], quarter_turns(theta))
        elif gate == "MS":
            if theta is None or len(targets) != 2:
                raise ValueError("MS needs an angle and two targets")
            self._ms(targets[0], targets[1], theta)
        else:
            raise ValueError(f"unknown gate {gate!r}; requires dense backend")
        return self

    def _ms(self, a: int, b: int, theta: float):
        eighth = theta / (math.pi / 4)
        if abs(eighth - round(eighth)) > 1e-9:
            raise ValueError(f"MS angle {theta!r} requires dense backend")
        e = int(round(eighth))
        key = (min(a, b), max(a, b))
        if key in self._half:
            e += self._half.pop(key)
        elif e % 2:
            self._half[key] = e
            return
        if e % 2:
            self._half[key] = e
            return
        rotxx(self.x, self.z, self.r, self.n, a, b, (e // 2) % 4)

    def apply_pauli(self, p: PauliString) -> "StabilizerTableau":
        if p.n != self.n:
            raise ValueError(f"Pauli acts on {p.n} qubits, tableau has {self.n}")
        mx, mz = _pack(p.x), _pack(p.z)
        pauli_masks(self.x, self.z, self.r, self.n, mx, mz)
        return self

    def measure_z(self, q: int, rng: np.random.Generator) -> int:
        if not 0 <= q < self.n:
            raise IndexError(f"qubit {q} out of range for {self.n} qubits")
        out, _ = measure(self.x, self.z, self.r, self.n, q, -1, float(rng.random()))
        return int(out)

    def is_deterministic(self, q: int) -> bool:
        n = self.n
        return not any((self.x[i, q >> 6] >> np.uint64(q & 63)) & ONE for i in range(n, 2 * n))

    def row(self, i: int) -> PauliString:
        xs = _unpack(self.x[i], self.n)
        zs = _unpack(self.z[i], self.n)
        return PauliString(xs, zs, 2 * int(self.r[i]))

    def stabilizers(self) -> list[PauliString]:
        return [self.row(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n)]

    def expectation(self, p: PauliString) -> int:
        """Return +1 / -1 if +-p is in the stabiliser group, else 0."""
        if p.n != self.n or not p.is_hermitian():
            raise ValueError("need a Hermitian Pauli of matching size")
        stabs = self.stabilizers()
        if not all(s.commutes(p) for s in stabs):
            return 0
        acc = PauliString.identity(self.n)
        for i, d in enumerate(self.destabilizers()):
            if not d.commutes(p):
                acc = stabs[i] * acc
        if not (np.array_equal(acc.x, p.x) and np.array_equal(acc.z, p.z)):
            raise RuntimeError("tableau inconsistent")
        return 1 if (acc.phase - p.phase) % 4 == 0 else -1

    def validate(self) -> None:
        """Check commutation relations and rank; raise AssertionError on failure."""
        n = self.n
        rows = [self.row(i) for i in range(2 * n)]
        for i in range(n):
            for j in range(n):
                s_i, s_j = rows[n + i], rows[n + j]
                assert s_i.commutes(s_j), "stabilisers must commute"
                d_i = rows[i]
                assert d_i.commutes(s_j) == (i != j), "destabiliser pairing broken"
        m = np.array([np.concatenate([p.x, p.z]) for p in rows], dtype=np.uint8)
        assert _gf2_rank(m) == 2 * n, "rows are not independent"


def _pack(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=bool)
    w = (bits.size + 63) // 64
    out = np.zeros(w, dtype=np.uint64)
    for q in np.flatnonzero(bits):
        out[q >> 6] |= np.uint64(1) << np.uint64(q & 63)
    return out


def _unpack(words, n: int) -> np.ndarray:
    return np.array([(int(words[q >> 6]) >> (q & 63)) & 1 for q in range(n)], dtype=bool)


def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy() % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = next((i for i in range(rank, rows) if m[i, c]), None)
        if piv is None:
            continue
        m[[rank, piv]] = m[[piv, rank]]
        for i in range(rows):
            if i != rank and m[i, c]:
                m[i] ^= m[rank]
        rank += 1
    return rank


# functional wrappers around the class methods

def apply_clifford(state: StabilizerTableau, gate: str, targets, theta: float | None = None):
    return state.apply(gate, targets, theta)


def apply_pauli_fault(state: StabilizerTableau, p: PauliString):
    return state.apply_pauli(p)


def measure_z(state: StabilizerTableau, q: int, rng: np.random.Generator):
    out = state.measure_z(q, rng)
    return out, state
