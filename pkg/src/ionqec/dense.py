"""Dense state-vector simulator.

Qubit 0 is the least significant bit of the amplitude index.  Kernels work in
place on a 1-d complex128 array so they can be reused by the batch engine.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .pauli import PauliString

MAX_QUBITS = 14


@njit(cache=True)
def d_rot(psi, q, axis, theta):
    """psi <- exp(-i theta/2 P_q) psi, axis 0=X, 1=Y, 2=Z."""
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    m = 1 << q
    dim = psi.shape[0]
    if axis == 2:
        e0 = complex(c, -s)
        e1 = complex(c, s)
        for i in range(dim):
            if i & m:
                psi[i] *= e1
            else:
                psi[i] *= e0
        return
    for i in range(dim):
        if i & m:
            continue
        a = psi[i]
        b = psi[i | m]
        if axis == 0:
            psi[i] = c * a - 1j * s * b
            psi[i | m] = -1j * s * a + c * b
        else:
            psi[i] = c * a - s * b
            psi[i | m] = s * a + c * b


@njit(cache=True)
def d_xx(psi, q1, q2, theta):
    """psi <- exp(-i theta/2 X_q1 X_q2) psi."""
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    m1 = 1 << q1
    m2 = 1 << q2
    both = m1 | m2
    for i in range(psi.shape[0]):
        if i & both:
            continue
        a00 = psi[i]
        a01 = psi[i | m1]
        a10 = psi[i | m2]
        a11 = psi[i | both]
        psi[i] = c * a00 - 1j * s * a11
        psi[i | both] = c * a11 - 1j * s * a00
        psi[i | m1] = c * a01 - 1j * s * a10
        psi[i | m2] = c * a10 - 1j * s * a01


@njit(cache=True)
def d_pauli(psi, q, p):
    """Apply X (1), Y (2) or Z (3) to qubit q."""
    m = 1 << q
    if p == 3:
        for i in range(psi.shape[0]):
            if i & m:
                psi[i] = -psi[i]
        return
    for i in range(psi.shape[0]):
        if i & m:
            continue
        a = psi[i]
        b = psi[i | m]
        if p == 1:
            psi[i] = b
            psi[i | m] = a
        else:
            psi[i] = -1j * b
            psi[i | m] = 1j * a


@njit(cache=True)
def d_prob1(psi, q):
    m = 1 << q
    p = 0.0
    for i in range(psi.shape[0]):
        if i & m:
            p += psi[i].real ** 2 + psi[i].imag ** 2
    return p


@njit(cache=True)
def d_project(psi, q, outcome, prob):
    m = 1 << q
    scale = 1.0 / math.sqrt(prob)
    for i in range(psi.shape[0]):
        if ((i & m) != 0) == (outcome == 1):
            psi[i] *= scale
        else:
            psi[i] = 0.0


@njit(cache=True)
def d_measure(psi, q, forced, u):
    """Z measurement; returns (outcome, p1) with p1 the prior P(outcome=1)."""
    p1 = d_prob1(psi, q)
    if p1 < 0.0:
        p1 = 0.0
    if p1 > 1.0:
        p1 = 1.0
    if forced >= 0:
        out = forced
    else:
        out = 1 if u < p1 else 0
    p = p1 if out == 1 else 1.0 - p1
    if p <= 0.0:
        raise ValueError("projection onto a zero-probability branch")
    d_project(psi, q, out, p)
    return out, p1


@njit(cache=True)
def d_reset_all(psi):
    psi[:] = 0.0
    psi[0] = 1.0


class DenseState:
    """Pure state on n <= 14 qubits, starting in |0...0>."""

    def __init__(self, n: int, amplitudes: np.ndarray | None = None):
        if not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"dense backend supports 1..{MAX_QUBITS} qubits, got {n}")
        self.n = n
        if amplitudes is None:
            self.psi = np.zeros(2**n, dtype=np.complex128)
            self.psi[0] = 1.0
        else:
            a = np.asarray(amplitudes, dtype=np.complex128)
            if a.shape != (2**n,):
                raise ValueError("amplitude vector has wrong length")
            self.psi = a.copy()

    def copy(self) -> "DenseState":
        return DenseState(self.n, self.psi)

    def _q(self, q: int) -> int:
        if not 0 <= q < self.n:
            raise IndexError(f"qubit {q} out of range for {self.n} qubits")
        return int(q)

    def apply_rotation(self, axis: str, theta: float, q: int) -> "DenseState":
        d_rot(self.psi, self._q(q), "XYZ".index(axis.upper()), float(theta))
        return self

    def apply_xx(self, theta: float, q1: int, q2: int) -> "DenseState":
        if q1 == q2:
            raise ValueError("XX needs two distinct qubits")
        d_xx(self.psi, self._q(q1), self._q(q2), float(theta))
        return self

    def apply_crosstalk_unitary(self, eps_ct: float, theta: float, gate_qubits, neighbor_qubits,
                                doubled=()) -> "DenseState":
        gate = [self._q(g) for g in gate_qubits]
        nbrs = [self._q(v) for v in neighbor_qubits]
        if set(gate) & set(nbrs):
            raise ValueError("gate and neighbour sets overlap")
        doubled = set(doubled)
        for g in gate:
            for v in nbrs:
                ang = eps_ct * theta * (2.0 if v in doubled else 1.0)
                d_xx(self.psi, g, v, ang)
        return self

    def apply_stark_unitary(self, mu: float, neighbor_qubits) -> "DenseState":
        for v in neighbor_qubits:
            d_rot(self.psi, self._q(v), 2, mu * math.pi / 2)
        return self

    def apply_pauli(self, p: PauliString) -> "DenseState":
        if p.n != self.n:
            raise ValueError("size mismatch")
        for q in range(self.n):
            if p.x[q] and p.z[q]:
                d_pauli(self.psi, q, 2)
            elif p.x[q]:
                d_pauli(self.psi, q, 1)
            elif p.z[q]:
                d_pauli(self.psi, q, 3)
        self.psi *= 1j ** p.phase
        return self

    def branch_probs(self, q: int) -> tuple[float, float]:
        p1 = float(d_prob1(self.psi, self._q(q)))
        return 1.0 - p1, p1

    def project(self, q: int, outcome: int) -> float:
        """Force a measurement outcome; returns its probability."""
        p0, p1 = self.branch_probs(q)
        p = p1 if outcome else p0
        if p <= 0.0:
            raise ValueError("cannot project onto a zero-probability branch")
        d_project(self.psi, q, int(outcome), p)
        return p

    def measure_z(self, q: int, rng: np.random.Generator) -> int:
        out, _ = d_measure(self.psi, self._q(q), -1, float(rng.random()))
        return int(out)

    def expectation(self, p: PauliString) -> float:
        other = self.copy().apply_pauli(p)
        return float(np.vdot(self.psi, other.psi).real)

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def fidelity(self, other: "DenseState") -> float:
        return float(abs(np.vdot(self.psi, other.psi)) ** 2)


# functional wrappers mirroring the library surface

def apply_rotation(state: DenseState, axis: str, theta: float, q: int) -> DenseState:
    return state.apply_rotation(axis, theta, q)


def apply_xx(state: DenseState, theta: float, q1: int, q2: int) -> DenseState:
    return state.apply_xx(theta, q1, q2)


def apply_crosstalk_unitary(state, eps_ct, theta, gate_qubits, neighbor_qubits, doubled=()):
    return state.apply_crosstalk_unitary(eps_ct, theta, gate_qubits, neighbor_qubits, doubled)


def apply_stark_unitary(state, mu, neighbor_qubits):
    return state.apply_stark_unitary(mu, neighbor_qubits)


def branch_probs(state: DenseState, q: int):
    return state.branch_probs(q)


def measure_z_dense(state: DenseState, q: int, rng: np.random.Generator):
    out = state.measure_z(q, rng)
    return out, state
