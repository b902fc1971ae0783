"""Pauli strings with exact phase tracking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LETTERS = "IXYZ"
# exponent of i picked up by the single-qubit product (x1,z1)*(x2,z2)
_G = np.zeros((2, 2, 2, 2), dtype=np.int64)
for x1 in (0, 1):
    for z1 in (0, 1):
        for x2 in (0, 1):
            for z2 in (0, 1):
                if x1 and z1:
                    g = z2 - x2
                elif x1:
                    g = z2 * (2 * x2 - 1)
                elif z1:
                    g = x2 * (1 - 2 * z2)
                else:
                    g = 0
                _G[x1, z1, x2, z2] = g


_LETTER_OF = {(False, False): "I", (True, False): "X", (True, True): "Y", (False, True): "Z"}


@dataclass(frozen=True)
class PauliString:
    """``i**phase`` times a tensor product of letters I, X, Y, Z.

    Qubit q carries letter (x_q, z_q): (0,0)=I, (1,0)=X, (1,1)=Y, (0,1)=Z.
    """

    x: np.ndarray
    z: np.ndarray
    phase: int = 0  # power of i: 0 -> +1, 1 -> +i, 2 -> -1, 3 -> -i

    def __post_init__(self):
        x = np.asarray(self.x, dtype=bool).copy()
        z = np.asarray(self.z, dtype=bool).copy()
        if x.shape != z.shape or x.ndim != 1:
            raise ValueError("x and z must be 1-d and of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(np.zeros(n, bool), np.zeros(n, bool))

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse e.g. ``"-iXYZI"``; character k acts on qubit k."""
        s = label.strip()
        phase = 0
        if s.startswith("+"):
            s = s[1:]
        elif s.startswith("-"):
            phase = 2
            s = s[1:]
        if s.startswith("i"):
            phase += 1
            s = s[1:]
        x = np.array([c in "XY" for c in s], dtype=bool)
        z = np.array([c in "ZY" for c in s], dtype=bool)
        if any(c not in _LETTERS for c in s):
            raise ValueError(f"bad Pauli label {label!r}")
        return cls(x, z, phase)

    @classmethod
    def single(cls, n: int, q: int, letter: str) -> "PauliString":
        lab = ["I"] * n
        lab[q] = letter
        return cls.from_label("".join(lab))

    @classmethod
    def from_sparse(cls, n: int, ops: dict[int, str]) -> "PauliString":
        lab = ["I"] * n
        for q, c in ops.items():
            lab[q] = c
        return cls.from_label("".join(lab))

    def label(self) -> str:
        body = "".join(_LETTER_OF[(bool(a), bool(b))] for a, b in zip(self.x, self.z))
        return ["+", "+i", "-", "-i"][self.phase] + body

    def __str__(self) -> str:
        return self.label()

    def _check(self, other: "PauliString"):
        if other.n != self.n:
            raise ValueError(f"size mismatch: {self.n} vs {other.n}")

    def __mul__(self, other: "PauliString") -> "PauliString":
        self._check(other)
        g = int(_G[self.x.astype(int), self.z.astype(int),
                   other.x.astype(int), other.z.astype(int)].sum())
        return PauliString(self.x ^ other.x, self.z ^ other.z, self.phase + other.phase + g)

    def commutes(self, other: "PauliString") -> bool:
        self._check(other)
        s = np.count_nonzero(self.x & other.z) + np.count_nonzero(self.z & other.x)
        return s % 2 == 0

    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def to_matrix(self) -> np.ndarray:
        """Dense matrix, qubit 0 least significant (matches the dense backend)."""
        mats = {
            (0, 0): np.eye(2, dtype=complex),
            (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
            (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
            (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.array([[1.0 + 0j]])
        for q in range(self.n):
            out = np.kron(mats[(int(self.x[q]), int(self.z[q]))], out)
        return (1j ** self.phase) * out

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return (self.n == other.n and self.phase == other.phase
                and bool(np.all(self.x == other.x)) and bool(np.all(self.z == other.z)))

    def __hash__(self):
        return hash((self.phase, self.x.tobytes(), self.z.tobytes()))
