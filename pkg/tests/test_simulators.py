"""Tableau and state-vector backends checked against each other and against
explicit matrices."""
import math

import numpy as np
import pytest

from ionqec.dense import DenseState, apply_crosstalk_unitary, apply_stark_unitary
from ionqec.noise import stark_unitary, xx_unitary
from ionqec.pauli import PauliString
from ionqec.tableau import StabilizerTableau, quarter_turns

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}


def rot_matrix(axis, theta):
    return math.cos(theta / 2) * PAULI["I"] - 1j * math.sin(theta / 2) * PAULI[axis]


def embed(ops: dict, n: int) -> np.ndarray:
    # qubit 0 is the least significant bit of the basis index
    m = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        m = np.kron(m, ops.get(q, PAULI["I"]))
    return m


def _random_clifford(rng, n, depth, tab, dense):
    for _ in range(depth):
        g = rng.choice(["RX", "RY", "RZ", "MS", "CNOT"] if n > 1 else ["RX", "RY", "RZ"])
        th = float(rng.choice([-1, 1, 2, 3])) * math.pi / 2
        if g in ("MS", "CNOT"):
            a, b = (int(v) for v in rng.choice(n, 2, replace=False))
            if g == "MS":
                tab.apply("MS", [a, b], th)
                dense.apply_xx(th, a, b)
            else:
                tab.apply("CNOT", [a, b])
                dense.apply_rotation("Y", math.pi / 2, a).apply_xx(math.pi / 2, a, b)
                dense.apply_rotation("X", -math.pi / 2, a).apply_rotation("X", -math.pi / 2, b)
                dense.apply_rotation("Y", -math.pi / 2, a)
        else:
            q = int(rng.integers(n))
            tab.apply(g, [q], th)
            dense.apply_rotation(g[1], th, q)


@pytest.mark.parametrize("seed", range(20))
def test_tableau_stabilisers_hold_on_dense_state(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    tab, dense = StabilizerTableau(n), DenseState(n)
    _random_clifford(rng, n, 40, tab, dense)
    tab.validate()
    for s in tab.stabilizers():
        assert dense.expectation(s) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_measurement_determinism_matches_dense(seed):
    rng = np.random.default_rng(100 + seed)
    n = 4
    tab, dense = StabilizerTableau(n), DenseState(n)
    _random_clifford(rng, n, 25, tab, dense)
    for q in range(n):
        p0, p1 = dense.branch_probs(q)
        if tab.is_deterministic(q):
            out = tab.copy().measure_z(q, rng)
            assert (p1 if out else p0) == pytest.approx(1.0, abs=1e-10)
        else:
            assert p0 == pytest.approx(0.5, abs=1e-10)


def test_measurement_collapses_consistently():
    rng = np.random.default_rng(3)
    tab = StabilizerTableau(3)
    tab.apply("RY", [0], math.pi / 2).apply("CNOT", [0, 1]).apply("CNOT", [1, 2])
    first = tab.measure_z(0, rng)
    assert tab.measure_z(1, rng) == first
    assert tab.measure_z(2, rng) == first


def test_half_ms_pairs_complete():
    tab, dense = StabilizerTableau(2), DenseState(2)
    tab.apply("MS", [0, 1], math.pi / 4)
    tab.apply("MS", [0, 1], math.pi / 4)
    dense.apply_xx(math.pi / 2, 0, 1)
    for s in tab.stabilizers():
        assert dense.expectation(s) == pytest.approx(1.0)


def test_tableau_rejects_bad_input():
    tab = StabilizerTableau(2)
    with pytest.raises(IndexError):
        tab.apply("RX", [2], math.pi / 2)
    with pytest.raises(ValueError):
        tab.apply("RX", [0], 0.3)
    with pytest.raises(ValueError):
        tab.apply("T", [0])
    with pytest.raises(ValueError):
        StabilizerTableau(0)


def test_quarter_turns():
    assert quarter_turns(math.pi / 2) == 1
    assert quarter_turns(-math.pi / 2) == 3
    assert quarter_turns(2 * math.pi) == 0
    with pytest.raises(ValueError):
        quarter_turns(0.1)


def test_pauli_fault_flips_expectation():
    tab = StabilizerTableau(2)
    tab.apply_pauli(PauliString.from_label("XI"))
    assert tab.expectation(PauliString.from_label("ZI")) == -1
    assert tab.expectation(PauliString.from_label("IZ")) == 1


# ---------------------------------------------------------------- dense

@pytest.mark.parametrize("axis", "XYZ")
@pytest.mark.parametrize("q", [0, 2])
def test_dense_rotation_matches_matrix(axis, q):
    rng = np.random.default_rng(7)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    st = DenseState(3, psi).apply_rotation(axis, 0.37, q)
    assert np.allclose(st.psi, embed({q: rot_matrix(axis, 0.37)}, 3) @ psi, atol=1e-13)


def test_dense_xx_matches_matrix():
    rng = np.random.default_rng(8)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    xx = embed({0: PAULI["X"], 2: PAULI["X"]}, 3)
    u = math.cos(0.21) * np.eye(8) - 1j * math.sin(0.21) * xx
    assert np.allclose(DenseState(3, psi).apply_xx(0.42, 0, 2).psi, u @ psi, atol=1e-13)


def test_crosstalk_unitary_doubles_between_ions():
    st = DenseState(4)
    st.apply_rotation("Y", 0.3, 1)
    ref = st.copy()
    apply_crosstalk_unitary(st, 0.01, math.pi / 2, [0, 2], [1, 3], doubled={1})
    for g in (0, 2):
        ref.apply_xx(0.01 * math.pi / 2 * 2, g, 1)
        ref.apply_xx(0.01 * math.pi / 2, g, 3)
    assert np.allclose(st.psi, ref.psi, atol=1e-14)
    with pytest.raises(ValueError):
        apply_crosstalk_unitary(st, 0.01, 1.0, [0, 1], [1])


def test_stark_unitary_matches_matrix():
    st = DenseState(1).apply_rotation("X", math.pi / 2, 0)
    psi = st.psi.copy()
    apply_stark_unitary(st, 0.2, [0])
    assert np.allclose(st.psi, stark_unitary(0.2) @ psi, atol=1e-14)


def test_xx_unitary_helper():
    u = xx_unitary(0.5)
    assert np.allclose(u.conj().T @ u, np.eye(4))
    st = DenseState(2).apply_rotation("Y", 0.4, 0)
    psi = st.psi.copy()
    assert np.allclose(st.apply_xx(0.5, 0, 1).psi, u @ psi)


def test_projection_and_norm():
    st = DenseState(2).apply_rotation("Y", math.pi / 2, 0)
    assert st.branch_probs(0) == pytest.approx((0.5, 0.5))
    assert st.project(0, 1) == pytest.approx(0.5)
    assert st.norm() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        st.project(0, 0)


def test_dense_size_limits():
    with pytest.raises(ValueError):
        DenseState(15)
    with pytest.raises(IndexError):
        DenseState(2).apply_rotation("X", 1.0, 5)
