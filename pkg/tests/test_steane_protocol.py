"""Colour code, decoder and the QEC round."""
import itertools

import numpy as np
import pytest

from ionqec.circuit import compile_circuit
from ionqec.estimator import monte_carlo
from ionqec.noise import NoiseParams
from ionqec.pauli import PauliString
from ionqec.protocol import QECProtocol, get_protocol, run_qec_round
from ionqec.steane import (STAB_SPAN, SUPPORTS, TARGETS, build_decode_table, decode_readout, define_code,
                           group_circuit, prep_circuit, propagate, syndrome_bits, unflagged_circuit,
                           weight1_correction)


def test_code_structure():
    code = define_code()
    stabs = code.stabiliser_paulis()
    assert len(stabs) == 6
    for a, b in itertools.combinations(stabs, 2):
        assert a.commutes(b)
    lx, lz = code.logical_paulis()
    assert not lx.commutes(lz)
    assert all(lx.commutes(s) and lz.commutes(s) for s in stabs)
    assert code.distance() == 3


def test_single_qubit_syndromes_are_distinct():
    seen = {syndrome_bits(1 << k) for k in range(7)}
    assert len(seen) == 7 and (0, 0, 0) not in seen
    assert len(STAB_SPAN) == 8


def test_supports_match_stabilisers():
    code = define_code()
    for sup, s in zip(SUPPORTS, code.stabiliser_paulis()[:3]):
        assert sorted(q for q in range(s.n) if s.x[q] or s.z[q]) == sorted(q - 1 for q in sup)


@pytest.mark.parametrize("target", TARGETS)
def test_decode_table_builds_without_collisions(target):
    table = build_decode_table(target)
    assert len(table.keys_for("A")) > 100 and len(table.keys_for("B")) > 100
    assert table.lookup("A", (0, 0, 0), (0,) * 6) == (0, 0)


def test_decode_readout_handles_weight_one_flips():
    # logical 0 codeword: the all-zero word; every single flip is corrected
    for k in range(7):
        assert decode_readout(1 << k, "zero") == 0
    assert decode_readout(0b1111111, "zero") == 1


def test_weight1_correction_targets_right_type():
    x, z = weight1_correction((0, 0, 0) + syndrome_bits(1 << 3))
    assert x == 1 << 3 and z == 0


@pytest.mark.parametrize("target", TARGETS)
def test_noiseless_circuits_raise_no_flags(target):
    flips, _, _ = propagate(compile_circuit(prep_circuit(target)))
    assert not any(flips.values())
    for c in (group_circuit("A"), group_circuit("B"), unflagged_circuit()):
        flips, x, z = propagate(compile_circuit(c))
        assert not any(flips.values()) and x == 0 and z == 0


@pytest.mark.parametrize("backend", ["tableau", "dense"])
@pytest.mark.parametrize("target", TARGETS)
def test_noiseless_round_never_fails(backend, target):
    out = QECProtocol(NoiseParams.noiseless(), target, backend).run(200, 1)
    assert out.failure.sum() == 0 and out.flags_raised.sum() == 0


def test_seed_reproducibility_and_chunk_invariance():
    p = get_protocol(NoiseParams(p_ms=5e-3), "plus", "tableau")
    a = p.run(3000, 42)
    b = p.run(3000, 42)
    assert np.array_equal(a.failure, b.failure)
    c = np.concatenate([p.run(1000, 42, first_index=k).failure for k in (0, 1000, 2000)])
    assert np.array_equal(a.failure, c)


def test_worker_count_invariance():
    noise = NoiseParams(p_ms=5e-3)
    one = monte_carlo(noise, 20_000, 5, jobs=1)
    two = monte_carlo(noise, 20_000, 5, jobs=2)
    assert one.failures == two.failures


def test_fast_path_agrees_with_full_simulation():
    noise = NoiseParams(p_ms=3e-3, p_c=1e-3, crosstalk_mode="entangling-incoherent")
    n = 60_000
    fast = QECProtocol(noise, "zero", "tableau", fast_path=True).run(n, 9).failure.mean()
    full = QECProtocol(noise, "zero", "tableau", fast_path=False).run(n, 10).failure.mean()
    sigma = np.sqrt(fast * (1 - fast) / n + full * (1 - full) / n)
    assert abs(fast - full) < 4 * sigma


def test_flags_trigger_unflagged_round():
    out = QECProtocol(NoiseParams(p_ms=2e-2), "plus", "tableau").run(5000, 3)
    assert out.flags_raised.sum() > 0
    assert out.rounds_run.max() >= 2


def test_run_qec_round_single_trial():
    res = run_qec_round(NoiseParams.noiseless(), "tableau", "zero", np.random.default_rng(0))
    assert not res.logical_failure and res.rounds_run == 1


def test_protocol_rejects_unsupported_combinations():
    with pytest.raises(ValueError):
        QECProtocol(NoiseParams.crosstalk_only(1e-3, "entangling-coherent"), "plus", "tableau")
    with pytest.raises(ValueError):
        QECProtocol(NoiseParams(), "minus", "tableau")


def test_pauli_label_roundtrip():
    p = PauliString.from_label("XYZI")
    assert p.label() == "+XYZI" and p.weight() == 3
