"""Crosstalk budget formulas against values worked out by hand.

The reference numbers below were evaluated separately at 30 significant
digits and are copied in as literals.
"""
import math
import warnings

import pytest

from ionqec import analytics as an

REL = 1e-10


def close(a, b):
    return abs(a - b) <= REL * abs(b)


def test_eps_ct_ms():
    assert an.eps_ct_ms(2, [0.0, 0.0]) == 0.0
    assert close(an.eps_ct_ms(2, [0.01]), 4.93480220054467930941724549994e-4)
    assert close(an.eps_ct_ms(2, [0.02]), 4 * an.eps_ct_ms(2, [0.01]))


def test_eps_ct_off():
    assert an.eps_ct_off(1.0, 10.0, [0.0]) == 0.0
    assert close(an.eps_ct_off(1.0, 10.0, [0.01]), 5e-7)
    assert close(an.eps_ct_off(2.0, 10.0, [0.01]), 4 * 5e-7)
    with pytest.raises(ZeroDivisionError):
        an.eps_ct_off(1.0, 0.0, [0.01])


def test_eps_ct_dw():
    assert an.eps_ct_dw(2, 1, [0.0], [0.1], [0.05]) == 0.0
    assert close(an.eps_ct_dw(2, 1, [0.01], [0.1], [0.05]), 2.11184839491313878807766582987e-9)
    # ground-state modes contribute a factor of one each
    assert close(an.eps_ct_dw(2, 1, [0.01], [0.1], [0.0]), math.pi / 2 * (1e-4 / 3) ** 2)
    with pytest.raises(ValueError):
        an.eps_ct_dw(2, 1, [0.01], [0.1, 0.1], [0.05])


def test_eps_ct_loops():
    modes = dict(omega_n=[2 * math.pi * 1e6, 2 * math.pi * 1.7e6], eta_n=[0.1, 0.08], nbar_n=[0.05, 0.1])
    mjn = [[0.7, 0.6]]
    assert an.eps_ct_loops([0.0], M_jn=mjn, **modes) == 0.0
    val = an.eps_ct_loops([2 * math.pi * 500], M_jn=mjn, **modes)
    assert close(val, 2.39169550173010380622837370242e-10)
    # linear in (2 nbar + 1) of the contributing mode
    hot = an.eps_ct_loops([2 * math.pi * 500], M_jn=mjn, **{**modes, "nbar_n": [0.05, 1.1]})
    assert close(hot, val * 3.2 / 1.2)
    with pytest.raises(ZeroDivisionError):
        an.eps_ct_loops([1.0], [1.0, 0.0], [0.1, 0.1], [[0.5, 0.5]], [0.0, 0.0])


def test_eps_ct_deph():
    assert an.eps_ct_deph(2, 0.0, 2.2) == 0.0
    assert close(an.eps_ct_deph(2, 15e-6, 2.2), 5.45454545454545454545454545455e-5)
    assert close(an.eps_ct_deph(4, 15e-6, 2.2), 4 * an.eps_ct_deph(2, 15e-6, 2.2))


def test_eps_ct_int():
    args = ([0.05, 0.07], [0.05, 0.2], [0.01, 0.02])
    assert an.eps_ct_int(0.0, 15e-6, *args) == 0.0
    assert close(an.eps_ct_int(2 * math.pi * 10, 15e-6, *args), 2.2643029050748434766219502185e-9)
    assert close(an.eps_ct_int(2 * math.pi * 10, 30e-6, *args), 2 * an.eps_ct_int(2 * math.pi * 10, 15e-6, *args))


def test_chi_and_total():
    assert close(an.chi([0.01, 0.01]), 2e-4)
    assert close(an.eps_ct_total(2, [0.01, 0.01], 1e-3, 15e-6, 2.2), 9.32625894654390407337994554533e-4)
    assert close(an.eps_ct_total(2, [1.0], 1e-3, 15e-6, 2.2), 4.93580220054467930941724549994)
    with pytest.warns(RuntimeWarning):
        assert an.eps_ct_total(2, [0.0], 1e-3, 15e-6, 2.2) == 0.0


def test_total_is_chi_times_per_source_sum_without_dephasing():
    r = [0.013, 0.004]
    per_source = 2e-3 + math.pi**2 * 3 / 4
    assert close(an.eps_ct_total(3, r, 2e-3, 0.0, 1.0), an.chi(r) * per_source)


def test_channel_rates():
    assert an.n_ms_errors(2) == 21
    assert an.n_ms_errors(4) == 102
    p_ms, p_ct = an.channel_rates(1e-3, 2e-4, 2, 2)
    assert close(p_ms, 1.05e-3) and p_ct == 2e-4
    assert an.channel_rates(0.0, 0.0, 2, 2) == (0.0, 0.0)


@pytest.mark.parametrize("p_ms,p_ct,N,M", [(1e-3, 2e-4, 2, 2), (0.3, 0.1, 2, 1), (0.0, 0.0, 3, 1)])
def test_depolarising_channel_complete(p_ms, p_ct, N, M):
    ch = an.depolarising_ct_channel(p_ms, p_ct, N, M)
    assert ch.completeness_error() < 1e-12
    assert sum(ch.weights) == pytest.approx(1.0, abs=1e-12)


def test_single_qubit_angle():
    assert an.single_qubit_ct_angle(math.pi / 2, 0.0) == 0.0
    assert an.single_qubit_ct_angle(math.pi / 2, 1.0) == math.pi / 2
    a = an.single_qubit_ct_angle(math.pi / 2, 1e-4)
    assert close(an.single_qubit_ct_angle(math.pi / 2, 4e-4), 2 * a)


def test_budget_input_validation_and_table():
    inp = an.MsBudgetInput()
    rows = an.budget(inp)
    assert list(rows) == list(an.BUDGET_ROWS)
    assert all(v >= 0 for v in rows.values())
    assert close(rows["eps_ct_deph"], 5.45454545454545454545454545455e-5)
    with pytest.raises(ValueError):
        an.MsBudgetInput(N=1)
    with pytest.raises(ValueError):
        an.MsBudgetInput(t_g=3.0)
    with pytest.raises(KeyError):
        an.MsBudgetInput.from_dict({"Q": 1})


def test_zero_ratios_give_zero_budget():
    inp = an.MsBudgetInput(omega_ratios=[0.0, 0.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rows = an.budget(inp)
    for k in ("eps_ct_ms", "eps_ct_off", "eps_ct_dw", "eps_ct_loops", "eps_ct_int", "chi", "eps_ct_total", "p_ct"):
        assert rows[k] == 0.0
