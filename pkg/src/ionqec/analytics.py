"""Closed-form crosstalk error budget for N-ion MS gates.

Every contribution is a plain function of the inputs so it can be checked by
hand.  Units: frequencies and rates in angular Hz, times in seconds.  The
simulator's microsecond duration table never enters here; convert before
calling.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .noise import KrausChannel, pauli_channel


def _ratios(omega_ratios) -> np.ndarray:
    r = np.asarray(omega_ratios, dtype=float).ravel()
    if np.any(r < 0):
        raise ValueError("Rabi-frequency ratios must be non-negative")
    return r


def chi(omega_ratios) -> float:
    """Small parameter: summed squared residual Rabi ratios of the spectators."""
    r = _ratios(omega_ratios)
    return float(np.sum(r * r))


def eps_ct_ms(N: int, omega_ratios) -> float:
    """Coherent spectator error of an ideal N-ion MS gate."""
    return math.pi**2 / 4.0 * N * chi(omega_ratios)


def eps_ct_off(Omega: float, delta: float, omega_ratios) -> float:
    """Off-resonant carrier contribution."""
    if delta == 0:
        raise ZeroDivisionError("detuning delta must be nonzero")
    return 0.5 * (Omega / delta) ** 2 * chi(omega_ratios)


def _modes(*arrays):
    out = [np.asarray(a, dtype=float).ravel() for a in arrays]
    if len({a.size for a in out}) != 1:
        raise ValueError("per-mode arrays must have the same length")
    return out


def eps_ct_dw(N: int, M: int, omega_ratios, eta_n, nbar_n) -> float:
    """Debye-Waller contribution, summed over every supplied mode."""
    eta, nbar = _modes(eta_n, nbar_n)
    r = _ratios(omega_ratios)
    if r.size != M:
        raise ValueError(f"expected {M} spectator ratios, got {r.size}")
    per_mode = (eta**2 / (N + M)) ** 2 * (2 * nbar + 1) ** 2
    return math.pi * N / 4.0 * float(np.sum(r * r)) * float(np.sum(per_mode))


def eps_ct_loops(omega_j, omega_n, eta_n, M_jn, nbar_n) -> float:
    """Residual spin-motion entanglement from unclosed spectator loops.

    ``omega_j`` are absolute spectator Rabi frequencies.  Mode arrays list all
    modes with the centre-of-mass mode first; that mode is excluded from the sum.
    ``M_jn`` has shape (spectators, modes).
    """
    w, eta, nbar = _modes(omega_n, eta_n, nbar_n)
    oj = np.asarray(omega_j, dtype=float).ravel()
    mj = np.asarray(M_jn, dtype=float).reshape(oj.size, -1)
    if mj.shape[1] != w.size:
        raise ValueError("M_jn columns must match the number of modes")
    w, eta, nbar, mj = w[1:], eta[1:], nbar[1:], mj[:, 1:]
    if np.any(w == 0):
        raise ZeroDivisionError("mode frequency omega_n must be nonzero")
    terms = (oj[:, None] / w[None, :]) ** 2 * (eta[None, :] * mj) ** 2 * (2 * nbar[None, :] + 1)
    return float(np.sum(terms))


def eps_ct_deph(N: int, t_g: float, T2: float) -> float:
    """Collective dephasing during the gate, independent of the crosstalk."""
    if T2 <= 0:
        raise ValueError("T2 must be positive")
    return 2.0 * N**2 * t_g / T2


def eps_ct_int(gamma_I: float, t_g: float, eta_n, nbar_n, omega_ratios) -> float:
    """Laser-intensity noise seen by weakly illuminated spectators."""
    eta, nbar = _modes(eta_n, nbar_n)
    return gamma_I * t_g * float(np.sum(eta**2 * (nbar + 0.5))) * chi(omega_ratios)


def eps_ct_total(N: int, omega_ratios, eps_ms: float, t_g: float, T2: float) -> float:
    """Total crosstalk infidelity in terms of the crosstalk-free MS error.

    The dephasing subtraction can dominate for tiny residual couplings; the
    result is then clamped at zero and a warning is emitted.
    """
    c = chi(omega_ratios)
    deph = eps_ct_deph(N, t_g, T2)
    val = c * (eps_ms + math.pi**2 * N / 4.0 + deph) - deph
    if val < 0:
        warnings.warn(f"crosstalk budget total {val:.3e} is negative; clamped to 0", RuntimeWarning,
                      stacklevel=2)
        return 0.0
    return val


def n_ms_errors(N: int) -> int:
    """Number of single- and two-qubit Pauli errors on N ions."""
    return 15 * N * (N - 1) // 2 + 3 * N


def channel_rates(eps_ms: float, eps_ct: float, N: int, M: int) -> tuple[float, float]:
    """Map infidelities onto depolarising rates (p_ms, p_ct).

    ZZ pairs leave the GHZ target invariant, so the active rate is inflated by
    the fraction of harmful errors; every spectator error is harmful.
    """
    if N < 2:
        raise ValueError("need at least two active ions")
    if M < 0:
        raise ValueError("spectator count must be non-negative")
    nms = n_ms_errors(N)
    p_ms = eps_ms * nms / (nms - N * (N - 1) / 2)
    return p_ms, float(eps_ct)


def single_qubit_ct_angle(Theta: float, intensity_ratio: float) -> float:
    """Rotation angle produced by a residual intensity fraction."""
    if intensity_ratio < 0:
        raise ValueError("intensity ratio must be non-negative")
    return Theta * math.sqrt(intensity_ratio)


def _error_labels(ions, n):
    """All single- and two-qubit Pauli labels supported on ``ions``."""
    out = []
    for q in ions:
        for a in "XYZ":
            lab = ["I"] * n
            lab[q] = a
            out.append("".join(lab))
    for q1, q2 in itertools.combinations(ions, 2):
        for a, b in itertools.product("IXYZ", repeat=2):
            if a == "I" and b == "I":
                continue
            lab = ["I"] * n
            lab[q1], lab[q2] = a, b
            out.append("".join(lab))
    return out


def depolarising_ct_channel(p_ms: float, p_ct: float, N: int, M: int) -> KrausChannel:
    """Depolarising MS channel with crosstalk on N active plus M spectator ions.

    Active errors share p_ms uniformly over the N_MS labels on the active
    ions.  Crosstalk errors share p_ct uniformly over the N_ct labels on all
    N + M ions.  Duplicate labels are merged.
    """
    n = N + M
    if p_ms < 0 or p_ct < 0 or p_ms + p_ct > 1:
        raise ValueError("rates must be non-negative and sum to at most 1")
    active = _error_labels(range(N), n)
    every = _error_labels(range(n), n)
    assert len(active) == n_ms_errors(N) and len(every) == n_ms_errors(n)
    w: dict[str, float] = {"I" * n: 1.0 - p_ms - p_ct}
    for lab in active:
        w[lab] = w.get(lab, 0.0) + p_ms / len(active)
    for lab in every:
        w[lab] = w.get(lab, 0.0) + p_ct / len(every)
    return pauli_channel(w)


# ------------------------------------------------------------ budget input

@dataclass
class MsBudgetInput:
    """Inputs for the crosstalk budget of one MS gate.

    The defaults describe a two-ion gate with two neighbouring spectators in
    a four-ion string; they are illustrative, not fitted to an experiment.
    """
    N: int = 2
    M: int = 2
    omega_ratios: list = field(default_factory=lambda: [0.01, 0.01])
    Omega: float = 2 * math.pi * 50e3
    delta: float = 2 * math.pi * 500e3
    eta_n: list = field(default_factory=lambda: [0.05, 0.05, 0.05, 0.05])
    omega_n: list = field(default_factory=lambda: [2 * math.pi * 1.0e6, 2 * math.pi * 1.73e6,
                                                   2 * math.pi * 2.4e6, 2 * math.pi * 3.05e6])
    nbar_n: list = field(default_factory=lambda: [0.05, 0.05, 0.05, 0.05])
    M_jn: list = field(default_factory=lambda: [[0.5, -0.65, 0.5, -0.27], [0.5, 0.65, 0.5, 0.27]])
    t_g: float = 15e-6
    T2: float = 2.2
    gamma_I: float = 2 * math.pi * 10.0
    eps_ms: float = 1e-3

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.M < 0:
            raise ValueError("M must be non-negative")
        if len(self.omega_ratios) != self.M:
            raise ValueError(f"omega_ratios must have M={self.M} entries")
        _ratios(self.omega_ratios)
        _modes(self.eta_n, self.omega_n, self.nbar_n)
        if not self.t_g < self.T2:
            raise ValueError("t_g must be shorter than T2")

    @classmethod
    def from_dict(cls, d: dict) -> "MsBudgetInput":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise KeyError(f"unknown budget field(s): {', '.join(sorted(bad))}")
        kw = {}
        for k, v in d.items():
            if isinstance(v, str):
                v = _parse_value(v)
            kw[k] = v
        return cls(**kw)

    def as_dict(self) -> dict:
        return asdict(self)


def _parse_value(text: str):
    import json
    t = text.strip()
    try:
        return json.loads(t)
    except ValueError:
        raise ValueError(f"cannot parse budget value {text!r}") from None


BUDGET_ROWS = ("eps_ct_ms", "eps_ct_off", "eps_ct_dw", "eps_ct_loops", "eps_ct_deph", "eps_ct_int",
               "chi", "eps_ct_total", "p_ms", "p_ct")


def budget(inp: MsBudgetInput) -> dict[str, float]:
    """Every term of the budget, keyed by name, in a fixed order."""
    r = np.asarray(inp.omega_ratios, dtype=float)
    rows = {
        "eps_ct_ms": eps_ct_ms(inp.N, r),
        "eps_ct_off": eps_ct_off(inp.Omega, inp.delta, r),
        "eps_ct_dw": eps_ct_dw(inp.N, inp.M, r, inp.eta_n, inp.nbar_n),
        "eps_ct_loops": eps_ct_loops(r * inp.Omega, inp.omega_n, inp.eta_n, inp.M_jn, inp.nbar_n)
        if inp.M else 0.0,
        "eps_ct_deph": eps_ct_deph(inp.N, inp.t_g, inp.T2),
        "eps_ct_int": eps_ct_int(inp.gamma_I, inp.t_g, inp.eta_n, inp.nbar_n, r),
        "chi": chi(r),
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows["eps_ct_total"] = eps_ct_total(inp.N, r, inp.eps_ms, inp.t_g, inp.T2)
    rows["p_ms"], rows["p_ct"] = channel_rates(inp.eps_ms, rows["eps_ct_total"], inp.N, inp.M)
    return rows


def budget_table(inp: MsBudgetInput) -> str:
    rows = budget(inp)
    width = max(len(k) for k in rows)
    return "\n".join(f"{k:<{width}}  {v:.10e}" for k, v in rows.items())
