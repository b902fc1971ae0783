"""Lowering of circuits plus noise into flat op tables for the batch engine.

Each row of ``ops`` is ``[code, a, b, c, d, link, loc]``; ``par`` carries up
to three floats.  ``link`` points at the gate row a noise row belongs to (the
noise is skipped when that gate was suppressed by leakage).  ``loc`` numbers
the fault locations: every stochastic noise row with a nonzero firing
probability and every measurement.  The engine uses this numbering to find
the first fault of a trial without simulating fault-free trials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, DurationTable, IonLayout, compile_circuit, schedule
from .noise import NoiseParams, crosstalk_angle, doubled_probability, stark_mu
from .tableau import quarter_turns

# gate rows
ROT, MS, PREP, MEAS, REPUMP = 0, 1, 2, 3, 4
# noise rows
DEPOL, MSERR, XX_INC, Z_INC, XTRES, IDLE, FLIP, XX_COH, Z_COH, RESID = 10, 11, 12, 13, 14, 15, 16, 17, 18, 19

NAMES = {ROT: "ROT", MS: "MS", PREP: "PREP", MEAS: "MEAS", REPUMP: "REPUMP", DEPOL: "DEPOL",
         MSERR: "MSERR", XX_INC: "XX_INC", Z_INC: "Z_INC", XTRES: "XTRES", IDLE: "IDLE",
         FLIP: "FLIP", XX_COH: "XX_COH", Z_COH: "Z_COH", RESID: "RESID"}
STOCHASTIC = (DEPOL, MSERR, XX_INC, Z_INC, IDLE, FLIP, REPUMP, RESID)
_AXIS = {"X": 0, "Y": 1, "Z": 2}


@dataclass
class Program:
    ops: np.ndarray
    par: np.ndarray
    n_qubits: int
    n_loc: int
    n_cbits: int
    duration: float
    event_rows: list[int] = field(default_factory=list)   # row index of each circuit event

    def __len__(self):
        return self.ops.shape[0]

    def describe(self) -> str:
        lines = []
        for k in range(len(self)):
            o = self.ops[k]
            lines.append(f"{k:4d} {NAMES[int(o[0])]:7s} {list(o[1:5])} link={o[5]} loc={o[6]} par={list(self.par[k])}")
        return "\n".join(lines)

    def fire_probability(self, row: int) -> float:
        """State-independent probability that a stochastic row fires."""
        code = int(self.ops[row, 0])
        p = self.par[row]
        if code == IDLE:
            return 1.0 - (1.0 - p[0]) * (1.0 - p[1])
        if code == REPUMP:
            return min(1.0, 2.0 * p[0])
        if code == RESID:
            return 2.0 * p[0]
        if code in STOCHASTIC:
            return float(p[0])
        return 0.0


class _Builder:
    def __init__(self, n):
        self.rows: list[list[int]] = []
        self.par: list[list[float]] = []
        self.n = n
        self.n_loc = 0

    def add(self, code, a=0, b=0, c=0, d=0, link=-1, par=(0.0, 0.0, 0.0), loc=False):
        p = list(par) + [0.0] * (3 - len(par))
        li = -1
        if loc:
            li = self.n_loc
            self.n_loc += 1
        self.rows.append([code, a, b, c, d, link, li])
        self.par.append(p)
        return len(self.rows) - 1


def _idle_probs(dt_us: float, noise: NoiseParams):
    pd = 0.5 * (1.0 - math.exp(-dt_us * 1e-6 / noise.T2)) if math.isfinite(noise.T2) else 0.0
    pk = (1.0 - math.exp(-dt_us * 1e-6 / noise.T1)) if math.isfinite(noise.T1) else 0.0
    return pd, pk


def lower(circ: Circuit, layout: IonLayout, noise: NoiseParams, backend: str = "tableau",
          durations: DurationTable | None = None, tail_idle: bool = True,
          meas_locations: bool = True) -> Program:
    """Turn a (compiled, optionally refocused) circuit into an op table.

    ``backend`` decides how coherent insertions are represented: the dense
    backend applies them exactly, the tableau backend rejects them except for
    the residual of refocused gates, which it samples as a Pauli twirl.
    """
    if backend not in ("tableau", "dense"):
        raise ValueError(f"unknown backend {backend!r}")
    dense = backend == "dense"
    circ = compile_circuit(circ)
    durations = durations or DurationTable()
    sch = schedule(circ, durations)
    b = _Builder(circ.num_ions)
    kind = noise.crosstalk_kind
    coherent = noise.coherent
    pc = noise.p_c if kind != "off" else 0.0
    analytic = noise.refocussing and noise.refocus_analytic
    if not dense and coherent and pc > 0 and not noise.refocussing:
        raise ValueError("coherent crosstalk without refocussing requires dense backend")
    if not dense and kind == "stark" and coherent and pc > 0:
        raise ValueError("coherent Stark crosstalk requires dense backend")
    idle_on = math.isfinite(noise.T1) or math.isfinite(noise.T2)
    pending = {q: 0.0 for q in range(circ.num_ions)}
    n_cbits = 0
    event_rows = []

    def flush(q):
        dt = pending[q]
        pending[q] = 0.0
        if idle_on and dt > 0:
            pd, pk = _idle_probs(dt, noise)
            if pd > 0 or pk > 0:
                b.add(IDLE, q, par=(pd, pk, noise.leak_fraction), loc=True)

    for k, ev in enumerate(circ.events):
        for q, dt in sch.lead_idle[k].items():
            pending[q] += dt
        # idle inside an echo block is deferred until the ion's next outside event
        inner = ev.block >= 0 and not (ev.kind == "MS" and ev.half == 1)
        if not inner:
            for q in ev.ions:
                flush(q)
        if ev.kind == "BARRIER":
            event_rows.append(len(b.rows))
            continue
        if ev.kind == "ROT":
            q = ev.ions[0]
            try:
                qt = quarter_turns(ev.theta)
            except ValueError:
                if not dense:
                    raise
                qt = -1
            g = b.add(ROT, q, _AXIS[ev.axis], qt, par=(ev.theta,))
            event_rows.append(g)
            if noise.p_1q > 0:
                b.add(DEPOL, q, link=g, par=(noise.p_1q,), loc=True)
        elif ev.kind == "MS":
            q1, q2 = ev.ions
            full = ev.theta * (2 if ev.half else 1)
            try:
                qt = quarter_turns(full)
            except ValueError:
                if not dense:
                    raise
                qt = -1
            g = b.add(MS, q1, q2, qt, ev.half, par=(ev.theta,))
            event_rows.append(g)
            spec, dbl = layout.spectators(q1, q2)
            _crosstalk_rows(b, g, ev, spec, dbl, kind, coherent, pc, dense, analytic, noise)
            if ev.half != 1 and noise.p_ms > 0:
                b.add(MSERR, q1, q2, link=g, par=(noise.p_ms,), loc=True)
        elif ev.kind == "PREP":
            q = ev.ions[0]
            g = b.add(PREP, q, loc=True)
            event_rows.append(g)
            if noise.p_sp > 0:
                b.add(FLIP, q, link=g, par=(noise.p_sp, noise.prep_leak_fraction), loc=True)
        elif ev.kind == "MEAS":
            q = ev.ions[0]
            if noise.p_m > 0:
                b.add(FLIP, q, par=(noise.p_m, 0.0), loc=True)
            g = b.add(MEAS, q, ev.cbit, loc=meas_locations)
            event_rows.append(g)
            n_cbits = max(n_cbits, ev.cbit + 1)
        elif ev.kind == "REPUMP":
            q = ev.ions[0]
            g = b.add(REPUMP, q, par=(noise.p_sg,), loc=noise.p_sg > 0)
            event_rows.append(g)
        else:
            raise ValueError(f"cannot lower {ev.kind}")
    for q, dt in sch.tail_idle.items():
        pending[q] += dt
    if tail_idle:
        for q in range(circ.num_ions):
            flush(q)
    ops = np.array(b.rows, dtype=np.int64).reshape(-1, 7)
    par = np.array(b.par, dtype=np.float64).reshape(-1, 3)
    return Program(ops, par, circ.num_ions, b.n_loc, n_cbits, sch.total, event_rows)


def _crosstalk_rows(b, g, ev, spec, dbl, kind, coherent, pc, dense, analytic, noise):
    if pc <= 0 or kind == "off":
        return
    q1, q2 = ev.ions
    if kind == "entangling":
        theta_c = crosstalk_angle(pc)
        if analytic:
            if ev.half == 0:
                for v in spec:
                    b.add(RESID, v, q1, q2, 1 if v in dbl else 0, link=g,
                          par=(noise.p_1q, pc, doubled_probability(pc)), loc=noise.p_1q > 0)
            return
        for gi in (q1, q2):
            for v in spec:
                d2 = v in dbl
                if coherent and dense:
                    ang = theta_c * (2 if d2 else 1) * (0.5 if ev.half else 1.0)
                    b.add(XX_COH, gi, v, link=g, par=(ang,))
                elif ev.half == 2:
                    # crosstalk survives only if the echo on v was spoiled
                    b.add(XTRES, gi, v, link=g, par=(doubled_probability(pc) if d2 else pc,))
                elif ev.half == 0:
                    b.add(XX_INC, gi, v, link=g, par=(doubled_probability(pc) if d2 else pc,), loc=True)
    else:
        mu = stark_mu(pc)
        frac = 0.5 if ev.half else 1.0
        for v in spec:
            if coherent:
                b.add(Z_COH, v, link=g, par=(mu * math.pi / 2 * frac,))
            else:
                p = math.sin(mu * math.pi / 4 * frac) ** 2
                b.add(Z_INC, v, link=g, par=(p,), loc=True)
