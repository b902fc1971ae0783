"""One QEC round on the Steane code, batched over many trials.

Segments run in order: prep (restarted while the flag is raised), flagged
group A, flagged group B (only when A is silent), an unflagged round (only
after a nonzero group result), and the transversal readout.

Trials that have not seen a fault share one precomputed reference state per
segment.  Each segment's fault-free probability P0 is known in advance, so a
single uniform per trial decides whether it stays on the reference path or
reruns the segment with its first fault pinned.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import dense as dk
from . import tableau as tk
from .circuit import Circuit, DurationTable, IonLayout, compile_circuit, insert_refocussing
from .engine import run_batch, run_reference
from .noise import NoiseParams
from .program import MEAS, PREP, ROT, Program, lower
from .rng import streams, uniform
from .steane import (NUM_IONS, TARGETS, DecodeTable, build_decode_table, decode_readout, group_circuit,
                     prep_circuit, readout_circuit, unflagged_circuit)

SEG_PREP, SEG_GA, SEG_GB, SEG_UNF, SEG_READ = range(5)
SEGMENTS = ("prep", "group_a", "group_b", "unflagged", "readout")
TRIGGERS = ("any", "flags")


@functools.lru_cache(maxsize=4)
def decode_table(target: str) -> DecodeTable:
    return build_decode_table(target)


@functools.lru_cache(maxsize=None)
def _decoded_logical(target: str) -> np.ndarray:
    """Logical value of each 7-bit readout word after weight-1 decoding."""
    return np.array([decode_readout(b, target) for b in range(128)], dtype=np.int8)


@dataclass
class TrialOutcome:
    logical_failure: bool
    flags_raised: bool
    rounds_run: int
    prep_restarts: int


@dataclass
class BatchOutcome:
    failure: np.ndarray           # bool per trial
    flags_raised: np.ndarray      # bool per trial
    rounds_run: np.ndarray        # 1 or 2
    prep_restarts: np.ndarray
    aborted: np.ndarray           # restart cap exceeded (counted as failure)

    def __len__(self):
        return self.failure.shape[0]

    def trial(self, i: int) -> TrialOutcome:
        return TrialOutcome(bool(self.failure[i]), bool(self.flags_raised[i]), int(self.rounds_run[i]),
                            int(self.prep_restarts[i]))


@dataclass
class _Ref:
    start: tuple           # (x, z, r, psi) at segment start
    end: tuple
    ref_out: np.ndarray
    meas: np.ndarray
    cum: np.ndarray
    p0: float


@njit(cache=True)
def _draw(rng, idx, out):
    for j in range(idx.shape[0]):
        t = idx[j]
        out[j] = uniform(rng[t:t + 1])


class QECProtocol:
    """Compiled segment programs and reference data for one configuration."""

    def __init__(self, noise: NoiseParams, target: str = "plus", backend: str = "tableau",
                 layout: IonLayout | None = None, durations: DurationTable | None = None,
                 max_restarts: int = 1000, trigger: str = "any", fast_path: bool = True):
        if target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if backend not in ("tableau", "dense"):
            raise ValueError(f"unknown backend {backend!r}")
        if trigger not in TRIGGERS:
            raise ValueError(f"trigger must be one of {TRIGGERS}")
        self.noise = noise
        self.target = target
        self.backend = backend
        self.dense = backend == "dense"
        self.layout = layout or IonLayout.default()
        self.durations = durations or DurationTable()
        self.max_restarts = max_restarts
        # every ancilla bit is a syndrome bit and a flag at the same time, so
        # the two trigger policies select the same trials
        self.trigger = trigger
        # False simulates every trial in full (slow; used to cross-check)
        self.fast_path = fast_path
        self.n = NUM_IONS
        self.circuits = self._circuits()
        self.programs = [
            lower(c, self.layout, noise, backend, self.durations, meas_locations=(k != SEG_READ))
            for k, c in enumerate(self.circuits)
        ]
        self.table = decode_table(target)
        self._refs: dict[int, _Ref] | None = None
        self._p_fail_ref: float | None = None

    # ---------------------------------------------------------------- setup
    def _circuits(self) -> list[Circuit]:
        raw = [prep_circuit(self.target), group_circuit("A"), group_circuit("B"), unflagged_circuit(),
               readout_circuit(self.target)]
        out = []
        for c in raw:
            c = compile_circuit(c)
            if self.noise.refocussing and not self.noise.refocus_analytic:
                c = insert_refocussing(c, self.layout)
            out.append(c)
        return out

    def _fresh_state(self):
        if self.dense:
            psi = np.zeros(1 << self.n, dtype=np.complex128)
            psi[0] = 1.0
            x = np.zeros((1, 1), dtype=np.uint64)
            return x, x.copy(), np.zeros(1, dtype=np.uint8), psi
        x, z, r = tk.new_arrays(self.n)
        return x, z, r, np.zeros(1, dtype=np.complex128)

    @staticmethod
    def _copy(st):
        return tuple(a.copy() for a in st)

    def _reference(self, prog: Program, start) -> _Ref:
        st = self._copy(start)
        nl = max(prog.n_loc, 1)
        ref_out = np.zeros(nl, dtype=np.int64)
        ploc = np.zeros(nl, dtype=np.float64)
        meas = np.zeros(max(prog.n_cbits, 1), dtype=np.int64)
        run_reference(prog.ops, prog.par, self.dense, self.n, st[0], st[1], st[2], st[3], ref_out, ploc, meas)
        cum = np.cumprod(1.0 - ploc[:prog.n_loc])
        p0 = float(cum[-1]) if cum.size else 1.0
        return _Ref(self._copy(start), st, ref_out, meas, cum, p0)

    @property
    def references(self) -> dict[int, _Ref]:
        """Reference data along the fault-free chain prep, A, B, readout."""
        if self._refs is None:
            refs = {}
            st = self._fresh_state()
            for seg in (SEG_PREP, SEG_GA, SEG_GB, SEG_READ):
                refs[seg] = self._reference(self.programs[seg], st)
                st = refs[seg].end
            refs[SEG_UNF] = _Ref(st, st, np.zeros(1, np.int64), np.zeros(6, np.int64), np.zeros(0), 1.0)
            if refs[SEG_PREP].meas[0] != 0:
                raise RuntimeError("reference preparation raised its flag")
            for seg in (SEG_GA, SEG_GB):
                if refs[seg].meas[:3].any():
                    raise RuntimeError(f"reference {SEGMENTS[seg]} reported a nonzero syndrome")
            self._refs = refs
        return self._refs

    @property
    def p_fail_ref(self) -> float:
        """Logical failure probability of a trial that never left the reference path."""
        if self._p_fail_ref is None:
            dist = readout_distribution(self, self.references[SEG_READ].start)
            self._p_fail_ref = float(dist @ _decoded_logical(self.target))
        return self._p_fail_ref

    @property
    def reference_survival(self) -> float:
        """Probability that no fault location fires along the reference chain."""
        return math.prod(self.references[s].p0 for s in (SEG_PREP, SEG_GA, SEG_GB, SEG_READ))

    # ----------------------------------------------------------------- run
    def run(self, n_trials: int, seed: int, first_index: int = 0, injections=None) -> BatchOutcome:
        """Run ``n_trials`` trials with indices first_index, first_index+1, ...

        ``injections`` is an optional sequence of ``(segment, row, x_mask,
        z_mask)`` (or None) per trial: a Pauli applied once, just before that
        program row, on the first attempt of that segment.
        """
        refs = self.references
        N = int(n_trials)
        n = self.n
        if self.dense:
            X = np.zeros((1, 1, 1), dtype=np.uint64)
            Z = X.copy()
            R = np.zeros((1, 1), dtype=np.uint8)
            PSI = np.zeros((N, 1 << n), dtype=np.complex128)
        else:
            w = (n + 63) // 64
            X = np.zeros((N, 2 * n + 1, w), dtype=np.uint64)
            Z = np.zeros_like(X)
            R = np.zeros((N, 2 * n + 1), dtype=np.uint8)
            PSI = np.zeros((1, 1), dtype=np.complex128)
        LEAK = np.zeros((N, n), dtype=np.bool_)
        RNG = streams(seed, first_index, N)
        MEAS_OUT = np.zeros((N, 7), dtype=np.int64)
        at_ref = np.zeros(N, dtype=np.bool_)
        inj_seg = np.full(N, -1, dtype=np.int64)
        inj_pos = np.full(N, -1, dtype=np.int64)
        inj_x = np.zeros(N, dtype=np.uint64)
        inj_z = np.zeros(N, dtype=np.uint64)
        inj_done = np.zeros(N, dtype=np.bool_)
        if injections is not None:
            for t, inj in enumerate(injections):
                if inj is None:
                    continue
                inj_seg[t], inj_pos[t], inj_x[t], inj_z[t] = inj[0], inj[1], inj[2], inj[3]

        def segment(seg, idx, fast, fresh):
            prog = self.programs[seg]
            ref = refs[seg]
            s = ref.start
            rx, rz, rr, rpsi = s
            run_batch(prog.ops, prog.par, self.dense, n, idx, X, Z, R, PSI, LEAK, RNG, MEAS_OUT,
                      fast, ref.cum, ref.p0, ref.ref_out, ref.meas, rx, rz, rr, rpsi, fresh,
                      at_ref, inj_seg, inj_pos, inj_x, inj_z, inj_done, seg)

        restarts = np.zeros(N, dtype=np.int64)
        aborted = np.zeros(N, dtype=np.bool_)
        all_fast = np.full(N, self.fast_path, dtype=np.bool_)
        pending = np.arange(N, dtype=np.int64)
        while pending.size:
            segment(SEG_PREP, pending, all_fast, True)
            flagged = pending[MEAS_OUT[pending, 0] != 0]
            restarts[flagged] += 1
            over = flagged[restarts[flagged] > self.max_restarts]
            aborted[over] = True
            pending = flagged[restarts[flagged] <= self.max_restarts]
        alive = np.flatnonzero(~aborted)

        segment(SEG_GA, alive, at_ref.copy(), False)
        bits_a = MEAS_OUT[:, :3].copy()
        trig_a = np.zeros(N, dtype=np.bool_)
        trig_a[alive] = bits_a[alive].any(axis=1)
        rest = alive[~trig_a[alive]]
        segment(SEG_GB, rest, at_ref.copy(), False)
        bits_b = MEAS_OUT[:, :3].copy()
        trig_b = np.zeros(N, dtype=np.bool_)
        trig_b[rest] = bits_b[rest].any(axis=1)
        trig = trig_a | trig_b
        tidx = np.flatnonzero(trig)
        unf = np.zeros((N, 6), dtype=np.int64)
        if tidx.size:
            at_ref[tidx] = False
            segment(SEG_UNF, tidx, np.zeros(N, dtype=np.bool_), False)
            unf[tidx] = MEAS_OUT[tidx, :6]

        segment(SEG_READ, alive, at_ref.copy(), False)
        failure = aborted.copy()
        ref_idx = alive[at_ref[alive]]
        if ref_idx.size:
            pf = self.p_fail_ref
            if pf > 0.0:
                u = np.empty(ref_idx.size)
                _draw(RNG, ref_idx, u)
                failure[ref_idx] = u < pf
        run_idx = alive[~at_ref[alive]]
        if run_idx.size:
            words = MEAS_OUT[run_idx, :7] @ (1 << np.arange(7))
            flip = np.zeros(run_idx.size, dtype=np.int64)
            typ = 0 if self.target == "zero" else 1
            for j, t in enumerate(run_idx):
                if trig[t]:
                    g = "A" if trig_a[t] else "B"
                    gb = bits_a[t] if trig_a[t] else bits_b[t]
                    flip[j] = self.table.lookup(g, gb, unf[t])[typ]
            failure[run_idx] = _decoded_logical(self.target)[words ^ flip] != 0
        rounds = np.where(trig, 2, 1)
        return BatchOutcome(failure, trig, rounds, restarts, aborted)

    # ------------------------------------------------------------- injection
    def injection_sites(self, segments=(SEG_PREP, SEG_GA, SEG_GB, SEG_READ)):
        """Every single-fault injection of the noiseless programs.

        After each gate row: every single-qubit Pauli on every ion, and every
        two-qubit Pauli on the ions of an MS gate.  Before each measurement: a
        bit flip.  Yields ``(segment, row, x_mask, z_mask)``.
        """
        singles = ((1, 0), (1, 1), (0, 1))
        for seg in segments:
            prog = self.programs[seg]
            for g in range(len(prog)):
                code = int(prog.ops[g, 0])
                a, b = int(prog.ops[g, 1]), int(prog.ops[g, 2])
                if code == MEAS:
                    yield seg, g, 1 << a, 0
                for q in range(self.n):
                    for px, pz in singles:
                        yield seg, g + 1, px << q, pz << q
                if code == 1:    # MS
                    for (xa, za) in singles:
                        for (xb, zb) in singles:
                            yield seg, g + 1, (xa << a) | (xb << b), (za << a) | (zb << b)


def readout_distribution(proto: QECProtocol, state) -> np.ndarray:
    """Noise-free distribution of the 7 readout bits from a readout start state."""
    prog = proto.programs[SEG_READ]
    rows = [(int(o[0]), int(o[1]), int(o[2]), int(o[3]), float(p[0])) for o, p in zip(prog.ops, prog.par)
            if int(o[0]) in (ROT, MEAS)]
    if proto.dense:
        psi = state[3].copy()
        for code, a, b, c, th in rows:
            if code == ROT:
                dk.d_rot(psi, a, b, th)
        probs = np.abs(psi) ** 2
        words = (np.arange(psi.shape[0]) >> 1) & 0x7F
        dist = np.bincount(words, weights=probs, minlength=128)
        return dist / dist.sum()
    x, z, r = (a.copy() for a in state[:3])
    n = proto.n
    for code, a, b, c, th in rows:
        if code == ROT:
            tk.rot1(x, z, r, n, a, b, c)
    meas_q = [(a, b) for code, a, b, c, th in rows if code == MEAS]
    dist = np.zeros(128)

    def dfs(x, z, r, k, word, w):
        if k == len(meas_q):
            dist[word] += w
            return
        q, bit = meas_q[k]
        x1, z1, r1 = x.copy(), z.copy(), r.copy()
        out, p1 = tk.measure(x1, z1, r1, n, q, 0, 0.0)
        if p1 == 0.5:
            dfs(x1, z1, r1, k + 1, word, w * 0.5)
            x2, z2, r2 = x.copy(), z.copy(), r.copy()
            tk.measure(x2, z2, r2, n, q, 1, 0.0)
            dfs(x2, z2, r2, k + 1, word | (1 << bit), w * 0.5)
        else:
            dfs(x1, z1, r1, k + 1, word | (out << bit), w)

    dfs(x, z, r, 0, 0, 1.0)
    return dist


def run_qec_round(noise: NoiseParams, backend: str = "tableau", target: str = "plus",
                  rng: np.random.Generator | None = None) -> TrialOutcome:
    """Single trial; the seed is drawn from ``rng``."""
    rng = rng or np.random.default_rng()
    proto = get_protocol(noise, target, backend)
    return proto.run(1, int(rng.integers(0, 2**63 - 1))).trial(0)


@functools.lru_cache(maxsize=32)
def get_protocol(noise: NoiseParams, target: str, backend: str, max_restarts: int = 1000,
                 trigger: str = "any") -> QECProtocol:
    return QECProtocol(noise, target, backend, max_restarts=max_restarts, trigger=trigger)
