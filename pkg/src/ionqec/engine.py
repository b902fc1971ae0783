"""Numba interpreter for lowered programs, shared by both backends.

One function executes a program row range on one trial.  The tableau state
is ``(x, z, r)`` and the dense state is ``psi``; the unused one is a dummy.

Fault-location control (``first``):

* ``first = -1``: every location is sampled normally.
* ``first = k >= 0``: locations before k do not fire (measurements take their
  reference outcome), location k fires (measurements take the other outcome),
  later locations are sampled normally.
* ``reference = True``: nothing fires, measurements take the more likely
  outcome; firing probabilities and reference outcomes are recorded.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import dense as dk
from . import tableau as tk
from .program import (DEPOL, FLIP, IDLE, MEAS, MS, MSERR, PREP, REPUMP, RESID, ROT, XTRES, XX_COH, XX_INC,
                      Z_COH, Z_INC)
from .rng import uniform

NO_FORCE = -1


@njit(cache=True)
def _pauli(dense, x, z, r, psi, n, q, p, leak, zpar):
    """Apply an error Pauli (1=X, 2=Y, 3=Z) unless the ion is leaked."""
    if p == 0 or leak[q]:
        return
    if dense:
        dk.d_pauli(psi, q, p)
    else:
        tk.pauli1(x, z, r, n, q, p)
    if p >= 2:
        zpar[q] ^= 1


@njit(cache=True)
def _measure(dense, x, z, r, psi, n, q, forced, u):
    if dense:
        p1 = dk.d_prob1(psi, q)
        if p1 < 0.0:
            p1 = 0.0
        if p1 > 1.0:
            p1 = 1.0
        if forced == 1 and p1 <= 0.0:
            forced = 0
        if forced == 0 and p1 >= 1.0:
            forced = 1
        return dk.d_measure(psi, q, forced, u)
    return tk.measure(x, z, r, n, q, forced, u)


@njit(cache=True)
def _flip_x(dense, x, z, r, psi, n, q):
    if dense:
        dk.d_pauli(psi, q, 1)
    else:
        tk.pauli1(x, z, r, n, q, 1)


@njit(cache=True)
def _reset_qubit(dense, x, z, r, psi, n, q, rng):
    out, _ = _measure(dense, x, z, r, psi, n, q, -1, uniform(rng))
    if out == 1:
        _flip_x(dense, x, z, r, psi, n, q)


@njit(cache=True)
def _xx(dense, x, z, r, psi, n, a, b, leak, zpar):
    _pauli(dense, x, z, r, psi, n, a, 1, leak, zpar)
    _pauli(dense, x, z, r, psi, n, b, 1, leak, zpar)


@njit(cache=True)
def _ms_branch(dense, x, z, r, psi, n, a, b, u, leak, zpar):
    # conditional on an MS error: XX 0.8, Y1, Y2, X1Z2, Z1X2 0.05 each
    if u < 0.8:
        _xx(dense, x, z, r, psi, n, a, b, leak, zpar)
    elif u < 0.85:
        _pauli(dense, x, z, r, psi, n, a, 2, leak, zpar)
    elif u < 0.9:
        _pauli(dense, x, z, r, psi, n, b, 2, leak, zpar)
    elif u < 0.95:
        _pauli(dense, x, z, r, psi, n, a, 1, leak, zpar)
        _pauli(dense, x, z, r, psi, n, b, 3, leak, zpar)
    else:
        _pauli(dense, x, z, r, psi, n, a, 3, leak, zpar)
        _pauli(dense, x, z, r, psi, n, b, 1, leak, zpar)


@njit(cache=True)
def _leak_ion(dense, x, z, r, psi, n, q, leak, rng):
    # a leaked ion is parked in |0> and flagged
    _reset_qubit(dense, x, z, r, psi, n, q, rng)
    leak[q] = True


@njit(cache=True)
def _decay(dense, x, z, r, psi, n, q, leak_frac, leak, rng, zpar):
    """Decay event: project onto Z; an excited ion falls to ground or leaks."""
    out, _ = _measure(dense, x, z, r, psi, n, q, -1, uniform(rng))
    if out == 1:
        if uniform(rng) < leak_frac:
            _flip_x(dense, x, z, r, psi, n, q)
            leak[q] = True
        else:
            _flip_x(dense, x, z, r, psi, n, q)


@njit(cache=True)
def run_program(ops, par, row_start, row_stop, dense, x, z, r, psi, n, leak, rng,
                first, reference, ref_out, ploc, meas_out,
                inj_pos, inj_x, inj_z, zpar, zsnap, executed):
    """Execute rows [row_start, row_stop) on one trial (see module docstring)."""
    for i in range(row_start, row_stop):
        if i == inj_pos:
            for q in range(n):
                bx = (inj_x >> np.uint64(q)) & np.uint64(1)
                bz = (inj_z >> np.uint64(q)) & np.uint64(1)
                p = int(bx) + 2 * int(bz)
                if p == 2:
                    p = 3
                elif p == 3:
                    p = 2
                _pauli(dense, x, z, r, psi, n, q, p, leak, zpar)
        code = ops[i, 0]
        a = ops[i, 1]
        b = ops[i, 2]
        link = ops[i, 5]
        loc = ops[i, 6]
        executed[i] = True
        if link >= 0 and not executed[link]:
            executed[i] = False
            continue
        # ---- gates
        if code == ROT:
            if leak[a]:
                executed[i] = False
                continue
            if dense:
                dk.d_rot(psi, a, b, par[i, 0])
            else:
                tk.rot1(x, z, r, n, a, b, ops[i, 3])
            continue
        if code == MS:
            if leak[a] or leak[b]:
                executed[i] = False
                continue
            half = ops[i, 4]
            if dense:
                dk.d_xx(psi, a, b, par[i, 0])
            elif half != 1:
                tk.rotxx(x, z, r, n, a, b, ops[i, 3])
            if half == 1:
                for q in range(n):
                    zsnap[q] = zpar[q]
            continue
        if code == PREP or code == MEAS:
            if leak[a]:
                # leaked ion sits in |0>: reads 0, flag cleared
                leak[a] = False
                if code == MEAS:
                    meas_out[b] = 0
                if reference and loc >= 0:
                    ploc[loc] = 0.0
                    ref_out[loc] = 0
                continue
            forced = NO_FORCE
            if reference:
                forced = NO_FORCE
            elif loc >= 0 and first >= 0:
                if loc < first:
                    forced = ref_out[loc]
                elif loc == first:
                    forced = 1 - ref_out[loc]
            if reference:
                if dense:
                    p1 = dk.d_prob1(psi, a)
                    out = 1 if p1 > 0.5 else 0
                    out, p1 = _measure(dense, x, z, r, psi, n, a, out, 0.0)
                else:
                    out, p1 = _measure(dense, x, z, r, psi, n, a, 0, 0.0)
                    if p1 > 0.5:
                        # deterministic 1 (the forced 0 was ignored)
                        out = 1
                pl = p1 if out == 0 else 1.0 - p1
                if pl < 1e-15:
                    pl = 0.0
                if loc >= 0:
                    ploc[loc] = pl
                    ref_out[loc] = out
            else:
                u = uniform(rng) if forced == NO_FORCE else 0.0
                out, p1 = _measure(dense, x, z, r, psi, n, a, forced, u)
            if code == MEAS:
                meas_out[b] = out
            elif out == 1:
                _flip_x(dense, x, z, r, psi, n, a)
            continue
        if code == XX_COH:
            if not leak[b]:
                if dense:
                    dk.d_xx(psi, a, b, par[i, 0])
            continue
        if code == Z_COH:
            if not leak[a]:
                if dense:
                    dk.d_rot(psi, a, 2, par[i, 0])
            continue
        if code == XTRES:
            if zpar[b] != zsnap[b] and not leak[b] and not reference:
                if uniform(rng) < par[i, 0]:
                    _xx(dense, x, z, r, psi, n, a, b, leak, zpar)
            continue
        # ---- stochastic rows
        if code == REPUMP and leak[a]:
            if reference:
                continue
            if uniform(rng) >= 2.0 * par[i, 0]:
                leak[a] = False
                if uniform(rng) < 0.5:
                    _flip_x(dense, x, z, r, psi, n, a)
            continue
        if code == IDLE or code == FLIP or code == Z_INC or code == DEPOL:
            if leak[a]:
                continue
        if code == XX_INC and leak[b]:
            continue
        if code == IDLE:
            pfire = 1.0 - (1.0 - par[i, 0]) * (1.0 - par[i, 1])
        elif code == REPUMP:
            pfire = 2.0 * par[i, 0]
        elif code == RESID:
            pfire = 2.0 * par[i, 0]
        else:
            pfire = par[i, 0]
        if reference:
            if loc >= 0:
                ploc[loc] = pfire
            continue
        if loc >= 0 and first >= 0 and loc < first:
            continue
        if loc >= 0 and loc == first:
            fire = True
        else:
            fire = uniform(rng) < pfire
        if not fire:
            continue
        u = uniform(rng)
        if code == DEPOL:
            _pauli(dense, x, z, r, psi, n, a, 1 + int(u * 3.0), leak, zpar)
        elif code == MSERR:
            _ms_branch(dense, x, z, r, psi, n, a, b, u, leak, zpar)
        elif code == XX_INC:
            _xx(dense, x, z, r, psi, n, a, b, leak, zpar)
        elif code == Z_INC:
            _pauli(dense, x, z, r, psi, n, a, 3, leak, zpar)
        elif code == FLIP:
            if u < par[i, 1]:
                _leak_ion(dense, x, z, r, psi, n, a, leak, rng)
            else:
                _pauli(dense, x, z, r, psi, n, a, 1, leak, zpar)
        elif code == IDLE:
            pd = par[i, 0]
            pk = par[i, 1]
            wd = pd * (1.0 - pk)
            wk = (1.0 - pd) * pk
            tot = pfire
            v = u * tot
            deph = v < wd or v >= wd + wk
            dec = v >= wd
            if deph:
                _pauli(dense, x, z, r, psi, n, a, 3, leak, zpar)
            if dec:
                _decay(dense, x, z, r, psi, n, a, par[i, 2], leak, rng, zpar)
        elif code == REPUMP:
            if u < 0.5:
                _leak_ion(dense, x, z, r, psi, n, a, leak, rng)
            elif u < 0.75:
                _decay(dense, x, z, r, psi, n, a, 0.0, leak, rng, zpar)
            else:
                _pauli(dense, x, z, r, psi, n, a, 3, leak, zpar)
        elif code == RESID:
            # branches: Z U, Y U, X, Z, Y with weights 1/6, 1/6, 1/3, 1/6, 1/6
            carry = u < 1.0 / 3.0
            if carry:
                g1 = ops[i, 2]
                g2 = ops[i, 3]
                dbl = ops[i, 4]
                for gi in (g1, g2):
                    if dense:
                        pp = par[i, 2] if dbl else par[i, 1]
                        ang = 2.0 * math.asin(math.sqrt(pp))
                        if not leak[a]:
                            dk.d_xx(psi, gi, a, ang)
                    else:
                        pp = par[i, 2] if dbl else par[i, 1]
                        if uniform(rng) < pp:
                            _xx(dense, x, z, r, psi, n, gi, a, leak, zpar)
                if u < 1.0 / 6.0:
                    _pauli(dense, x, z, r, psi, n, a, 3, leak, zpar)
                else:
                    _pauli(dense, x, z, r, psi, n, a, 2, leak, zpar)
            elif u < 2.0 / 3.0:
                _pauli(dense, x, z, r, psi, n, a, 1, leak, zpar)
            elif u < 5.0 / 6.0:
                _pauli(dense, x, z, r, psi, n, a, 3, leak, zpar)
            else:
                _pauli(dense, x, z, r, psi, n, a, 2, leak, zpar)
    if inj_pos >= row_stop and inj_pos == ops.shape[0] and row_stop == ops.shape[0]:
        for q in range(n):
            bx = (inj_x >> np.uint64(q)) & np.uint64(1)
            bz = (inj_z >> np.uint64(q)) & np.uint64(1)
            p = int(bx) + 2 * int(bz)
            if p == 2:
                p = 3
            elif p == 3:
                p = 2
            _pauli(dense, x, z, r, psi, n, q, p, leak, zpar)


@njit(cache=True)
def first_location(cum, u):
    """Smallest k with u >= cum[k] (cum is non-increasing, u >= cum[-1])."""
    lo = 0
    hi = cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u >= cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def run_batch(ops, par, dense, n, idx, X, Z, R, PSI, LEAK, RNG, MEAS_OUT,
              fast, cum, p0, ref_out, ref_meas, ref_x, ref_z, ref_r, ref_psi, fresh,
              at_ref, inj_seg, inj_pos, inj_x, inj_z, inj_done, seg_id):
    """Run one segment for the trials listed in ``idx``.

    ``fast[t]`` marks trials sitting in the shared reference state; for them a
    single uniform decides between staying on the reference path (``at_ref``
    set, no simulation, reference measurement record copied) and a rerun from
    the reference start state with the first fault pinned.  Other trials run normally from their own state (or a
    fresh register when ``fresh``).
    """
    nrows = ops.shape[0]
    nloc = cum.shape[0]
    zpar = np.zeros(n, dtype=np.uint8)
    zsnap = np.zeros(n, dtype=np.uint8)
    executed = np.zeros(max(nrows, 1), dtype=np.bool_)
    ploc = np.zeros(max(nloc, 1), dtype=np.float64)
    for j in range(idx.shape[0]):
        t = idx[j]
        rng = RNG[t:t + 1]
        ti = 0 if dense else t
        di = t if dense else 0
        x = X[ti]
        z = Z[ti]
        r = R[ti]
        psi = PSI[di]
        leak = LEAK[t]
        ipos = -1
        if inj_seg[t] == seg_id and not inj_done[t]:
            ipos = inj_pos[t]
            inj_done[t] = True
        first = -1
        if fast[t] and ipos < 0:
            u = uniform(rng)
            if u < p0:
                at_ref[t] = True
                for c in range(MEAS_OUT.shape[1]):
                    MEAS_OUT[t, c] = ref_meas[c] if c < ref_meas.shape[0] else 0
                continue
            first = first_location(cum, u)
        at_ref[t] = False
        if fast[t] or fresh:
            if dense:
                psi[:] = ref_psi
            else:
                x[:, :] = ref_x
                z[:, :] = ref_z
                r[:] = ref_r
            leak[:] = False
        zpar[:] = 0
        zsnap[:] = 0
        for c in range(MEAS_OUT.shape[1]):
            MEAS_OUT[t, c] = 0
        run_program(ops, par, 0, nrows, dense, x, z, r, psi, n, leak, rng,
                    first, False, ref_out, ploc, MEAS_OUT[t],
                    ipos, inj_x[t], inj_z[t], zpar, zsnap, executed)


@njit(cache=True)
def run_reference(ops, par, dense, n, x, z, r, psi, ref_out, ploc, meas_out):
    leak = np.zeros(n, dtype=np.bool_)
    rng = np.zeros(1, dtype=np.uint64)
    zpar = np.zeros(n, dtype=np.uint8)
    zsnap = np.zeros(n, dtype=np.uint8)
    executed = np.zeros(max(ops.shape[0], 1), dtype=np.bool_)
    run_program(ops, par, 0, ops.shape[0], dense, x, z, r, psi, n, leak, rng,
                -1, True, ref_out, ploc, meas_out, -1, np.uint64(0), np.uint64(0),
                zpar, zsnap, executed)
