"""Logical error rate estimation: Monte Carlo, sweeps and path enumeration."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dense as dk
from .engine import run_program
from .noise import NoiseParams
from .program import MEAS, PREP
from .protocol import (SEG_GA, SEG_GB, SEG_PREP, SEG_READ, SEG_UNF, QECProtocol, _decoded_logical,
                       get_protocol, readout_distribution)

DEFAULT_CHUNK = {"tableau": 65536, "dense": 1024}


@dataclass(frozen=True)
class LogicalErrorEstimate:
    p_log: float
    err: float
    n_samples: int
    params: NoiseParams
    failures: int = 0
    capped: bool = False          # adaptive sampling stopped at its cap
    upper_bound: float | None = None   # rule-of-three bound when no failure was seen

    @classmethod
    def from_counts(cls, failures: int, n: int, params: NoiseParams, **kw) -> "LogicalErrorEstimate":
        if n < 1:
            raise ValueError("need at least one sample")
        p = failures / n
        return cls(p, binomial_error(p, n), n, params, failures, **kw)


def binomial_error(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


# ----------------------------------------------------------------- Monte Carlo

def _count_failures(args) -> int:
    noise, target, backend, seed, first, count, chunk = args
    proto = get_protocol(noise, target, backend)
    fails = 0
    done = 0
    while done < count:
        m = min(chunk, count - done)
        fails += int(proto.run(m, seed, first + done).failure.sum())
        done += m
    return fails


def monte_carlo(noise: NoiseParams, n_samples: int, master_seed: int = 0, target: str = "plus",
                backend: str = "tableau", jobs: int = 1, chunk: int | None = None,
                first_index: int = 0) -> LogicalErrorEstimate:
    """Estimate p_log from ``n_samples`` independent trials.

    Trial i always uses the random stream derived from (master_seed, i), so
    the result does not depend on ``jobs`` or ``chunk``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    chunk = chunk or DEFAULT_CHUNK[backend]
    if jobs <= 1:
        fails = _count_failures((noise, target, backend, master_seed, first_index, n_samples, chunk))
    else:
        per = -(-n_samples // jobs)
        tasks = []
        for j in range(jobs):
            lo = j * per
            cnt = min(per, n_samples - lo)
            if cnt > 0:
                tasks.append((noise, target, backend, master_seed, first_index + lo, cnt, chunk))
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            fails = sum(ex.map(_count_failures, tasks))
    return LogicalErrorEstimate.from_counts(fails, n_samples, noise)


def adaptive_sample(noise: NoiseParams, master_seed: int = 0, target: str = "plus", backend: str = "tableau",
                    rel_target: float = 0.1, abs_target: float = 0.0, first_batch: int = 10_000,
                    cap: int = 10_000_000, growth: float = 4.0, jobs: int = 1) -> LogicalErrorEstimate:
    """Grow the sample geometrically until err <= max(rel_target*p, abs_target).

    Batches continue the trial index range, so the final estimate equals a
    single ``monte_carlo`` call of the same total size.  Hitting the cap
    returns the estimate with ``capped`` set; with no failures observed the
    rule-of-three bound 3/n is attached.
    """
    if cap > 10**8:
        raise ValueError("cap must not exceed 1e8")
    if first_batch < 1 or growth <= 1.0:
        raise ValueError("need first_batch >= 1 and growth > 1")
    n = 0
    fails = 0
    batch = min(first_batch, cap)
    while True:
        est = monte_carlo(noise, batch, master_seed, target, backend, jobs, first_index=n)
        n += batch
        fails += est.failures
        p = fails / n
        err = binomial_error(p, n)
        if fails > 0 and err <= max(rel_target * p, abs_target):
            return LogicalErrorEstimate.from_counts(fails, n, noise)
        if fails == 0 and abs_target > 0 and 3.0 / n <= abs_target:
            return LogicalErrorEstimate.from_counts(fails, n, noise, upper_bound=3.0 / n)
        if n >= cap:
            return LogicalErrorEstimate.from_counts(fails, n, noise, capped=True,
                                                    upper_bound=3.0 / n if fails == 0 else None)
        batch = min(int(n * (growth - 1.0)), cap - n)


# ------------------------------------------------------------ path enumeration

@dataclass
class PathResult:
    p_log: float
    accepted_weight: float        # probability that preparation was accepted
    discarded_weight: float       # flagged preparations (restarted)
    pruned_weight: float
    leaves: int

    @property
    def total_weight(self) -> float:
        return self.accepted_weight + self.discarded_weight + self.pruned_weight


class _Runner:
    """Deterministic row-range execution on a dense state."""

    def __init__(self, proto: QECProtocol):
        self.proto = proto
        n = proto.n
        self.n = n
        self.x = np.zeros((1, 1), dtype=np.uint64)
        self.z = self.x.copy()
        self.r = np.zeros(1, dtype=np.uint8)
        self.leak = np.zeros(n, dtype=np.bool_)
        self.rng = np.zeros(1, dtype=np.uint64)
        self.zpar = np.zeros(n, dtype=np.uint8)
        self.zsnap = np.zeros(n, dtype=np.uint8)
        self.branch_rows = []
        for prog in proto.programs:
            codes = prog.ops[:, 0]
            self.branch_rows.append([int(i) for i in np.flatnonzero((codes == PREP) | (codes == MEAS))])

    def run(self, seg, start, stop, psi, meas):
        prog = self.proto.programs[seg]
        if stop <= start:
            return
        ex = np.zeros(len(prog), dtype=np.bool_)
        dummy_loc = np.zeros(1, dtype=np.int64)
        ploc = np.zeros(1)
        run_program(prog.ops, prog.par, start, stop, True, self.x, self.z, self.r, psi, self.n, self.leak,
                    self.rng, -1, False, dummy_loc, ploc, meas, -1, np.uint64(0), np.uint64(0),
                    self.zpar, self.zsnap, ex)


def enumerate_paths(noise: NoiseParams, target: str = "plus", prune: float = 1e-14) -> PathResult:
    """Exact p_log for coherent-only noise by following every measurement branch.

    Branches whose path weight falls below ``prune`` are dropped and their
    weight reported.  Flagged preparations are discarded (the protocol
    restarts), so the result is conditioned on acceptance.
    """
    if noise.has_stochastic():
        raise ValueError("enumeration valid for coherent-only models: stochastic channels present")
    if noise.p_c > 0 and noise.crosstalk_mode != "off" and not noise.coherent:
        raise ValueError("enumeration valid for coherent-only models: incoherent crosstalk")
    proto = QECProtocol(noise, target, "dense")
    runner = _Runner(proto)
    dec = _decoded_logical(target)
    typ = 0 if target == "zero" else 1
    tally = {"acc": 0.0, "fail": 0.0, "disc": 0.0, "pruned": 0.0, "leaves": 0}

    def leaf(psi, w, ctx):
        dist = readout_distribution(proto, (None, None, None, psi))
        flip = 0
        if ctx["group"]:
            flip = proto.table.lookup(ctx["group"], ctx["gbits"], ctx["unf"])[typ]
        words = np.arange(128)
        pf = float(dist @ dec[words ^ flip])
        tally["acc"] += w
        tally["fail"] += w * pf
        tally["leaves"] += 1

    def finish(seg, psi, w, meas, ctx):
        if seg == SEG_PREP:
            if meas[0]:
                tally["disc"] += w
                return
            walk(SEG_GA, 0, psi, w, ctx)
        elif seg in (SEG_GA, SEG_GB):
            bits = tuple(int(b) for b in meas[:3])
            if any(bits):
                walk(SEG_UNF, 0, psi, w, dict(ctx, group="A" if seg == SEG_GA else "B", gbits=bits))
            elif seg == SEG_GA:
                walk(SEG_GB, 0, psi, w, ctx)
            else:
                walk(SEG_READ, 0, psi, w, ctx)
        elif seg == SEG_UNF:
            walk(SEG_READ, 0, psi, w, dict(ctx, unf=tuple(int(b) for b in meas[:6])))
        else:
            leaf(psi, w, ctx)

    def walk(seg, row, psi, w, ctx, meas=None):
        meas = np.zeros(7, dtype=np.int64) if meas is None else meas
        prog = proto.programs[seg]
        if seg == SEG_READ:
            # the readout distribution is taken directly from the state
            finish(seg, psi, w, meas, ctx)
            return
        nxt = next((b for b in runner.branch_rows[seg] if b >= row), len(prog))
        runner.run(seg, row, nxt, psi, meas)
        if nxt == len(prog):
            finish(seg, psi, w, meas, ctx)
            return
        code = int(prog.ops[nxt, 0])
        q = int(prog.ops[nxt, 1])
        p1 = min(max(dk.d_prob1(psi, q), 0.0), 1.0)
        for out, p in ((0, 1.0 - p1), (1, p1)):
            wb = w * p
            if p <= 0.0 or wb < prune:
                tally["pruned"] += wb
                continue
            psi2 = psi.copy()
            dk.d_project(psi2, q, out, p)
            m2 = meas.copy()
            if code == MEAS:
                m2[int(prog.ops[nxt, 2])] = out
            elif out == 1:
                dk.d_pauli(psi2, q, 1)
            walk(seg, nxt + 1, psi2, wb, ctx, m2)

    psi0 = np.zeros(1 << proto.n, dtype=np.complex128)
    psi0[0] = 1.0
    walk(SEG_PREP, 0, psi0, 1.0, {"group": None, "gbits": (0, 0, 0), "unf": (0,) * 6})
    acc = tally["acc"]
    p = tally["fail"] / acc if acc > 0 else float("nan")
    return PathResult(p, acc, tally["disc"], tally["pruned"], tally["leaves"])


# ---------------------------------------------------------------------- sweeps

@dataclass
class SweepResult:
    axis: str
    grid: list
    estimates: list
    config: dict = field(default_factory=dict)
    threshold: float | None = None

    def to_csv(self) -> str:
        return sweep_csv(self)


def pseudo_threshold(x, y) -> float | None:
    """p where p_log(p) = p, by log-log interpolation between bracketing points.

    Takes the crossing with the largest p where the curve passes from
    below the diagonal to above it; None when there is none.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    best = None
    for i in range(len(x) - 1):
        x0, x1, y0, y1 = x[i], x[i + 1], y[i], y[i + 1]
        if min(x0, x1, y0, y1) <= 0:
            continue
        d0 = math.log(y0) - math.log(x0)
        d1 = math.log(y1) - math.log(x1)
        if d0 <= 0 < d1 or (d0 == 0 and d1 == 0):
            t = 0.0 if d1 == d0 else -d0 / (d1 - d0)
            best = math.exp(math.log(x0) + t * (math.log(x1) - math.log(x0)))
    return best


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of log y against log x and its standard error."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two points")
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(a, ly, rcond=None)
    if lx.size > 2:
        resid = ly - a @ coef
        s2 = float(resid @ resid) / (lx.size - 2)
        se = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
    else:
        se = 0.0
    return float(coef[0]), se


def log_grid(lo: float, hi: float, per_decade: int = 8) -> list[float]:
    n = max(2, int(round(math.log10(hi / lo) * per_decade)) + 1)
    return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n)]


def sweep(axis: str, grid, noise: NoiseParams, n_samples: int, master_seed: int = 0, target: str = "plus",
          backend: str = "tableau", jobs: int = 1, config: dict | None = None) -> SweepResult:
    """One estimate per grid value of ``axis`` (a NoiseParams field).

    ``backend`` may be ``paths`` for coherent-only noise, in which case the
    exact enumeration replaces sampling (err = 0, n_samples = 0).
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    if axis not in NoiseParams.__dataclass_fields__:
        raise ValueError(f"unknown sweep axis {axis!r}")
    ests = []
    for k, v in enumerate(grid):
        nz = noise.with_(**{axis: float(v)})
        if backend == "paths":
            r = enumerate_paths(nz, target)
            ests.append(LogicalErrorEstimate(r.p_log, 0.0, 0, nz))
        else:
            ests.append(monte_carlo(nz, n_samples, master_seed + k, target, backend, jobs))
    res = SweepResult(axis, grid, ests, dict(config or {}))
    if axis == "p_ms":
        res.threshold = pseudo_threshold(grid, [e.p_log for e in ests])
    return res


# ------------------------------------------------------------------------- CSV

def fmt(v) -> str:
    """Fixed 17-significant-digit float formatting; other values via str."""
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


NOISE_FIELDS = tuple(NoiseParams.__dataclass_fields__)


def estimates_csv(rows: list[tuple[dict, LogicalErrorEstimate]], config: dict, footer: dict | None = None) -> str:
    """CSV text: '#' header echoing the config, then one row per estimate."""
    h = config_hash(config)
    buf = io.StringIO()
    buf.write("# " + json.dumps(config, sort_keys=True, default=str) + "\n")
    axis_cols = list(rows[0][0]) if rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(axis_cols + ["p_log", "err", "n_samples"] + list(NOISE_FIELDS) + ["config_hash"])
    for axes, est in rows:
        nd = est.params.as_dict()
        w.writerow([fmt(axes[c]) for c in axis_cols] + [fmt(est.p_log), fmt(est.err), est.n_samples]
                   + [fmt(nd[f]) for f in NOISE_FIELDS] + [h])
    for k, v in (footer or {}).items():
        buf.write(f"# {k}={fmt(v)}\n")
    return buf.getvalue()


def sweep_csv(res: SweepResult) -> str:
    rows = [({res.axis: v}, e) for v, e in zip(res.grid, res.estimates)]
    footer = {}
    if res.axis == "p_ms":
        footer["pseudo_threshold"] = res.threshold if res.threshold is not None else "absent"
    return estimates_csv(rows, res.config, footer)


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse a CSV written by this module: (config, rows)."""
    lines = text.splitlines()
    config = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    return config, list(csv.DictReader(body))


# ------------------------------------------------------ refocus process sampling

RESIDUAL_LABELS = ("I", "Z_n U_CT", "Y_n U_CT", "X_n", "Z_n", "Y_n", "other")


def _pattern_unitary(p_c: float, e1: str, e2: str) -> tuple[np.ndarray, np.ndarray]:
    """Echoed MS on ions (1, 2) with spectator 0 and Pauli faults after each echo pulse.

    Returns (noisy unitary, bare crosstalk unitary of an unechoed gate).
    """
    from .circuit import Circuit, IonLayout, circuit_unitary, insert_refocussing, ms, rot

    lay = IonLayout.plain(3)
    eps = p_c  # circuit_unitary takes p_c through apply_crosstalk_unitary
    bare = Circuit((ms(math.pi / 2, 1, 2),), 3)
    ideal = circuit_unitary(bare)
    ct = circuit_unitary(bare, eps, lay) @ ideal.conj().T
    evs = list(insert_refocussing(bare, lay).events)
    seq = []
    pulses = 0
    for ev in evs:
        seq.append(ev)
        if ev.kind == "ROT":
            pulses += 1
            e = e1 if pulses == 1 else e2
            if e != "I":
                seq.append(rot(e, math.pi, 0))
    noisy = circuit_unitary(Circuit(tuple(seq), 3), eps, lay) @ ideal.conj().T
    return noisy, ct


def classify_residual(r: np.ndarray, ct: np.ndarray, tol: float = 1e-9) -> str:
    """Match a residual unitary (up to phase) to one branch of the echo residual map."""
    from .circuit import unitary_fidelity
    from .pauli import PauliString

    def on_n(letter):
        return PauliString.from_sparse(3, {0: letter}).to_matrix()

    cands = {"I": np.eye(8), "Z_n U_CT": on_n("Z") @ ct, "Y_n U_CT": on_n("Y") @ ct, "X_n": on_n("X"),
             "Z_n": on_n("Z"), "Y_n": on_n("Y")}
    for lab, m in cands.items():
        if abs(unitary_fidelity(m, r) - 1.0) < tol:
            return lab
    return "other"


def refocus_process_sampling(p_1q: float, p_c: float, n_samples: int,
                             rng: np.random.Generator) -> dict[str, float]:
    """Empirical branch rates of one echoed MS gate with depolarised echo pulses.

    Each echo pulse suffers X, Y or Z with p_1q/3 each.  The 16 fault patterns
    are drawn multinomially and each pattern's residual unitary is classified
    exactly.  Returns the rate of every label in ``RESIDUAL_LABELS``.
    """
    letters = "IXYZ"
    probs = []
    labels = []
    for a in letters:
        for b in letters:
            pa = 1 - p_1q if a == "I" else p_1q / 3
            pb = 1 - p_1q if b == "I" else p_1q / 3
            probs.append(pa * pb)
            noisy, ct = _pattern_unitary(p_c, a, b)
            labels.append(classify_residual(noisy, ct))
    counts = rng.multinomial(n_samples, probs)
    rates = {lab: 0.0 for lab in RESIDUAL_LABELS}
    for lab, c in zip(labels, counts):
        rates[lab] += c / n_samples
    return rates
