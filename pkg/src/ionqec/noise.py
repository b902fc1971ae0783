"""Error channels for the trapped-ion noise stack.

Probabilistic channels are exposed as :class:`KrausChannel` objects (checked
for completeness on construction) and as small samplers.  The batch engine
does not call these samplers; it lowers :class:`NoiseParams` into numba op
tables (see :mod:`ionqec.program`), but both follow the same rates.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .pauli import PauliString

CROSSTALK_MODES = (
    "off",
    "entangling-coherent",
    "entangling-incoherent",
    "stark-coherent",
    "stark-incoherent",
)


# ------------------------------------------------------------ parameters

@dataclass(frozen=True)
class NoiseParams:
    p_1q: float = 1e-5
    p_ms: float = 1e-3
    p_c: float = 0.0
    crosstalk_mode: str = "off"
    refocussing: bool = False
    refocus_analytic: bool = False   # use the residual Kraus map instead of echo pulses
    p_sp: float = 1e-4
    p_m: float = 1e-4
    T1: float = 1.1                  # seconds
    T2: float = 2.2                  # seconds
    leak_branching: float = 4.0 / 9.0
    p_sg: float = 1e-4
    prep_leak_fraction: float = 0.0

    def __post_init__(self):
        for name in ("p_1q", "p_ms", "p_c", "p_sp", "p_m", "prep_leak_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not self.p_c < 1.0:
            raise ValueError("p_c must be below 1")
        if not 0.0 <= self.p_sg <= 0.5:
            raise ValueError(f"p_sg must lie in [0, 0.5], got {self.p_sg}")
        if not (self.T1 > 0 and self.T2 > 0):
            raise ValueError("T1 and T2 must be positive")
        if self.leak_branching < 0:
            raise ValueError("leak_branching must be non-negative")
        if self.crosstalk_mode not in CROSSTALK_MODES:
            raise ValueError(f"crosstalk_mode must be one of {CROSSTALK_MODES}")

    # convenience views
    @property
    def leak_fraction(self) -> float:
        """Fraction of decay events that end in the leaked level."""
        b = self.leak_branching
        return b / (1.0 + b)

    @property
    def crosstalk_kind(self) -> str:
        return self.crosstalk_mode.split("-")[0] if self.crosstalk_mode != "off" else "off"

    @property
    def coherent(self) -> bool:
        return self.crosstalk_mode.endswith("coherent") and not self.crosstalk_mode.endswith("incoherent")

    def has_stochastic(self) -> bool:
        """True if any Kraus-sampled channel has a nonzero rate."""
        stochastic_ct = self.crosstalk_mode.endswith("incoherent") and self.p_c > 0
        idle = math.isfinite(self.T1) or math.isfinite(self.T2)
        return bool(self.p_1q or self.p_ms or self.p_sp or self.p_m or self.p_sg
                    or stochastic_ct or idle)

    def with_(self, **kw) -> "NoiseParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseParams":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in known:
                raise KeyError(f"unknown noise parameter {k!r}")
            kw[k] = coerce(v, known[k].type)
        return cls(**kw)

    @classmethod
    def noiseless(cls) -> "NoiseParams":
        return cls(p_1q=0.0, p_ms=0.0, p_c=0.0, p_sp=0.0, p_m=0.0, p_sg=0.0,
                   T1=math.inf, T2=math.inf)

    @classmethod
    def crosstalk_only(cls, p_c: float, mode: str, **kw) -> "NoiseParams":
        return cls.noiseless().with_(p_c=p_c, crosstalk_mode=mode, **kw)


def coerce(value, typ):
    """Convert a config string to the annotated field type."""
    if not isinstance(value, str):
        return value
    t = str(typ)
    v = value.strip()
    if t == "bool" or typ is bool:
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if t == "float" or typ is float:
        return float(v)
    if t == "int" or typ is int:
        return int(v)
    return v


# ------------------------------------------------------------ Kraus channels

@dataclass
class KrausChannel:
    operators: list[np.ndarray]
    labels: list[str]
    weights: list[float] | None = None   # branch probabilities when operators are scaled unitaries
    arity: int = 1

    def __post_init__(self):
        d = 2**self.arity
        acc = np.zeros((d, d), dtype=complex)
        for k in self.operators:
            if k.shape != (d, d):
                raise ValueError("operator dimension does not match arity")
            acc += k.conj().T @ k
        err = np.max(np.abs(acc - np.eye(d)))
        if err > 1e-12:
            raise ValueError(f"Kraus set is not trace preserving (deviation {err:.3e})")

    def completeness_error(self) -> float:
        d = 2**self.arity
        acc = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(acc - np.eye(d))))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw branch labels according to ``weights``."""
        if self.weights is None:
            raise ValueError("channel has no fixed branch weights")
        idx = rng.choice(len(self.labels), size=size, p=np.asarray(self.weights))
        if size is None:
            return self.labels[int(idx)]
        return np.asarray(self.labels)[idx]


def pauli_channel(weights: dict[str, float]) -> KrausChannel:
    labels = list(weights)
    arity = len(labels[0])
    ops = [math.sqrt(w) * PauliString.from_label(lab).to_matrix() for lab, w in weights.items()]
    return KrausChannel(ops, labels, [weights[lab] for lab in labels], arity)


def depolarizing_1q(p_1q: float) -> KrausChannel:
    if not 0 <= p_1q <= 1:
        raise ValueError("p_1q must lie in [0, 1]")
    return pauli_channel({"I": 1 - p_1q, "X": p_1q / 3, "Y": p_1q / 3, "Z": p_1q / 3})


# weights of the MS error branches relative to p_ms; qubit 0 is the first gate ion
MS_BRANCHES = (("XX", 0.80), ("YI", 0.05), ("IY", 0.05), ("XZ", 0.05), ("ZX", 0.05))


def ms_pauli_channel(p_ms: float) -> KrausChannel:
    if not 0 <= p_ms <= 1:
        raise ValueError("p_ms must lie in [0, 1]")
    w = {"II": 1 - p_ms}
    for lab, f in MS_BRANCHES:
        w[lab] = f * p_ms
    return pauli_channel(w)


def crosstalk_angle(p_c: float) -> float:
    """theta_c with p_c = sin^2(theta_c / 2)."""
    return 2.0 * math.asin(math.sqrt(p_c))


def doubled_probability(p_c: float) -> float:
    """Flip probability for a neighbour seeing twice the crosstalk angle."""
    return 4.0 * p_c * (1.0 - p_c)


def stark_mu(p_c: float) -> float:
    """mu with p_c = sin^2(mu * pi / 4)."""
    return 4.0 / math.pi * math.asin(math.sqrt(p_c))


@dataclass(frozen=True)
class Insertion:
    """One crosstalk insertion attached to an MS event."""

    kind: str            # "xx-coherent", "xx-flip", "z-coherent", "z-flip"
    ions: tuple[int, ...]
    value: float         # rotation angle for coherent kinds, probability otherwise


def crosstalk_entangling(p_c: float, mode: str, pairs) -> list[Insertion]:
    """Insertions for one MS event.

    ``pairs`` holds ``(gate_ion, neighbour, doubled)`` triples.  Coherent mode
    applies exp(-i a/2 X_g X_n) with a = theta_c (2 theta_c when doubled);
    incoherent mode flips X_g X_n with p_c (4 p_c (1 - p_c) when doubled).
    """
    if not 0 <= p_c < 1:
        raise ValueError("p_c must lie in [0, 1)")
    if p_c == 0:
        return []
    out = []
    for g, v, dbl in pairs:
        if mode == "coherent":
            out.append(Insertion("xx-coherent", (g, v), crosstalk_angle(p_c) * (2 if dbl else 1)))
        elif mode == "incoherent":
            out.append(Insertion("xx-flip", (g, v), doubled_probability(p_c) if dbl else p_c))
        else:
            raise ValueError(f"unknown crosstalk mode {mode!r}")
    return out


def crosstalk_stark(p_c: float, mode: str, neighbors) -> list[Insertion]:
    """Coherent: exp(-i mu pi/4 Z_n) on each neighbour; incoherent: Z_n with p_c."""
    if not 0 <= p_c < 1:
        raise ValueError("p_c must lie in [0, 1)")
    if p_c == 0:
        return []
    if mode == "coherent":
        ang = stark_mu(p_c) * math.pi / 2   # as a Z rotation angle exp(-i ang/2 Z)
        return [Insertion("z-coherent", (v,), ang) for v in neighbors]
    if mode == "incoherent":
        return [Insertion("z-flip", (v,), p_c) for v in neighbors]
    raise ValueError(f"unknown crosstalk mode {mode!r}")


def stark_unitary(mu: float) -> np.ndarray:
    a = mu * math.pi / 4
    return np.diag([np.exp(-1j * a), np.exp(1j * a)])


def xx_unitary(angle: float) -> np.ndarray:
    """exp(-i angle/2 X X) on two qubits."""
    xx = PauliString.from_label("XX").to_matrix()
    return math.cos(angle / 2) * np.eye(4) - 1j * math.sin(angle / 2) * xx


def refocus_residual_channel(p_1q: float, theta: float, eps_ct: float) -> KrausChannel:
    """Residual map on a (gate, neighbour) pair after an echoed MS gate.

    Qubit 0 is the gate ion and qubit 1 the neighbour.  ``U_CT`` is
    exp(-i theta eps_ct X_n X_g).
    """
    if not 0 <= p_1q <= 0.5:
        raise ValueError("p_1q must lie in [0, 1/2]")
    p = p_1q
    u = xx_unitary(2 * theta * eps_ct)
    zn = PauliString.from_label("IZ").to_matrix()
    yn = PauliString.from_label("IY").to_matrix()
    xn = PauliString.from_label("IX").to_matrix()
    ops = [
        math.sqrt(1 - 2 * p) * np.eye(4),
        math.sqrt(p / 3) * zn @ u,
        math.sqrt(p / 3) * yn @ u,
        math.sqrt(2 * p / 3) * xn,
        math.sqrt(p / 3) * zn,
        math.sqrt(p / 3) * yn,
    ]
    labels = ["I", "Z_n U_CT", "Y_n U_CT", "X_n", "Z_n", "Y_n"]
    weights = [1 - 2 * p, p / 3, p / 3, 2 * p / 3, p / 3, p / 3]
    return KrausChannel(ops, labels, weights, 2)


def residual_crosstalk_rate(p_1q: float) -> float:
    """Weight of each Kraus branch that still carries the crosstalk unitary."""
    return p_1q / 3.0


def amplitude_damping_leak(gamma: float, leak_fraction: float) -> KrausChannel:
    """Three-level decay restricted to the qubit plus a leaked population.

    Returned on the qubit space as a trace-decreasing set completed by the
    leak branch; used only to check the branching weights.
    """
    k0 = np.diag([1.0, math.sqrt(1 - gamma)])
    kd = math.sqrt(gamma * (1 - leak_fraction)) * np.array([[0, 1], [0, 0]], dtype=complex)
    kl = math.sqrt(gamma * leak_fraction) * np.array([[0, 0], [0, 1]], dtype=complex)
    # kl stands for the excited population moving to the leak level
    return KrausChannel([k0.astype(complex), kd, kl], ["K0", "decay", "leak"], None, 1)


# ------------------------------------------------------------ samplers

@dataclass(frozen=True)
class IdleChannel:
    """Dephasing plus decay for one idle interval of ``delta_t`` microseconds."""

    delta_t: float
    T1: float
    T2: float
    leak_fraction: float

    def __post_init__(self):
        if self.delta_t < 0:
            raise ValueError("idle interval must be non-negative")

    @property
    def p_dephase(self) -> float:
        return 0.5 * (1.0 - math.exp(-self.delta_t * 1e-6 / self.T2))

    @property
    def p_decay(self) -> float:
        return 1.0 - math.exp(-self.delta_t * 1e-6 / self.T1)

    def sample(self, rng: np.random.Generator, size: int = 1):
        """Return boolean arrays (dephase, decay, leak_if_decayed)."""
        deph = rng.random(size) < self.p_dephase
        dec = rng.random(size) < self.p_decay
        leak = rng.random(size) < self.leak_fraction
        return deph, dec, leak & dec


def idle_channel(delta_t: float, params: NoiseParams) -> IdleChannel:
    return IdleChannel(delta_t, params.T1, params.T2, params.leak_fraction)


REPUMP_LEAKED = ("stay", "ground", "excited")
REPUMP_CLEAN = ("none", "leak", "damp", "dephase")


@dataclass(frozen=True)
class RepumpChannel:
    leaked: bool
    p_sg: float

    def __post_init__(self):
        if not 0 <= self.p_sg <= 0.5:
            raise ValueError("p_sg must lie in [0, 1/2]")

    def probabilities(self) -> dict[str, float]:
        p = self.p_sg
        if self.leaked:
            return {"stay": 2 * p, "ground": (1 - 2 * p) / 2, "excited": (1 - 2 * p) / 2}
        return {"none": 1 - 2 * p, "leak": p, "damp": p / 2, "dephase": p / 2}

    def sample(self, rng: np.random.Generator, size: int | None = None):
        probs = self.probabilities()
        labels = list(probs)
        idx = rng.choice(len(labels), size=size, p=list(probs.values()))
        if size is None:
            return labels[int(idx)]
        return np.asarray(labels)[idx]


def repump_channel(leaked: bool, p_sg: float) -> RepumpChannel:
    return RepumpChannel(bool(leaked), p_sg)


@dataclass(frozen=True)
class SpamChannels:
    p_sp: float
    p_m: float
    prep_leak_fraction: float = 0.0

    def sample_prep(self, rng: np.random.Generator, size: int = 1):
        """Labels 'none', 'x' or 'leak' for each preparation."""
        fire = rng.random(size) < self.p_sp
        leak = rng.random(size) < self.prep_leak_fraction
        out = np.full(size, "none", dtype=object)
        out[fire & ~leak] = "x"
        out[fire & leak] = "leak"
        return out

    def sample_meas_flip(self, rng: np.random.Generator, size: int = 1):
        return rng.random(size) < self.p_m


def spam_channels(p_sp: float, p_m: float, prep_leak_fraction: float = 0.0) -> SpamChannels:
    for v in (p_sp, p_m, prep_leak_fraction):
        if not 0 <= v <= 1:
            raise ValueError("rates must lie in [0, 1]")
    return SpamChannels(p_sp, p_m, prep_leak_fraction)


# ------------------------------------------------------------ leakage bookkeeping

class LeakRegistry:
    """Per-ion leaked flags."""

    def __init__(self, n: int):
        self.flags = np.zeros(n, dtype=bool)

    def leak(self, q: int):
        self.flags[q] = True

    def clear(self, q: int):
        self.flags[q] = False

    def is_leaked(self, q: int) -> bool:
        return bool(self.flags[q])

    def any(self, qs) -> bool:
        return bool(self.flags[list(qs)].any())


@dataclass(frozen=True)
class EffectiveEvent:
    action: str          # "execute", "suppress" or "clear"
    event: object
    forced_outcome: int = -1


def leaked_gate_semantics(event, registry: LeakRegistry) -> EffectiveEvent:
    """Decide what a circuit event does given the current leak flags.

    Gates touching a leaked ion are suppressed together with their noise.
    Preparation and measurement clear the flag; a leaked ion reads out 0.
    """
    kind = event.kind
    if kind in ("ROT", "MS"):
        if registry.any(event.ions):
            return EffectiveEvent("suppress", event)
        return EffectiveEvent("execute", event)
    if kind == "PREP":
        q = event.ions[0]
        was = registry.is_leaked(q)
        registry.clear(q)
        return EffectiveEvent("clear" if was else "execute", event)
    if kind == "MEAS":
        q = event.ions[0]
        if registry.is_leaked(q):
            registry.clear(q)
            return EffectiveEvent("clear", event, forced_outcome=0)
        return EffectiveEvent("execute", event)
    return EffectiveEvent("execute", event)
