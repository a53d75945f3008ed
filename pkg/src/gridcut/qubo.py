"""Master problem as a quadratic unconstrained binary optimization.

The cut pool and the minimum on/off time constraints are compiled into an
energy H = H_obj + H_feas + H_time over schedule bits plus auxiliaries:

* H_obj encodes the optimality cuts. Per schedule bit the linear
  coefficient is sum_e F_e[i,t] (1 + 2 mu (C_e - ub)) and per ordered bit
  pair the quadratic coefficient is eta sum_e F_e[i,t] F_e[i',t'];
  diagonal pairs fold into the linear term via x^2 = x. With eta = mu
  this is sum_e [cut_e(u) - C_e + mu (cut_e(u) - ub)^2] up to constants:
  a pull of each cut's value toward the incumbent upper bound.

* H_feas adds xi_fea (c + <f, u> + sum_k 2^k b_k)^2 per feasibility cut,
  with enough slack bits to represent every admissible slack value. Cut
  coefficients that are integral (the common case for integer MW data)
  are used exactly; otherwise they are scaled by (2^8 - 1)/range and
  rounded to the integer lattice so penalties still reach exact zero.

* H_time adds squared penalties for minimum on/off times at every state
  transition t >= 1 with a nontrivial minimum. The trigger terms
  u[t-1](1-u[t]) and u[t](1-u[t-1]) are cubic once squared against the
  window sum, so each constrained (i,t) gets one product bit
  w = u[t-1] u[t] tied down by a Rosenberg consistency gadget
  (3w + u u' - 2w u - 2w u'), which is zero exactly when w equals the
  product and at least one otherwise.

Bit layout is schedule bits first (unit-major), then per-(i,t) product
and slack bits, then per-feasibility-cut slack bits in pool order, so the
registry only ever grows when feasibility cuts arrive. An assignment has
zero penalty energy iff its decoded schedule satisfies the minimum-time
constraints and every (quantized) feasibility cut, with slack bits set to
the actual constraint slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cuts import CutPool, eval_optimality_cut
from .errors import (
    EmptyInstanceError,
    EmptyPoolError,
    LengthMismatchError,
    NegativeRangeError,
    UnsatisfiableCutError,
)
from .model import Schedule, as_commitment_model

QUANT_BITS = 8
_INT_EPS = 1e-9

# bit meanings: ("u", i, t) | ("pair", i, t) | ("son", i, t, k)
#               | ("soff", i, t, k) | ("sfea", e, t, k)   [t may be None]


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty weights and objective-shaping parameters.

    All weights must be positive. When omitted at build time, weights are
    recomputed per build: xi_* = 10 (max |H_obj linear coeff| + 1),
    mu = 1 / (|ub| + 1), eta = mu.
    """

    xi_on: float
    xi_off: float
    xi_fea: float
    mu: float
    eta: float

    def __post_init__(self):
        for name in ("xi_on", "xi_off", "xi_fea", "mu", "eta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class BitRegistry:
    """Dense bit-index to meaning mapping for one build."""

    entries: tuple[tuple, ...]

    @property
    def n(self) -> int:
        return len(self.entries)

    def unit_bits(self) -> dict[tuple[int, int], int]:
        return {
            (m[1], m[2]): idx for idx, m in enumerate(self.entries) if m[0] == "u"
        }

    def label(self, idx: int) -> str:
        return format_meaning(self.entries[idx])


def format_meaning(meaning: tuple) -> str:
    parts = [meaning[0]] + ["all" if v is None else str(v) for v in meaning[1:]]
    return ":".join(parts)


def parse_meaning(label: str) -> tuple:
    parts = label.split(":")
    kind = parts[0]
    vals = [None if p == "all" else int(p) for p in parts[1:]]
    return tuple([kind] + vals)


@dataclass(frozen=True)
class PenaltyGroup:
    """One squared penalty weight*(const + sum coeff_b x_b)^2."""

    kind: str  # "min_on" | "min_off" | "feas"
    key: tuple
    weight: float
    scale: float  # feasibility-cut quantization scale; 1.0 = exact
    const: float
    coeffs: tuple[tuple[int, float], ...]
    slack_bits: tuple[int, ...]

    def expression(self, x) -> float:
        return self.const + sum(c * x[b] for b, c in self.coeffs)


@dataclass(frozen=True)
class ProductGadget:
    """Rosenberg consistency penalty tying w to the product a*b."""

    w: int
    a: int
    b: int
    weight: float

    def energy(self, x) -> float:
        return self.weight * (
            3 * x[self.w] + x[self.a] * x[self.b] - 2 * x[self.w] * (x[self.a] + x[self.b])
        )


@dataclass(frozen=True)
class QuboProblem:
    """Upper-triangular coefficient map over registered bits.

    energy(x) = sum_{i<=j} q[i,j] x_i x_j + offset. groups and gadgets
    retain the penalty structure so residuals can be told apart from the
    objective part of the energy.
    """

    n: int
    q: dict[tuple[int, int], float]
    offset: float
    registry: BitRegistry
    groups: tuple[PenaltyGroup, ...] = ()
    gadgets: tuple[ProductGadget, ...] = ()


def qubo_energy(problem: QuboProblem, x) -> float:
    if len(x) != problem.n:
        raise LengthMismatchError(f"assignment length {len(x)} != {problem.n} bits")
    e = problem.offset
    for (i, j), v in problem.q.items():
        e += v * x[i] * x[j]
    return float(e)


def penalty_energy(problem: QuboProblem, x) -> float:
    """The constraint-penalty part of the energy (zero iff feasible)."""
    if len(x) != problem.n:
        raise LengthMismatchError(f"assignment length {len(x)} != {problem.n} bits")
    e = 0.0
    for g in problem.groups:
        expr = g.expression(x)
        e += g.weight * expr * expr
    for gd in problem.gadgets:
        e += gd.energy(x)
    return float(e)


def slack_bits(range_max: int) -> int:
    """Bits needed for an integer slack in [0, range_max]."""
    if range_max < 0:
        raise NegativeRangeError(f"slack range {range_max} < 0")
    if range_max == 0:
        return 0
    return math.ceil(math.log2(range_max + 1))


def _history_state(init_on: bool, init_duration: int, j: int) -> int:
    """On/off state at pre-horizon hour j (j < 0; j = -1 is the last hour
    before the horizon). The initial run occupies init_duration hours;
    anything earlier is the complementary state."""
    in_run = -j <= init_duration
    return int(init_on if in_run else not init_on)


class _Builder:
    def __init__(self):
        self.meanings: list[tuple] = []
        self.q: dict[tuple[int, int], float] = {}
        self.offset = 0.0
        self.groups: list[PenaltyGroup] = []
        self.gadgets: list[ProductGadget] = []

    def new_bit(self, meaning: tuple) -> int:
        self.meanings.append(meaning)
        return len(self.meanings) - 1

    def add_q(self, i: int, j: int, v: float):
        if v == 0.0:
            return
        key = (i, j) if i <= j else (j, i)
        self.q[key] = self.q.get(key, 0.0) + v

    def add_squared(self, coeffs: dict[int, float], const: float, weight: float):
        items = sorted(coeffs.items())
        self.offset += weight * const * const
        for k, (b, cb) in enumerate(items):
            self.add_q(b, b, weight * (cb * cb + 2.0 * const * cb))
            for b2, cb2 in items[k + 1 :]:
                self.add_q(b, b2, weight * 2.0 * cb * cb2)

    def add_gadget(self, w: int, a: int, b: int, weight: float):
        self.add_q(w, w, 3.0 * weight)
        self.add_q(a, b, weight)
        self.add_q(w, a, -2.0 * weight)
        self.add_q(w, b, -2.0 * weight)
        self.gadgets.append(ProductGadget(w, a, b, weight))


def _quantize_feas_cut(cut) -> tuple[np.ndarray, float, float]:
    """Map a feasibility cut onto the integer lattice.

    Returns (integer coefficient matrix, integer constant, scale). Raises
    UnsatisfiableCutError when no schedule can satisfy the cut.
    """
    f = np.asarray(cut.f, dtype=float)
    c = float(cut.c)
    range_real = -c + float(np.maximum(-f, 0.0).sum())
    if range_real < -_INT_EPS:
        raise UnsatisfiableCutError(cut.iter, cut.t)
    integral = abs(c - round(c)) <= _INT_EPS and np.all(np.abs(f - np.round(f)) <= _INT_EPS)
    if integral:
        scale = 1.0
    else:
        scale = ((1 << QUANT_BITS) - 1) / max(range_real, _INT_EPS)
    fq = np.round(f * scale)
    cq = float(round(c * scale))
    if -cq + float(np.maximum(-fq, 0.0).sum()) < 0:
        raise UnsatisfiableCutError(cut.iter, cut.t, "cut unsatisfiable after quantization")
    return fq, cq, scale


def _hobj_mass(pool: CutPool, ub: float, mu: float, eta: float) -> float:
    """Total |coefficient| mass of H_obj: an upper bound on how much the
    objective part can differ between any two assignments."""
    mass = 0.0
    for cut in pool.optimality:
        dev = cut.constant - ub
        absf = np.abs(cut.f[cut.f != 0.0])
        mass += float(np.sum(absf * abs(1.0 + 2.0 * mu * dev)))
        mass += eta * float(absf.sum()) ** 2
    return mass


def default_penalty_config(pool: CutPool, ub: float) -> PenaltyConfig:
    """Per-build defaults: mu = eta = 1/(|ub|+1); penalty weights ten
    times the largest possible H_obj swing, so that violating a single
    (integer) penalty unit can never pay for itself."""
    mu = 1.0 / (abs(ub) + 1.0) if math.isfinite(ub) else 1.0
    eta = mu
    xi = 10.0 * (_hobj_mass(pool, ub, mu, eta) + 1.0)
    return PenaltyConfig(xi_on=xi, xi_off=xi, xi_fea=xi, mu=mu, eta=eta)


def build_qubo(
    pool: CutPool, inst_or_model, cfg: PenaltyConfig | None, ub: float
) -> QuboProblem:
    """Compile the current master problem into a QuboProblem.

    ub is the incumbent upper bound and must be finite whenever the
    optimality pool is non-empty (it shapes H_obj). cfg = None recomputes
    the default penalties for this build.
    """
    model = as_commitment_model(inst_or_model)
    I, T = model.n_units, model.horizon_t
    if I == 0 or T == 0:
        raise EmptyInstanceError("cannot build a QUBO over zero bits")
    if pool.optimality and not math.isfinite(ub):
        raise ValueError("finite upper bound required once optimality cuts exist")
    if cfg is None:
        cfg = default_penalty_config(pool, ub)

    b = _Builder()
    ubit = {}
    for i in range(I):
        for t in range(T):
            ubit[(i, t)] = b.new_bit(("u", i, t))

    # H_obj: optimality cuts as shaped linear + quadratic coefficients
    for cut in pool.optimality:
        dev = cut.constant - ub
        nz = [
            (ubit[(i, t)], float(cut.f[i, t]))
            for i in range(I)
            for t in range(T)
            if cut.f[i, t] != 0.0
        ]
        for bit, coeff in nz:
            b.add_q(bit, bit, coeff * (1.0 + 2.0 * cfg.mu * dev))
            b.add_q(bit, bit, cfg.eta * coeff * coeff)
        for k, (b1, c1) in enumerate(nz):
            for b2, c2 in nz[k + 1 :]:
                b.add_q(b1, b2, 2.0 * cfg.eta * c1 * c2)

    # H_time: minimum on/off penalties at in-horizon transitions
    for i in range(I):
        t_on, t_off = model.t_on[i], model.t_off[i]
        if t_on <= 1 and t_off <= 1:
            continue
        for t in range(1, T):
            need_on = t_on > 1
            need_off = t_off > 1
            w = b.new_bit(("pair", i, t))
            gadget_weight = cfg.xi_on if need_on else cfg.xi_off
            b.add_gadget(w, ubit[(i, t - 1)], ubit[(i, t)], gadget_weight)
            if need_on:
                _add_min_time_group(
                    b, model, ubit, i, t, w, on_side=True, weight=cfg.xi_on
                )
            if need_off:
                _add_min_time_group(
                    b, model, ubit, i, t, w, on_side=False, weight=cfg.xi_off
                )

    # H_feas: squared feasibility cuts with binary slack
    for cut in pool.feasibility:
        fq, cq, scale = _quantize_feas_cut(cut)
        rng = int(-cq + np.maximum(-fq, 0.0).sum())
        k_bits = slack_bits(rng)
        sbits = tuple(
            b.new_bit(("sfea", cut.iter, cut.t, k)) for k in range(k_bits)
        )
        coeffs: dict[int, float] = {}
        for i in range(I):
            for t in range(T):
                if fq[i, t] != 0.0:
                    coeffs[ubit[(i, t)]] = float(fq[i, t])
        for k, sb in enumerate(sbits):
            coeffs[sb] = float(1 << k)
        b.add_squared(coeffs, cq, cfg.xi_fea)
        b.groups.append(
            PenaltyGroup(
                kind="feas",
                key=(cut.iter, cut.t),
                weight=cfg.xi_fea,
                scale=scale,
                const=cq,
                coeffs=tuple(sorted(coeffs.items())),
                slack_bits=sbits,
            )
        )

    registry = BitRegistry(entries=tuple(b.meanings))
    return QuboProblem(
        n=registry.n,
        q=b.q,
        offset=b.offset,
        registry=registry,
        groups=tuple(b.groups),
        gadgets=tuple(b.gadgets),
    )


def _add_min_time_group(b, model, ubit, i, t, w, on_side: bool, weight: float):
    """Squared penalty for one minimum on/off constraint at transition t.

    on_side: T_on u[t-1](1-u[t]) <= sum of window states, window being the
    t_on hours ending at t-1; with w = u[t-1] u[t] the trigger becomes
    T_on (u[t-1] - w). The off side mirrors it with complemented states.
    """
    t_min = model.t_on[i] if on_side else model.t_off[i]
    coeffs: dict[int, float] = {}
    const = 0.0
    trigger_bit = ubit[(i, t - 1)] if on_side else ubit[(i, t)]
    coeffs[trigger_bit] = coeffs.get(trigger_bit, 0.0) + float(t_min)
    coeffs[w] = coeffs.get(w, 0.0) - float(t_min)
    hist_room = 0
    for j in range(t - t_min, t):
        if j >= 0:
            bit = ubit[(i, j)]
            delta = -1.0 if on_side else 1.0
            coeffs[bit] = coeffs.get(bit, 0.0) + delta
            if not on_side:
                const -= 1.0  # from the (1 - u_j) terms
            hist_room += 1
        else:
            state = _history_state(model.init_on[i], model.init_duration[i], j)
            occupied = state if on_side else 1 - state
            const -= float(occupied)
            hist_room += occupied
    coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
    k_bits = slack_bits(hist_room)
    kind = "son" if on_side else "soff"
    sbits = tuple(b.new_bit((kind, i, t, k)) for k in range(k_bits))
    for k, sb in enumerate(sbits):
        coeffs[sb] = float(1 << k)
    b.add_squared(coeffs, const, weight)
    b.groups.append(
        PenaltyGroup(
            kind="min_on" if on_side else "min_off",
            key=(i, t),
            weight=weight,
            scale=1.0,
            const=const,
            coeffs=tuple(sorted(coeffs.items())),
            slack_bits=sbits,
        )
    )


def decode(x, registry: BitRegistry) -> tuple[Schedule, dict]:
    """Split an assignment into the schedule and per-group slack values."""
    if len(x) != registry.n:
        raise LengthMismatchError(f"assignment length {len(x)} != {registry.n} bits")
    unit_bits = [(m[1], m[2], idx) for idx, m in enumerate(registry.entries) if m[0] == "u"]
    n_units = max(i for i, _, _ in unit_bits) + 1
    horizon = max(t for _, t, _ in unit_bits) + 1
    u = np.zeros((n_units, horizon), dtype=np.int8)
    for i, t, idx in unit_bits:
        u[i, t] = int(x[idx]) & 1
    slacks: dict[tuple, int] = {}
    for idx, m in enumerate(registry.entries):
        if m[0] in ("son", "soff", "sfea"):
            key = (m[0],) + tuple(m[1:-1])
            slacks[key] = slacks.get(key, 0) + (int(x[idx]) & 1) * (1 << m[-1])
    return Schedule(u), slacks


def encode_schedule(sched: Schedule, registry: BitRegistry) -> np.ndarray:
    """Assignment with the schedule's unit bits set and all others zero."""
    x = np.zeros(registry.n, dtype=np.int8)
    for (i, t), idx in registry.unit_bits().items():
        x[idx] = sched.u[i, t]
    return x


def lower_bound(sched: Schedule, pool: CutPool) -> float:
    """Best certified lower bound at a schedule: max over optimality cuts."""
    if not pool.optimality:
        raise EmptyPoolError("no optimality cuts to bound with")
    return max(eval_optimality_cut(cut, sched) for cut in pool.optimality)


# ---------------------------------------------------------------------------
# Dump format: "n offset" header, nonzero "i j q" lines (i <= j), then
# "bit meaning" registry lines. 17 significant digits throughout.

def dump_qubo(problem: QuboProblem) -> str:
    lines = [f"{problem.n} {problem.offset:.17g}"]
    for (i, j) in sorted(problem.q):
        lines.append(f"{i} {j} {problem.q[(i, j)]:.17g}")
    for idx in range(problem.n):
        lines.append(f"{idx} {problem.registry.label(idx)}")
    return "\n".join(lines) + "\n"


def parse_qubo(text: str) -> QuboProblem:
    """Parse a dump back into a QuboProblem (coefficients and registry
    only; penalty structure does not round-trip)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n_str, off_str = lines[0].split()
    n, offset = int(n_str), float(off_str)
    q: dict[tuple[int, int], float] = {}
    meanings: list[tuple | None] = [None] * n
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) == 3 and ":" not in parts[2]:
            q[(int(parts[0]), int(parts[1]))] = float(parts[2])
        elif len(parts) == 2:
            meanings[int(parts[0])] = parse_meaning(parts[1])
        else:
            raise ValueError(f"unparseable dump line: {ln!r}")
    if any(m is None for m in meanings):
        raise ValueError("registry lines missing from dump")
    return QuboProblem(n=n, q=q, offset=offset, registry=BitRegistry(tuple(meanings)))
