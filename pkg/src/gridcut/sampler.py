"""QUBO solvers: exhaustive enumeration, simulated annealing, Ising form.

Both built-ins satisfy the sampler contract (anything mapping a
QuboProblem to a SampleSet), which is also what an out-of-process
annealer adapter would implement: the request is the QUBO dump plus
num_reads / time_budget_ms, the response one "energy multiplicity
bitstring" line per sample.

The spin convention is x = (1 - s) / 2, so the all-up spin state maps to
the all-zero bit state and QUBO and Ising energies agree assignment by
assignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import TooLargeError
from .qubo import QuboProblem, qubo_energy

@dataclass(frozen=True)
class IsingProblem:
    h: np.ndarray
    j: dict[tuple[int, int], float]
    offset: float


@dataclass(frozen=True)
class SamplerParams:
    """Simulated-annealing budget. sweeps = None means 100 * n."""

    sweeps: int | None = None
    restarts: int = 10
    beta_start: float = 0.1
    beta_end: float = 10.0
    geometric: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.sweeps is not None and self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not (0 < self.beta_start < self.beta_end):
            raise ValueError("need 0 < beta_start < beta_end")


@dataclass(frozen=True)
class Sample:
    x: tuple[int, ...]
    energy: float
    multiplicity: int = 1


@dataclass(frozen=True)
class SampleSet:
    samples: tuple[Sample, ...]
    best: int

    @property
    def best_sample(self) -> Sample:
        return self.samples[self.best]


def _make_sample_set(raw: list[tuple[tuple[int, ...], float]]) -> SampleSet:
    merged: dict[tuple[int, ...], list] = {}
    for x, e in raw:
        if x in merged:
            merged[x][1] += 1
        else:
            merged[x] = [e, 1]
    ordered = sorted(merged.items(), key=lambda kv: (kv[1][0], kv[0]))
    samples = tuple(Sample(x, e, mult) for x, (e, mult) in ordered)
    return SampleSet(samples=samples, best=0)


def to_ising(problem: QuboProblem) -> IsingProblem:
    """Substitute x_i = (1 - s_i)/2 and collect fields h, couplings j."""
    h = np.zeros(problem.n)
    j: dict[tuple[int, int], float] = {}
    offset = problem.offset
    for (a, b), v in problem.q.items():
        if a == b:
            offset += v / 2.0
            h[a] -= v / 2.0
        else:
            offset += v / 4.0
            h[a] -= v / 4.0
            h[b] -= v / 4.0
            j[(a, b)] = j.get((a, b), 0.0) + v / 4.0
    h.setflags(write=False)
    return IsingProblem(h=h, j=j, offset=offset)


def ising_energy(problem: IsingProblem, s) -> float:
    e = problem.offset + float(np.dot(problem.h, s))
    for (a, b), v in problem.j.items():
        e += v * s[a] * s[b]
    return float(e)


def _dense(problem: QuboProblem) -> np.ndarray:
    Q = np.zeros((problem.n, problem.n))
    for (i, j), v in problem.q.items():
        Q[i, j] = v
    return Q


def bit_patterns(n: int, lo: int, hi: int) -> np.ndarray:
    """Rows lo..hi-1 of the full assignment table, in lexicographic order
    of the bit tuple (bit 0 is the most significant)."""
    codes = np.arange(lo, hi, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(float)


def solve_exhaustive(problem: QuboProblem) -> SampleSet:
    """Global minimum by full enumeration; ties break to the
    lexicographically smallest assignment. Limited to n <= 24.

    The energy table is built blockwise: with bits split into a high and
    a low half, E = E_hi + E_lo + x_hi^T C x_lo, so the full table is two
    small scans plus one dense matmul instead of 2^n row evaluations.
    """
    n = problem.n
    if n > 24:
        raise TooLargeError(f"exhaustive solve limited to 24 bits, got {n}")
    if n == 0:
        return SampleSet(samples=(Sample((), problem.offset, 1),), best=0)
    Q = _dense(problem)
    n1 = (n + 1) // 2
    n2 = n - n1
    X1 = bit_patterns(n1, 0, 1 << n1)
    E1 = np.einsum("ij,ij->i", X1 @ Q[:n1, :n1], X1)
    if n2:
        X2 = bit_patterns(n2, 0, 1 << n2)
        E2 = np.einsum("ij,ij->i", X2 @ Q[n1:, n1:], X2)
        table = (X1 @ Q[:n1, n1:]) @ X2.T
        table += E1[:, None]
        table += E2[None, :]
    else:
        table = E1[:, None]
    # C-order argmin = first occurrence = lexicographically smallest
    flat = int(np.argmin(table))
    hi_code, lo_code = divmod(flat, table.shape[1])
    code = (hi_code << n2) | lo_code
    best_x = tuple((code >> (n - 1 - i)) & 1 for i in range(n))
    best_e = qubo_energy(problem, best_x)
    return SampleSet(samples=(Sample(best_x, best_e, 1),), best=0)


class _RepairPlan:
    """Move structure for annealing a penalty-compiled problem.

    Primary bits are flipped by the walk; product and slack bits are
    dependent and get repaired to their optimal-for-the-move values, so
    the walk explores the manifold that contains every zero-penalty
    assignment instead of fighting broken auxiliaries. Problems without
    penalty structure have every bit primary and no repairs.
    """

    def __init__(self, problem: QuboProblem):
        n = problem.n
        aux = set()
        for gd in problem.gadgets:
            aux.add(gd.w)
        for g in problem.groups:
            aux.update(g.slack_bits)
        self.primaries = [i for i in range(n) if i not in aux]
        self.gadgets_by_bit: dict[int, list] = {}
        for gd in problem.gadgets:
            self.gadgets_by_bit.setdefault(gd.a, []).append(gd)
            self.gadgets_by_bit.setdefault(gd.b, []).append(gd)
        self.groups_by_bit: dict[int, list] = {}
        for g in problem.groups:
            slack = set(g.slack_bits)
            for b, _ in g.coeffs:
                if b not in slack:
                    self.groups_by_bit.setdefault(b, []).append(g)

    def repairs(self, x: np.ndarray, flipped: int) -> list[int]:
        """Aux bits to flip after a primary flip, in dependency order."""
        out = []
        groups = list(self.groups_by_bit.get(flipped, ()))
        for gd in self.gadgets_by_bit.get(flipped, ()):
            target = x[gd.a] * x[gd.b]
            if x[gd.w] != target:
                out.append(gd.w)
                x[gd.w] = target
                groups.extend(self.groups_by_bit.get(gd.w, ()))
        seen = set()
        for g in groups:
            if id(g) in seen or not g.slack_bits:
                continue
            seen.add(id(g))
            slack_set = set(g.slack_bits)
            needed = -(g.const + sum(c * x[b] for b, c in g.coeffs if b not in slack_set))
            top = (1 << len(g.slack_bits)) - 1
            value = min(max(int(round(needed)), 0), top)
            for k, bit in enumerate(g.slack_bits):
                want = float((value >> k) & 1)
                if x[bit] != want:
                    out.append(bit)
                    x[bit] = want
        # callers apply the flips themselves; undo the trial mutation
        for bit in reversed(out):
            x[bit] = 1.0 - x[bit]
        return out


def solve_sa(problem: QuboProblem, params: SamplerParams) -> SampleSet:
    """Metropolis annealing over a geometric beta ladder.

    Deterministic for a fixed (problem, params): restart r draws from its
    own generator seeded with seed XOR r, and the merged result does not
    depend on restart execution order.

    Two scale adaptions keep the configured schedule meaningful across
    problem kinds: betas apply to the coefficient-normalized landscape
    (energies divided by the largest |coefficient|), and on problems
    carrying penalty structure each move is a primary-bit flip plus the
    implied auxiliary repairs, accepted or rejected as one unit.
    Reported energies are in original units.
    """
    n = problem.n
    if n == 0:
        return SampleSet(samples=(Sample((), problem.offset, 1),), best=0)
    sweeps = params.sweeps if params.sweeps is not None else 100 * n
    Q = _dense(problem)
    # normalize by the smallest penalty quantum when there is penalty
    # structure (one constraint-violation unit maps to |delta| = 1), by
    # the largest coefficient otherwise
    weights = [g.weight for g in problem.groups] + [gd.weight for gd in problem.gadgets]
    scale = min(weights) if weights else float(np.abs(Q).max())
    if scale > 0:
        Q = Q / scale
    W = Q + Q.T
    np.fill_diagonal(W, 0.0)
    lin = np.diag(Q).copy()
    betas = np.geomspace(params.beta_start, params.beta_end, num=sweeps)
    plan = _RepairPlan(problem)
    order = plan.primaries

    def normalized_energy(x_vec) -> float:
        return float(x_vec @ lin + 0.5 * x_vec @ (W @ x_vec))

    raw: list[tuple[tuple[int, ...], float]] = []
    for r in range(params.restarts):
        rng = np.random.default_rng((int(params.seed) & (2**64 - 1)) ^ r)
        x = rng.integers(0, 2, size=n).astype(float)
        _align_auxiliaries(problem, x)
        field = lin + W @ x
        energy = normalized_energy(x)
        best_e, best_x = energy, x.copy()

        def flip(bit):
            nonlocal energy, field
            delta = (1.0 - 2.0 * x[bit]) * field[bit]
            sign = 1.0 - 2.0 * x[bit]
            x[bit] = 1.0 - x[bit]
            field += W[bit] * sign
            energy += delta
            return delta

        for beta in betas:
            thresholds = rng.random(len(order))
            for pos, i in enumerate(order):
                before = energy
                moves = [i]
                flip(i)
                for bit in plan.repairs(x, i):
                    moves.append(bit)
                    flip(bit)
                delta = energy - before
                if delta <= 0.0 or thresholds[pos] < np.exp(-beta * delta):
                    if energy < best_e:
                        best_e = energy
                        best_x = x.copy()
                else:
                    for bit in reversed(moves):
                        flip(bit)
        # incremental bookkeeping must agree with a full recomputation
        full = normalized_energy(x)
        if abs(full - energy) > 1e-6 * max(1.0, abs(full)):
            raise AssertionError(
                f"incremental energy drifted: {energy} vs recomputed {full}"
            )
        bits = tuple(int(v) for v in best_x)
        raw.append((bits, qubo_energy(problem, bits)))
    return _make_sample_set(raw)


def _align_auxiliaries(problem: QuboProblem, x: np.ndarray) -> None:
    """Overwrite product and slack bits so they are consistent with the
    (random) primary bits: product bits take their defining product and
    each penalty group's slack bits take the clamped slack its primary
    part calls for. Starting restarts on this manifold makes squared
    penalties guide the search instead of drowning it."""
    for gd in problem.gadgets:
        x[gd.w] = x[gd.a] * x[gd.b]
    for g in problem.groups:
        if not g.slack_bits:
            continue
        slack_set = set(g.slack_bits)
        needed = -(g.const + sum(c * x[b] for b, c in g.coeffs if b not in slack_set))
        top = (1 << len(g.slack_bits)) - 1
        value = min(max(int(round(needed)), 0), top)
        for k, bit in enumerate(g.slack_bits):
            x[bit] = float((value >> k) & 1)


class QuboSampler(Protocol):
    """Anything that maps a QuboProblem to a SampleSet."""

    def sample(self, problem: QuboProblem) -> SampleSet: ...


@dataclass(frozen=True)
class ExhaustiveSampler:
    def sample(self, problem: QuboProblem) -> SampleSet:
        return solve_exhaustive(problem)


@dataclass(frozen=True)
class AnnealSampler:
    params: SamplerParams = SamplerParams()

    def sample(self, problem: QuboProblem) -> SampleSet:
        return solve_sa(problem, self.params)


# ---------------------------------------------------------------------------
# Remote-adapter wire contract (transport is the adapter's concern).

def format_sampler_request(problem: QuboProblem, num_reads: int, time_budget_ms: int) -> str:
    from .qubo import dump_qubo

    return f"num_reads={num_reads} time_budget_ms={time_budget_ms}\n" + dump_qubo(problem)


def parse_sampler_response(text: str, problem: QuboProblem) -> SampleSet:
    """Parse "energy multiplicity bitstring" lines; energies are
    recomputed locally and must agree to 1e-6."""
    raw: list[tuple[tuple[int, ...], float]] = []
    mults: dict[tuple[int, ...], int] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        e_str, mult_str, bits = line.split()
        x = tuple(int(ch) for ch in bits)
        if len(x) != problem.n:
            raise ValueError(f"bitstring length {len(x)} != {problem.n}")
        energy = qubo_energy(problem, x)
        if abs(energy - float(e_str)) > 1e-6 * max(1.0, abs(energy)):
            raise ValueError(f"reported energy {e_str} does not match recomputed {energy}")
        mults[x] = mults.get(x, 0) + int(mult_str)
        raw.append((x, energy))
    merged = sorted(
        ((x, qubo_energy(problem, x), m) for x, m in mults.items()),
        key=lambda row: (row[1], row[0]),
    )
    samples = tuple(Sample(x, e, m) for x, e, m in merged)
    return SampleSet(samples=samples, best=0)
