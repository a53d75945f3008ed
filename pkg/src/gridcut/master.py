"""Exact and heuristic solvers for the mixed-binary master problem.

The master minimizes Z subject to Z >= rhs_e(u) for every optimality cut,
all feasibility cuts <= 0, and minimum on/off times. Eliminating Z turns
it into min_u max_e rhs_e(u) over the constrained schedules, which at
desk scale is solved exactly by enumerating per-unit admissible rows
(minimum-time constraints are per unit, so filtering rows first prunes
most of the 2^(I*T) space) and scanning their cartesian product in
chunks. The heuristic alternative is multi-restart single-flip descent
with constraint violations folded in as a large finite penalty.

Determinism: candidates are scanned in lexicographic order of the
flattened schedule bits and strict improvement is required, so ties
resolve to the lexicographically smallest schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cuts import CutPool
from .errors import TooLargeError
from .model import CommitmentModel, Schedule, as_commitment_model, check_min_updown

FEAS_EPS = 1e-9
_CHUNK = 1 << 14


@dataclass(frozen=True)
class MasterSolution:
    u: Schedule | None
    z: float
    status: str  # "optimal" | "infeasible" | "stalled"


def admissible_rows(model: CommitmentModel, i: int) -> np.ndarray:
    """All minimum-time-feasible on/off rows for unit i, in lexicographic
    order, as an (n_rows, T) int8 matrix."""
    T = model.horizon_t
    single = CommitmentModel(
        horizon_t=T,
        t_on=(model.t_on[i],),
        t_off=(model.t_off[i],),
        init_on=(model.init_on[i],),
        init_duration=(model.init_duration[i],),
    )
    rows = []
    for code in range(1 << T):
        row = [(code >> (T - 1 - t)) & 1 for t in range(T)]
        if not check_min_updown(single, Schedule([row])):
            rows.append(row)
    return np.array(rows, dtype=np.int8)


def solve_master(pool: CutPool, inst_or_model, strategy: str = "exhaustive") -> MasterSolution:
    """Solve the current master problem.

    exhaustive is exact for I*T <= 24; local_search returns the best
    schedule found by penalized hill descent (status "stalled" when even
    the best violates a constraint).
    """
    model = as_commitment_model(inst_or_model)
    if strategy == "exhaustive":
        return _solve_exhaustive(pool, model)
    if strategy == "local_search":
        return _solve_local(pool, model)
    raise ValueError(f"unknown strategy {strategy!r}")


def _cut_arrays(pool: CutPool):
    fc = np.array([cut.f.ravel() for cut in pool.feasibility], dtype=float)
    fk = np.array([cut.c for cut in pool.feasibility], dtype=float)
    oc = np.array([cut.f.ravel() for cut in pool.optimality], dtype=float)
    ok = np.array([cut.constant for cut in pool.optimality], dtype=float)
    return fc, fk, oc, ok


def _solve_exhaustive(pool: CutPool, model: CommitmentModel) -> MasterSolution:
    I, T = model.n_units, model.horizon_t
    if I * T > 24:
        raise TooLargeError(f"exhaustive master limited to I*T <= 24, got {I * T}")
    unit_rows = [admissible_rows(model, i) for i in range(I)]
    counts = [len(r) for r in unit_rows]
    total = int(np.prod(counts, dtype=np.int64))
    if total == 0:
        return MasterSolution(None, float("inf"), "infeasible")
    fc, fk, oc, ok = _cut_arrays(pool)

    best_z = np.inf
    best_u = None
    found = False
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        lin = np.arange(lo, hi)
        # C-order unravel keeps the scan in full-lex schedule order
        choices = np.array(np.unravel_index(lin, counts))
        u = np.empty((hi - lo, I * T))
        for i in range(I):
            u[:, i * T : (i + 1) * T] = unit_rows[i][choices[i]]
        feas = np.ones(hi - lo, dtype=bool)
        if len(fc):
            feas = (u @ fc.T + fk <= FEAS_EPS).all(axis=1)
        if not feas.any():
            continue
        if len(oc):
            z = (u @ oc.T + ok).max(axis=1)
        else:
            z = np.full(hi - lo, -np.inf)
        z = np.where(feas, z, np.inf)
        k = int(np.argmin(z))
        if feas[k] and (not found or z[k] < best_z):
            best_z = float(z[k])
            best_u = u[k].astype(np.int8).reshape(I, T)
            found = True
        if found and not len(oc):
            break  # any feasible schedule ties at -inf; first is lex-min
    if not found:
        return MasterSolution(None, float("inf"), "infeasible")
    return MasterSolution(Schedule(best_u), best_z, "optimal")


def _solve_local(
    pool: CutPool, model: CommitmentModel, restarts: int = 32, seed: int = 0
) -> MasterSolution:
    I, T = model.n_units, model.horizon_t
    fc, fk, oc, ok = _cut_arrays(pool)
    constants = [abs(c.constant) for c in pool.optimality] + [abs(c.c) for c in pool.feasibility]
    penalty = 1e6 * max(constants, default=1.0)

    def score(flat: np.ndarray) -> float:
        z = float((oc @ flat + ok).max()) if len(oc) else 0.0
        bad = 0.0
        if len(fc):
            v = fc @ flat + fk
            bad += float(np.maximum(v, 0.0).sum())
        viols = len(check_min_updown(model, Schedule(flat.reshape(I, T))))
        return z + penalty * (bad + viols)

    def violates(flat: np.ndarray) -> bool:
        if len(fc) and (fc @ flat + fk > FEAS_EPS).any():
            return True
        return bool(check_min_updown(model, Schedule(flat.reshape(I, T))))

    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        flat = rng.integers(0, 2, size=I * T).astype(float)
        cur = score(flat)
        improved = True
        while improved:
            improved = False
            for k in range(I * T):
                flat[k] = 1.0 - flat[k]
                cand = score(flat)
                if cand < cur - 1e-12:
                    cur = cand
                    improved = True
                else:
                    flat[k] = 1.0 - flat[k]
        key = (cur, tuple(int(x) for x in flat))
        if best is None or key < best[0]:
            best = (key, flat.copy())
    flat = best[1]
    u = Schedule(flat.astype(np.int8).reshape(I, T))
    if violates(flat):
        return MasterSolution(u, float("inf"), "stalled")
    z = float((oc @ flat + ok).max()) if len(oc) else -np.inf
    return MasterSolution(u, z, "optimal")
