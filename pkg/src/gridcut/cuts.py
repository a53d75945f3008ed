"""Benders cutting planes built from dispatch duals.

An optimality cut is an affine under-estimator of the dispatch value in
the schedule bits, tight at the schedule that produced it:

    value(u) >= c_value + c_demand + sum_{i,t} f[i,t] u[i,t],
    f[i,t]   = c_i + d_i + m[i,t] p_min_i - n[i,t] p_max_i,
    c_value  = sum_{i,t} [(b_i - m + n) p[i,t] + a_i p[i,t]^2],
    c_demand = sum_mg sum_t l_t (D_t - sum_i p[i,t]).

The gated constants c_i + d_i ride in the u coefficient so that the cut
matches the gated cost model exactly (off units contribute nothing); the
two dual constants come from Lagrangian bookkeeping and are zero under
exact complementary slackness.

A feasibility cut certifies that a schedule cannot cover demand:

    0 >= c + sum_i f[i] u[i,t],
    f[i] = m[i,t] p_min_i - n[i,t] p_max_i,
    c    = sum_i (n - m) p[i,t] + l_t (D_t - sum_i p[i,t]),

evaluated per period (multi mode, one cut per violated t, duals summed
across microgrids) or summed over all periods (single mode). Evaluating a
feasibility cut at its generating schedule recovers the total slack, so
every emitted cut strictly excludes its generator, and weak duality on
the slack program guarantees no schedule with feasible subproblems is
ever excluded.

Cuts are the only data crossing the microgrid-to-operator boundary; the
wire records below carry coefficients and constants, never raw unit
parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dispatch import DispatchResult, FeasibilityResult
from .errors import DimensionMismatchError, MixedStatusError, NoViolationError
from .model import Instance, Schedule

VIOLATION_EPS = 1e-9


@dataclass(frozen=True)
class OptimalityCut:
    """Lower bound on dispatch cost as an affine function of the schedule."""

    iter: int
    f: np.ndarray  # (I, T) coefficient of u
    c_value: float
    c_demand: float

    @property
    def constant(self) -> float:
        return self.c_value + self.c_demand


@dataclass(frozen=True)
class FeasibilityCut:
    """Affine inequality c + <f, u> <= 0 excluding capacity-short schedules.

    t is the covered time separation, or None for a cut aggregated over
    the whole horizon. f is always a full (I, T) matrix, zero outside the
    cut's scope.
    """

    iter: int
    t: int | None
    f: np.ndarray
    c: float


@dataclass
class CutPool:
    """All cutting planes exchanged so far, in generation order."""

    optimality: list[OptimalityCut] = field(default_factory=list)
    feasibility: list[FeasibilityCut] = field(default_factory=list)

    def add_optimality(self, cut: OptimalityCut) -> None:
        if self.optimality and cut.iter < self.optimality[-1].iter:
            raise ValueError("cut iteration indices must be non-decreasing")
        self.optimality.append(cut)

    def add_feasibility(self, cut: FeasibilityCut) -> None:
        if self.feasibility and cut.iter < self.feasibility[-1].iter:
            raise ValueError("cut iteration indices must be non-decreasing")
        if any(c.iter == cut.iter and c.t == cut.t for c in self.feasibility):
            raise ValueError(f"duplicate feasibility cut key (iter={cut.iter}, t={cut.t})")
        self.feasibility.append(cut)


def build_optimality_cut(
    results: list[DispatchResult], inst: Instance, e: int
) -> OptimalityCut:
    """Assemble the iteration-e optimality cut from per-microgrid solves."""
    if len(results) != len(inst.microgrids):
        raise DimensionMismatchError("one DispatchResult per microgrid required")
    if any(r.status != "optimal" for r in results):
        raise MixedStatusError("optimality cut requires every microgrid optimal")
    n_units, horizon = inst.n_units, inst.horizon_t
    f = np.zeros((n_units, horizon))
    c_value = 0.0
    c_demand = 0.0
    for k, (mg, res) in enumerate(zip(inst.microgrids, results)):
        rows = inst.mg_slice(k)
        start = rows.start
        for j, unit in enumerate(mg.units):
            i = start + j
            for t in range(horizon):
                m = res.duals.lower[j, t]
                n = res.duals.upper[j, t]
                p = res.p[j, t]
                f[i, t] = unit.c + unit.d + m * unit.p_min - n * unit.p_max
                c_value += (unit.b - m + n) * p + unit.a * p * p
        supplied = res.p.sum(axis=0)
        for t in range(horizon):
            c_demand += res.duals.demand[t] * (mg.demand[t] - supplied[t])
    f.setflags(write=False)
    return OptimalityCut(iter=e, f=f, c_value=float(c_value), c_demand=float(c_demand))


def build_feasibility_cuts(
    results: list[FeasibilityResult | None],
    inst: Instance,
    e: int,
    mode: str = "multi",
) -> list[FeasibilityCut]:
    """Feasibility cuts from the slack solves of this iteration.

    results is aligned with inst.microgrids; entries are None for
    microgrids that did not run the slack relaxation (their contribution
    is zero). mode "multi" emits one cut per violated period, "single"
    one cut summing every period.
    """
    if mode not in ("multi", "single"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(results) != len(inst.microgrids):
        raise DimensionMismatchError("one entry per microgrid required")
    n_units, horizon = inst.n_units, inst.horizon_t
    f_t = np.zeros((horizon, n_units))
    c_t = np.zeros(horizon)
    total_slack = 0.0
    for k, (mg, res) in enumerate(zip(inst.microgrids, results)):
        if res is None:
            continue
        total_slack += res.objective
        start = inst.mg_slice(k).start
        supplied = res.p.sum(axis=0)
        for t in range(horizon):
            l = res.duals.demand[t]
            c_t[t] += l * (mg.demand[t] - supplied[t])
            for j, unit in enumerate(mg.units):
                m = res.duals.lower[j, t]
                n = res.duals.upper[j, t]
                f_t[t, start + j] += m * unit.p_min - n * unit.p_max
                c_t[t] += (n - m) * res.p[j, t]
    if total_slack <= VIOLATION_EPS:
        raise NoViolationError("no slack anywhere; feasibility cuts are undefined")

    cuts: list[FeasibilityCut] = []
    if mode == "single":
        f = np.zeros((n_units, horizon))
        for t in range(horizon):
            f[:, t] = f_t[t]
        f.setflags(write=False)
        cuts.append(FeasibilityCut(iter=e, t=None, f=f, c=float(c_t.sum())))
    else:
        for t in range(horizon):
            # a period only yields a cut when it actually cuts something off
            period_slack = sum(res.slack[t] for res in results if res is not None)
            if period_slack <= VIOLATION_EPS:
                continue
            f = np.zeros((n_units, horizon))
            f[:, t] = f_t[t]
            f.setflags(write=False)
            cuts.append(FeasibilityCut(iter=e, t=t, f=f, c=float(c_t[t])))
    return cuts


def eval_optimality_cut(cut: OptimalityCut, sched: Schedule) -> float:
    """Cut right-hand side at a schedule: the lower bound it certifies."""
    if cut.f.shape != sched.u.shape:
        raise DimensionMismatchError(
            f"cut shape {cut.f.shape} != schedule shape {sched.u.shape}"
        )
    return float(cut.constant + np.sum(cut.f * sched.u))


def eval_feasibility_cut(cut: FeasibilityCut, sched: Schedule) -> float:
    """Cut value at a schedule; the schedule is admissible iff <= 0."""
    if cut.f.shape != sched.u.shape:
        raise DimensionMismatchError(
            f"cut shape {cut.f.shape} != schedule shape {sched.u.shape}"
        )
    return float(cut.c + np.sum(cut.f * sched.u))


# ---------------------------------------------------------------------------
# Wire format: one JSON record per line, carrying only derived coefficients.

def cut_to_wire(cut) -> str:
    if isinstance(cut, OptimalityCut):
        rec = {
            "kind": "opt",
            "iter": cut.iter,
            "constants": {"c_value": cut.c_value, "c_demand": cut.c_demand},
            "coeffs": _nonzero_coeffs(cut.f),
        }
    elif isinstance(cut, FeasibilityCut):
        rec = {
            "kind": "feas",
            "iter": cut.iter,
            "t": cut.t,
            "constants": {"c": cut.c},
            "coeffs": _nonzero_coeffs(cut.f),
        }
    else:
        raise TypeError(f"not a cut: {type(cut).__name__}")
    return json.dumps(rec, sort_keys=True)


def cut_from_wire(line: str, n_units: int, horizon_t: int):
    rec = json.loads(line)
    f = np.zeros((n_units, horizon_t))
    for i, t, v in rec["coeffs"]:
        f[i, t] = v
    f.setflags(write=False)
    if rec["kind"] == "opt":
        return OptimalityCut(
            iter=rec["iter"],
            f=f,
            c_value=rec["constants"]["c_value"],
            c_demand=rec["constants"]["c_demand"],
        )
    if rec["kind"] == "feas":
        return FeasibilityCut(iter=rec["iter"], t=rec["t"], f=f, c=rec["constants"]["c"])
    raise ValueError(f"unknown cut kind {rec['kind']!r}")


def _nonzero_coeffs(f: np.ndarray) -> list[list]:
    out = []
    n_units, horizon = f.shape
    for i in range(n_units):
        for t in range(horizon):
            if f[i, t] != 0.0:
                out.append([i, t, float(f[i, t])])
    return out
