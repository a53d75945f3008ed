"""Per-microgrid economic dispatch and its slack relaxation.

Given a fixed on/off schedule, each microgrid independently minimizes its
fuel cost subject to meeting local demand (over-generation allowed) and
gated output boxes. The problem separates over time, and each period is a
one-dimensional convex program solved by bisection on the demand
multiplier lam: every on unit's best response is

    p_i(lam) = clip((lam - b_i) / (2 a_i), [p_min_i, p_max_i]),

which is nondecreasing in lam, so the binding multiplier is found by
bisecting the aggregate response onto demand. Multipliers come out exact:
with the Lagrangian

    L = sum(a p^2 + b p) + lam (D - sum p) + sum m (p_min u - p)
        + sum n (p - p_max u),

stationarity 2 a p + b - lam - m + n = 0 pins m on lower-bounded units and
n on upper-bounded units. Units with a = 0 and b = lam have an interval of
best responses; residual demand is assigned to them in unit-index order so
results are deterministic.

When the schedule cannot cover demand, the slack-relaxed problem
minimizes sum_t s_t subject to sum_i p_i + s_t >= D_t over the same boxes.
Its optimum and duals are closed-form per period: with positive slack the
vertex p = p_max u, s = D - sum p_max u is optimal with l = 1, n = 1 on
every unit of the group and m = 0 (stationarity in p requires n - m = l
for all units, on or off); with zero slack all duals vanish.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvexUnitError, ToleranceTooTightError
from .model import Microgrid, Schedule

_LAMBDA_TOL = 1e-12
_BIND_TOL = 1e-9


@dataclass(frozen=True)
class DualBundle:
    """Lagrange multipliers of one microgrid's dispatch solve.

    demand: per-t multiplier of the demand constraint ($/MW)
    lower / upper: per-(unit, t) multipliers of the gated box bounds
    """

    demand: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class DispatchResult:
    status: str  # "optimal" | "infeasible"
    p: np.ndarray
    duals: DualBundle
    objective: float | None


@dataclass(frozen=True)
class FeasibilityResult:
    p: np.ndarray
    slack: np.ndarray
    duals: DualBundle
    objective: float


def _solve_period(units, on: np.ndarray, demand: float, tol: float):
    """One period of gated dispatch. Returns (p, lam, m, n) or None if the
    committed capacity cannot cover demand."""
    n_units = len(units)
    p = np.zeros(n_units)
    m = np.zeros(n_units)
    n = np.zeros(n_units)
    idx = [i for i in range(n_units) if on[i]]
    if not idx:
        if demand > tol:
            return None
        return p, 0.0, m, n

    a = np.array([units[i].a for i in idx])
    b = np.array([units[i].b for i in idx])
    lo = np.array([units[i].p_min for i in idx])
    hi = np.array([units[i].p_max for i in idx])
    if (a < 0).any():
        raise NonConvexUnitError("unit with a < 0 reached the dispatch solver")
    cap = hi.sum()
    if cap < demand - tol:
        return None
    demand = min(demand, cap)

    def response(lam: float) -> np.ndarray:
        # ties of a = 0 units resolve low; the interval is filled afterwards
        out = np.empty(len(idx))
        quad = a > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out[quad] = np.clip((lam - b[quad]) / (2.0 * a[quad]), lo[quad], hi[quad])
        lin = ~quad
        out[lin] = np.where(lam > b[lin], hi[lin], lo[lin])
        return out

    p_free = response(0.0)
    # a=0, b<0 units prefer their upper bound even without demand pressure
    lin_neg = (a == 0) & (b < 0)
    p_free[lin_neg] = hi[lin_neg]
    if p_free.sum() >= demand - tol:
        lam = 0.0
        p_on = p_free
    else:
        lam_lo = 0.0
        lam_hi = float(max(2.0 * a[k] * hi[k] + b[k] for k in range(len(idx)))) + 1.0
        if response(lam_hi).sum() < demand - tol:
            raise ToleranceTooTightError("bisection cannot bracket the demand multiplier")
        for _ in range(200):
            mid = 0.5 * (lam_lo + lam_hi)
            if response(mid).sum() >= demand:
                lam_hi = mid
            else:
                lam_lo = mid
            if lam_hi - lam_lo <= _LAMBDA_TOL * max(1.0, abs(lam_hi)):
                break
        lam = lam_hi
        p_on = response(lam)
        # marginal a=0 units have an interval of best responses; reset
        # them to their lower bound and fill the residual in unit order
        marginal = [k for k in range(len(idx)) if a[k] == 0 and abs(b[k] - lam) <= _BIND_TOL]
        for k in marginal:
            p_on[k] = lo[k]
        residual = demand - p_on.sum()
        for k in marginal:
            if residual <= 0:
                break
            add = min(residual, hi[k] - p_on[k])
            p_on[k] += add
            residual -= add
        if abs(residual) > tol:
            # spread numerical dust over units with interior headroom
            for k in range(len(idx)):
                if residual == 0:
                    break
                if residual > 0 and p_on[k] < hi[k] - _BIND_TOL:
                    add = min(residual, hi[k] - p_on[k])
                    p_on[k] += add
                    residual -= add
                elif residual < 0 and p_on[k] > lo[k] + _BIND_TOL:
                    sub = min(-residual, p_on[k] - lo[k])
                    p_on[k] -= sub
                    residual += sub
            if abs(residual) > 1e-6:
                raise ToleranceTooTightError(f"dispatch residual {residual} after allocation")

    for k, i in enumerate(idx):
        p[i] = p_on[k]
        grad = 2.0 * a[k] * p_on[k] + b[k] - lam
        if hi[k] - lo[k] <= _BIND_TOL:
            # pinned unit: either multiplier may carry the gradient
            if grad >= 0:
                m[i] = grad
            else:
                n[i] = -grad
        elif p_on[k] <= lo[k] + _BIND_TOL:
            m[i] = max(0.0, grad)
        elif p_on[k] >= hi[k] - _BIND_TOL:
            n[i] = max(0.0, -grad)
    # off units sit in the degenerate box [0, 0]; stationarity at p = 0
    # (b - lam - m + n = 0) must still hold or the optimality cut built
    # from these duals would overestimate at schedules that turn them on
    for i in range(n_units):
        if not on[i]:
            grad = units[i].b - lam
            if grad >= 0:
                m[i] = grad
            else:
                n[i] = -grad
    return p, lam, m, n


def solve_dispatch(mg: Microgrid, u_mg: Schedule, tol: float = 1e-9) -> DispatchResult:
    """Dispatch one microgrid against its demand profile for a fixed schedule.

    Returns status "infeasible" as soon as any period's committed capacity
    falls short of demand by more than tol; otherwise the exact optimum
    with duals. The objective includes the gated constants sum (c+d) u.
    """
    n_units, horizon = u_mg.u.shape
    if n_units != mg.n_units or horizon != len(mg.demand):
        raise ValueError(
            f"schedule shape {u_mg.u.shape} does not match microgrid "
            f"({mg.n_units} units, horizon {len(mg.demand)})"
        )
    p = np.zeros((n_units, horizon))
    lam = np.zeros(horizon)
    m = np.zeros((n_units, horizon))
    n = np.zeros((n_units, horizon))
    for t in range(horizon):
        solved = _solve_period(mg.units, u_mg.u[:, t], mg.demand[t], tol)
        if solved is None:
            zeros = DualBundle(np.zeros(horizon), np.zeros((n_units, horizon)), np.zeros((n_units, horizon)))
            return DispatchResult("infeasible", np.zeros((n_units, horizon)), zeros, None)
        p[:, t], lam[t], m[:, t], n[:, t] = solved
    obj = 0.0
    for i, unit in enumerate(mg.units):
        for t in range(horizon):
            if u_mg.u[i, t]:
                obj += unit.a * p[i, t] ** 2 + unit.b * p[i, t] + unit.c + unit.d
    for arr in (p, lam, m, n):
        arr.setflags(write=False)
    return DispatchResult("optimal", p, DualBundle(lam, m, n), float(obj))


def solve_feasibility(mg: Microgrid, u_mg: Schedule) -> FeasibilityResult:
    """Slack-relaxed dispatch: minimal per-period demand shortfall.

    Always feasible. Periods with positive slack return the capacity
    vertex and duals (l=1, n=1 everywhere, m=0); covered periods return an
    arbitrary feasible vertex with zero duals.
    """
    n_units, horizon = u_mg.u.shape
    if n_units != mg.n_units or horizon != len(mg.demand):
        raise ValueError("schedule shape does not match microgrid")
    p = np.zeros((n_units, horizon))
    slack = np.zeros(horizon)
    lam = np.zeros(horizon)
    m = np.zeros((n_units, horizon))
    n = np.zeros((n_units, horizon))
    for t in range(horizon):
        on = u_mg.u[:, t]
        lo = np.array([unit.p_min for unit in mg.units]) * on
        hi = np.array([unit.p_max for unit in mg.units]) * on
        demand = mg.demand[t]
        if hi.sum() < demand - 1e-12:
            p[:, t] = hi
            slack[t] = demand - hi.sum()
            lam[t] = 1.0
            n[:, t] = 1.0
        else:
            # fill a vertex from the lower bounds in unit-index order
            p[:, t] = lo
            need = demand - lo.sum()
            for i in range(n_units):
                if need <= 0:
                    break
                add = min(need, hi[i] - p[i, t])
                p[i, t] += add
                need -= add
    for arr in (p, slack, lam, m, n):
        arr.setflags(write=False)
    return FeasibilityResult(p, slack, DualBundle(lam, m, n), float(slack.sum()))
