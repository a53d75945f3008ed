"""Dispatch subproblem: optimality, duals, and the slack relaxation."""

import numpy as np
import pytest

from gridcut.dispatch import solve_dispatch, solve_feasibility
from gridcut.model import Microgrid, Schedule, UnitParams, total_cost, Instance, Dispatch

from conftest import single_unit_mg


def unit(a=0.0, b=1.0, c=0.0, d=0.0, p_min=0.0, p_max=10.0):
    return UnitParams(a=a, b=b, c=c, d=d, p_min=p_min, p_max=p_max)


def mg_of(units, demand):
    return Microgrid(id=0, units=tuple(units), demand=tuple(demand))


def kkt_residuals(mg, u, res):
    """|2 a p + b - l - m + n| per on-cell."""
    out = []
    for i, un in enumerate(mg.units):
        for t in range(len(mg.demand)):
            if u.u[i, t]:
                out.append(
                    abs(
                        2 * un.a * res.p[i, t]
                        + un.b
                        - res.duals.demand[t]
                        - res.duals.lower[i, t]
                        + res.duals.upper[i, t]
                    )
                )
    return out


class TestSolveDispatch:
    def test_linear_unit_binding_demand(self):
        mg = mg_of([unit(a=0, b=1)], [5.0])
        res = solve_dispatch(mg, Schedule([[1]]))
        assert res.status == "optimal"
        assert res.p[0, 0] == pytest.approx(5.0)
        assert res.duals.demand[0] == pytest.approx(1.0, abs=1e-9)
        assert res.duals.lower[0, 0] == pytest.approx(0.0, abs=1e-9)
        assert res.duals.upper[0, 0] == pytest.approx(0.0, abs=1e-9)
        assert res.objective == pytest.approx(5.0)

    def test_two_quadratic_units_grid_oracle(self):
        # equal-marginal-cost split of demand 6 between a=1 and a=2 units
        mg = mg_of([unit(a=1, b=0), unit(a=2, b=0)], [6.0])
        res = solve_dispatch(mg, Schedule([[1], [1]]))
        grid = np.arange(0.0, 6.0 + 1e-12, 1e-4)
        obj = grid**2 + 2.0 * (6.0 - grid) ** 2
        k = np.argmin(obj)
        assert res.p[0, 0] == pytest.approx(grid[k], abs=1e-3)
        assert res.p[1, 0] == pytest.approx(6.0 - grid[k], abs=1e-3)
        assert res.p[0, 0] == pytest.approx(4.0, abs=1e-6)
        assert res.p[1, 0] == pytest.approx(2.0, abs=1e-6)
        assert res.duals.demand[0] == pytest.approx(8.0, abs=1e-6)

    def test_capacity_shortfall_is_infeasible(self):
        mg = mg_of([unit(p_max=3)], [5.0])
        res = solve_dispatch(mg, Schedule([[1]]))
        assert res.status == "infeasible"
        assert res.objective is None

    def test_all_off_zero_demand(self):
        mg = mg_of([unit()], [0.0])
        res = solve_dispatch(mg, Schedule([[0]]))
        assert res.status == "optimal"
        assert res.objective == 0.0

    def test_all_off_positive_demand_infeasible(self):
        mg = mg_of([unit()], [1.0])
        assert solve_dispatch(mg, Schedule([[0]])).status == "infeasible"

    def test_lower_bound_pressure(self):
        # sum of p_min exceeds demand: dispatch sits at the lower bounds
        # with l = 0 and m > 0 carrying the gradient
        mg = mg_of([unit(a=0.5, b=2, p_min=4, p_max=8)], [1.0])
        res = solve_dispatch(mg, Schedule([[1]]))
        assert res.p[0, 0] == pytest.approx(4.0)
        assert res.duals.demand[0] == 0.0
        assert res.duals.lower[0, 0] == pytest.approx(2 * 0.5 * 4 + 2, abs=1e-9)
        assert max(kkt_residuals(mg, Schedule([[1]]), res)) <= 1e-8

    def test_degenerate_linear_tie_allocated_in_unit_order(self):
        mg = mg_of([unit(a=0, b=3, p_max=4), unit(a=0, b=3, p_max=4)], [5.0])
        res = solve_dispatch(mg, Schedule([[1], [1]]))
        assert res.p[0, 0] == pytest.approx(4.0, abs=1e-6)
        assert res.p[1, 0] == pytest.approx(1.0, abs=1e-6)

    def test_objective_matches_total_cost(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            horizon = int(rng.integers(1, 5))
            units = [
                unit(
                    a=rng.uniform(0.01, 0.5),
                    b=rng.uniform(1, 10),
                    c=rng.uniform(0, 5),
                    d=rng.uniform(0, 5),
                    p_min=float(rng.integers(0, 2)),
                    p_max=float(rng.integers(3, 8)),
                )
                for _ in range(n)
            ]
            demand = [float(rng.integers(0, 3 * n)) for _ in range(horizon)]
            mg = mg_of(units, demand)
            u = Schedule(rng.integers(0, 2, size=(n, horizon)))
            res = solve_dispatch(mg, u)
            if res.status != "optimal":
                continue
            inst = Instance(microgrids=(mg,), horizon_t=horizon)
            assert res.objective == pytest.approx(
                total_cost(inst, u, Dispatch(res.p)), rel=1e-9, abs=1e-9
            )
            assert max(kkt_residuals(mg, u, res), default=0.0) <= 1e-8
            # gated boxes respected
            for i, un in enumerate(units):
                for t in range(horizon):
                    lo, hi = un.p_min * u.u[i, t], un.p_max * u.u[i, t]
                    assert lo - 1e-9 <= res.p[i, t] <= hi + 1e-9

    def test_demand_dual_is_shadow_price(self):
        rng = np.random.default_rng(17)
        checked = 0
        for _ in range(60):
            n = int(rng.integers(1, 4))
            units = [
                unit(a=rng.uniform(0.05, 0.5), b=rng.uniform(1, 10), p_max=float(rng.integers(4, 9)))
                for _ in range(n)
            ]
            demand = float(rng.uniform(1, 0.8 * sum(u.p_max for u in units)))
            delta = 1e-4
            objs = {}
            actives = {}
            for sign in (-1, 0, 1):
                mg = mg_of(units, [demand + sign * delta])
                res = solve_dispatch(mg, Schedule(np.ones((n, 1), dtype=int)))
                assert res.status == "optimal"
                objs[sign] = res.objective
                actives[sign] = tuple(
                    ("lo" if res.p[i, 0] <= units[i].p_min + 1e-7
                     else "hi" if res.p[i, 0] >= units[i].p_max - 1e-7 else "in")
                    for i in range(n)
                )
                if sign == 0:
                    lam = res.duals.demand[0]
            if actives[-1] != actives[1]:
                continue  # active set changed; sensitivity not defined
            fd = (objs[1] - objs[-1]) / (2 * delta)
            assert fd == pytest.approx(lam, abs=1e-3 * max(1.0, abs(lam)))
            checked += 1
        assert checked >= 30


def project_box_halfspace(y, lo, hi, demand):
    p = np.clip(y, lo, hi)
    if p.sum() >= demand - 1e-12:
        return p
    tau_lo, tau_hi = 0.0, float(demand + np.max(hi - y) + 1.0)
    for _ in range(40):
        mid = 0.5 * (tau_lo + tau_hi)
        if np.clip(y + mid, lo, hi).sum() >= demand:
            tau_hi = mid
        else:
            tau_lo = mid
    return np.clip(y + tau_hi, lo, hi)


def projected_gradient_value(a, b, lo, hi, demand, iters=260):
    # all a > 0 keeps the objective strongly convex, so plain projected
    # gradient with a 1/L step converges linearly
    step = 1.0 / (2.0 * a.max())
    p = project_box_halfspace((lo + hi) / 2.0, lo, hi, demand)
    for _ in range(iters):
        p = project_box_halfspace(p - step * (2 * a * p + b), lo, hi, demand)
    return float(np.sum(a * p * p + b * p))


class TestProjectedGradientOracle:
    def test_matches_on_random_microgrids(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            n = int(rng.integers(1, 4))
            horizon = int(rng.integers(1, 5))
            units = [
                unit(
                    a=rng.uniform(0.1, 0.4),
                    b=rng.uniform(1, 10),
                    p_min=float(rng.integers(0, 2)),
                    p_max=float(rng.integers(3, 9)),
                )
                for _ in range(n)
            ]
            demand = [float(rng.uniform(0, 0.9 * sum(u.p_max for u in units)))]
            mg = mg_of(units, demand)
            u = Schedule(np.ones((n, 1), dtype=int))
            res = solve_dispatch(mg, u)
            assert res.status == "optimal"
            a = np.array([x.a for x in units])
            b = np.array([x.b for x in units])
            lo = np.array([x.p_min for x in units])
            hi = np.array([x.p_max for x in units])
            fuel = projected_gradient_value(a, b, lo, hi, demand[0])
            constants = sum(x.c + x.d for x in units)
            assert res.objective == pytest.approx(fuel + constants, rel=1e-6)


class TestSolveFeasibility:
    def test_slack_case_duals(self):
        mg = mg_of([unit(p_max=3)], [5.0])
        res = solve_feasibility(mg, Schedule([[1]]))
        assert res.p[0, 0] == pytest.approx(3.0)
        assert res.slack[0] == pytest.approx(2.0)
        assert res.duals.demand[0] == 1.0
        assert res.duals.upper[0, 0] == 1.0
        assert res.duals.lower[0, 0] == 0.0
        assert res.objective == pytest.approx(2.0)

    def test_covered_case_zero_duals(self):
        mg = mg_of([unit(p_max=3), unit(p_max=4)], [5.0])
        res = solve_feasibility(mg, Schedule([[1], [1]]))
        assert res.slack[0] == 0.0
        assert res.p[:, 0].sum() >= 5.0 - 1e-9
        assert res.duals.demand[0] == 0.0
        assert not res.duals.upper.any() and not res.duals.lower.any()

    def test_all_off_zero_demand(self):
        mg = mg_of([unit()], [0.0])
        res = solve_feasibility(mg, Schedule([[0]]))
        assert res.objective == 0.0
        assert not res.p.any()

    def test_always_feasible_and_slack_matches_shortfall(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            horizon = int(rng.integers(1, 4))
            units = [unit(p_min=float(rng.integers(0, 2)), p_max=float(rng.integers(2, 7)))
                     for _ in range(n)]
            demand = [float(rng.integers(0, 15)) for _ in range(horizon)]
            mg = mg_of(units, demand)
            u = Schedule(rng.integers(0, 2, size=(n, horizon)))
            res = solve_feasibility(mg, u)
            assert (res.slack >= 0).all()
            assert res.objective == pytest.approx(res.slack.sum())
            for t in range(horizon):
                cap = sum(units[i].p_max * u.u[i, t] for i in range(n))
                assert res.slack[t] == pytest.approx(max(0.0, demand[t] - cap), abs=1e-9)
