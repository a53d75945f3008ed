"""Shared fixtures: the seeded instance suite and brute-force oracles."""

import itertools
import time
from dataclasses import dataclass

import numpy as np
import pytest

from gridcut.decomposition import RunConfig, run
from gridcut.dispatch import solve_dispatch
from gridcut.generator import GeneratorSpec, gen_instance
from gridcut.model import Instance, Microgrid, Schedule, UnitParams, check_min_updown

SUITE_SIZE = 100

# (n_mgs, units_per_mg, horizon, t_on choices, t_off choices, profile);
# sized so that I*T <= 12 and every hqc run stays within the 24-bit
# exhaustive sampler budget
SUITE_TABLE = [
    (1, 1, 4, (1, 2), (1,), ("sinusoidal", 6, 2)),
    (1, 2, 3, (1,), (1,), ("sinusoidal", 6, 2)),
    (1, 3, 2, (1,), (1,), ("sinusoidal", 6, 2)),
    (2, 1, 3, (1,), (1,), ("flat", 8.0)),
    (3, 1, 2, (1,), (1,), ("flat", 8.0)),
    (1, 2, 4, (1,), (1,), ("sinusoidal", 6, 2)),
    (2, 1, 4, (1,), (1,), ("flat", 8.0)),
    (1, 1, 6, (1,), (1,), ("flat", 8.0)),
    (1, 3, 3, (1,), (1,), ("flat", 8.0)),
    (2, 2, 2, (1,), (1,), ("flat", 8.0)),
    (1, 1, 5, (2,), (1,), ("flat", 8.0)),
    (3, 1, 3, (1,), (1,), ("flat", 8.0)),
    (1, 1, 4, (1,), (2,), ("sinusoidal", 6, 2)),
    (1, 2, 2, (2,), (1,), ("sinusoidal", 6, 2)),
]


def suite_instance(seed: int) -> Instance:
    mgs, upm, horizon, tons, toffs, profile = SUITE_TABLE[seed % len(SUITE_TABLE)]
    return gen_instance(
        GeneratorSpec(
            n_mgs=mgs,
            units_per_mg=upm,
            horizon_t=horizon,
            demand_profile=profile,
            t_on_choices=tons,
            t_off_choices=toffs,
            seed=seed,
            p_max_range=(3, 6),
        )
    )


def single_unit_mg(a=0.0, b=1.0, c=0.0, d=0.0, p_min=0.0, p_max=10.0, demand=(5.0,), **kw):
    unit = UnitParams(a=a, b=b, c=c, d=d, p_min=p_min, p_max=p_max, **kw)
    return Microgrid(id=0, units=(unit,), demand=tuple(demand))


def schedule_value(inst: Instance, sched: Schedule):
    """Total dispatch cost of a schedule, or None if any microgrid is
    infeasible. Direct per-microgrid solve, no caching."""
    cost = 0.0
    for k, mg in enumerate(inst.microgrids):
        res = solve_dispatch(mg, sched.mg_rows(inst, k))
        if res.status != "optimal":
            return None
        cost += res.objective
    return cost


class BruteForce:
    """Enumerates every schedule of an instance, caching the per-period
    dispatch cost by (microgrid, t, on-mask). values maps the schedule's
    integer code (lexicographic bit order) to its cost or None."""

    def __init__(self, inst: Instance):
        self.inst = inst
        I, T = inst.n_units, inst.horizon_t
        self._memo: dict = {}
        self.values: dict[int, float | None] = {}
        self.opt_cost = None
        self.opt_bits = None
        for bits in itertools.product((0, 1), repeat=I * T):
            sched = Schedule.from_bits(bits, I, T)
            code = int("".join(map(str, bits)), 2)
            if check_min_updown(inst, sched):
                continue
            cost = self._value(sched)
            self.values[code] = cost
            if cost is not None and (self.opt_cost is None or cost < self.opt_cost):
                self.opt_cost = cost
                self.opt_bits = bits

    def _value(self, sched: Schedule):
        total = 0.0
        for k, mg in enumerate(self.inst.microgrids):
            rows = sched.u[self.inst.mg_slice(k), :]
            for t in range(self.inst.horizon_t):
                mask = 0
                for j in range(mg.n_units):
                    mask |= int(rows[j, t]) << j
                key = (k, t, mask)
                if key not in self._memo:
                    sub = Microgrid(id=mg.id, units=mg.units, demand=(mg.demand[t],))
                    col = Schedule([[(mask >> j) & 1] for j in range(mg.n_units)])
                    res = solve_dispatch(sub, col)
                    self._memo[key] = res.objective if res.status == "optimal" else None
                c = self._memo[key]
                if c is None:
                    return None
                total += c
        return total

    def feasible_schedules(self):
        I, T = self.inst.n_units, self.inst.horizon_t
        for code, cost in self.values.items():
            if cost is not None:
                bits = [(code >> (I * T - 1 - k)) & 1 for k in range(I * T)]
                yield Schedule.from_bits(bits, I, T), cost


@dataclass
class SuiteEntry:
    seed: int
    inst: Instance
    oracle: BruteForce
    reports: dict  # mode -> SolveReport


@pytest.fixture(scope="session")
def suite():
    """The seeded benchmark suite: instances, brute-force oracles, and
    converged runs of all three modes. Built once per session; the run
    wall time (excluding oracle construction) is recorded for the
    acceptance budget checks."""
    entries = []
    run_seconds = 0.0
    for seed in range(SUITE_SIZE):
        inst = suite_instance(seed)
        oracle = BruteForce(inst)
        reports = {}
        t0 = time.perf_counter()
        for mode in ("gbda", "mc_gbda", "hqc_gbda"):
            reports[mode] = run(inst, RunConfig(mode=mode, epsilon=1e-7))
        run_seconds += time.perf_counter() - t0
        entries.append(SuiteEntry(seed=seed, inst=inst, oracle=oracle, reports=reports))
    return {"entries": entries, "run_seconds": run_seconds}
