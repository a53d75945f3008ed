"""Deterministic random-instance generation for benchmarks and tests.

Capacity and demand are integer MW (which keeps feasibility cuts on the
integer lattice and QUBO penalties exact); cost coefficients are decimals
drawn from configurable ranges. Demand profiles are rescaled so that each
microgrid's committed capacity covers 1.2x its own peak, which makes
every generated instance solvable, unless a deliberate capacity shortfall
is requested at one period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError
from .model import Instance, Microgrid, UnitParams, validate_instance

CAPACITY_MARGIN = 1.2


@dataclass(frozen=True)
class GeneratorSpec:
    n_mgs: int = 1
    units_per_mg: int = 2
    horizon_t: int = 4
    demand_profile: tuple = ("flat", 10.0)
    # ("flat", level) | ("sinusoidal", base, amplitude) | ("scaled_weekly", decay_pct)
    a_range: tuple[float, float] = (0.01, 0.08)
    b_range: tuple[float, float] = (5.0, 25.0)
    c_range: tuple[float, float] = (10.0, 60.0)
    d_range: tuple[float, float] = (2.0, 20.0)
    p_min_range: tuple[int, int] = (0, 2)
    p_max_range: tuple[int, int] = (3, 7)
    t_on_choices: tuple[int, ...] = (1,)
    t_off_choices: tuple[int, ...] = (1,)
    seed: int = 0
    infeasible_at: int | None = None

    def validate(self):
        if self.n_mgs < 1 or self.units_per_mg < 1 or self.horizon_t < 1:
            raise InvalidSpecError("n_mgs, units_per_mg, horizon_t must all be >= 1")
        if self.demand_profile[0] not in ("flat", "sinusoidal", "scaled_weekly"):
            raise InvalidSpecError(f"unknown demand profile {self.demand_profile[0]!r}")
        if self.infeasible_at is not None and not (0 <= self.infeasible_at < self.horizon_t):
            raise InvalidSpecError("infeasible_at outside the horizon")
        for lo, hi in (self.a_range, self.b_range, self.c_range, self.d_range):
            if lo > hi:
                raise InvalidSpecError("cost range inverted")


def _raw_profile(spec: GeneratorSpec, rng) -> np.ndarray:
    kind = spec.demand_profile[0]
    T = spec.horizon_t
    t = np.arange(T)
    if kind == "flat":
        level = float(spec.demand_profile[1])
        return np.full(T, level)
    if kind == "sinusoidal":
        base, amp = float(spec.demand_profile[1]), float(spec.demand_profile[2])
        period = min(T, 24)
        return np.maximum(0.0, base + amp * np.sin(2.0 * np.pi * t / period))
    # scaled_weekly: a daily shape whose level drops every other day
    decay = float(spec.demand_profile[1]) / 100.0
    day = t // 24
    shape = 1.0 + 0.35 * np.sin(2.0 * np.pi * (t % 24) / 24.0)
    return shape * (1.0 - decay) ** (day // 2)


def gen_instance(spec: GeneratorSpec) -> Instance:
    """Generate a validated instance, byte-identical for a given spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    mgs = []
    for k in range(spec.n_mgs):
        units = []
        for _ in range(spec.units_per_mg):
            p_min = int(rng.integers(spec.p_min_range[0], spec.p_min_range[1] + 1))
            p_max = int(rng.integers(max(p_min + 1, spec.p_max_range[0]), spec.p_max_range[1] + 1))
            units.append(
                UnitParams(
                    a=round(float(rng.uniform(*spec.a_range)), 4),
                    b=round(float(rng.uniform(*spec.b_range)), 4),
                    c=round(float(rng.uniform(*spec.c_range)), 4),
                    d=round(float(rng.uniform(*spec.d_range)), 4),
                    p_min=float(p_min),
                    p_max=float(p_max),
                    t_on=int(rng.choice(spec.t_on_choices)),
                    t_off=int(rng.choice(spec.t_off_choices)),
                )
            )
        capacity = sum(u.p_max for u in units)
        raw = _raw_profile(spec, rng)
        peak = float(raw.max())
        target_peak = capacity / CAPACITY_MARGIN
        if peak > 0:
            # flat/sinusoidal levels are user-set and only shrink to fit;
            # the weekly shape is normalized and always stretches to fit
            if spec.demand_profile[0] == "scaled_weekly":
                scaled = raw * (target_peak / peak)
            else:
                scaled = raw * min(1.0, target_peak / peak)
        else:
            scaled = raw
        demand = np.floor(scaled).astype(float)
        demand = np.maximum(demand, 0.0)
        if spec.infeasible_at is not None:
            demand[spec.infeasible_at] = float(math.ceil(capacity * 1.5) + 1)
        mgs.append(Microgrid(id=k, units=tuple(units), demand=tuple(float(x) for x in demand)))
    return validate_instance(Instance(microgrids=tuple(mgs), horizon_t=spec.horizon_t))
