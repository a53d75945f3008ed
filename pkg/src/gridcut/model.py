"""Problem data model for unit commitment over networked microgrids.

An instance groups generating units into microgrids, each with its own
hourly demand profile over a shared horizon of T time separations. A unit
carries a convex quadratic fuel cost a*p^2 + b*p + c ($, with a >= 0), an
hourly commitment charge d applied to every on-hour, output limits
[p_min, p_max] that collapse to [0, 0] while the unit is off, and minimum
on/off durations t_on / t_off. The decision variables are the binary
on/off schedule u (units x T) and the dispatched power p (units x T).

Costs are gated by the schedule: an off unit contributes nothing, not even
its constant fuel term. The total operating charge is

    sum_{i,t} u[i,t] * (a_i p[i,t]^2 + b_i p[i,t] + c_i + d_i).

Minimum on/off times are enforced on state transitions strictly inside the
horizon. The hours before the horizon are one uniform run of length
init_duration in the init_on state (the state before that run is its
complement), so a run that started before t=0 counts its history, while a
flip at the very first hour and runs truncated by the horizon end are
never violations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidInstanceError


@dataclass(frozen=True)
class UnitParams:
    """Cost, limit, and minimum-time parameters of one schedulable unit."""

    a: float
    b: float
    c: float
    d: float
    p_min: float
    p_max: float
    t_on: int = 1
    t_off: int = 1
    init_on: bool = False
    init_duration: int | None = None  # defaults to t_off at validation time

    def resolved_init_duration(self) -> int:
        return self.t_off if self.init_duration is None else self.init_duration


@dataclass(frozen=True)
class Microgrid:
    """An ordered group of units serving one local demand profile."""

    id: int
    units: tuple[UnitParams, ...]
    demand: tuple[float, ...]

    @property
    def n_units(self) -> int:
        return len(self.units)


@dataclass(frozen=True)
class Instance:
    """A full problem statement: microgrids plus the shared horizon.

    Units are indexed globally by concatenating the per-microgrid unit
    lists in order; that indexing is stable for the lifetime of the run.
    """

    microgrids: tuple[Microgrid, ...]
    horizon_t: int

    @property
    def n_units(self) -> int:
        return sum(mg.n_units for mg in self.microgrids)

    @property
    def units(self) -> tuple[UnitParams, ...]:
        return tuple(u for mg in self.microgrids for u in mg.units)

    def mg_slice(self, mg_index: int) -> slice:
        """Global unit-index range of the mg_index-th microgrid."""
        start = sum(self.microgrids[k].n_units for k in range(mg_index))
        return slice(start, start + self.microgrids[mg_index].n_units)

    @property
    def initial_state(self) -> tuple[tuple[bool, int], ...]:
        """Per-unit (was_on, hours already in that state), global order."""
        return tuple((u.init_on, u.resolved_init_duration()) for u in self.units)

    def commitment_model(self) -> "CommitmentModel":
        units = self.units
        return CommitmentModel(
            horizon_t=self.horizon_t,
            t_on=tuple(u.t_on for u in units),
            t_off=tuple(u.t_off for u in units),
            init_on=tuple(bool(u.init_on) for u in units),
            init_duration=tuple(u.resolved_init_duration() for u in units),
        )


@dataclass(frozen=True)
class CommitmentModel:
    """The commitment-side view of an instance: everything needed to
    reason about on/off schedules and nothing else.

    Deliberately free of cost and capacity data; this is the only
    instance-derived object handed to master-problem code.
    """

    horizon_t: int
    t_on: tuple[int, ...]
    t_off: tuple[int, ...]
    init_on: tuple[bool, ...]
    init_duration: tuple[int, ...]

    @property
    def n_units(self) -> int:
        return len(self.t_on)


def as_commitment_model(obj) -> CommitmentModel:
    if isinstance(obj, CommitmentModel):
        return obj
    if isinstance(obj, Instance):
        return obj.commitment_model()
    raise TypeError(f"expected Instance or CommitmentModel, got {type(obj).__name__}")


class Schedule:
    """Binary on/off matrix u, shaped (units, T). Immutable."""

    __slots__ = ("u",)

    def __init__(self, u):
        arr = np.array(u, dtype=np.int8, copy=True)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"schedule must be 2-D, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("schedule entries must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "u", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Schedule is immutable")

    @property
    def shape(self):
        return self.u.shape

    def bits(self) -> tuple[int, ...]:
        """Row-major flattened bit tuple (unit-major, time-minor)."""
        return tuple(int(v) for v in self.u.ravel())

    def bitstring(self) -> str:
        return "".join(str(b) for b in self.bits())

    @classmethod
    def from_bits(cls, bits, n_units: int, horizon_t: int) -> "Schedule":
        arr = np.asarray(list(bits), dtype=np.int8).reshape(n_units, horizon_t)
        return cls(arr)

    def mg_rows(self, inst: Instance, mg_index: int) -> "Schedule":
        return Schedule(self.u[inst.mg_slice(mg_index), :])

    def __eq__(self, other):
        return isinstance(other, Schedule) and np.array_equal(self.u, other.u)

    def __hash__(self):
        return hash((self.u.shape, self.bits()))

    def __repr__(self):
        return f"Schedule({self.u.tolist()})"


class Dispatch:
    """Real power matrix p in MW, shaped (units, T). Immutable."""

    __slots__ = ("p",)

    def __init__(self, p):
        arr = np.array(p, dtype=float, copy=True)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"dispatch must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("dispatch entries must be finite")
        if (arr < 0).any():
            raise ValueError("dispatch entries must be >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Dispatch is immutable")

    @property
    def shape(self):
        return self.p.shape

    def __eq__(self, other):
        return isinstance(other, Dispatch) and np.array_equal(self.p, other.p)

    def __repr__(self):
        return f"Dispatch({self.p.tolist()})"


@dataclass(frozen=True)
class Violation:
    """One validation failure: a code, the offending field path, details."""

    code: str
    where: str
    detail: str = ""

    def __str__(self):
        return f"{self.code} at {self.where}" + (f" ({self.detail})" if self.detail else "")


def instance_violations(inst: Instance) -> list[Violation]:
    """All invariant violations of an instance; empty list means valid."""
    out: list[Violation] = []
    if inst.horizon_t < 1:
        out.append(Violation("BadHorizon", "horizon_t", f"{inst.horizon_t} < 1"))
    if not inst.microgrids:
        out.append(Violation("EmptyInstance", "microgrids", "no microgrids"))
    for k, mg in enumerate(inst.microgrids):
        base = f"microgrids[{k}]"
        if not mg.units:
            out.append(Violation("EmptyMicrogrid", base, "no units"))
        if len(mg.demand) != inst.horizon_t:
            out.append(
                Violation(
                    "DemandLengthMismatch",
                    f"{base}.demand",
                    f"length {len(mg.demand)} != horizon {inst.horizon_t}",
                )
            )
        for t, dem in enumerate(mg.demand):
            if not math.isfinite(dem) or dem < 0:
                out.append(Violation("NegativeDemand", f"{base}.demand[{t}]", f"{dem}"))
        for j, unit in enumerate(mg.units):
            ub = f"{base}.units[{j}]"
            if unit.p_min > unit.p_max:
                out.append(
                    Violation("BoundsInverted", ub, f"p_min {unit.p_min} > p_max {unit.p_max}")
                )
            if unit.p_min < 0:
                out.append(Violation("NegativeLowerBound", f"{ub}.p_min", f"{unit.p_min}"))
            if unit.a < 0:
                out.append(Violation("NegativeCostCurvature", f"{ub}.a", f"{unit.a} < 0"))
            for name in ("a", "b", "c", "d", "p_min", "p_max"):
                if not math.isfinite(getattr(unit, name)):
                    out.append(Violation("NonFiniteParameter", f"{ub}.{name}", ""))
            if unit.t_on < 1 or unit.t_off < 1:
                out.append(
                    Violation("BadMinimumTime", ub, f"t_on={unit.t_on}, t_off={unit.t_off}")
                )
            if unit.resolved_init_duration() < 0:
                out.append(Violation("NegativeInitDuration", f"{ub}.init_duration", ""))
    return out


def validate_instance(inst: Instance) -> Instance:
    """Return the instance unchanged, or raise with every violation found."""
    violations = instance_violations(inst)
    if violations:
        raise InvalidInstanceError(violations)
    return inst


def _require_shape(inst: Instance, arr: np.ndarray, what: str):
    expect = (inst.n_units, inst.horizon_t)
    if arr.shape != expect:
        raise DimensionMismatchError(f"{what} shape {arr.shape} != instance shape {expect}")


def total_cost(inst: Instance, sched: Schedule, disp: Dispatch) -> float:
    """Total operating charge of (u, p) under cost gating."""
    _require_shape(inst, sched.u, "schedule")
    _require_shape(inst, disp.p, "dispatch")
    units = inst.units
    a = np.array([un.a for un in units])[:, None]
    b = np.array([un.b for un in units])[:, None]
    c = np.array([un.c for un in units])[:, None]
    d = np.array([un.d for un in units])[:, None]
    u = sched.u.astype(float)
    p = disp.p
    return float(np.sum(u * (a * p * p + b * p + c + d)))


def _run_before_flip(row: np.ndarray, t: int, init_on: bool, init_duration: int) -> int:
    """Length of the constant run ending at row[t-1], counting pre-horizon
    history when the run reaches the horizon start."""
    state = row[t - 1]
    run = 1
    j = t - 2
    while j >= 0 and row[j] == state:
        run += 1
        j -= 1
    if j < 0 and bool(state) == bool(init_on):
        run += init_duration
    return run


def check_min_updown(inst_or_model, sched: Schedule) -> list[tuple[int, int, str]]:
    """Minimum on/off time violations as (unit, flip time, kind) triples.

    kind is "on" when a unit shuts down before t_on consecutive on-hours,
    "off" when it starts up before t_off consecutive off-hours. Only
    transitions at t >= 1 (0-indexed) are checked; see the module notes on
    boundary and history conventions.
    """
    model = as_commitment_model(inst_or_model)
    if sched.u.shape != (model.n_units, model.horizon_t):
        raise DimensionMismatchError(
            f"schedule shape {sched.u.shape} != ({model.n_units}, {model.horizon_t})"
        )
    out: list[tuple[int, int, str]] = []
    for i in range(model.n_units):
        row = sched.u[i]
        for t in range(1, model.horizon_t):
            if row[t] == row[t - 1]:
                continue
            run = _run_before_flip(row, t, model.init_on[i], model.init_duration[i])
            if row[t - 1] == 1 and run < model.t_on[i]:
                out.append((i, t, "on"))
            elif row[t - 1] == 0 and run < model.t_off[i]:
                out.append((i, t, "off"))
    return out


@dataclass(frozen=True)
class DispatchViolation:
    kind: str  # "shortfall" | "box_low" | "box_high"
    index: int  # microgrid index for shortfall, global unit index otherwise
    t: int
    amount: float


def check_dispatch_constraints(
    inst: Instance, sched: Schedule, disp: Dispatch, tol: float = 1e-9
) -> list[DispatchViolation]:
    """Demand shortfalls per (microgrid, t) and gated-box violations per (unit, t)."""
    _require_shape(inst, sched.u, "schedule")
    _require_shape(inst, disp.p, "dispatch")
    out: list[DispatchViolation] = []
    for k, mg in enumerate(inst.microgrids):
        rows = inst.mg_slice(k)
        supplied = disp.p[rows, :].sum(axis=0)
        for t in range(inst.horizon_t):
            short = mg.demand[t] - supplied[t]
            if short > tol:
                out.append(DispatchViolation("shortfall", k, t, float(short)))
    units = inst.units
    for i, unit in enumerate(units):
        for t in range(inst.horizon_t):
            lo = unit.p_min * sched.u[i, t]
            hi = unit.p_max * sched.u[i, t]
            p = disp.p[i, t]
            if p < lo - tol:
                out.append(DispatchViolation("box_low", i, t, float(lo - p)))
            elif p > hi + tol:
                out.append(DispatchViolation("box_high", i, t, float(p - hi)))
    return out


# ---------------------------------------------------------------------------
# Instance file format (JSON; field names are part of the contract)

def instance_to_dict(inst: Instance) -> dict:
    return {
        "horizon_t": inst.horizon_t,
        "microgrids": [
            {
                "id": mg.id,
                "demand": list(mg.demand),
                "units": [
                    {
                        "a": u.a,
                        "b": u.b,
                        "c": u.c,
                        "d": u.d,
                        "p_min": u.p_min,
                        "p_max": u.p_max,
                        "t_on": u.t_on,
                        "t_off": u.t_off,
                        "init_on": bool(u.init_on),
                        "init_duration": u.resolved_init_duration(),
                    }
                    for u in mg.units
                ],
            }
            for mg in inst.microgrids
        ],
    }


def instance_from_dict(data: dict) -> Instance:
    mgs = []
    for mg in data["microgrids"]:
        units = []
        for u in mg["units"]:
            t_off = int(u.get("t_off", 1))
            units.append(
                UnitParams(
                    a=float(u["a"]),
                    b=float(u["b"]),
                    c=float(u["c"]),
                    d=float(u["d"]),
                    p_min=float(u["p_min"]),
                    p_max=float(u["p_max"]),
                    t_on=int(u.get("t_on", 1)),
                    t_off=t_off,
                    init_on=bool(u.get("init_on", False)),
                    init_duration=int(u.get("init_duration", t_off)),
                )
            )
        mgs.append(Microgrid(id=int(mg["id"]), units=tuple(units), demand=tuple(float(x) for x in mg["demand"])))
    return Instance(microgrids=tuple(mgs), horizon_t=int(data["horizon_t"]))


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return validate_instance(instance_from_dict(json.load(fh)))
