"""The cut-exchange loop coordinating master and dispatch sides.

One iteration: (1) the operator side broadcasts the trial schedule;
(2) every microgrid dispatches against it — if all succeed, their summed
cost is a candidate upper bound and yields one optimality cut; any that
fail solve the slack relaxation instead and yield feasibility cuts
(single aggregated cut in gbda mode, one per violated period otherwise);
(3) the master re-optimizes over the grown pool — exactly or by local
search in the classical modes, or by compiling the pool to a QUBO and
sampling it in hqc mode — and its certified value raises the lower
bound; (4) stop once the bounds meet, else feed the master's schedule
back to step 1.

The operator side of the loop only ever touches the commitment view of
the instance (on/off structure), incoming cut records, and subproblem
status codes; unit cost data never crosses that boundary. In hqc mode
the lower bound always comes from the cut formula at the decoded
schedule, never from the raw energy (which includes penalty terms), and
a sampled assignment with nonzero penalty residual triggers an exact
re-solve before the master is declared infeasible.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cuts import (
    CutPool,
    build_feasibility_cuts,
    build_optimality_cut,
    cut_to_wire,
)
from .errors import UnsatisfiableCutError
from .dispatch import solve_dispatch, solve_feasibility
from .master import solve_master
from .model import Dispatch, Instance, Schedule, validate_instance
from .qubo import PenaltyConfig, build_qubo, decode, lower_bound, penalty_energy
from .report import trace_row
from .sampler import SamplerParams, solve_exhaustive, solve_sa

MODES = ("gbda", "mc_gbda", "hqc_gbda")
_PENALTY_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class RunConfig:
    mode: str = "mc_gbda"
    epsilon: float = 1e-4
    max_iters: int = 200
    initial_u: str = "all_off"  # "all_off" | "all_on" | "random"
    seed: int = 0
    penalty: PenaltyConfig | None = None
    sampler: SamplerParams = SamplerParams()
    master_strategy: str = "exhaustive"  # classical modes
    sampler_backend: str = "exhaustive"  # hqc mode: "exhaustive" | "sa"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    e: int
    ub: float
    lb: float
    gap: float
    subproblem_status: tuple[str, ...]
    cuts_opt: int
    cuts_feas: int
    qubo_bits: int
    ms_sub: float
    ms_master: float


@dataclass(frozen=True)
class BoundsState:
    ub: float = math.inf
    lb: float = -math.inf
    incumbent: Schedule | None = None


def update_bounds(
    state: BoundsState,
    z_bar: float | None = None,
    z_lower: float | None = None,
    schedule: Schedule | None = None,
) -> BoundsState:
    """Fold a candidate upper/lower bound into the state (min/max rules);
    the incumbent schedule is stored whenever the upper bound improves."""
    ub, incumbent = state.ub, state.incumbent
    if z_bar is not None and z_bar < ub:
        ub = z_bar
        incumbent = schedule if schedule is not None else incumbent
    lb = state.lb
    if z_lower is not None and z_lower > lb:
        lb = z_lower
    return BoundsState(ub=ub, lb=lb, incumbent=incumbent)


@dataclass
class SolveReport:
    status: str  # "converged" | "max_iters" | "master_infeasible"
    u: Schedule | None
    p: Dispatch | None
    cost: float | None
    trace: list[IterationRecord]
    messages: list[str] = field(default_factory=list)
    pool: CutPool | None = None
    iterates: list[Schedule] = field(default_factory=list)
    mode: str = ""
    qubo_snapshot: object = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_json(self) -> str:
        data = {
            "status": self.status,
            "mode": self.mode,
            "cost": self.cost,
            "u": None if self.u is None else self.u.u.tolist(),
            "p": None if self.p is None else self.p.p.tolist(),
            "trace": [
                {
                    "e": r.e,
                    "ub": r.ub,
                    "lb": r.lb,
                    "gap": r.gap,
                    "subproblem_status": list(r.subproblem_status),
                    "cuts_opt": r.cuts_opt,
                    "cuts_feas": r.cuts_feas,
                    "qubo_bits": r.qubo_bits,
                    "ms_sub": r.ms_sub,
                    "ms_master": r.ms_master,
                }
                for r in self.trace
            ],
            "messages": self.messages,
        }
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SolveReport":
        data = json.loads(text)
        trace = [
            IterationRecord(
                e=r["e"],
                ub=r["ub"] if r["ub"] is not None else math.inf,
                lb=r["lb"] if r["lb"] is not None else -math.inf,
                gap=r["gap"] if r["gap"] is not None else math.inf,
                subproblem_status=tuple(r["subproblem_status"]),
                cuts_opt=r["cuts_opt"],
                cuts_feas=r["cuts_feas"],
                qubo_bits=r["qubo_bits"],
                ms_sub=r["ms_sub"],
                ms_master=r["ms_master"],
            )
            for r in data["trace"]
        ]
        return cls(
            status=data["status"],
            u=None if data["u"] is None else Schedule(data["u"]),
            p=None if data["p"] is None else Dispatch(data["p"]),
            cost=data["cost"],
            trace=trace,
            messages=list(data.get("messages", [])),
            mode=data.get("mode", ""),
        )


def initial_schedule(inst: Instance, cfg: RunConfig) -> Schedule:
    shape = (inst.n_units, inst.horizon_t)
    if cfg.initial_u == "all_off":
        return Schedule(np.zeros(shape, dtype=np.int8))
    if cfg.initial_u == "all_on":
        return Schedule(np.ones(shape, dtype=np.int8))
    if cfg.initial_u == "random":
        rng = np.random.default_rng(cfg.seed)
        return Schedule(rng.integers(0, 2, size=shape).astype(np.int8))
    raise ValueError(f"unknown initial_u {cfg.initial_u!r}")


def _assemble_p(inst: Instance, results) -> Dispatch:
    p = np.zeros((inst.n_units, inst.horizon_t))
    for k, res in enumerate(results):
        p[inst.mg_slice(k), :] = res.p
    return Dispatch(p)


def run(inst: Instance, cfg: RunConfig, qubo_snapshot_iter: int | None = None) -> SolveReport:
    """Run the full decomposition loop and return the report.

    qubo_snapshot_iter captures the QuboProblem built at that iteration
    (hqc mode) on the report, for diagnostics and dumps.
    """
    validate_instance(inst)
    model = inst.commitment_model()
    feas_mode = "single" if cfg.mode == "gbda" else "multi"
    pool = CutPool()
    state = BoundsState()
    u_star = initial_schedule(inst, cfg)

    trace: list[IterationRecord] = []
    messages: list[str] = []
    iterates: list[Schedule] = []
    snapshot = None

    def finish(status, cost=None, u=None, p=None):
        return SolveReport(
            status=status,
            u=u,
            p=p,
            cost=cost,
            trace=trace,
            messages=messages,
            pool=pool,
            iterates=iterates,
            mode=cfg.mode,
            qubo_snapshot=snapshot,
        )

    for e in range(1, cfg.max_iters + 1):
        iterates.append(u_star)
        messages.append(f"dso->mgcc e={e} u={u_star.bitstring()}")

        t0 = time.perf_counter()
        results = [
            solve_dispatch(mg, u_star.mg_rows(inst, k))
            for k, mg in enumerate(inst.microgrids)
        ]
        statuses = tuple(r.status for r in results)
        for k, st in enumerate(statuses):
            messages.append(f"mgcc->dso e={e} mg={k} status={st}")

        n_opt = n_feas = 0
        if all(st == "optimal" for st in statuses):
            z_bar = sum(r.objective for r in results)
            state = update_bounds(state, z_bar=z_bar, schedule=u_star)
            cut = build_optimality_cut(results, inst, e)
            pool.add_optimality(cut)
            messages.append(f"mgcc->dso e={e} cut={cut_to_wire(cut)}")
            n_opt = 1
        else:
            # optimality information from the feasible microgrids is
            # withheld: a partial cut could overestimate the bound
            feas_results = [
                solve_feasibility(mg, u_star.mg_rows(inst, k))
                if statuses[k] != "optimal"
                else None
                for k, mg in enumerate(inst.microgrids)
            ]
            fcuts = build_feasibility_cuts(feas_results, inst, e, mode=feas_mode)
            for fc in fcuts:
                pool.add_feasibility(fc)
                messages.append(f"mgcc->dso e={e} cut={cut_to_wire(fc)}")
            n_feas = len(fcuts)
        ms_sub = (time.perf_counter() - t0) * 1e3

        t1 = time.perf_counter()
        qubo_bits = 0
        z_lower = None
        if cfg.mode in ("gbda", "mc_gbda"):
            sol = solve_master(pool, model, strategy=cfg.master_strategy)
            if sol.status == "infeasible":
                rec = _record(e, state, statuses, n_opt, n_feas, 0, ms_sub, t1)
                trace.append(rec)
                messages.append("record " + trace_row(rec, include_timings=True))
                return finish("master_infeasible")
            u_hat = sol.u
            if sol.status == "optimal" and pool.optimality:
                z_lower = sol.z
        else:
            try:
                problem = build_qubo(pool, model, cfg.penalty, ub=state.ub)
            except UnsatisfiableCutError:
                rec = _record(e, state, statuses, n_opt, n_feas, 0, ms_sub, t1)
                trace.append(rec)
                messages.append("record " + trace_row(rec, include_timings=True))
                return finish("master_infeasible")
            qubo_bits = problem.n
            if qubo_snapshot_iter is not None and e == qubo_snapshot_iter:
                snapshot = problem
            u_hat, ok, diag = _sample_master(problem, cfg, e)
            if diag:
                messages.append(f"master e={e} {diag}")
            if not ok:
                rec = _record(e, state, statuses, n_opt, n_feas, qubo_bits, ms_sub, t1)
                trace.append(rec)
                messages.append("record " + trace_row(rec, include_timings=True))
                return finish("master_infeasible")
            if pool.optimality:
                # the max-of-cuts value at a sampled (not exactly argmin)
                # schedule can overshoot; above the incumbent it carries
                # no information beyond "the gap is closed"
                z_lower = min(lower_bound(u_hat, pool), state.ub)
        state = update_bounds(state, z_lower=z_lower)
        ms_master = (time.perf_counter() - t1) * 1e3

        gap = state.ub - state.lb
        rec = IterationRecord(
            e=e,
            ub=state.ub,
            lb=state.lb,
            gap=gap,
            subproblem_status=statuses,
            cuts_opt=n_opt,
            cuts_feas=n_feas,
            qubo_bits=qubo_bits,
            ms_sub=ms_sub,
            ms_master=ms_master,
        )
        trace.append(rec)
        messages.append("record " + trace_row(rec, include_timings=True))
        if gap <= cfg.epsilon:
            final = [
                solve_dispatch(mg, state.incumbent.mg_rows(inst, k))
                for k, mg in enumerate(inst.microgrids)
            ]
            return finish(
                "converged",
                cost=state.ub,
                u=state.incumbent,
                p=_assemble_p(inst, final),
            )
        u_star = u_hat

    if state.incumbent is not None:
        final = [
            solve_dispatch(mg, state.incumbent.mg_rows(inst, k))
            for k, mg in enumerate(inst.microgrids)
        ]
        return finish("max_iters", cost=state.ub, u=state.incumbent, p=_assemble_p(inst, final))
    return finish("max_iters")


def _record(e, state, statuses, n_opt, n_feas, qubo_bits, ms_sub, t1):
    return IterationRecord(
        e=e,
        ub=state.ub,
        lb=state.lb,
        gap=state.ub - state.lb,
        subproblem_status=statuses,
        cuts_opt=n_opt,
        cuts_feas=n_feas,
        qubo_bits=qubo_bits,
        ms_sub=ms_sub,
        ms_master=(time.perf_counter() - t1) * 1e3,
    )


def _sample_master(problem, cfg: RunConfig, e: int):
    """Sample the QUBO and decode; returns (schedule, ok, diagnostic).

    A nonzero penalty residual escalates to an exact enumeration pass
    when the problem is small enough; beyond that the master is reported
    infeasible with a diagnostic noting that the claim is unverified."""
    if cfg.sampler_backend == "exhaustive":
        best = solve_exhaustive(problem).best_sample
    elif cfg.sampler_backend == "sa":
        params = replace(cfg.sampler, seed=(cfg.sampler.seed ^ (e * 0x9E3779B9)) & (2**64 - 1))
        best = solve_sa(problem, params).best_sample
    else:
        raise ValueError(f"unknown sampler backend {cfg.sampler_backend!r}")
    residual = penalty_energy(problem, best.x)
    if residual > _PENALTY_RESIDUAL_TOL:
        if cfg.sampler_backend != "exhaustive" and problem.n <= 24:
            best = solve_exhaustive(problem).best_sample
            residual = penalty_energy(problem, best.x)
            if residual > _PENALTY_RESIDUAL_TOL:
                return (
                    decode(best.x, problem.registry)[0],
                    False,
                    f"infeasible: exact pass over {problem.n} bits left penalty residual {residual:.3g}",
                )
        elif cfg.sampler_backend != "exhaustive":
            return (
                decode(best.x, problem.registry)[0],
                False,
                f"infeasible (unverified): sampler residual {residual:.3g} at {problem.n} bits, "
                "too large for an exact pass",
            )
        else:
            return (
                decode(best.x, problem.registry)[0],
                False,
                f"infeasible: exact pass over {problem.n} bits left penalty residual {residual:.3g}",
            )
    return decode(best.x, problem.registry)[0], True, ""
