"""Benders decomposition for unit commitment over networked microgrids,
with classical mixed-binary masters and a QUBO master solved by local
samplers behind a pluggable backend interface."""

from .model import (
    Dispatch,
    Instance,
    Microgrid,
    Schedule,
    UnitParams,
    check_dispatch_constraints,
    check_min_updown,
    instance_violations,
    load_instance,
    save_instance,
    total_cost,
    validate_instance,
)
from .dispatch import DispatchResult, DualBundle, FeasibilityResult, solve_dispatch, solve_feasibility
from .cuts import (
    CutPool,
    FeasibilityCut,
    OptimalityCut,
    build_feasibility_cuts,
    build_optimality_cut,
    eval_feasibility_cut,
    eval_optimality_cut,
)
from .master import MasterSolution, solve_master
from .qubo import (
    BitRegistry,
    PenaltyConfig,
    QuboProblem,
    build_qubo,
    decode,
    dump_qubo,
    lower_bound,
    parse_qubo,
    penalty_energy,
    qubo_energy,
    slack_bits,
)
from .sampler import (
    AnnealSampler,
    ExhaustiveSampler,
    IsingProblem,
    SamplerParams,
    SampleSet,
    solve_exhaustive,
    solve_sa,
    to_ising,
)
from .decomposition import (
    BoundsState,
    IterationRecord,
    RunConfig,
    SolveReport,
    run,
    update_bounds,
)
from .generator import GeneratorSpec, gen_instance
from .report import export_trace, parse_trace, render_figures

__version__ = "0.1.0"
