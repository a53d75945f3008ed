"""Command-line front end.

Subcommands: gen (random instance to file), solve (run the decomposition,
optionally exporting a trace CSV, a report JSON, a message log, and
figures), qubo-dump (snapshot the compiled master of one iteration), and
trace (report JSON to CSV, optionally with figures).

Exit codes: 0 converged, 2 max-iterations, 3 master infeasible, 64 usage.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .decomposition import MODES, RunConfig, SolveReport, run
from .errors import GridcutError, TooLargeError
from .generator import GeneratorSpec, gen_instance
from .model import load_instance, save_instance
from .qubo import dump_qubo
from .report import export_trace, parse_trace, render_figures
from .sampler import SamplerParams

EXIT_BY_STATUS = {"converged": 0, "max_iters": 2, "master_infeasible": 3}
USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gridcut", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random instance file")
    g.add_argument("--out", required=True)
    g.add_argument("--mgs", type=int, default=1)
    g.add_argument("--units", type=int, default=2)
    g.add_argument("--horizon", type=int, default=4)
    g.add_argument("--profile", choices=["flat", "sin", "weekly"], default="flat")
    g.add_argument("--level", type=float, default=10.0)
    g.add_argument("--base", type=float, default=10.0)
    g.add_argument("--amplitude", type=float, default=4.0)
    g.add_argument("--decay", type=float, default=10.0)
    g.add_argument("--t-on", type=int, default=1)
    g.add_argument("--t-off", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--infeasible-at", type=int, default=None)

    s = sub.add_parser("solve", help="run the decomposition on an instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--mode", choices=list(MODES), default="mc_gbda")
    s.add_argument("--epsilon", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iters", type=int, default=200)
    s.add_argument("--init", choices=["all_off", "all_on", "random"], default="all_off")
    s.add_argument("--sampler", choices=["sa", "exhaustive"], default="exhaustive")
    s.add_argument("--sweeps", type=int, default=None, help="sa sweeps per restart (default 100*n)")
    s.add_argument("--restarts", type=int, default=10, help="sa restarts")
    s.add_argument("--master", choices=["exhaustive", "local"], default="exhaustive")
    s.add_argument("--trace", default=None, help="write the iteration trace CSV here")
    s.add_argument("--report", default=None, help="write the full report JSON here")
    s.add_argument("--log", default=None, help="write the message log here")
    s.add_argument("--timings", action="store_true", help="write measured times in exports")
    s.add_argument("--plot", action="store_true", help="render figures next to the trace CSV")

    q = sub.add_parser("qubo-dump", help="dump the compiled master of one iteration")
    q.add_argument("--instance", required=True)
    q.add_argument("--iter-snapshot", type=int, default=1)
    q.add_argument("--out", required=True)
    q.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("trace", help="convert a report JSON into the trace CSV")
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--timings", action="store_true")
    t.add_argument("--plot", action="store_true")
    return parser


def _cmd_gen(args) -> int:
    if args.profile == "flat":
        profile = ("flat", args.level)
    elif args.profile == "sin":
        profile = ("sinusoidal", args.base, args.amplitude)
    else:
        profile = ("scaled_weekly", args.decay)
    spec = GeneratorSpec(
        n_mgs=args.mgs,
        units_per_mg=args.units,
        horizon_t=args.horizon,
        demand_profile=profile,
        t_on_choices=(args.t_on,),
        t_off_choices=(args.t_off,),
        seed=args.seed,
        infeasible_at=args.infeasible_at,
    )
    save_instance(gen_instance(spec), args.out)
    print(f"wrote {args.out}")
    return 0


def _run_config(args) -> RunConfig:
    return RunConfig(
        mode=args.mode,
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        initial_u=args.init,
        seed=args.seed,
        sampler=SamplerParams(
            sweeps=getattr(args, "sweeps", None),
            restarts=getattr(args, "restarts", 10),
            seed=args.seed,
        ),
        master_strategy={"exhaustive": "exhaustive", "local": "local_search"}[args.master],
        sampler_backend=args.sampler,
    )


def _cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    report = run(inst, _run_config(args))
    cost = "n/a" if report.cost is None else f"{report.cost:.6f}"
    print(f"status={report.status} cost={cost} iterations={report.iterations}")
    if args.trace:
        export_trace(report, args.trace, include_timings=args.timings)
        if args.plot:
            rows, _ = parse_trace(args.trace)
            out = Path(args.trace)
            for p in render_figures(rows, out.parent, stem=out.stem):
                print(f"wrote {p}")
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n")
    if args.log:
        Path(args.log).write_text("\n".join(report.messages) + "\n")
    return EXIT_BY_STATUS[report.status]


def _cmd_qubo_dump(args) -> int:
    inst = load_instance(args.instance)
    # the dump is about the compiled master, not about solving it, so
    # drive the iterations with annealing (never size-limited)
    cfg = RunConfig(
        mode="hqc_gbda",
        seed=args.seed,
        sampler_backend="sa",
        sampler=SamplerParams(sweeps=200, restarts=4, seed=args.seed),
        max_iters=max(args.iter_snapshot, 1),
    )
    report = run(inst, cfg, qubo_snapshot_iter=args.iter_snapshot)
    if report.qubo_snapshot is None:
        print(
            f"no master was compiled at iteration {args.iter_snapshot} "
            f"(run ended after {report.iterations})",
            file=sys.stderr,
        )
        return 1
    Path(args.out).write_text(dump_qubo(report.qubo_snapshot))
    print(f"wrote {args.out} ({report.qubo_snapshot.n} bits)")
    return 0


def _cmd_trace(args) -> int:
    report = SolveReport.from_json(Path(args.infile).read_text())
    export_trace(report, args.out, include_timings=args.timings)
    if args.plot:
        rows, _ = parse_trace(args.out)
        out = Path(args.out)
        for p in render_figures(rows, out.parent, stem=out.stem):
            print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "qubo-dump":
            return _cmd_qubo_dump(args)
        if args.command == "trace":
            return _cmd_trace(args)
    except TooLargeError as exc:
        print(f"error: {exc} (use --sampler sa / --master local beyond desk scale)", file=sys.stderr)
        return 1
    except GridcutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
