"""Trace export: delimited iteration data, plus rendered figures.

The CSV schema is one row per iteration,

    e,ub,lb,gap,cuts_opt,cuts_feas,qubo_bits,ms_sub,ms_master

followed by a '#'-prefixed summary block (status, cost, iterations,
total_ms). Exports are byte-identical for identical runs: timing columns
default to 0 and only carry measured values when include_timings is set.

Figures (bounds and gap versus iteration) are rendered next to the CSV
when asked for; infinities are simply left off the axes.
"""

from __future__ import annotations

import math
from pathlib import Path

TRACE_HEADER = "e,ub,lb,gap,cuts_opt,cuts_feas,qubo_bits,ms_sub,ms_master"


def _fmt(value: float) -> str:
    if value != value:  # NaN
        return "nan"
    if value == math.inf:
        return "inf"
    if value == -math.inf:
        return "-inf"
    return repr(float(value))


def trace_row(r, include_timings: bool = False) -> str:
    """One iteration record as its CSV line."""
    ms_sub = r.ms_sub if include_timings else 0.0
    ms_master = r.ms_master if include_timings else 0.0
    return (
        f"{r.e},{_fmt(r.ub)},{_fmt(r.lb)},{_fmt(r.gap)},"
        f"{r.cuts_opt},{r.cuts_feas},{r.qubo_bits},"
        f"{_fmt(ms_sub)},{_fmt(ms_master)}"
    )


def export_trace(report, path, include_timings: bool = False) -> None:
    """Write the iteration trace and summary block to path."""
    lines = [TRACE_HEADER]
    total_ms = 0.0
    for r in report.trace:
        total_ms += r.ms_sub + r.ms_master
        lines.append(trace_row(r, include_timings))
    lines.append(f"# status={report.status}")
    lines.append(f"# cost={_fmt(report.cost) if report.cost is not None else 'none'}")
    lines.append(f"# iterations={len(report.trace)}")
    lines.append(f"# total_ms={_fmt(total_ms) if include_timings else '0'}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_trace(path) -> tuple[list[dict], dict]:
    """Read an exported trace back: (rows, summary)."""
    rows: list[dict] = []
    summary: dict = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            summary[key.strip()] = value.strip()
            continue
        if line == TRACE_HEADER:
            continue
        parts = line.split(",")
        rows.append(
            {
                "e": int(parts[0]),
                "ub": float(parts[1]),
                "lb": float(parts[2]),
                "gap": float(parts[3]),
                "cuts_opt": int(parts[4]),
                "cuts_feas": int(parts[5]),
                "qubo_bits": int(parts[6]),
                "ms_sub": float(parts[7]),
                "ms_master": float(parts[8]),
            }
        )
    return rows, summary


def render_figures(rows: list[dict], out_dir, stem: str = "trace") -> list[Path]:
    """Render bounds and gap figures from trace rows; returns the paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    iters = [r["e"] for r in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ub = [(e, r["ub"]) for e, r in zip(iters, rows) if math.isfinite(r["ub"])]
    lb = [(e, r["lb"]) for e, r in zip(iters, rows) if math.isfinite(r["lb"])]
    if ub:
        ax.plot(*zip(*ub), marker="o", label="upper bound")
    if lb:
        ax.plot(*zip(*lb), marker="s", label="lower bound")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective ($)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    bounds_path = out_dir / f"{stem}_bounds.png"
    fig.savefig(bounds_path, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    gap = [(e, r["gap"]) for e, r in zip(iters, rows) if math.isfinite(r["gap"]) and r["gap"] > 0]
    if gap:
        ax.semilogy(*zip(*gap), marker="o", color="tab:red")
    ax.set_xlabel("iteration")
    ax.set_ylabel("upper - lower bound ($)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    gap_path = out_dir / f"{stem}_gap.png"
    fig.savefig(gap_path, dpi=150)
    plt.close(fig)
    return [bounds_path, gap_path]
