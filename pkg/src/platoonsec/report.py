"""Run outputs: delimited traces, metric summaries, manifests and figures."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .sim import Metrics, Scenario, Trace

__all__ = [
    "format_float",
    "trace_csv_text",
    "write_trace_csv",
    "metrics_kv_lines",
    "metrics_csv_text",
    "write_metrics",
    "write_manifest",
    "render_run_figures",
]

TOOL_VERSION = "0.1.0"


def format_float(x: float) -> str:
    """Shortest round-trip decimal form; keeps CSV output byte-stable."""
    return repr(float(x))


def trace_csv_text(tr: Trace) -> str:
    n = tr.triggers.shape[1]
    cols = ["time", "p0", "v0"]
    for i in range(1, n + 1):
        cols += [f"p{i}", f"v{i}", f"trig{i}", f"att{i}", f"u{i}", f"mu{i}"]
    cols.append("V")
    rows = [",".join(cols)]
    for t in range(tr.steps):
        cells = [format_float(tr.time[t]),
                 format_float(tr.leader[t, 0]), format_float(tr.leader[t, 1])]
        for i in range(n):
            cells += [
                format_float(tr.states[t, i, 0]),
                format_float(tr.states[t, i, 1]),
                str(int(tr.triggers[t, i])),
                str(int(tr.attack_active[t, i])),
                format_float(tr.control[t, i]),
                format_float(tr.mu[t, i]),
            ]
        cells.append(format_float(tr.lyapunov[t]))
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def write_trace_csv(tr: Trace, path: Path) -> None:
    Path(path).write_text(trace_csv_text(tr))


def _metrics_items(m: Metrics) -> list[tuple[str, str]]:
    items = [
        ("consensus_time", "not-reached" if m.consensus_time is None
         else format_float(m.consensus_time)),
        ("total_triggers", str(m.total_triggers)),
        ("J", "" if m.J is None else format_float(m.J)),
        ("delta_star", format_float(m.delta_star)),
        ("max_velocity_error_tail", format_float(m.max_velocity_error_tail)),
        ("max_spacing_error_tail", format_float(m.max_spacing_error_tail)),
        ("diverged", str(int(m.diverged))),
    ]
    items += [(f"triggers_vehicle_{i + 1}", str(c)) for i, c in enumerate(m.trigger_counts)]
    return items


def metrics_kv_lines(m: Metrics) -> list[str]:
    return [f"{key} = {value}" for key, value in _metrics_items(m)]


def metrics_csv_text(m: Metrics) -> str:
    items = _metrics_items(m)
    header = ",".join(k for k, _ in items)
    row = ",".join("not-reached" if v == "not-reached" else v for _, v in items)
    return header + "\n" + row + "\n"


def write_metrics(m: Metrics, csv_path: Path, kv_path: Path) -> None:
    Path(csv_path).write_text(metrics_csv_text(m))
    Path(kv_path).write_text("\n".join(metrics_kv_lines(m)) + "\n")


def write_manifest(path: Path, scenario_text: str, seed: int | None,
                   outputs: dict[str, str]) -> None:
    payload = {
        "tool": "platoonsec",
        "version": TOOL_VERSION,
        "seed": seed,
        "scenario": scenario_text,
        "outputs": outputs,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def render_run_figures(tr: Trace, sc: Scenario, out_dir: Path) -> list[Path]:
    """Render the run's standard figures next to the delimited output.

    Velocity and spacing error evolutions, the event/attack timeline and,
    for the dynamic scheme, the threshold variables.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    n = tr.triggers.shape[1]
    time = tr.time
    paths: list[Path] = []

    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(n):
        ax.plot(time, tr.delta[:, i, 1], label=f"vehicle {i + 1}", lw=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("velocity error [m/s]")
    ax.legend(ncol=3, fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / "velocity_errors.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for i in range(n):
        ax.plot(time, tr.delta[:, i, 0], label=f"vehicle {i + 1}", lw=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("spacing error [m]")
    ax.legend(ncol=3, fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / "spacing_errors.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7, 3.2))
    for i in range(n):
        steps = np.flatnonzero(tr.triggers[:, i])
        ax.scatter(time[steps], np.full(len(steps), i + 1), s=2, marker="|")
    active = np.flatnonzero(tr.attack_active.any(axis=1))
    if len(active):
        for start, stop in _runs(active):
            ax.axvspan(time[start], time[stop], color="red", alpha=0.15, lw=0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("vehicle")
    ax.set_yticks(range(1, n + 1))
    ax.set_title("trigger events (attack spans shaded)")
    fig.tight_layout()
    path = out_dir / "events.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    if sc.scheme == "dynamic":
        fig, ax = plt.subplots(figsize=(7, 4))
        for i in range(n):
            ax.plot(time, tr.mu[:, i], label=f"vehicle {i + 1}", lw=1.0)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("threshold variable")
        ax.set_yscale("log")
        ax.legend(ncol=3, fontsize=8)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out_dir / "thresholds.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def _runs(indices: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous runs of sorted integer indices as (first, last) pairs."""
    runs = []
    start = prev = int(indices[0])
    for v in indices[1:]:
        v = int(v)
        if v == prev + 1:
            prev = v
            continue
        runs.append((start, prev))
        start = prev = v
    runs.append((start, prev))
    return runs
