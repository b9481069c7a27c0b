"""CSV and SVG output for scenario logs.

Every file is written to a temporary sibling and renamed into place, so a
reader never sees a partial file.
"""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path
from typing import List, Optional

from .scenario import TimeSeriesLog

COLUMNS = ("t", "V", "B", "C", "D", "omega_a", "omega_b", "active", "feasible", "violation")
TRACE_COLUMNS = ("t", "trace_a", "trace_b", "mass", "boundary_inflow")


def _num(x: Optional[float]) -> str:
    return "" if x is None else format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def snapshot_name(t: float) -> str:
    return f"snapshot_{t:g}.csv"


def export_csv(log: TimeSeriesLog, path) -> List[Path]:
    """Write the time series to ``path`` and snapshots plus ``traces.csv`` beside it.

    Absent inputs are empty fields. ``traces.csv`` carries the certified
    boundary pair of each step so the trace inequalities can be re-checked.
    """
    if not log.rows:
        raise ValueError("cannot export an empty log")
    path = Path(path)
    rows = (
        (
            _num(r.t), _num(r.V), _num(r.B), _num(r.C), _num(r.D),
            _num(r.omega_a), _num(r.omega_b), r.active,
            "true" if r.feasible else "false", _num(r.violation),
        )
        for r in log.rows
    )
    _atomic_write(path, _table(COLUMNS, rows))
    written = [path]

    traces = path.with_name("traces.csv")
    _atomic_write(
        traces,
        _table(TRACE_COLUMNS, ((_num(getattr(r, c)) for c in TRACE_COLUMNS) for r in log.rows)),
    )
    written.append(traces)

    for t, snap in sorted(log.snapshots.items()):
        target = path.with_name(snapshot_name(t))
        _atomic_write(target, _table(("x", "u"), ((_num(x), _num(u)) for x, u in zip(snap.grid.centers, snap.u))))
        written.append(target)
    return written


def export_plots(log: TimeSeriesLog, out_dir) -> List[Path]:
    """Render ``V.svg``, ``B.svg``, ``inputs.svg`` and, with snapshots, ``snapshots.svg``."""
    if not log.rows:
        raise ValueError("cannot plot an empty log")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    t = log.column("t")
    written = []

    def save(fig, name):
        buf = io.StringIO()
        with matplotlib.rc_context({"svg.hashsalt": "lwrctl"}):
            fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
        target = out_dir / name
        _atomic_write(target, buf.getvalue())
        written.append(target)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, log.column("V"))
    ax.set(xlabel="t", ylabel="V(t)", title="Lyapunov functional")
    save(fig, "V.svg")

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, log.column("B"))
    ax.axhline(0.0, color="k", linewidth=0.8, linestyle="--")
    ax.set(xlabel="t", ylabel="B(t)", title="Barrier functional")
    save(fig, "B.svg")

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, label in (("omega_a", "omega_a"), ("omega_b", "omega_b")):
        vals = [getattr(r, name) for r in log.rows]
        if any(v is not None for v in vals):
            ax.plot(t, [float("nan") if v is None else v for v in vals], label=label)
    if ax.lines:
        ax.legend()
    ax.set(xlabel="t", ylabel="input density", title="Boundary inputs")
    save(fig, "inputs.svg")

    if log.snapshots:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for ts, snap in sorted(log.snapshots.items()):
            ax.plot(snap.grid.centers, snap.u, label=f"t = {ts:g}")
        ax.legend()
        ax.set(xlabel="x", ylabel="u(t, x)", title="Density snapshots")
        save(fig, "snapshots.svg")
    return written
