"""Static multi-channel figures of a trace.

Panels, top to bottom: AEGM, AS_raw, VEGM, VS_raw, sensed/refractory device
markers, pacing pulses.  The time axis is in seconds.  Output is
byte-for-byte reproducible for a given input (fixed SVG hash salt, no
creation date).
"""

from __future__ import annotations

import matplotlib
from matplotlib.figure import Figure

SENSE_COLORS = {"AS": "tab:blue", "VS": "tab:green", "AR": "tab:gray", "VR": "tab:gray"}
PACE_COLORS = {"AP": "tab:red", "VP": "tab:purple"}

_RC = {
    "svg.hashsalt": "iegmsim",
    "path.simplify": False,
    "font.size": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def window_rows(columns: dict, t_start_ms=None, t_end_ms=None):
    """Indices of frames with ``t_start <= t <= t_end`` (ms, inclusive)."""
    lo = -float("inf") if t_start_ms is None else t_start_ms
    hi = float("inf") if t_end_ms is None else t_end_ms
    return [i for i, t in enumerate(columns["t_ms"]) if lo <= t <= hi]


def _marker_ticks(ax, times, labels, colors, span):
    # labels closer than 1% of the window are stacked so they stay legible
    last, level = None, 0
    for t, lab in zip(times, labels):
        level = level + 1 if last is not None and t - last < 0.01 * span else 0
        last = t
        c = colors.get(lab, "black")
        ax.vlines(t, 0.0, 1.0, colors=c, linewidth=1.0)
        ax.text(t, 1.05 + 0.35 * (level % 3), lab, color=c, ha="center", va="bottom", fontsize=6)
    ax.set_ylim(0, 2.1)
    ax.set_yticks([])


def plot_trace(columns: dict, out, t_start_ms=None, t_end_ms=None, title=None, fmt=None) -> int:
    """Render the trace columns (as read from CSV) to ``out``.

    Returns the number of frames drawn.
    """
    rows = window_rows(columns, t_start_ms, t_end_ms)
    if not rows:
        raise ValueError("no frames in the requested window")
    ts = [columns["t_ms"][i] / 1000.0 for i in rows]
    span = max(ts[-1] - ts[0], 1e-3)

    def col(name):
        c = columns[name]
        return [c[i] for i in rows]

    sensed_t, sensed_l, paced_t, paced_l = [], [], [], []
    for i in rows:
        m = columns["marker"][i]
        if not m:
            continue
        for kind in m.split("|"):
            if kind in PACE_COLORS:
                paced_t.append(columns["t_ms"][i] / 1000.0)
                paced_l.append(kind)
            else:
                sensed_t.append(columns["t_ms"][i] / 1000.0)
                sensed_l.append(kind)

    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(10, 7))
        axes = fig.subplots(6, 1, sharex=True, gridspec_kw={"height_ratios": [3, 1, 3, 1, 1.2, 1.2]})
        ax = axes[0]
        ax.plot(ts, col("aegm_mv"), color="tab:blue", linewidth=0.8, gid="aegm")
        ax.set_ylabel("AEGM (mV)")
        ax = axes[1]
        ax.plot(ts, col("as_raw"), color="tab:blue", linewidth=0.8, drawstyle="steps-post", gid="as_raw")
        ax.set_ylim(-0.2, 1.2)
        ax.set_yticks([0, 1])
        ax.set_ylabel("AS_raw")
        ax = axes[2]
        ax.plot(ts, col("vegm_mv"), color="tab:green", linewidth=0.8, gid="vegm")
        ax.set_ylabel("VEGM (mV)")
        ax = axes[3]
        ax.plot(ts, col("vs_raw"), color="tab:green", linewidth=0.8, drawstyle="steps-post", gid="vs_raw")
        ax.set_ylim(-0.2, 1.2)
        ax.set_yticks([0, 1])
        ax.set_ylabel("VS_raw")
        _marker_ticks(axes[4], sensed_t, sensed_l, SENSE_COLORS, span)
        axes[4].set_ylabel("sensed")
        _marker_ticks(axes[5], paced_t, paced_l, PACE_COLORS, span)
        axes[5].set_ylabel("paced")
        axes[5].set_xlabel("Time (s)")
        axes[5].set_xlim(ts[0], ts[0] + span)
        if title:
            fig.suptitle(title)
        fig.align_ylabels(axes)
        fig.tight_layout()
        fig.savefig(out, format=fmt, metadata={"Date": None} if _is_svg(out, fmt) else None)
    return len(rows)


def _is_svg(out, fmt) -> bool:
    if fmt is not None:
        return fmt == "svg"
    return str(out).lower().endswith(".svg")
