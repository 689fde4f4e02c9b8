"""Trace storage, event summaries and CSV output."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .device import MARKER_KINDS

CSV_COLUMNS = ("t_ms", "aegm_mv", "vegm_mv", "as_raw", "vs_raw", "v_adt", "v_adr", "v_vdt",
               "v_vdr", "v_vrt", "v_vrr", "v_apa", "v_vpa", "marker")
_SIGNALS = ("aegm", "vegm", "v_adt", "v_adr", "v_vdt", "v_vdr", "v_vrt", "v_vrr", "v_apa", "v_vpa")


@dataclass
class TraceFrame:
    t: float
    aegm: float
    vegm: float
    as_raw: bool
    vs_raw: bool
    marker: Optional[str]
    v_adt: float
    v_adr: float
    v_vdt: float
    v_vdr: float
    v_vrt: float
    v_vrr: float
    v_apa: float
    v_vpa: float


class Trace:
    """Column store of one simulation run.

    ``markers`` holds every device event; a frame's ``marker`` field joins
    the kinds emitted in that step with ``|``.
    """

    def __init__(self, name: str = "", dt: float = 0.1):
        self.name = name
        self.dt = dt
        self.t = []
        self.as_raw = []
        self.vs_raw = []
        for s in _SIGNALS:
            setattr(self, s, [])
        self.markers = []  # DeviceEvent
        self.marker_at = {}  # frame index -> "AS|AR"
        self.activations = []
        self.conduction_events = []

    def __len__(self):
        return len(self.t)

    def append(self, t, aegm, vegm, as_raw, vs_raw, pot, v_apa, v_vpa, markers=()):
        i = len(self.t)
        self.t.append(t)
        self.aegm.append(aegm)
        self.vegm.append(vegm)
        self.as_raw.append(as_raw)
        self.vs_raw.append(vs_raw)
        self.v_adt.append(pot.v_adt)
        self.v_adr.append(pot.v_adr)
        self.v_vdt.append(pot.v_vdt)
        self.v_vdr.append(pot.v_vdr)
        self.v_vrt.append(pot.v_vrt)
        self.v_vrr.append(pot.v_vrr)
        self.v_apa.append(v_apa)
        self.v_vpa.append(v_vpa)
        if markers:
            self.markers.extend(markers)
            self.marker_at[i] = "|".join(m.kind for m in markers)

    def frame(self, i: int) -> TraceFrame:
        return TraceFrame(self.t[i], self.aegm[i], self.vegm[i], self.as_raw[i], self.vs_raw[i],
                          self.marker_at.get(i), self.v_adt[i], self.v_adr[i], self.v_vdt[i],
                          self.v_vdr[i], self.v_vrt[i], self.v_vrr[i], self.v_apa[i], self.v_vpa[i])

    def __iter__(self):
        return (self.frame(i) for i in range(len(self)))

    def marker_times(self, kind: str):
        return [m.timestamp for m in self.markers if m.kind == kind]

    def activation_times(self, chamber: str):
        return [a.timestamp for a in self.activations if a.chamber == chamber]


def beat_onsets(times, gap: float):
    """Group activation times into beats; a new beat starts after ``gap`` ms of quiet."""
    onsets = []
    last = None
    for t in sorted(times):
        if last is None or t - last >= gap:
            onsets.append(t)
        last = t
    return onsets


def _per_beat(onsets, sense_times):
    counts = []
    for i, start in enumerate(onsets):
        end = onsets[i + 1] if i + 1 < len(onsets) else float("inf")
        counts.append(sum(1 for s in sense_times if start <= s < end))
    return counts


@dataclass
class EventSummary:
    counts: dict = field(default_factory=lambda: {k: 0 for k in MARKER_KINDS})
    atrial_beats: int = 0
    ventricular_beats: int = 0
    as_per_atrial_beat: Counter = field(default_factory=Counter)
    vs_per_ventricular_beat: Counter = field(default_factory=Counter)

    @staticmethod
    def histogram_peak(hist: Counter):
        """Most frequent per-beat count (ties resolved towards the smaller count)."""
        if not hist:
            return None
        return min(hist, key=lambda c: (-hist[c], c))

    @property
    def as_peak(self):
        return self.histogram_peak(self.as_per_atrial_beat)

    @property
    def vs_peak(self):
        return self.histogram_peak(self.vs_per_ventricular_beat)

    def lines(self):
        out = [f"{k}={self.counts[k]}" for k in MARKER_KINDS]
        out.append(f"atrial_beats={self.atrial_beats}")
        out.append(f"ventricular_beats={self.ventricular_beats}")
        out.append("as_per_atrial_beat=" + ",".join(f"{c}:{n}" for c, n in sorted(self.as_per_atrial_beat.items())))
        out.append("vs_per_ventricular_beat=" + ",".join(f"{c}:{n}" for c, n in sorted(self.vs_per_ventricular_beat.items())))
        return out


# activations of a chamber closer together than this belong to one beat
BEAT_GAP_MS = 200.0


def summarize_events(trace: Trace, beat_gap: float = BEAT_GAP_MS) -> EventSummary:
    """Marker counts plus sensed-events-per-beat histograms.

    A beat is a run of activations of one chamber's nodes with no gap of
    ``beat_gap`` ms or more; senses are attributed to the most recent beat
    onset of their chamber.
    """
    s = EventSummary()
    for m in trace.markers:
        s.counts[m.kind] += 1
    a_onsets = beat_onsets(trace.activation_times("atrial"), beat_gap)
    v_onsets = beat_onsets(trace.activation_times("ventricular"), beat_gap)
    s.atrial_beats = len(a_onsets)
    s.ventricular_beats = len(v_onsets)
    s.as_per_atrial_beat = Counter(_per_beat(a_onsets, trace.marker_times("AS")))
    s.vs_per_ventricular_beat = Counter(_per_beat(v_onsets, trace.marker_times("VS")))
    return s


def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    return f"{x:.6g}"


def _fmt_t(t: float) -> str:
    s = f"{t:.6f}".rstrip("0").rstrip(".")
    return s if s != "-0" else "0"


def write_trace_csv(trace: Trace, sink) -> None:
    """Write the trace as CSV to a path or a text file object."""
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        try:
            with open(sink, "w", newline="") as fh:
                _write_rows(trace, fh)
        except OSError as exc:
            raise OSError(f"cannot write trace CSV to {sink}: {exc}") from exc
        return
    try:
        _write_rows(trace, sink)
    except OSError as exc:
        raise OSError(f"cannot write trace CSV: {exc}") from exc


def _write_rows(trace: Trace, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    cols = [trace.aegm, trace.vegm]
    rest = [trace.v_adt, trace.v_adr, trace.v_vdt, trace.v_vdr, trace.v_vrt, trace.v_vrr,
            trace.v_apa, trace.v_vpa]
    marker_at = trace.marker_at
    for i, t in enumerate(trace.t):
        row = [_fmt_t(t), _fmt(cols[0][i]), _fmt(cols[1][i]),
               "1" if trace.as_raw[i] else "0", "1" if trace.vs_raw[i] else "0"]
        row.extend(_fmt(c[i]) for c in rest)
        row.append(marker_at.get(i, ""))
        w.writerow(row)


def trace_csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    _write_rows(trace, buf)
    return buf.getvalue()


def read_trace_csv(path) -> dict:
    """Read a trace CSV back into columns (floats, bools as 0/1 ints, marker strings)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header = rows[0]
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    data = {c: [] for c in CSV_COLUMNS}
    for r in rows[1:]:
        for c, v in zip(CSV_COLUMNS, r):
            if c == "marker":
                data[c].append(v)
            elif c in ("as_raw", "vs_raw"):
                data[c].append(int(v))
            else:
                data[c].append(float(v))
    if not data["t_ms"]:
        raise ValueError(f"{path}: CSV has no frames")
    return data
