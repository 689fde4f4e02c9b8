"""Moving-dipole electrogram synthesis.

Every active front on a path is a dipole of moment ``C`` aligned with its
direction of travel.  The potential it produces at an electrode is

    V = polarity * C * cos(phi) / r**2

with ``r`` the dipole-electrode distance (clamped below at ``r_min``) and
``phi`` the angle between the travel direction and the dipole-to-electrode
vector.  Channels are plain superpositions over all active dipoles; no
distinction is made between local and far-field sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, SimulationFault
from .network import EventKind, PathGeometry

ELECTRODE_IDS = ("adt", "adr", "vdt", "vdr")
TIP_RING_SPACING = (2.0, 15.0)  # mm

DEFAULT_R_MIN = 2.0
DEFAULT_DIPOLE_MOMENTS = {
    "atrial": 40.0,
    "ventricular": 400.0,
    "junctional": 10.0,
    "repolarization": 80.0,
}


@dataclass(frozen=True)
class Electrode:
    id: str
    position: tuple


def validate_electrodes(electrodes) -> dict:
    """Check the four lead electrodes; returns them keyed by id."""
    by_id = {}
    for e in electrodes:
        if e.id not in ELECTRODE_IDS:
            raise ConfigError(f"unknown electrode id {e.id!r}; expected one of {ELECTRODE_IDS}")
        if e.id in by_id:
            raise ConfigError(f"duplicate electrode id {e.id!r}")
        if len(e.position) != 2 or not all(math.isfinite(c) for c in e.position):
            raise ConfigError(f"electrode {e.id!r}: position must be two finite numbers")
        by_id[e.id] = e
    missing = [i for i in ELECTRODE_IDS if i not in by_id]
    if missing:
        raise ConfigError(f"missing electrodes: {', '.join(missing)}")
    lo, hi = TIP_RING_SPACING
    for tip, ring in (("adt", "adr"), ("vdt", "vdr")):
        (x1, y1), (x2, y2) = by_id[tip].position, by_id[ring].position
        gap = math.hypot(x2 - x1, y2 - y1)
        if not lo <= gap <= hi:
            raise ConfigError(f"electrodes {tip}/{ring} are {gap:.3g} mm apart; expected {lo:g}-{hi:g} mm")
    return by_id


def dipole_position(geometry: PathGeometry, origin_end: str, elapsed: float, velocity: float):
    """Front position and unit travel direction after ``elapsed`` ms."""
    travel = geometry.length / velocity
    if elapsed < 0 or elapsed > travel * (1 + 1e-9) + 1e-9:
        raise ValueError(f"elapsed {elapsed} ms outside [0, {travel}] for this path")
    if origin_end == "a":
        (ox, oy), (ux, uy) = geometry.start, geometry.unit
    elif origin_end == "b":
        (ox, oy) = geometry.end
        ux, uy = -geometry.unit[0], -geometry.unit[1]
    else:
        raise ValueError(f"origin_end must be 'a' or 'b', got {origin_end!r}")
    s = velocity * elapsed
    return (ox + ux * s, oy + uy * s), (ux, uy)


def dipole_potential(point, direction, polarity, dipole_moment, electrode, r_min=DEFAULT_R_MIN) -> float:
    ex, ey = electrode.position if isinstance(electrode, Electrode) else electrode
    dx = ex - point[0]
    dy = ey - point[1]
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return 0.0
    cos_phi = (direction[0] * dx + direction[1] * dy) / dist
    r = dist if dist > r_min else r_min
    return polarity * dipole_moment * cos_phi / (r * r)


class EgmMode(Enum):
    IDLE = "Idle"
    EGM_I = "EGM_i"
    EGM_J = "EGM_j"
    EGM_IJ = "EGM_iandj"


@dataclass
class EgmAutomatonState:
    mode: EgmMode = EgmMode.IDLE
    t_i: float = 0.0
    t_j: float = 0.0
    t_ij: float = 0.0

    def elapsed(self, origin_end: str) -> float:
        base = self.t_i if origin_end == "a" else self.t_j
        return base + self.t_ij if self.mode is EgmMode.EGM_IJ else base


def advance_egm_clocks(state: EgmAutomatonState, dt: float) -> EgmAutomatonState:
    # only the clock of the current location flows
    m = state.mode
    if m is EgmMode.EGM_I:
        return EgmAutomatonState(m, state.t_i + dt, state.t_j, state.t_ij)
    if m is EgmMode.EGM_J:
        return EgmAutomatonState(m, state.t_i, state.t_j + dt, state.t_ij)
    if m is EgmMode.EGM_IJ:
        return EgmAutomatonState(m, state.t_i, state.t_j, state.t_ij + dt)
    return state


def egm_transition(state: EgmAutomatonState, kind: EventKind, timestamp=None, path_id="") -> EgmAutomatonState:
    """Discrete transition of the per-path EGM automaton."""
    base = kind.base
    m = state.mode
    if m is EgmMode.IDLE:
        if base is EventKind.CELL_I:
            return EgmAutomatonState(EgmMode.EGM_I, 0.0, 0.0, 0.0)
        if base is EventKind.CELL_J:
            return EgmAutomatonState(EgmMode.EGM_J, 0.0, 0.0, 0.0)
    elif m is EgmMode.EGM_I or m is EgmMode.EGM_J:
        if base is EventKind.CELL_IJ:
            if m is EgmMode.EGM_I:
                return EgmAutomatonState(EgmMode.EGM_IJ, state.t_i, 0.0, 0.0)
            return EgmAutomatonState(EgmMode.EGM_IJ, 0.0, state.t_j, 0.0)
        if base is EventKind.RELAY:
            return EgmAutomatonState()
    elif m is EgmMode.EGM_IJ:
        if base is EventKind.ANNI:
            return EgmAutomatonState()
    raise SimulationFault(f"event {kind.value} not enabled in EGM mode {m.value} on path {path_id!r}",
                          timestamp=timestamp, module="egm_synthesis")


@dataclass
class DipoleTracker:
    path_id: str
    origin_end: str
    start_time: float
    polarity: int
    dipole_moment: float
    velocity: float
    geometry: PathGeometry

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")
        if not self.dipole_moment > 0:
            raise ValueError("dipole_moment must be > 0")

    def position(self, elapsed: float):
        return dipole_position(self.geometry, self.origin_end, elapsed, self.velocity)


def step_egm_automaton(state: EgmAutomatonState, events, trackers: dict, *, geometry: PathGeometry,
                       polarity: int, dipole_moment: float):
    """Apply this step's events for one path.

    ``trackers`` maps origin end ('a'/'b') to the live :class:`DipoleTracker`.
    Returns the new state and a new tracker dict.
    """
    trackers = dict(trackers)
    for ev in events:
        state = egm_transition(state, ev.kind, ev.timestamp, ev.path_id)
        base = ev.kind.base
        if base is EventKind.CELL_I or base is EventKind.CELL_J:
            end = "a" if base is EventKind.CELL_I else "b"
            trackers = {end: DipoleTracker(ev.path_id, end, ev.timestamp, polarity, dipole_moment,
                                           ev.velocity, geometry)}
        elif base is EventKind.CELL_IJ:
            end = "b" if "a" in trackers else "a"
            trackers[end] = DipoleTracker(ev.path_id, end, ev.timestamp, polarity, dipole_moment,
                                          ev.velocity, geometry)
        else:
            trackers = {}
    return state, trackers


@dataclass
class PotentialsFrame:
    v_adt: float = 0.0
    v_adr: float = 0.0
    v_vdt: float = 0.0
    v_vdr: float = 0.0
    v_vrt: float = 0.0
    v_vrr: float = 0.0
    timestamp: float = 0.0


def superpose_potentials(trackers, electrodes, t, r_min=DEFAULT_R_MIN) -> PotentialsFrame:
    """Sum every tracker's contribution at each electrode.

    ``electrodes`` maps electrode id to :class:`Electrode`.  Depolarisation
    trackers feed the four lead channels; repolarisation trackers feed the
    two T-wave channels, evaluated at the ventricular tip and ring.
    """
    adt, adr, vdt, vdr = (electrodes[e].position for e in ELECTRODE_IDS)
    v_adt = v_adr = v_vdt = v_vdr = v_vrt = v_vrr = 0.0
    for tr in trackers:
        point, direction = tr.position(t - tr.start_time)
        c = tr.dipole_moment
        if tr.polarity > 0:
            v_adt += dipole_potential(point, direction, 1, c, adt, r_min)
            v_adr += dipole_potential(point, direction, 1, c, adr, r_min)
            v_vdt += dipole_potential(point, direction, 1, c, vdt, r_min)
            v_vdr += dipole_potential(point, direction, 1, c, vdr, r_min)
        else:
            v_vrt += dipole_potential(point, direction, -1, c, vdt, r_min)
            v_vrr += dipole_potential(point, direction, -1, c, vdr, r_min)
    return PotentialsFrame(v_adt, v_adr, v_vdt, v_vdr, v_vrt, v_vrr, t)
