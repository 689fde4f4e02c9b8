"""DDD pacemaker timing cycles.

The device only sees rising threshold edges on its two channels.  Atrial
edges are refractory (``AR``) inside PVARP, post-ventricular-pace atrial
blanking and post-atrial atrial blanking; ventricular edges are refractory
(``VR``) inside VRP and post-atrial-pace ventricular blanking.  Refractory
markers carry the name of the window that caught them.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError

EPS = 1e-9
NEVER = -math.inf

MARKER_KINDS = ("AS", "VS", "AR", "VR", "AP", "VP")


@dataclass(frozen=True)
class DeviceParams:
    lri: float = 1000.0
    avi: float = 150.0
    vrp: float = 320.0
    pvarp: float = 250.0
    pavb: float = 44.0
    post_vp_atrial_blanking: float = 150.0
    # post-atrial atrial blanking, started by AS and AP
    paab: float = 50.0
    pulse_width: float = 0.4
    pulse_amplitude: float = 2.5

    def __post_init__(self):
        for name in ("lri", "avi", "vrp", "pvarp", "pavb", "post_vp_atrial_blanking",
                     "paab", "pulse_width", "pulse_amplitude"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"device {name} must be finite and >= 0, got {v}")
        if not self.avi < self.lri:
            raise ConfigError(f"device avi ({self.avi}) must be < lri ({self.lri})")
        if not self.pavb < self.avi:
            raise ConfigError(f"device pavb ({self.pavb}) must be < avi ({self.avi})")

    @property
    def atrial_escape(self) -> float:
        return self.lri - self.avi


@dataclass(frozen=True)
class DeviceEvent:
    kind: str
    timestamp: float
    window: Optional[str] = None  # refractory/blanking window for AR/VR


@dataclass
class DeviceState:
    params: DeviceParams = field(default_factory=DeviceParams)
    # timing reference: the last ventricular event (a virtual one at t = 0)
    last_v: float = 0.0
    avi_start: Optional[float] = None
    vrp_end: float = NEVER
    pvarp_end: float = NEVER
    pavb_end: float = NEVER
    pvab_end: float = NEVER
    paab_end: float = NEVER


def _atrial_window(s: DeviceState, now: float):
    if now < s.pvab_end - EPS:
        return "post_vp_atrial_blanking"
    if now < s.pvarp_end - EPS:
        return "pvarp"
    if now < s.paab_end - EPS:
        return "paab"
    return None


def _ventricular_window(s: DeviceState, now: float):
    if now < s.pavb_end - EPS:
        return "pavb"
    if now < s.vrp_end - EPS:
        return "vrp"
    return None


def _ventricular_event(s: DeviceState, now: float) -> None:
    p = s.params
    s.last_v = now
    s.avi_start = None
    s.vrp_end = now + p.vrp
    s.pvarp_end = now + p.pvarp


def device_step(state: DeviceState, as_edge: bool, vs_edge: bool, now: float, dt: float):
    """One timing step; returns ``(new_state, events)``.

    Within a step the ventricular edge is handled first, then the atrial
    edge, then AVI and atrial-escape expiry.  An atrial sense during a
    running AVI is counted but does not restart it.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    p = state.params
    if not (as_edge or vs_edge):
        if state.avi_start is not None:
            due = now >= state.avi_start + p.avi - EPS
        else:
            due = now >= state.last_v + p.lri - p.avi - EPS
        if not due:
            return state, []
    s = copy.copy(state)
    p = s.params
    events = []
    if vs_edge:
        win = _ventricular_window(s, now)
        if win:
            events.append(DeviceEvent("VR", now, win))
        else:
            events.append(DeviceEvent("VS", now))
            _ventricular_event(s, now)
    if as_edge:
        win = _atrial_window(s, now)
        if win:
            events.append(DeviceEvent("AR", now, win))
        else:
            events.append(DeviceEvent("AS", now))
            if s.avi_start is None:
                s.avi_start = now
            s.paab_end = now + p.paab
    if s.avi_start is not None:
        if now >= s.avi_start + p.avi - EPS:
            events.append(DeviceEvent("VP", now))
            _ventricular_event(s, now)
            s.pvab_end = now + p.post_vp_atrial_blanking
    elif now >= s.last_v + p.atrial_escape - EPS:
        events.append(DeviceEvent("AP", now))
        s.avi_start = now
        s.pavb_end = now + p.pavb
        s.paab_end = now + p.paab
    return s, events
