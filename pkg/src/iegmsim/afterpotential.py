"""Pacing afterpotentials.

After a pacing pulse ends, the coupling capacitor discharges through the
lead/tissue load and leaves a small opposite-polarity residual
``V(t) = V_S * exp(-t / tau)``.  The atrial pulse feeds ``V_apa`` (seen on the
ventricular channel, AV crosstalk) and the ventricular pulse feeds ``V_vpa``
(seen on the atrial channel, VA crosstalk).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConfigError

log = logging.getLogger(__name__)

DEFAULT_K = 0.5  # mV per (V * ms)
DEFAULT_TAU = 20.0  # ms


class StimEdge(Enum):
    START = "Stim_start"
    END = "Stim_end"


class ApMode(Enum):
    IDLE = "Idle"
    PA = "PA"


@dataclass(frozen=True)
class AfterpotentialState:
    v_s: float
    tau: float
    mode: ApMode = ApMode.IDLE
    t_end: float = 0.0  # absolute time of the Stim_end that started the decay

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("afterpotential tau must be > 0")
        if not math.isfinite(self.v_s):
            raise ConfigError("afterpotential V_S must be finite")


def initial_amplitude(pulse_amplitude: float, pulse_width: float, k: float = DEFAULT_K) -> float:
    """Residual amplitude, proportional to both pulse amplitude and width, opposite in sign."""
    return -k * pulse_amplitude * pulse_width


def on_stim_edge(state: AfterpotentialState, edge: StimEdge, now: float) -> AfterpotentialState:
    if edge is StimEdge.END:
        if state.mode is ApMode.PA:
            log.warning("Stim_end at t=%g ms while afterpotential still decaying; restarting decay", now)
        return replace(state, mode=ApMode.PA, t_end=now)
    if state.mode is ApMode.PA:
        return replace(state, mode=ApMode.IDLE, t_end=0.0)
    return state


def afterpotential_value(state: AfterpotentialState, now: float) -> float:
    if state.mode is ApMode.IDLE:
        return 0.0
    return state.v_s * math.exp(-(now - state.t_end) / state.tau)
