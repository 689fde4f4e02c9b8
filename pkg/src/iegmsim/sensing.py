"""Sensing controller: lead-channel composition and threshold detection."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from .errors import ConfigError

DEFAULT_ATRIAL_THRESHOLD = 0.5  # mV
DEFAULT_VENTRICULAR_THRESHOLD = 2.0  # mV


@dataclass(frozen=True)
class SensingCoefficients:
    """Gains selecting which signal sources reach the device.

    ``a``/``d`` are the atrial/ventricular channel gains, ``b`` the ring
    weight (0 unipolar, 1 bipolar), ``e`` the T-wave gain and ``c_va``/``c_av``
    the crosstalk gains.
    """

    a: float = 1.0
    b: float = 1.0
    c_va: float = 0.0
    c_av: float = 0.0
    d: float = 1.0
    e: float = 0.2

    def __post_init__(self):
        for name in ("a", "b", "c_va", "c_av", "d", "e"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"sensing coefficient {name} must be finite")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigError(f"sensing coefficient b must lie in [0, 1], got {self.b}")


class CoefficientSchedule:
    """Piecewise-constant, left-closed schedule of sensing coefficients."""

    def __init__(self, entries):
        entries = [(float(t), c) for t, c in entries]
        if not entries:
            raise ConfigError("coefficient schedule must not be empty")
        if entries[0][0] != 0.0:
            raise ConfigError("coefficient schedule must start at t = 0")
        starts = [t for t, _ in entries]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("coefficient schedule start times must be strictly increasing")
        self.entries = entries
        self._starts = starts

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"CoefficientSchedule({self.entries!r})"


def coefficients_at(schedule: CoefficientSchedule, t: float) -> SensingCoefficients:
    i = bisect.bisect_right(schedule._starts, t) - 1
    return schedule.entries[max(i, 0)][1]


def compose_aegm(frame, v_vpa: float, c: SensingCoefficients) -> float:
    return c.a * (frame.v_adt - c.b * frame.v_adr + c.c_va * v_vpa)


def compose_vegm(frame, v_apa: float, c: SensingCoefficients) -> float:
    return c.d * (frame.v_vdt - c.b * frame.v_vdr + c.e * (frame.v_vrt - c.b * frame.v_vrr) + c.c_av * v_apa)


def threshold_detect(egm: float, threshold: float, prev_above: bool):
    """Rectified comparison; returns ``(raw, rising_edge)``."""
    if not threshold > 0:
        raise ConfigError("sensing threshold must be > 0")
    raw = abs(egm) >= threshold
    return raw, raw and not prev_above
