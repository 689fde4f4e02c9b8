"""Scenario files.

A scenario is a TOML document with the sections ``[run]``, ``[[nodes]]``,
``[[paths]]``, ``[electrodes]``, ``[egm]``, ``[afterpotential]``,
``[sensing]`` (with ``[[sensing.schedule]]``), ``[device]`` and
``[[overrides]]``.  ``run.extends`` names another scenario (built-in name or
file) whose content is used as the base; nodes and paths are merged by id,
other tables key by key, and lists are replaced.  See ``docs/scenario-format.md``
for the full grammar.
"""

from __future__ import annotations

import copy
import math
import os
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .afterpotential import DEFAULT_K, DEFAULT_TAU
from .device import DeviceParams
from .egm import DEFAULT_DIPOLE_MOMENTS, DEFAULT_R_MIN, Electrode, validate_electrodes
from .errors import ConfigError, ScenarioParseError
from .network import HeartNetwork, NodeSpec, PathSpec
from .sensing import (DEFAULT_ATRIAL_THRESHOLD, DEFAULT_VENTRICULAR_THRESHOLD,
                      CoefficientSchedule, SensingCoefficients)

SEARCH_PATH_ENV = "CARDIO_SCENARIO_PATH"
BUILTIN_DIR = Path(__file__).parent / "scenarios"

_SECTIONS = {
    "run": {"duration", "dt", "extends", "description"},
    "nodes": {"id", "position", "chamber", "erp", "apd", "intrinsic_cycle_length", "first_activation"},
    "paths": {"id", "a", "b", "velocity", "chamber", "dipole_moment"},
    "electrodes": {"adt", "adr", "vdt", "vdr"},
    "egm": {"r_min", "dipole_atrial", "dipole_ventricular", "dipole_junctional", "dipole_repolarization"},
    "afterpotential": {"k", "tau", "v_s"},
    "sensing": {"atrial_threshold", "ventricular_threshold", "schedule"},
    "schedule": {"start", "a", "b", "c_va", "c_av", "d", "e"},
    "device": {"enabled", "lri", "avi", "vrp", "pvarp", "pavb", "post_vp_atrial_blanking", "paab",
               "pulse_width", "pulse_amplitude", "atrial_pace_node", "ventricular_pace_node"},
    "overrides": {"path", "start", "velocity"},
}
_LIST_SECTIONS = ("nodes", "paths", "overrides")


@dataclass(frozen=True)
class VelocityOverride:
    path_id: str
    start: float
    velocity: float


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    dt: float
    nodes: tuple
    paths: tuple
    electrodes: tuple
    schedule: CoefficientSchedule
    description: str = ""
    r_min: float = DEFAULT_R_MIN
    dipole_moments: dict = field(default_factory=lambda: dict(DEFAULT_DIPOLE_MOMENTS))
    k: float = DEFAULT_K
    tau: float = DEFAULT_TAU
    v_s: Optional[float] = None
    atrial_threshold: float = DEFAULT_ATRIAL_THRESHOLD
    ventricular_threshold: float = DEFAULT_VENTRICULAR_THRESHOLD
    device: DeviceParams = field(default_factory=DeviceParams)
    device_enabled: bool = True
    atrial_pace_node: Optional[str] = None
    ventricular_pace_node: Optional[str] = None
    overrides: tuple = ()

    def __post_init__(self):
        validate_scenario(self)

    @property
    def n_frames(self) -> int:
        return int(round(self.duration / self.dt))

    def build_network(self) -> HeartNetwork:
        return HeartNetwork(self.nodes, self.paths)

    def with_run(self, duration=None, dt=None) -> "Scenario":
        """Copy with run-length overrides (re-validated)."""
        kw = {}
        if duration is not None:
            kw["duration"] = duration
        if dt is not None:
            kw["dt"] = dt
        return replace(self, **kw)


def validate_scenario(s: Scenario) -> None:
    if not (math.isfinite(s.duration) and s.duration > 0):
        raise ConfigError(f"run.duration must be > 0, got {s.duration}")
    if not (math.isfinite(s.dt) and s.dt > 0):
        raise ConfigError(f"run.dt must be > 0, got {s.dt}")
    if s.n_frames < 1:
        raise ConfigError("run.duration must cover at least one dt")
    net = HeartNetwork(s.nodes, s.paths)  # ids, endpoints, lengths
    validate_electrodes(s.electrodes)
    if not s.r_min > 0:
        raise ConfigError("egm.r_min must be > 0")
    for name, c in s.dipole_moments.items():
        if not (math.isfinite(c) and c > 0):
            raise ConfigError(f"egm.dipole_{name} must be > 0")
    if not s.tau > 0:
        raise ConfigError("afterpotential.tau must be > 0")
    if not math.isfinite(s.k):
        raise ConfigError("afterpotential.k must be finite")
    for name in ("atrial_threshold", "ventricular_threshold"):
        if not getattr(s, name) > 0:
            raise ConfigError(f"sensing.{name} must be > 0")
    for field_name in ("atrial_pace_node", "ventricular_pace_node"):
        nid = getattr(s, field_name)
        if nid is not None and nid not in net.nodes:
            raise ConfigError(f"device.{field_name}: unknown node {nid!r}")
    last = -math.inf
    for ov in s.overrides:
        if ov.path_id not in net.paths:
            raise ConfigError(f"overrides: unknown path {ov.path_id!r}")
        if not ov.velocity > 0:
            raise ConfigError(f"overrides: velocity for {ov.path_id!r} must be > 0")
        if not ov.start >= 0:
            raise ConfigError(f"overrides: start for {ov.path_id!r} must be >= 0")
        if ov.start < last:
            raise ConfigError("overrides must be sorted by start time")
        last = ov.start


# --------------------------------------------------------------------------
# text -> raw dict


def _decode(text: str, source: Optional[str]) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = getattr(exc, "msg", None) or str(exc)
        if line is None:
            m = re.search(r"\(at line (\d+), column (\d+)\)", str(exc))
            if m:
                line, col = int(m.group(1)), int(m.group(2))
                msg = str(exc)[: m.start()].strip()
        raise ScenarioParseError(msg, line, col, source) from None


def _key_location(text: str, key: str):
    pat = re.compile(r"^(\s*)" + re.escape(key) + r"\s*=", re.M)
    m = pat.search(text)
    if m is None:
        pat = re.compile(r"^\s*\[+\s*(?:[\w.]+\.)?" + re.escape(key) + r"\s*\]+", re.M)
        m = pat.search(text)
        if m is None:
            return None, None
        return text.count("\n", 0, m.start()) + 1, 1
    return text.count("\n", 0, m.start()) + 1, len(m.group(1)) + 1


def _check_keys(raw: dict, text: str, source: Optional[str]) -> None:
    def unknown(key, where):
        line, col = _key_location(text, key)
        raise ScenarioParseError(f"unknown key {key!r} in {where}", line, col, source)

    for sec, body in raw.items():
        if sec not in _SECTIONS or sec == "schedule":
            unknown(sec, "top level")
        if sec in _LIST_SECTIONS:
            if not isinstance(body, list):
                raise ScenarioParseError(f"[{sec}] must be an array of tables ([[{sec}]])", *_key_location(text, sec), source)
            for item in body:
                for k in item:
                    if k not in _SECTIONS[sec]:
                        unknown(k, f"[[{sec}]]")
            continue
        if not isinstance(body, dict):
            raise ScenarioParseError(f"{sec!r} must be a table", *_key_location(text, sec), source)
        for k in body:
            if k not in _SECTIONS[sec]:
                unknown(k, f"[{sec}]")
        if sec == "sensing" and "schedule" in body:
            if not isinstance(body["schedule"], list):
                raise ScenarioParseError("sensing.schedule must be an array of tables", *_key_location(text, "schedule"), source)
            for item in body["schedule"]:
                for k in item:
                    if k not in _SECTIONS["schedule"]:
                        unknown(k, "[[sensing.schedule]]")


def _check_unique_ids(raw: dict) -> None:
    for sec in ("nodes", "paths"):
        seen = set()
        for item in raw.get(sec, []):
            if "id" not in item:
                raise ConfigError(f"[[{sec}]] entry without id")
            if item["id"] in seen:
                raise ConfigError(f"duplicate {sec[:-1]} id {item['id']!r}")
            seen.add(item["id"])


def _merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for sec, body in top.items():
        if sec in ("nodes", "paths"):
            merged = {item["id"]: dict(item) for item in out.get(sec, [])}
            for item in body:
                merged.setdefault(item["id"], {}).update(item)
            out[sec] = list(merged.values())
        elif isinstance(body, dict) and isinstance(out.get(sec), dict):
            out[sec] = {**out[sec], **copy.deepcopy(body)}
        else:
            out[sec] = copy.deepcopy(body)
    return out


def search_dirs():
    dirs = [Path(p) for p in os.environ.get(SEARCH_PATH_ENV, "").split(os.pathsep) if p]
    return dirs + [BUILTIN_DIR]


def builtin_names():
    return sorted(p.stem for p in BUILTIN_DIR.glob("*.toml"))


def find_scenario(ref: str, relative_to: Optional[Path] = None) -> Path:
    """Resolve a scenario reference (file path or scenario name) to a file."""
    p = Path(ref)
    candidates = []
    if relative_to is not None and not p.is_absolute():
        candidates += [relative_to / ref, relative_to / f"{ref}.toml"]
    candidates.append(p)
    for d in search_dirs():
        candidates.append(d / ref)
        if not ref.endswith(".toml"):
            candidates.append(d / f"{ref}.toml")
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"scenario {ref!r} not found (searched cwd, ${SEARCH_PATH_ENV}, built-ins)")


def _load_raw(text: str, source: Optional[str], base_dir: Optional[Path], seen=()) -> dict:
    raw = _decode(text, source)
    _check_keys(raw, text, source)
    _check_unique_ids(raw)
    ext = raw.get("run", {}).get("extends")
    if ext is None:
        return raw
    if not isinstance(ext, str):
        raise ConfigError("run.extends must be a string")
    path = find_scenario(ext, base_dir)
    key = str(path.resolve())
    if key in seen:
        raise ConfigError(f"circular run.extends through {ext!r}")
    base = _load_raw(path.read_text(), str(path), path.parent, seen + (key,))
    merged = _merge(base, raw)
    merged["run"].pop("extends", None)
    return merged


# --------------------------------------------------------------------------
# raw dict -> Scenario


def _num(d: dict, key: str, where: str, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{where}: missing required field {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _point(v, where: str) -> tuple:
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
        raise ConfigError(f"{where} must be a two-element list of numbers")
    return (float(v[0]), float(v[1]))


def _build(raw: dict, name: str) -> Scenario:
    run = raw.get("run", {})
    nodes = []
    for item in raw.get("nodes", []):
        where = f"node {item['id']!r}"
        icl = item.get("intrinsic_cycle_length")
        if icl == "none" or icl is None:
            icl = None
        else:
            icl = _num(item, "intrinsic_cycle_length", where)
        nodes.append(NodeSpec(
            id=item["id"],
            position=_point(item.get("position"), f"{where}.position"),
            erp=_num(item, "erp", where, required=True),
            apd=_num(item, "apd", where, required=True),
            chamber=item.get("chamber", "atrial"),
            intrinsic_cycle_length=icl,
            first_activation=_num(item, "first_activation", where) if icl is not None else None,
        ))
    paths = []
    for item in raw.get("paths", []):
        where = f"path {item['id']!r}"
        for k in ("a", "b", "velocity", "chamber"):
            if k not in item:
                raise ConfigError(f"{where}: missing required field {k!r}")
        paths.append(PathSpec(
            id=item["id"], endpoint_a=item["a"], endpoint_b=item["b"],
            conduction_velocity=_num(item, "velocity", where),
            chamber=item["chamber"],
            dipole_moment=_num(item, "dipole_moment", where),
        ))
    el = raw.get("electrodes", {})
    electrodes = tuple(Electrode(k, _point(v, f"electrodes.{k}")) for k, v in el.items())

    egm = raw.get("egm", {})
    moments = dict(DEFAULT_DIPOLE_MOMENTS)
    for k in moments:
        moments[k] = _num(egm, "dipole_" + k, "egm", moments[k])

    ap = raw.get("afterpotential", {})
    sens = raw.get("sensing", {})
    entries = []
    for item in sens.get("schedule", [{"start": 0}]):
        coeffs = {k: _num(item, k, "sensing.schedule") for k in ("a", "b", "c_va", "c_av", "d", "e") if k in item}
        entries.append((_num(item, "start", "sensing.schedule", required=True), SensingCoefficients(**coeffs)))

    dev = raw.get("device", {})
    dkw = {k: _num(dev, k, "device") for k in _SECTIONS["device"]
           if k in dev and k not in ("enabled", "atrial_pace_node", "ventricular_pace_node")}
    enabled = dev.get("enabled", True)
    if not isinstance(enabled, bool):
        raise ConfigError("device.enabled must be true or false")
    overrides = tuple(
        VelocityOverride(str(o.get("path")), _num(o, "start", "overrides", required=True),
                         _num(o, "velocity", "overrides", required=True))
        for o in raw.get("overrides", [])
    )
    return Scenario(
        name=name,
        description=str(run.get("description", "")),
        duration=_num(run, "duration", "run", required=True),
        dt=_num(run, "dt", "run", 0.1),
        nodes=tuple(nodes),
        paths=tuple(paths),
        electrodes=electrodes,
        schedule=CoefficientSchedule(entries),
        r_min=_num(egm, "r_min", "egm", DEFAULT_R_MIN),
        dipole_moments=moments,
        k=_num(ap, "k", "afterpotential", DEFAULT_K),
        tau=_num(ap, "tau", "afterpotential", DEFAULT_TAU),
        v_s=_num(ap, "v_s", "afterpotential"),
        atrial_threshold=_num(sens, "atrial_threshold", "sensing", DEFAULT_ATRIAL_THRESHOLD),
        ventricular_threshold=_num(sens, "ventricular_threshold", "sensing", DEFAULT_VENTRICULAR_THRESHOLD),
        device=DeviceParams(**dkw),
        device_enabled=enabled,
        atrial_pace_node=dev.get("atrial_pace_node"),
        ventricular_pace_node=dev.get("ventricular_pace_node"),
        overrides=overrides,
    )


def load_scenario(text: str, name: str = "scenario", source: Optional[str] = None,
                  base_dir: Optional[Path] = None) -> Scenario:
    """Parse and validate scenario text."""
    raw = _load_raw(text, source, base_dir)
    return _build(raw, name)


def load_scenario_file(ref) -> Scenario:
    """Load a scenario by file path or by name (search path, then built-ins)."""
    path = find_scenario(str(ref))
    return load_scenario(path.read_text(), name=path.stem, source=str(path), base_dir=path.parent)
