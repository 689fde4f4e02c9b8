"""Abstract node-and-path conduction network.

Nodes are reduced to a Rest/Refractory automaton with an optional intrinsic
timer.  Paths carry activation fronts between two nodes at a finite
conduction velocity and report the synchronisation events consumed by the
electrogram layer: a front leaving a node (``CellI``/``CellJ``), a second
front entering from the far end (``CellIandJ``), a front reaching the far
node (``Relay``) and two fronts colliding (``Anni``).  Ventricular paths
additionally carry negative repolarisation fronts (the ``...R`` events).

Endpoint ``a`` of a path plays the role of cell *i*, endpoint ``b`` of cell *j*.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .errors import ConfigError

EPS = 1e-9

NODE_CHAMBERS = ("atrial", "ventricular", "conduction")
PATH_CHAMBERS = ("atrial", "ventricular", "junctional")


class Phase(Enum):
    REST = "Rest"
    REFRACTORY = "Refractory"


class PathMode(Enum):
    IDLE = "Idle"
    ANTEGRADE = "Antegrade"  # single front travelling a -> b
    RETROGRADE = "Retrograde"  # single front travelling b -> a
    DOUBLE = "Double"  # two fronts travelling towards each other


class EventKind(Enum):
    CELL_I = "CellI"
    CELL_J = "CellJ"
    CELL_IJ = "CellIandJ"
    RELAY = "Relay"
    ANNI = "Anni"
    CELL_IR = "CellIr"
    CELL_JR = "CellJr"
    CELL_IJR = "CellIandJr"
    RELAY_R = "RelayR"
    ANNI_R = "AnniR"

    @property
    def is_repolarization(self) -> bool:
        return self.value.endswith("r") or self.value.endswith("R")

    @property
    def base(self) -> "EventKind":
        """Depolarisation kind with the same automaton meaning."""
        return _BASE_KIND[self]


_BASE_KIND = {
    EventKind.CELL_I: EventKind.CELL_I,
    EventKind.CELL_J: EventKind.CELL_J,
    EventKind.CELL_IJ: EventKind.CELL_IJ,
    EventKind.RELAY: EventKind.RELAY,
    EventKind.ANNI: EventKind.ANNI,
    EventKind.CELL_IR: EventKind.CELL_I,
    EventKind.CELL_JR: EventKind.CELL_J,
    EventKind.CELL_IJR: EventKind.CELL_IJ,
    EventKind.RELAY_R: EventKind.RELAY,
    EventKind.ANNI_R: EventKind.ANNI,
}
_REPOL_KIND = {v: k for k, v in _BASE_KIND.items() if k is not v}


@dataclass(frozen=True)
class ConductionEvent:
    kind: EventKind
    path_id: str
    timestamp: float
    # source node for launch events, destination node for Relay
    node: Optional[str] = None
    # launch velocity of the front created by a Cell* event
    velocity: Optional[float] = None


@dataclass(frozen=True)
class NodeSpec:
    id: str
    position: tuple
    erp: float
    apd: float
    chamber: str
    intrinsic_cycle_length: Optional[float] = None
    # first intrinsic firing; defaults to one cycle length after t = 0
    first_activation: Optional[float] = None

    def __post_init__(self):
        if self.chamber not in NODE_CHAMBERS:
            raise ConfigError(f"node {self.id!r}: chamber must be one of {NODE_CHAMBERS}, got {self.chamber!r}")
        if len(self.position) != 2 or not all(math.isfinite(c) for c in self.position):
            raise ConfigError(f"node {self.id!r}: position must be two finite numbers")
        if not self.erp > 0:
            raise ConfigError(f"node {self.id!r}: erp must be > 0")
        if not self.apd > 0:
            raise ConfigError(f"node {self.id!r}: apd must be > 0")
        icl = self.intrinsic_cycle_length
        if icl is not None and not icl > self.erp:
            raise ConfigError(f"node {self.id!r}: intrinsic_cycle_length must exceed erp")
        fa = self.first_activation
        if fa is not None and (icl is None or not fa > 0):
            raise ConfigError(f"node {self.id!r}: first_activation needs an intrinsic_cycle_length and must be > 0")


@dataclass(frozen=True)
class PathSpec:
    id: str
    endpoint_a: str
    endpoint_b: str
    conduction_velocity: float
    chamber: str
    dipole_moment: Optional[float] = None  # None -> chamber default

    def __post_init__(self):
        if self.chamber not in PATH_CHAMBERS:
            raise ConfigError(f"path {self.id!r}: chamber must be one of {PATH_CHAMBERS}, got {self.chamber!r}")
        if not self.conduction_velocity > 0:
            raise ConfigError(f"path {self.id!r}: conduction_velocity must be > 0")
        if self.endpoint_a == self.endpoint_b:
            raise ConfigError(f"path {self.id!r}: endpoints must differ")
        if self.dipole_moment is not None and not self.dipole_moment > 0:
            raise ConfigError(f"path {self.id!r}: dipole_moment must be > 0")


@dataclass(frozen=True)
class PathGeometry:
    start: tuple  # endpoint a
    end: tuple  # endpoint b
    length: float
    unit: tuple  # a -> b


@dataclass
class NodeState:
    phase: Phase = Phase.REST
    time_in_phase: float = 0.0
    last_activation: Optional[float] = None
    clock: float = 0.0


@dataclass
class PathState:
    mode: PathMode = PathMode.IDLE
    clock_a: float = 0.0
    clock_b: float = 0.0
    # launch velocities of the running fronts
    velocity_a: float = 0.0
    velocity_b: float = 0.0

    def check(self, length: float) -> None:
        m = self.mode
        if m is PathMode.IDLE:
            assert self.clock_a == 0.0 and self.clock_b == 0.0
        else:
            if m in (PathMode.ANTEGRADE, PathMode.DOUBLE):
                assert self.clock_a * self.velocity_a <= length + 1e-6
            if m in (PathMode.RETROGRADE, PathMode.DOUBLE):
                assert self.clock_b * self.velocity_b <= length + 1e-6
            if m is PathMode.ANTEGRADE:
                assert self.clock_b == 0.0
            if m is PathMode.RETROGRADE:
                assert self.clock_a == 0.0


_IDLE_PATH = PathState()


def _intrinsic_due(state: NodeState, spec: NodeSpec, clock: float) -> bool:
    icl = spec.intrinsic_cycle_length
    if icl is None:
        return False
    if state.last_activation is None:
        first = spec.first_activation if spec.first_activation is not None else icl
        return clock >= first - EPS
    return clock - state.last_activation >= icl - EPS


def step_node(state: NodeState, spec: NodeSpec, dt: float, stimulus: bool = False):
    """Advance one node by ``dt``; returns ``(new_state, activated)``.

    A stimulus arriving while refractory is ignored.  Any activation resets
    the intrinsic timer.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    clock = state.clock + dt
    phase = state.phase
    tip = state.time_in_phase + dt
    if phase is Phase.REFRACTORY and tip >= spec.erp - EPS:
        phase = Phase.REST
        tip = 0.0
    if phase is Phase.REST and (stimulus or _intrinsic_due(state, spec, clock)):
        return NodeState(Phase.REFRACTORY, 0.0, clock, clock), True
    return NodeState(phase, tip, state.last_activation, clock), False


def activate(state: NodeState, spec: NodeSpec):
    """Activation attempt at the node's current clock (no time advance)."""
    if state.phase is Phase.REFRACTORY:
        return state, False
    return NodeState(Phase.REFRACTORY, 0.0, state.clock, state.clock), True


def step_path(state: PathState, length: float, dt: float, *, path_id: str = "",
              endpoints: tuple = ("a", "b"), now: float = 0.0, repolarization: bool = False):
    """Advance the fronts on one path by ``dt``.

    Returns ``(new_state, events)``.  A single front that covers the path
    emits ``Relay``; two opposing fronts emit ``Anni`` once the distances they
    have covered add up to the path length, and never ``Relay``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    mode = state.mode
    if mode is PathMode.IDLE:
        return state, []
    relay = EventKind.RELAY_R if repolarization else EventKind.RELAY
    anni = EventKind.ANNI_R if repolarization else EventKind.ANNI
    if mode is PathMode.ANTEGRADE:
        ca = state.clock_a + dt
        if state.velocity_a * ca >= length - EPS:
            return _IDLE_PATH, [ConductionEvent(relay, path_id, now, node=endpoints[1])]
        return replace(state, clock_a=ca), []
    if mode is PathMode.RETROGRADE:
        cb = state.clock_b + dt
        if state.velocity_b * cb >= length - EPS:
            return _IDLE_PATH, [ConductionEvent(relay, path_id, now, node=endpoints[0])]
        return replace(state, clock_b=cb), []
    ca = state.clock_a + dt
    cb = state.clock_b + dt
    if state.velocity_a * ca + state.velocity_b * cb >= length - EPS:
        return _IDLE_PATH, [ConductionEvent(anni, path_id, now)]
    return replace(state, clock_a=ca, clock_b=cb), []


def launch_front(state: PathState, end: str, velocity: float, path_id: str, now: float,
                 node: Optional[str] = None, repolarization: bool = False):
    """Start a front from endpoint ``end`` ('a' or 'b').

    Returns ``(new_state, event_or_None)``; a path already carrying a front
    from this end, or already in Double, is left unchanged.
    """
    mode = state.mode
    ev = None
    if mode is PathMode.IDLE:
        if end == "a":
            new = PathState(PathMode.ANTEGRADE, 0.0, 0.0, velocity, 0.0)
            kind = EventKind.CELL_I
        else:
            new = PathState(PathMode.RETROGRADE, 0.0, 0.0, 0.0, velocity)
            kind = EventKind.CELL_J
    elif mode is PathMode.ANTEGRADE and end == "b":
        new = PathState(PathMode.DOUBLE, state.clock_a, 0.0, state.velocity_a, velocity)
        kind = EventKind.CELL_IJ
    elif mode is PathMode.RETROGRADE and end == "a":
        new = PathState(PathMode.DOUBLE, 0.0, state.clock_b, velocity, state.velocity_b)
        kind = EventKind.CELL_IJ
    else:
        return state, None
    if repolarization:
        kind = _REPOL_KIND[kind]
    ev = ConductionEvent(kind, path_id, now, node=node, velocity=velocity)
    return new, ev


def schedule_repolarization(launch: ConductionEvent, apd: float) -> ConductionEvent:
    """Repolarisation counterpart of a depolarisation launch, ``apd`` later.

    The engine only calls this for launches on ventricular paths; at dispatch
    time a ``CellJr``/``CellIr`` meeting an opposing repolarisation front is
    promoted to ``CellIandJr`` by :func:`launch_front`.
    """
    if not apd > 0:
        raise ConfigError("apd must be > 0")
    if launch.kind not in (EventKind.CELL_I, EventKind.CELL_J, EventKind.CELL_IJ):
        raise ValueError(f"not a depolarisation launch: {launch.kind.value}")
    return ConductionEvent(_REPOL_KIND[launch.kind], launch.path_id, launch.timestamp + apd,
                           node=launch.node, velocity=launch.velocity)


@dataclass
class Activation:
    timestamp: float
    node_id: str
    chamber: str
    cause: str  # "intrinsic", "paced" or "path:<id>"


class HeartNetwork:
    """Mutable container wiring node and path automata together."""

    def __init__(self, nodes, paths):
        self.nodes = {}
        for n in nodes:
            if n.id in self.nodes:
                raise ConfigError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.paths = {}
        self.geometry = {}
        self.incident = {nid: [] for nid in self.nodes}
        for p in paths:
            if p.id in self.paths:
                raise ConfigError(f"duplicate path id {p.id!r}")
            for end in (p.endpoint_a, p.endpoint_b):
                if end not in self.nodes:
                    raise ConfigError(f"path {p.id!r}: unknown node {end!r}")
            pa = self.nodes[p.endpoint_a].position
            pb = self.nodes[p.endpoint_b].position
            length = math.hypot(pb[0] - pa[0], pb[1] - pa[1])
            if not length > 0:
                raise ConfigError(f"path {p.id!r}: endpoints coincide (zero length)")
            unit = ((pb[0] - pa[0]) / length, (pb[1] - pa[1]) / length)
            self.paths[p.id] = p
            self.geometry[p.id] = PathGeometry(tuple(pa), tuple(pb), length, unit)
            self.incident[p.endpoint_a].append((p.id, "a"))
            self.incident[p.endpoint_b].append((p.id, "b"))
        self.velocity = {pid: p.conduction_velocity for pid, p in self.paths.items()}
        self.node_states = {nid: NodeState() for nid in self.nodes}
        self.path_states = {pid: PathState() for pid in self.paths}
        self.repol_states = {pid: PathState() for pid, p in self.paths.items() if p.chamber == "ventricular"}
        self._repol_queue = []
        self._seq = 0

    def set_velocity(self, path_id: str, velocity: float) -> None:
        if path_id not in self.paths:
            raise ConfigError(f"unknown path {path_id!r}")
        if not velocity > 0:
            raise ConfigError(f"path {path_id!r}: velocity must be > 0")
        self.velocity[path_id] = velocity

    def on_node_activation(self, node_id: str, timestamp: float, exclude_path: Optional[str] = None):
        """Launch fronts on every path incident to ``node_id``.

        ``exclude_path`` is the path whose Relay caused this activation; the
        front that just arrived is not reflected back along it.
        """
        if node_id not in self.nodes:
            raise ConfigError(f"unknown node {node_id!r}")
        events = []
        apd = self.nodes[node_id].apd
        for pid, end in self.incident[node_id]:
            if pid == exclude_path:
                continue
            st, ev = launch_front(self.path_states[pid], end, self.velocity[pid], pid, timestamp, node=node_id)
            if ev is None:
                continue
            self.path_states[pid] = st
            events.append(ev)
            if pid in self.repol_states:
                r = schedule_repolarization(ev, apd)
                self._seq += 1
                heapq.heappush(self._repol_queue, (r.timestamp, self._seq, pid, end, ev.velocity, node_id))
        return events

    def _dispatch_repolarization(self, now: float):
        events = []
        q = self._repol_queue
        while q and q[0][0] <= now + EPS:
            _, _, pid, end, velocity, node_id = heapq.heappop(q)
            st, ev = launch_front(self.repol_states[pid], end, velocity, pid, now,
                                  node=node_id, repolarization=True)
            if ev is not None:
                self.repol_states[pid] = st
                events.append(ev)
        return events

    def step(self, dt: float, now: float, stimulated=()):
        """Advance every automaton by ``dt`` to time ``now``.

        Returns ``(events, activations)`` in causal order: path Relay/Anni,
        node activations (intrinsic, paced, then relayed), the launches they
        cause, and finally due repolarisation launches.
        """
        events = []
        relays = []
        for pid, st in self.path_states.items():
            if st.mode is PathMode.IDLE:
                continue
            p = self.paths[pid]
            new, evs = step_path(st, self.geometry[pid].length, dt, path_id=pid,
                                 endpoints=(p.endpoint_a, p.endpoint_b), now=now)
            self.path_states[pid] = new
            if evs:
                events.extend(evs)
                if evs[0].kind is EventKind.RELAY:
                    relays.append(evs[0])
        for pid, st in self.repol_states.items():
            if st.mode is PathMode.IDLE:
                continue
            p = self.paths[pid]
            new, evs = step_path(st, self.geometry[pid].length, dt, path_id=pid,
                                 endpoints=(p.endpoint_a, p.endpoint_b), now=now, repolarization=True)
            self.repol_states[pid] = new
            events.extend(evs)

        activations = []
        for nid, spec in self.nodes.items():
            ns = self.node_states[nid]
            if (ns.phase is Phase.REST and spec.intrinsic_cycle_length is None
                    and nid not in stimulated):
                # quiescent node: only its clocks move (same result as step_node)
                ns.clock += dt
                ns.time_in_phase += dt
                continue
            new, fired = step_node(ns, spec, dt, nid in stimulated)
            self.node_states[nid] = new
            if fired:
                cause = "paced" if nid in stimulated else "intrinsic"
                activations.append((Activation(now, nid, spec.chamber, cause), None))
        for ev in relays:
            nid = ev.node
            new, fired = activate(self.node_states[nid], self.nodes[nid])
            if fired:
                self.node_states[nid] = new
                activations.append((Activation(now, nid, self.nodes[nid].chamber, "path:" + ev.path_id), ev.path_id))
        for act, source in activations:
            events.extend(self.on_node_activation(act.node_id, now, exclude_path=source))
        if self._repol_queue:
            events.extend(self._dispatch_repolarization(now))
        return events, [a for a, _ in activations]
