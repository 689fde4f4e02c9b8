"""Fixed-step closed loop: heart -> IEGM -> sensing -> device -> heart.

Each step at ``t = k * dt`` runs, in this order:

 1. velocity overrides due at ``t``
 2. heart network step (path fronts, node timers, relayed activations)
 3. EGM automata / dipole trackers
 4. potential superposition
 5. afterpotential edges due and values
 6. AEGM / VEGM composition with the coefficients active at ``t``
 7. threshold detection
 8. device timing step
 9. routing of AP/VP to the heart (captured on the next step) and of
    Stim_start / Stim_end edges to the afterpotential automata
10. trace frame
"""

from __future__ import annotations

from .afterpotential import AfterpotentialState, StimEdge, afterpotential_value, initial_amplitude, on_stim_edge
from .device import DeviceState, device_step
from .egm import EgmAutomatonState, EgmMode, advance_egm_clocks, step_egm_automaton, superpose_potentials
from .errors import SimulationFault
from .network import EPS, PathMode
from .sensing import coefficients_at, compose_aegm, compose_vegm, threshold_detect
from .trace import Trace

_MODE_MATCH = {
    PathMode.IDLE: EgmMode.IDLE,
    PathMode.ANTEGRADE: EgmMode.EGM_I,
    PathMode.RETROGRADE: EgmMode.EGM_J,
    PathMode.DOUBLE: EgmMode.EGM_IJ,
}


class _PathEgm:
    __slots__ = ("state", "trackers", "geometry", "polarity", "moment")

    def __init__(self, geometry, polarity, moment):
        self.state = EgmAutomatonState()
        self.trackers = {}
        self.geometry = geometry
        self.polarity = polarity
        self.moment = moment


def _dipole_moment(scenario, path):
    if path.dipole_moment is not None:
        return path.dipole_moment
    return scenario.dipole_moments[path.chamber]


def run_simulation(scenario) -> Trace:
    """Run a validated scenario to completion; deterministic."""
    dt = scenario.dt
    n = scenario.n_frames
    net = scenario.build_network()
    electrodes = {e.id: e for e in scenario.electrodes}
    r_min = scenario.r_min

    dep = {pid: _PathEgm(net.geometry[pid], 1, _dipole_moment(scenario, p)) for pid, p in net.paths.items()}
    rep = {pid: _PathEgm(net.geometry[pid], -1, scenario.dipole_moments["repolarization"])
           for pid in net.repol_states}

    params = scenario.device
    v_s = scenario.v_s if scenario.v_s is not None else initial_amplitude(
        params.pulse_amplitude, params.pulse_width, scenario.k)
    ap_atrial = AfterpotentialState(v_s, scenario.tau)  # -> V_apa
    ap_vent = AfterpotentialState(v_s, scenario.tau)  # -> V_vpa
    device = DeviceState(params)
    stim_queue = []  # (time, seq, chamber, edge)
    stim_seq = 0
    stimulated = set()

    overrides = list(scenario.overrides)
    schedule = scenario.schedule
    a_thr = scenario.atrial_threshold
    v_thr = scenario.ventricular_threshold
    a_prev = v_prev = False

    trace = Trace(scenario.name, dt)
    active = []  # live trackers, rebuilt when any automaton changes

    for k in range(n):
        t = k * dt
        # (1)
        while overrides and overrides[0].start <= t + EPS:
            ov = overrides.pop(0)
            net.set_velocity(ov.path_id, ov.velocity)
        # (2)
        if k > 0:
            events, activations = net.step(dt, t, stimulated)
            stimulated = set()
            for pe in dep.values():
                if pe.state.mode is not EgmMode.IDLE:
                    pe.state = advance_egm_clocks(pe.state, dt)
            for pe in rep.values():
                if pe.state.mode is not EgmMode.IDLE:
                    pe.state = advance_egm_clocks(pe.state, dt)
            # (3)
            if events:
                trace.conduction_events.extend(events)
                trace.activations.extend(activations)
                touched = {}
                for ev in events:
                    touched.setdefault((ev.path_id, ev.kind.is_repolarization), []).append(ev)
                for (pid, is_rep), evs in touched.items():
                    pe = rep[pid] if is_rep else dep[pid]
                    pe.state, pe.trackers = step_egm_automaton(
                        pe.state, evs, pe.trackers, geometry=pe.geometry,
                        polarity=pe.polarity, dipole_moment=pe.moment)
                    pstate = net.repol_states[pid] if is_rep else net.path_states[pid]
                    if _MODE_MATCH[pstate.mode] is not pe.state.mode:
                        raise SimulationFault(
                            f"EGM automaton {pe.state.mode.value} out of step with path {pid!r} "
                            f"({pstate.mode.value})", timestamp=t, module="simulation_engine")
                active = [tr for pe in dep.values() for tr in pe.trackers.values()]
                active += [tr for pe in rep.values() for tr in pe.trackers.values()]
        # (4)
        pot = superpose_potentials(active, electrodes, t, r_min)
        # (5)
        while stim_queue and stim_queue[0][0] <= t + EPS:
            _, _, chamber, edge = stim_queue.pop(0)
            if chamber == "A":
                ap_atrial = on_stim_edge(ap_atrial, edge, t)
            else:
                ap_vent = on_stim_edge(ap_vent, edge, t)
        v_apa = afterpotential_value(ap_atrial, t)
        v_vpa = afterpotential_value(ap_vent, t)
        # (6)
        coeffs = coefficients_at(schedule, t)
        aegm = compose_aegm(pot, v_vpa, coeffs)
        vegm = compose_vegm(pot, v_apa, coeffs)
        # (7)
        a_raw, a_edge = threshold_detect(aegm, a_thr, a_prev)
        v_raw, v_edge = threshold_detect(vegm, v_thr, v_prev)
        a_prev, v_prev = a_raw, v_raw
        # (8)
        markers = ()
        if scenario.device_enabled:
            device, markers = device_step(device, a_edge, v_edge, t, dt)
            # (9)
            for m in markers:
                if m.kind == "AP" or m.kind == "VP":
                    chamber = m.kind[0]
                    node = scenario.atrial_pace_node if chamber == "A" else scenario.ventricular_pace_node
                    if node is not None:
                        stimulated.add(node)
                    if chamber == "A":
                        ap_atrial = on_stim_edge(ap_atrial, StimEdge.START, t)
                    else:
                        ap_vent = on_stim_edge(ap_vent, StimEdge.START, t)
                    stim_seq += 1
                    stim_queue.append((t + params.pulse_width, stim_seq, chamber, StimEdge.END))
                    stim_queue.sort()
        # (10)
        trace.append(t, aegm, vegm, a_raw, v_raw, pot, v_apa, v_vpa, markers)
    return trace
