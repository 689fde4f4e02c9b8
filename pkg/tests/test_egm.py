import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iegmsim.egm import (DipoleTracker, EgmAutomatonState, EgmMode, Electrode, advance_egm_clocks,
                         dipole_position, dipole_potential, egm_transition, step_egm_automaton,
                         superpose_potentials, validate_electrodes)
from iegmsim.errors import ConfigError, SimulationFault
from iegmsim.network import ConductionEvent, EventKind, PathGeometry

GEOM = PathGeometry((0.0, 0.0), (30.0, 40.0), 50.0, (0.6, 0.8))
ELECTRODES = {
    "adt": Electrode("adt", (10.0, 0.0)),
    "adr": Electrode("adr", (20.0, 0.0)),
    "vdt": Electrode("vdt", (0.0, 10.0)),
    "vdr": Electrode("vdr", (0.0, 20.0)),
}


# --- geometry ------------------------------------------------------------------

def test_dipole_position_midway():
    p, d = dipole_position(GEOM, "a", 50.0, 0.5)
    assert p == pytest.approx((15.0, 20.0))
    assert d == pytest.approx((0.6, 0.8))


def test_dipole_position_ends():
    assert dipole_position(GEOM, "a", 0.0, 0.5)[0] == pytest.approx((0.0, 0.0))
    assert dipole_position(GEOM, "a", 100.0, 0.5)[0] == pytest.approx((30.0, 40.0))
    p, d = dipole_position(GEOM, "b", 0.0, 0.5)
    assert p == pytest.approx((30.0, 40.0)) and d == pytest.approx((-0.6, -0.8))


@pytest.mark.parametrize("elapsed", [-0.1, 100.5])
def test_dipole_position_outside_traversal_is_contract_violation(elapsed):
    with pytest.raises(ValueError):
        dipole_position(GEOM, "a", elapsed, 0.5)


# --- dipole law ---------------------------------------------------------------------

def test_dipole_potential_on_axis():
    assert dipole_potential((0, 0), (1, 0), 1, 100.0, (10.0, 0.0)) == pytest.approx(1.0, rel=1e-15)


def test_dipole_potential_perpendicular_is_exact_zero():
    assert dipole_potential((0, 0), (1, 0), 1, 100.0, (0.0, 10.0)) == 0.0


def test_dipole_potential_behind():
    assert dipole_potential((0, 0), (1, 0), 1, 100.0, (-10.0, 0.0)) == pytest.approx(-1.0, rel=1e-15)


def test_dipole_potential_clamped():
    assert dipole_potential((0, 0), (1, 0), 1, 100.0, (0.1, 0.0), r_min=2.0) == pytest.approx(25.0, rel=1e-15)


def test_dipole_potential_singular_point_is_zero():
    assert dipole_potential((3.0, 4.0), (1, 0), 1, 100.0, (3.0, 4.0)) == 0.0


def test_inverse_square_ratio():
    v10 = dipole_potential((0, 0), (1, 0), 1, 100.0, (10.0, 0.0))
    v20 = dipole_potential((0, 0), (1, 0), 1, 100.0, (20.0, 0.0))
    assert v10 / v20 == pytest.approx(4.0, rel=1e-9)


coord = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=300)
@given(px=coord, py=coord, ex=coord, ey=coord, ang=st.floats(0, 2 * math.pi), c=st.floats(1, 1000))
def test_polarity_flips_sign(px, py, ex, ey, ang, c):
    d = (math.cos(ang), math.sin(ang))
    pos = dipole_potential((px, py), d, 1, c, (ex, ey))
    neg = dipole_potential((px, py), d, -1, c, (ex, ey))
    assert neg == -pos
    assert abs(pos) <= c / 4.0 + 1e-9  # clamp bounds the field at C / r_min^2


# --- EGM automaton -------------------------------------------------------------------

def _ev(kind, t=0.0, v=0.5):
    return ConductionEvent(kind, "p", t, velocity=v)


def test_idle_cell_i_spawns_tracker():
    s, trs = step_egm_automaton(EgmAutomatonState(), [_ev(EventKind.CELL_I)], {},
                                geometry=GEOM, polarity=1, dipole_moment=40.0)
    assert s.mode is EgmMode.EGM_I and s.t_i == 0.0
    assert list(trs) == ["a"]


def test_double_then_anni_retires_both():
    s, trs = step_egm_automaton(EgmAutomatonState(), [_ev(EventKind.CELL_I)], {},
                                geometry=GEOM, polarity=1, dipole_moment=40.0)
    s = advance_egm_clocks(s, 10.0)
    s, trs = step_egm_automaton(s, [_ev(EventKind.CELL_IJ, 10.0)], trs, geometry=GEOM, polarity=1,
                                dipole_moment=40.0)
    assert s.mode is EgmMode.EGM_IJ and set(trs) == {"a", "b"}
    assert (s.t_i, s.t_ij) == (10.0, 0.0)
    s = advance_egm_clocks(s, 5.0)
    assert s.elapsed("a") == 15.0 and s.elapsed("b") == 5.0
    s, trs = step_egm_automaton(s, [_ev(EventKind.ANNI, 15.0)], trs, geometry=GEOM, polarity=1,
                                dipole_moment=40.0)
    assert s.mode is EgmMode.IDLE and trs == {}
    assert superpose_potentials(list(trs.values()), ELECTRODES, 15.0).v_adt == 0.0


def test_idle_relay_faults_with_context():
    with pytest.raises(SimulationFault) as exc:
        egm_transition(EgmAutomatonState(), EventKind.RELAY, 12.5, "p")
    assert exc.value.module == "egm_synthesis"
    assert exc.value.timestamp == 12.5


def test_only_current_clock_flows():
    s = advance_egm_clocks(EgmAutomatonState(EgmMode.EGM_J, 1.0, 2.0, 3.0), 0.5)
    assert (s.t_i, s.t_j, s.t_ij) == (1.0, 2.5, 3.0)
    assert advance_egm_clocks(EgmAutomatonState(), 1.0) == EgmAutomatonState()


# --- superposition -------------------------------------------------------------------

def _tracker(end, start, polarity=1, c=40.0):
    return DipoleTracker("p", end, start, polarity, c, 0.5, GEOM)


def test_no_trackers_all_zero():
    f = superpose_potentials([], ELECTRODES, 0.0)
    assert (f.v_adt, f.v_adr, f.v_vdt, f.v_vdr, f.v_vrt, f.v_vrr) == (0, 0, 0, 0, 0, 0)


def test_single_tracker_equals_its_potential():
    tr = _tracker("a", 0.0)
    f = superpose_potentials([tr], ELECTRODES, 50.0)
    assert f.v_adt == dipole_potential((15.0, 20.0), (0.6, 0.8), 1, 40.0, (10.0, 0.0))


def test_two_trackers_hand_evaluated():
    # front a at (15,20) heading (0.6,0.8); front b at (24,32) heading (-0.6,-0.8)
    f = superpose_potentials([_tracker("a", 0.0), _tracker("b", 30.0)], ELECTRODES, 50.0)
    # electrode adt (10,0): term a: vec (-5,-20), |.|^2=425, cos=(-3-16)/sqrt(425)
    ta = 40.0 * (-19.0 / math.sqrt(425.0)) / 425.0
    # term b: vec (-14,-32), |.|^2=1220, cos=(8.4+25.6)/sqrt(1220)
    tb = 40.0 * (34.0 / math.sqrt(1220.0)) / 1220.0
    assert f.v_adt == pytest.approx(ta + tb, rel=1e-12)


def test_repolarization_feeds_only_t_wave_channels():
    tr = _tracker("a", 0.0, polarity=-1, c=80.0)
    f = superpose_potentials([tr], ELECTRODES, 20.0)
    assert (f.v_adt, f.v_adr, f.v_vdt, f.v_vdr) == (0, 0, 0, 0)
    p, d = tr.position(20.0)
    assert f.v_vrt == dipole_potential(p, d, -1, 80.0, ELECTRODES["vdt"])
    assert f.v_vrr == dipole_potential(p, d, -1, 80.0, ELECTRODES["vdr"])


@settings(max_examples=100)
@given(starts=st.lists(st.floats(0.0, 99.0), min_size=2, max_size=6), split=st.integers(0, 6))
def test_superposition_is_linear(starts, split):
    t = 100.0
    trs = [_tracker("a" if i % 2 else "b", s, 1 if i % 3 else -1) for i, s in enumerate(starts)]
    a, b = trs[:split], trs[split:]
    whole = superpose_potentials(trs, ELECTRODES, t)
    fa = superpose_potentials(a, ELECTRODES, t)
    fb = superpose_potentials(b, ELECTRODES, t)
    for ch in ("v_adt", "v_adr", "v_vdt", "v_vdr", "v_vrt", "v_vrr"):
        assert getattr(whole, ch) == pytest.approx(getattr(fa, ch) + getattr(fb, ch), rel=1e-12, abs=1e-15)


def test_tracker_invariants():
    with pytest.raises(ValueError):
        _tracker("a", 0.0, polarity=0)
    with pytest.raises(ValueError):
        _tracker("a", 0.0, c=0.0)


# --- electrodes ----------------------------------------------------------------------

def test_electrode_validation():
    validate_electrodes(ELECTRODES.values())
    bad = dict(ELECTRODES, adr=Electrode("adr", (30.0, 0.0)))  # 20 mm from the tip
    with pytest.raises(ConfigError):
        validate_electrodes(bad.values())
    with pytest.raises(ConfigError):
        validate_electrodes([ELECTRODES["adt"]])
