import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iegmsim.device import DeviceParams, DeviceState, device_step
from iegmsim.errors import ConfigError

DT = 0.1


def drive(n_steps, a_edges=(), v_edges=(), params=None):
    """Run the device over ``n_steps`` with edges at the given step indices."""
    a_edges, v_edges = set(a_edges), set(v_edges)
    s = DeviceState(params or DeviceParams())
    out = []
    for k in range(n_steps):
        s, evs = device_step(s, k in a_edges, k in v_edges, k * DT, DT)
        out += evs
    return out


def times(events, kind):
    return [round(e.timestamp, 6) for e in events if e.kind == kind]


def test_escape_pacing_without_senses():
    evs = drive(22000)
    assert times(evs, "AP")[:2] == [850.0, 1850.0]
    assert times(evs, "VP")[:2] == [1000.0, 2000.0]


def test_vs_inside_avi_inhibits_vp():
    evs = drive(8000, a_edges=[3000], v_edges=[4200])
    assert times(evs, "AS") == [300.0]
    assert times(evs, "VS") == [420.0]
    assert times(evs, "VP") == []


def test_atrial_edge_in_pvarp_is_ar():
    # VP at 1000 (escape), atrial edge 100 ms later
    evs = drive(22000, a_edges=[11000])
    ar = [e for e in evs if e.kind == "AR"]
    assert [round(e.timestamp, 6) for e in ar] == [1100.0]
    assert ar[0].window in ("pvarp", "post_vp_atrial_blanking")
    # no AVI started: the next VP is still lri after the previous one
    assert times(evs, "VP")[:1] == [1000.0]
    assert times(evs, "AP")[1] == 1850.0


def test_ventricular_edge_in_pavb_is_vr():
    evs = drive(10100, v_edges=[8700])  # 20 ms after AP at 850
    assert [(e.kind, e.window) for e in evs if e.kind == "VR"] == [("VR", "pavb")]
    assert times(evs, "VP") == [1000.0]


def test_vs_resets_lower_rate_timing():
    evs = drive(20000, v_edges=[5000])
    assert times(evs, "VS") == [500.0]
    assert times(evs, "AP")[0] == 1350.0


def test_as_during_avi_does_not_restart_it():
    evs = drive(8000, a_edges=[3000, 3400])
    assert times(evs, "VP") == [450.0]


@pytest.mark.parametrize("kw", [dict(avi=1000.0), dict(pavb=150.0), dict(vrp=-1.0)])
def test_params_invariants(kw):
    with pytest.raises(ConfigError):
        DeviceParams(**kw)


def test_step_requires_positive_dt():
    with pytest.raises(ValueError):
        device_step(DeviceState(), False, False, 0.0, 0.0)


def _check_trace(evs, p, dt):
    v_times = [e.timestamp for e in evs if e.kind in ("VS", "VP")]
    gaps = [b - a for a, b in zip([0.0] + v_times, v_times)]
    assert all(g <= p.lri + dt + 1e-6 for g in gaps)
    # every VP is exactly one AVI after the atrial event that opened it
    last_a = None
    for e in evs:
        if e.kind in ("AS", "AP") and last_a is None:
            last_a = e.timestamp
        elif e.kind == "VS":
            last_a = None
        elif e.kind == "VP":
            assert last_a is not None
            assert e.timestamp >= last_a + p.avi - 1e-6
            assert e.timestamp - last_a <= p.avi + dt + 1e-6
            last_a = None
    # refractory markers fall in the window they name
    last_v = last_vp = last_ap = last_as = None
    for e in evs:
        t = e.timestamp
        if e.kind == "AR":
            limits = {"pvarp": (last_v, p.pvarp), "post_vp_atrial_blanking": (last_vp, p.post_vp_atrial_blanking),
                      "paab": (max(x for x in (last_ap, last_as, -1e9) if x is not None), p.paab)}
            start, width = limits[e.window]
            assert start is not None and start <= t < start + width
        elif e.kind == "VR":
            start, width = {"vrp": (last_v, p.vrp), "pavb": (last_ap, p.pavb)}[e.window]
            assert start is not None and start <= t < start + width
        if e.kind in ("VS", "VP"):
            last_v = t
        if e.kind == "VP":
            last_vp = t
        if e.kind == "AP":
            last_ap = t
        if e.kind == "AS":
            last_as = t


@settings(max_examples=40, deadline=None)
@given(a=st.lists(st.integers(0, 25000), max_size=30), v=st.lists(st.integers(0, 25000), max_size=30))
def test_random_edges_respect_ddd_invariants(a, v):
    p = DeviceParams()
    evs = drive(25000, a, v, p)
    _check_trace(evs, p, DT)
