import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import cap_terms, great_circle
from geoobs.errors import InconsistentInitialState
from geoobs.geometry import Surface
from geoobs.series import BivariateSeries
from geoobs.tracer import (
    Decision,
    GeodesicState,
    Termination,
    TraceLimits,
    contact_decision,
    line_contact,
    liftoff_event,
    step_boundary,
    surface_accel,
    surface_start,
    trace,
)

X = BivariateSeries.x(8)
Y = BivariateSeries.y(8)
PLANE = Surface(BivariateSeries({}, 4))
BOWL = Surface(X * X + Y * Y)
CAP = Surface(BivariateSeries(cap_terms(8), 8))


def test_surface_accel_examples():
    _, _, zpp, lam = surface_accel(BOWL, 0, 0, 1, 0)
    assert lam == pytest.approx(2.0) and zpp == pytest.approx(2.0)
    assert surface_accel(PLANE, 0.2, 0.1, 0.6, 0.8)[:3] == (0.0, 0.0, 0.0)
    assert surface_accel(Surface(-(X * X)), 0, 0, 1, 0)[3] == pytest.approx(-2.0)


def test_surface_accel_matches_finite_difference():
    # curve (t, 0, t^2) by arc length: second derivative of z at t = 0
    h = 1e-4
    s = lambda t: (t * math.sqrt(1 + 4 * t * t) + math.asinh(2 * t) / 2) / 2
    z_of_s = lambda sv: (lambda t: t * t)(_invert(s, sv))
    fd = (z_of_s(h) - 2 * z_of_s(0.0) + z_of_s(-h)) / h**2
    assert surface_accel(BOWL, 0, 0, 1, 0)[3] == pytest.approx(fd, rel=1e-6)


def _invert(f, y, lo=-1.0, hi=1.0):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < y else (lo, mid)
    return 0.5 * (lo + hi)


def test_step_boundary_plane_and_symmetry():
    st0 = surface_start(PLANE, 0, 0.1, 0.0, 0.7)
    st1 = step_boundary(st0, 1e-3, PLANE)
    assert np.allclose(st1.position - st0.position, 1e-3 * st0.velocity, atol=1e-15)
    st = surface_start(Surface(X * X), 0, 0, 0, 0.0)
    for _ in range(500):
        st = step_boundary(st, 1e-3, Surface(X * X))
    assert abs(st.position[1]) < 1e-12


def test_step_boundary_dome_great_circle():
    dome = Surface(BivariateSeries(cap_terms(8, sign=-1.0), 8))
    st = surface_start(dome, 0, 0, 0, 0.0)
    p0, v0 = st.position, st.velocity
    worst = 0.0
    for k in range(1, 3001):
        st = step_boundary(st, 1e-4, dome)
        if k % 100 == 0:
            ref = great_circle(p0, v0, k * 1e-4, center=(0, 0, -1))
            worst = max(worst, np.linalg.norm(st.position - ref))
    assert worst < 1e-6


def test_liftoff_examples():
    g = Surface(X * X)
    assert not any(liftoff_event(surface_start(g, 0, x, 0, t), g) for x in (-0.2, 0, 0.3) for t in (0, 1, 2))
    assert liftoff_event(surface_start(Surface(-(X * X)), 0, 0, 0, 0.0), Surface(-(X * X)))
    sad = Surface(X * X - Y * Y)
    assert not liftoff_event(surface_start(sad, 0, 0, 0, math.pi / 4), sad)


def test_line_contact_examples():
    st = GeodesicState([0, 0, 0], [1, 0, 0], None)
    assert line_contact(st, Surface(X * X), t_end=0.4) is None
    ev = line_contact(st, Surface(X - 1.0), t_end=2.0)
    assert ev.s_hit == pytest.approx(1.0, abs=1e-9) and not ev.tangential


def test_line_contact_after_inflection_release():
    g = -(X * X) + X**4 * 5
    s = Surface(g, chart_radius=1.0)
    x0 = 1 / math.sqrt(30)
    m = -2 * x0 + 20 * x0**3
    v = -np.array([1.0, 0.0, m]) / math.sqrt(1 + m * m)
    st = GeodesicState([x0, 0, g.eval(x0, 0)], v, None)
    ev = line_contact(st, s, t_end=1.0)
    # g minus its inflection tangent is 5 (x - x0)^3 (x + 3 x0)
    assert ev.s_hit == pytest.approx(4 * x0 * math.sqrt(1 + m * m), abs=1e-9)
    slope = 5 * (ev.point[0] - x0) ** 3 * v[0]
    assert ev.slope == pytest.approx(slope, rel=1e-6)
    assert not ev.tangential


def test_contact_decision_examples():
    st = GeodesicState([0, 0, 0], [1, 0, 0], None)
    assert contact_decision(st, 0, Surface(-(X * X)))[0] is Decision.ATTACH
    assert contact_decision(st, 0, Surface(X * X))[0] is Decision.CONTINUE
    hit = GeodesicState([1, 0, 0], [1, 0, 0], None)
    assert contact_decision(hit, 0, Surface(X - 1.0))[0] is Decision.TERMINATE


def test_trace_plane_is_one_line():
    r = trace(surface_start(PLANE, 0, 0, 0, 0.3), PLANE, 0.05)
    assert r.kinds() == ["L"] and r.termination is Termination.EXITED_BALL and r.switch_count == 0


def test_trace_bowl_has_at_most_one_switch():
    for th in np.linspace(0, 2 * math.pi, 12, endpoint=False):
        r = trace(surface_start(BOWL, 0, 0, 0, th), BOWL, 0.05)
        assert r.kinds()[0] == "B1" and r.switch_count <= 1


def test_inconsistent_start_rejected():
    with pytest.raises(InconsistentInitialState):
        trace(GeodesicState([0, 0, 0], [2, 0, 0], 0), BOWL, 0.05)
    with pytest.raises(InconsistentInitialState):
        trace(GeodesicState([0, 0, 0.1], [1, 0, 0], 0), BOWL, 0.05)
    with pytest.raises(InconsistentInitialState):
        trace(GeodesicState([0, 0, 0.5], [1, 0, 0], None), BOWL, 0.05)


def test_trace_rejects_bad_eps():
    with pytest.raises(ValueError):
        trace(surface_start(BOWL, 0, 0, 0, 0), BOWL, -1.0)


# -- invariants over traced geodesics -----------------------------------------------

SADDLE = Surface(X * X - Y * Y + X**3 * 0.3 + X * X * Y * 0.2 - Y**3 * 0.1)
SURFACES = {"saddle": SADDLE, "bowl": BOWL, "cap": CAP, "dome": Surface(-(X * X) - Y * Y * 0.5)}


def _check_invariants(r, s):
    V = r.sample_velocities
    assert np.max(np.abs(np.linalg.norm(V, axis=1) - 1.0)) <= 1e-8
    for (t, x, y, z), kind in zip(r.samples, r.sample_kinds):
        if kind == "boundary":
            assert abs(z - s.g.eval(x, y)) <= 1e-9
    for sp in r.switch_points:
        assert sp.angle <= 1e-7


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(SURFACES)), st.floats(0, 2 * math.pi), st.floats(0.02, 0.2))
def test_trace_invariants(name, theta, eps):
    s = SURFACES[name]
    r = trace(surface_start(s, 0, 0, 0, theta), s, eps)
    assert r.length <= 1.0
    _check_invariants(r, s)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * math.pi))
def test_convex_boundary_normal_action(theta):
    r = trace(surface_start(BOWL, 0, 0.05, -0.02, theta), BOWL, 0.1)
    for (t, x, y, z), v, kind in zip(r.samples, r.sample_velocities, r.sample_kinds):
        if kind == "boundary":
            assert surface_accel(BOWL, x, y, v[0], v[1])[3] >= -1e-10


def _reverse_check(s, st0, eps):
    fwd = trace(st0, s, eps, TraceLimits(max_length=0.25))
    back = trace(fwd.final_state.reversed(), s, 1.0, TraceLimits(max_length=fwd.length))
    assert back.kinds() == fwd.kinds()[::-1]
    assert np.linalg.norm(back.final_state.position - st0.position) <= 1e-6


@pytest.mark.parametrize("theta", [0.0, 1.1, 2.5, 4.0])
def test_reversibility_boundary_and_line(theta):
    _reverse_check(CAP, surface_start(CAP, 0, 0.02, 0.01, theta), 1.0)
    line = GeodesicState([0.0, 0.0, 0.5], [math.cos(theta), math.sin(theta), 0.0], None)
    fwd = trace(line, Surface(BivariateSeries({(0, 0): 1.0}, 4)), 1.0, TraceLimits(max_length=0.25))
    assert fwd.kinds() == ["L"]
    back = trace(fwd.final_state.reversed(), Surface(BivariateSeries({(0, 0): 1.0}, 4)), 1.0,
                 TraceLimits(max_length=fwd.length))
    assert np.linalg.norm(back.final_state.position - line.position) <= 1e-6
