import math

import numpy as np
import pytest

from geoobs.errors import FrameNotNormalized, NonzeroSlope, NoValidTilt
from geoobs.geometry import (
    AngleClass,
    Frame,
    Surface,
    extract_normal_form,
    intersection_curve,
    normal_at,
    reexpand_chart,
    two_surface_frame,
    unit_normal_world,
)
from geoobs.series import BivariateSeries

X = BivariateSeries.x(10)
Y = BivariateSeries.y(10)


def surf(g, **kw):
    return Surface(g, **kw)


def test_normal_at_examples():
    assert np.allclose(normal_at(surf(Y * 0.5 + X * X), 0, 0), [0, -0.5, 1])
    assert np.allclose(normal_at(surf(BivariateSeries({}, 4)), 0.3, 0.1), [0, 0, 1])
    assert np.allclose(normal_at(surf(X * X), 1.0, 0.0), [-2, 0, 1])


def test_frame_validation():
    with pytest.raises(ValueError):
        Frame(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        Frame(np.ones((3, 3)))
    f = Frame(np.eye(3), [1.0, 2.0, 3.0])
    assert np.allclose(f.to_local(f.to_world([0.1, 0.2, 0.3])), [0.1, 0.2, 0.3])


def test_two_surface_frame_normalized_input():
    tf = two_surface_frame(surf(Y * 0.5 + X * X), surf(Y * -0.5 + X * X), [0, 0, 0])
    assert tf.k == pytest.approx(0.5, abs=1e-12)
    assert tf.angle_class is AngleClass.ACUTE
    assert np.allclose(tf.frame.rotation, np.eye(3), atol=1e-12)


def test_two_surface_frame_planes():
    t = math.tan(math.radians(30))
    tf = two_surface_frame(surf(Y * t), surf(Y * -t), [0, 0, 0])
    assert tf.k == pytest.approx(t, abs=1e-12)
    assert tf.angle_class is AngleClass.ACUTE


def test_two_surface_frame_normals_match():
    # a generic pair meeting transversally at the origin, not yet normalized
    g = X * 0.4 + Y * 0.3 + X * X * 0.7 + X * Y * 0.2
    h = X * -0.1 - Y * 0.6 + Y * Y * 0.4 + X**3 * 0.3
    tf = two_surface_frame(surf(g), surf(h), [0, 0, 0])
    p = tf.frame.origin
    n1 = tf.frame.vector_to_local(unit_normal_world(surf(g), p))
    n2 = tf.frame.vector_to_local(unit_normal_world(surf(h), p))
    k = tf.k
    assert np.allclose(n1 * np.sqrt(1 + k * k), [0, -k, 1], atol=1e-10)
    assert np.allclose(n2 * np.sqrt(1 + k * k), [0, k, 1], atol=1e-10)
    for s in (tf.surface1, tf.surface2):
        assert abs(s.g.coefficient(0, 0)) < 1e-12 and abs(s.g.coefficient(1, 0)) < 1e-10


def test_two_surface_frame_obtuse_has_no_tilt():
    # planes at 120 degrees between the normals: no tilt satisfies the product condition
    t = math.tan(math.radians(60))
    with pytest.raises(NoValidTilt):
        two_surface_frame(surf(Y * t), surf(Y * -t), [0, 0, 0])


def test_extract_normal_form_examples():
    nf = extract_normal_form(surf(Y * 0.5 + X * X))
    assert (nf.k, nf.N, nf.a00) == (0.5, 2, 1.0)
    nf = extract_normal_form(surf(Y * 0.5 + X**3 + X * Y))
    assert (nf.k, nf.N, nf.a00) == (0.5, 3, 1.0)
    assert nf.b.coefficient(0, 0) == 1.0
    nf = extract_normal_form(surf(Y * 0.5 + X * Y))
    assert nf.flat and math.isinf(nf.N)


def test_extract_normal_form_reassembles():
    g = Y * 0.5 + X * X * 1.5 + X**3 * -0.25 + X * Y * 0.2 + Y * Y * 0.3 + X * X * Y * 0.7
    nf = extract_normal_form(surf(g))
    assert np.max(np.abs(nf.reassemble().array - g.array)) < 1e-10


def test_extract_normal_form_requires_normalized():
    with pytest.raises(FrameNotNormalized):
        extract_normal_form(surf(X * 0.3 + Y * 0.5))


def test_intersection_curve_examples():
    ic = intersection_curve(surf(Y * 0.5 + X * X), surf(Y * -0.5 + X * X))
    assert math.isinf(ic.M) and ic.phi.is_zero()
    ic = intersection_curve(surf(Y * 0.5 + X * X), surf(Y * -0.5 + X * X + X**3))
    assert ic.M == 3 and ic.aM == pytest.approx(1.0, abs=1e-12)
    g, h = Y * 0.5 + X * X + Y * Y, Y * -0.5 + X * X * 2
    ic = intersection_curve(surf(g), surf(h))
    assert ic.M == 2 and ic.aM == pytest.approx(1.0, abs=1e-10)
    # φ substituted back into g − h vanishes through the working order
    from geoobs.series import compose_y

    assert np.max(np.abs(compose_y(g - h, ic.phi).coefficients)) < 1e-10


def test_intersection_curve_rejects_slope():
    with pytest.raises(NonzeroSlope):
        intersection_curve(surf(Y * 0.5 + X * 0.2), surf(Y * -0.5))


def test_projection_sign_test():
    g = Y * 0.5 + X * X + X**3 * 0.4 + X * Y * 0.3 + Y * Y * 0.2
    h = Y * -0.5 + X * X * 1.5 + X * X * Y * 0.5
    ic = intersection_curve(surf(g), surf(h))
    xs = np.linspace(-0.2, 0.2, 50)
    checked = 0
    for x in xs:
        phi = ic.phi.eval(x)
        for y in xs:
            if abs(y - phi) < 1e-6:
                continue
            d = g.eval(x, y) - h.eval(x, y)
            assert (d < 0) == (y < phi)
            checked += 1
    assert checked > 2400


def test_reexpand_chart_identity():
    s = surf(X * X)
    frame, k = reexpand_chart(s, [0, 0, 0], [1, 0, 0])
    assert k.coefficient(2, 0) == pytest.approx(1.0, abs=1e-12)
    assert abs(k.coefficient(1, 0)) < 1e-11 and abs(k.coefficient(0, 1)) < 1e-11


def test_reexpand_chart_curvature():
    s = surf(X * X)
    t = np.array([1.0, 0.0, 2.0]) / math.sqrt(5)
    frame, k = reexpand_chart(s, [1.0, 0.0, 1.0], t)
    assert abs(k.coefficient(0, 0)) < 1e-11
    assert abs(k.coefficient(1, 0)) < 1e-11 and abs(k.coefficient(0, 1)) < 1e-11
    kappa = 2 / 5**1.5
    assert k.coefficient(2, 0) == pytest.approx(kappa / 2, abs=1e-10)


def test_reexpand_chart_residual():
    g = X * X * 0.8 - Y * Y * 0.5 + X**3 * 0.3 + X * Y * Y * 0.1
    s = surf(g)
    q = np.array([0.1, -0.05])
    p = np.array([q[0], q[1], g.eval(*q)])
    t = np.array([1.0, 0.3, s.gx.eval(*q) + 0.3 * s.gy.eval(*q)])
    t /= np.linalg.norm(t)
    frame, k = reexpand_chart(s, p, t)
    rng = np.random.default_rng(7)
    worst = 0.0
    for u, v in rng.uniform(-0.03, 0.03, size=(100, 2)):
        w = frame.to_world([u, v, k.eval(u, v)])
        worst = max(worst, abs(g.eval(w[0], w[1]) - w[2]))
    assert worst < 1e-8
