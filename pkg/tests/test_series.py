import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoobs.errors import ImplicitSolveFailed, NonzeroConstantTerm, SingularJacobian
from geoobs.series import (
    Axis,
    BivariateSeries,
    UnivariateSeries,
    compose_y,
    evaluate,
    from_json,
    partial,
    rotation2,
    solve_implicit,
    to_json,
    transform,
)

X = BivariateSeries.x(8)
Y = BivariateSeries.y(8)


def test_eval_examples():
    assert evaluate(X * X - Y * Y, 1.0, 2.0) == -3.0
    assert evaluate(BivariateSeries({}, 8), 0.3, -0.2) == 0.0
    assert evaluate(X**3 + X * Y * 2, 2.0, 0.5) == 10.0


def test_partial_examples():
    s = X * X * Y
    assert partial(s, Axis.X).terms == {(1, 1): 2.0}
    assert partial(s, Axis.Y).terms == {(2, 0): 1.0}
    assert partial(BivariateSeries.constant(5.0, 8), Axis.X).is_zero()


def test_compose_y_examples():
    g = Y * 0.5 + X * X
    zero = UnivariateSeries([0.0] * 9)
    assert np.allclose(compose_y(g, zero).coefficients[:4], [0, 0, 1, 0])
    u = UnivariateSeries([0, 1] + [0] * 7)
    assert np.allclose(compose_y(Y * Y, u).coefficients[:4], [0, 0, 1, 0])
    u3 = UnivariateSeries([0, 0, 0, 1] + [0] * 5)
    assert np.allclose(compose_y(g, u3).coefficients[:5], [0, 0, 1, 0.5, 0])


def test_compose_y_rejects_constant_term():
    with pytest.raises(NonzeroConstantTerm):
        compose_y(Y, UnivariateSeries([0.1, 1.0, 0, 0]))


def test_solve_implicit_examples():
    assert solve_implicit(Y * 1.0, 8).is_zero()
    phi = solve_implicit(Y - X**3, 8)
    assert phi[3] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(np.delete(phi.coefficients, 3), 0.0, atol=1e-14)


def test_solve_implicit_quadratic_recursion():
    X6, Y6 = BivariateSeries.x(6), BivariateSeries.y(6)
    F = Y6 - X6 * X6 - Y6 * Y6
    phi = solve_implicit(F, 6)
    # φ = x² + φ², solved independently by fixed-point iteration on coefficient lists
    ref = np.zeros(7)
    for _ in range(10):
        sq = np.convolve(ref, ref)[:7]
        ref = sq.copy()
        ref[2] += 1.0
    assert np.allclose(ref, [0, 0, 1, 0, 1, 0, 2])
    assert np.allclose(phi.coefficients, ref, atol=1e-13)
    assert np.max(np.abs(compose_y(F, phi).coefficients)) < 1e-13


def test_solve_implicit_errors():
    with pytest.raises(SingularJacobian):
        solve_implicit(X * X + Y * Y, 8)
    with pytest.raises(ImplicitSolveFailed):
        solve_implicit(Y + 1.0, 8)


def test_transform_examples():
    s = X * X - Y * Y
    r = transform(s, rotation2(math.pi / 4))
    assert r.coefficient(1, 1) == pytest.approx(-2.0, abs=1e-14)
    assert abs(r.coefficient(2, 0)) < 1e-14 and abs(r.coefficient(0, 2)) < 1e-14
    same = transform(s, np.eye(2), (0.0, 0.0))
    assert np.array_equal(same.array, s.array)
    q = transform(X * X, rotation2(math.pi / 2))
    assert q.coefficient(0, 2) == pytest.approx(1.0, abs=1e-14)
    assert abs(q.coefficient(2, 0)) < 1e-14


def test_transform_shift_and_add():
    s = transform(X * X, None, shift=(1.0, 0.0), add=(-1.0, 0.0, 0.0))
    # (x + 1)^2 - 1 = x^2 + 2x
    assert s.coefficient(2, 0) == 1.0 and s.coefficient(1, 0) == 2.0 and abs(s.coefficient(0, 0)) < 1e-15


def test_json_round_trip_and_validation():
    s = X * X - Y * 0.5 + X * Y * Y * 3.25
    assert to_json(from_json(to_json(s))) == to_json(s)
    with pytest.raises(ValueError):
        from_json({"order": 4, "terms": [[1, 0, 1.0], [1, 0, 2.0]]})
    with pytest.raises(ValueError):
        from_json({"order": 4, "terms": [[-1, 0, 1.0]]})
    with pytest.raises(ValueError):
        from_json({"order": 4, "terms": [[1, 0, float("nan")]]})


# -- properties ----------------------------------------------------------------

coef = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def series(draw, order=6):
    n = (order + 1) * (order + 2) // 2
    vals = draw(st.lists(coef, min_size=n, max_size=n))
    terms, k = {}, 0
    for d in range(order + 1):
        for i in range(d + 1):
            terms[(d - i, i)] = vals[k]
            k += 1
    return BivariateSeries(terms, order)


@settings(max_examples=60, deadline=None)
@given(series(), st.floats(0.0, 2 * math.pi))
def test_transform_inverse_round_trip(s, theta):
    R = rotation2(theta)
    back = transform(transform(s, R), R.T)
    scale = max(1.0, np.max(np.abs(s.array)))
    assert np.max(np.abs(back.array - s.array)) <= 1e-12 * scale


@settings(max_examples=60, deadline=None)
@given(series())
def test_partials_commute(s):
    a = partial(partial(s, Axis.X), Axis.Y)
    b = partial(partial(s, Axis.Y), Axis.X)
    assert np.array_equal(a.array, b.array)


@settings(max_examples=60, deadline=None)
@given(series(4), series(4), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_eval_of_product(a, b, x, y):
    p = a.with_order(8) * b.with_order(8)
    lhs = p.eval(x, y)
    rhs = a.eval(x, y) * b.eval(x, y)
    assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(rhs)) + 1e-14


@settings(max_examples=40, deadline=None)
@given(series(8), st.floats(0.1, 1.0), st.booleans())
def test_solve_implicit_relative_residual(F, fy, neg):
    terms = F.terms
    terms[(0, 0)] = 0.0
    terms[(1, 0)] = 0.0
    terms[(0, 1)] = -fy if neg else fy
    F = BivariateSeries(terms, 8)
    phi = solve_implicit(F, 8)
    res = compose_y(F, phi).coefficients
    scale = max(1.0, np.max(np.abs(phi.coefficients))) ** 2
    assert np.max(np.abs(res)) <= 1e-9 * scale
