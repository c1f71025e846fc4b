"""Graph surfaces, frames, normal forms and chart re-expansion.

A surface is z = g(x, y) in its chart; the chart sits in world space via a
rigid frame (world = origin + rotation @ chart). The feasible region is
M = {z <= g}, so the obstacle lies above the graph and the outward normal
of M along the surface is (-g_x, -g_y, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import (
    FrameNotNormalized,
    ImplicitSolveFailed,
    NonzeroSlope,
    NotOnIntersection,
    NoValidTilt,
    ParallelNormals,
)
from .series import (
    ZERO_THRESHOLD,
    Axis,
    BivariateSeries,
    UnivariateSeries,
    solve_implicit,
)

ON_SURFACE_TOL = 1e-9
SLOPE_TOL = 1e-9
PARALLEL_TOL = 1e-9
TILT_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class Frame:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        o = np.array(self.origin, dtype=float)
        if r.shape != (3, 3) or o.shape != (3,):
            raise ValueError("frame needs a 3x3 rotation and a 3-vector origin")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-10, rtol=0) or np.linalg.det(r) < 0:
            raise ValueError("frame rotation must be orthogonal with determinant +1")
        r.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "origin", o)

    def to_world(self, q) -> np.ndarray:
        return self.origin + self.rotation @ np.asarray(q, dtype=float)

    def to_local(self, p) -> np.ndarray:
        return self.rotation.T @ (np.asarray(p, dtype=float) - self.origin)

    def vector_to_world(self, v) -> np.ndarray:
        return self.rotation @ np.asarray(v, dtype=float)

    def vector_to_local(self, v) -> np.ndarray:
        return self.rotation.T @ np.asarray(v, dtype=float)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(3)) and not self.origin.any())

    def same_as(self, other: "Frame", tol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=tol, rtol=0)
            and np.allclose(self.origin, other.origin, atol=tol, rtol=0)
        )


@dataclass(frozen=True, eq=False)
class Surface:
    g: BivariateSeries
    frame: Frame = field(default_factory=Frame)
    chart_radius: float = 0.5

    @cached_property
    def gx(self) -> BivariateSeries:
        return self.g.partial(Axis.X)

    @cached_property
    def gy(self) -> BivariateSeries:
        return self.g.partial(Axis.Y)

    def height(self, x: float, y: float) -> float:
        return self.g.eval(x, y)

    def chart_point(self, x: float, y: float) -> np.ndarray:
        return np.array([x, y, self.g.eval(x, y)])

    def clearance(self, p_world) -> float:
        """g(x, y) - z of a world point in this chart: > 0 feasible, < 0 inside the obstacle."""
        q = self.frame.to_local(p_world)
        return self.g.eval(q[0], q[1]) - q[2]

    def in_chart(self, x: float, y: float, slack: float = 0.0) -> bool:
        r = self.chart_radius + slack
        return abs(x) <= r and abs(y) <= r


class AngleClass(str, Enum):
    ACUTE = "Acute"
    OBTUSE = "Obtuse"


@dataclass(frozen=True, eq=False)
class NormalForm:
    k: float
    k_sign: float
    N: float  # int, or math.inf when g(x, 0) vanishes identically
    a00: float | None
    a: BivariateSeries
    b: BivariateSeries
    c: UnivariateSeries
    order: int

    @property
    def flat(self) -> bool:
        return math.isinf(self.N)

    def reassemble(self) -> BivariateSeries:
        n = self.order
        x = BivariateSeries.x(n)
        y = BivariateSeries.y(n)
        out = BivariateSeries({(0, 1): self.k_sign * self.k}, n)
        if not self.flat:
            out = out + (x ** int(self.N)) * self.a.with_order(n)
        out = out + x * y * self.b.with_order(n)
        cy = BivariateSeries({(0, j): v for j, v in enumerate(self.c.coefficients)}, n)
        return out + y * y * cy


@dataclass(frozen=True, eq=False)
class IntersectionCurve:
    phi: UnivariateSeries
    M: float  # int or math.inf
    aM: float | None


@dataclass(frozen=True, eq=False)
class TwoSurfaceFrame:
    frame: Frame
    surface1: Surface
    surface2: Surface
    k: float | None
    k1: float
    k2: float
    angle_class: AngleClass
    tilt: float
    normal_angle: float


def normal_at(s: Surface, x: float, y: float) -> np.ndarray:
    """Unnormalized outward normal (-g_x, -g_y, 1) in chart coordinates."""
    return np.array([-s.gx.eval(x, y), -s.gy.eval(x, y), 1.0])


def unit_normal_world(s: Surface, p_world) -> np.ndarray:
    q = s.frame.to_local(p_world)
    n = normal_at(s, q[0], q[1])
    return s.frame.vector_to_world(n / np.linalg.norm(n))


def regraph(s: Surface, frame: Frame, order: int | None = None, max_iter: int = 30) -> BivariateSeries:
    """Express ``s`` as a graph w = k(u, v) over ``frame``.

    The new origin must lie on the surface and the new w-axis must point
    to the obstacle side. Solved by Newton on bivariate series.
    """
    n = s.g.order if order is None else order
    A = s.frame.rotation.T @ frame.rotation
    b = s.frame.rotation.T @ (frame.origin - s.frame.origin)
    g = s.g.with_order(max(n, s.g.order))
    gx, gy = g.partial(Axis.X), g.partial(Axis.Y)

    phi_w0 = gx.eval(b[0], b[1]) * A[0, 2] + gy.eval(b[0], b[1]) * A[1, 2] - A[2, 2]
    if phi_w0 > -1e-9:
        raise ImplicitSolveFailed(
            f"new w-axis is tangent to or points away from the obstacle (Phi_w = {phi_w0:.3g})"
        )
    if abs(g.eval(b[0], b[1]) - b[2]) > ON_SURFACE_TOL:
        raise ImplicitSolveFailed("frame origin is not on the surface")

    u = BivariateSeries.x(n)
    v = BivariateSeries.y(n)

    def parts(K):
        X = u * A[0, 0] + v * A[0, 1] + K * A[0, 2] + b[0]
        Y = u * A[1, 0] + v * A[1, 1] + K * A[1, 2] + b[1]
        Z = u * A[2, 0] + v * A[2, 1] + K * A[2, 2] + b[2]
        return X, Y, Z

    K = BivariateSeries({}, n)
    for _ in range(max_iter):
        X, Y, Z = parts(K)
        scale = max(1.0, float(np.max(np.abs(K.array))))
        res = g.substitute(X, Y) - Z
        if res.is_zero(1e-15 * scale):
            break
        dw = gx.substitute(X, Y) * A[0, 2] + gy.substitute(X, Y) * A[1, 2] - A[2, 2]
        step = res / dw
        K = K - step
        if step.is_zero(1e-15 * scale):
            break
    else:
        raise ImplicitSolveFailed("chart re-expansion did not converge")
    return K


def _check_on(s: Surface, p, what: str) -> None:
    if abs(s.clearance(p)) > ON_SURFACE_TOL:
        raise NotOnIntersection(f"point is not on {what} (clearance {s.clearance(p):.3g})")


def two_surface_frame(s1: Surface, s2: Surface, p, order: int | None = None, asymmetric: bool = False) -> TwoSurfaceFrame:
    """Normalized frame at a point of S1 ∩ S2.

    x runs along the intersection, z along n1 + n2 and y along n2 - n1, so
    the normals become (0, -k, 1) and (0, k, 1). For normals at least 90
    degrees apart (or with ``asymmetric=True``) a tilt about x is searched
    for normals (0, -k1, 1), (0, k2, 1) with k1 < 1 < k2 and k1 k2 < 1.
    """
    p = np.asarray(p, dtype=float)
    _check_on(s1, p, "surface 1")
    _check_on(s2, p, "surface 2")
    n1 = unit_normal_world(s1, p)
    n2 = unit_normal_world(s2, p)
    if np.linalg.norm(np.cross(n1, n2)) < PARALLEL_TOL:
        raise ParallelNormals("surface normals are parallel at p")
    cosang = float(np.clip(n1 @ n2, -1.0, 1.0))
    angle = math.acos(cosang)
    angle_class = AngleClass.ACUTE if angle < math.pi / 2 else AngleClass.OBTUSE

    ey = n2 - n1
    ey /= np.linalg.norm(ey)
    ez = n1 + n2
    ez /= np.linalg.norm(ez)
    ex = np.cross(ey, ez)
    base = np.column_stack([ex, ey, ez])

    tilt = 0.0
    if angle_class is AngleClass.OBTUSE or asymmetric:
        best = None
        for tau in np.arange(-math.pi / 4 + TILT_STEP, math.pi / 4, TILT_STEP):
            c, s = math.cos(tau), math.sin(tau)
            rx = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
            R = base @ rx
            m1, m2 = R.T @ n1, R.T @ n2
            if m1[2] <= 0 or m2[2] <= 0:
                continue
            k1, k2 = -m1[1] / m1[2], m2[1] / m2[2]
            if 0 < k1 < 1 < k2 and k1 * k2 < 1:
                if best is None or k1 * k2 < best[0]:
                    best = (k1 * k2, float(tau), R)
        if best is None:
            raise NoValidTilt(
                f"no tilt about the intersection tangent gives k1 < 1 < k2 with k1*k2 < 1 "
                f"(normal angle {math.degrees(angle):.6g} deg)"
            )
        _, tilt, rot = best
    else:
        rot = base

    frame = Frame(rot, p)
    g = regraph(s1, frame, order)
    h = regraph(s2, frame, order)
    m1, m2 = rot.T @ n1, rot.T @ n2
    k1, k2 = float(-m1[1] / m1[2]), float(m2[1] / m2[2])
    k = None if tilt != 0.0 else 0.5 * (k1 + k2)
    return TwoSurfaceFrame(
        frame=frame,
        surface1=Surface(g, frame, s1.chart_radius),
        surface2=Surface(h, frame, s2.chart_radius),
        k=k,
        k1=k1,
        k2=k2,
        angle_class=angle_class,
        tilt=tilt,
        normal_angle=angle,
    )


def extract_normal_form(s: Surface | BivariateSeries, threshold: float = ZERO_THRESHOLD) -> NormalForm:
    """Split g = k y + x^N a(x) + x y b(x, y) + y^2 c(y)."""
    g = s.g if isinstance(s, Surface) else s
    n = g.order
    C = g.array
    if abs(C[0, 0]) > ON_SURFACE_TOL:
        raise FrameNotNormalized(f"g(0,0) = {C[0, 0]:.3g} is not zero")
    if n >= 1 and abs(C[1, 0]) > SLOPE_TOL:
        raise FrameNotNormalized(f"g_x(0,0) = {C[1, 0]:.3g} is not zero")
    ky = C[0, 1] if n >= 1 else 0.0
    k_sign = -1.0 if ky < 0 else 1.0

    pure_x = g.restrict_x()
    head = pure_x.coefficients.copy()
    head[:2] = 0.0
    N = UnivariateSeries(head, n).leading_exponent(threshold)
    if N is None:
        N_val, a00 = math.inf, None
        a = BivariateSeries({}, n)
    else:
        N_val, a00 = N, float(head[N])
        a = BivariateSeries({(i - N, 0): head[i] for i in range(N, n + 1)}, n)
    b = BivariateSeries.from_array(C[1:, 1:], n) if n >= 2 else BivariateSeries({}, n)
    c = UnivariateSeries(C[0, 2:] if n >= 2 else [0.0], max(n - 2, 0))
    return NormalForm(abs(ky), k_sign, N_val, a00, a, b, c, n)


def intersection_curve(s1: Surface, s2: Surface, order: int | None = None) -> IntersectionCurve:
    """phi with g(x, phi(x)) = h(x, phi(x)); M and a_M are its leading term."""
    g1 = s1.g if isinstance(s1, Surface) else s1
    g2 = s2.g if isinstance(s2, Surface) else s2
    n = max(g1.order, g2.order) if order is None else order
    F = g1.with_order(n) - g2.with_order(n)
    phi = solve_implicit(F, n)
    if abs(phi[1]) > SLOPE_TOL:
        raise NonzeroSlope(f"phi'(0) = {phi[1]:.3g}; frame is not normalized")
    M = phi.leading_exponent()
    if M is None:
        return IntersectionCurve(phi, math.inf, None)
    return IntersectionCurve(phi, M, float(phi[M]))


def reexpand_chart(s: Surface, contact, tangent, order: int | None = None) -> tuple[Frame, BivariateSeries]:
    """Chart w = k(u, v) centred at ``contact`` with +u along ``tangent``.

    ``contact`` and ``tangent`` are in the surface's chart coordinates.
    The returned frame is in world coordinates: u is the tangent, w the unit
    outward normal and v = w x u.
    """
    q = np.asarray(contact, dtype=float)
    t = np.asarray(tangent, dtype=float)
    if abs(s.g.eval(q[0], q[1]) - q[2]) > ON_SURFACE_TOL:
        raise ImplicitSolveFailed("contact point is not on the surface")
    n = normal_at(s, q[0], q[1])
    n /= np.linalg.norm(n)
    if abs(t @ n) > 1e-6 * max(np.linalg.norm(t), 1.0):
        raise ImplicitSolveFailed("tangent is not in the tangent plane")
    t = t - (t @ n) * n
    t /= np.linalg.norm(t)
    local = np.column_stack([t, np.cross(n, t), n])
    frame = Frame(s.frame.rotation @ local, s.frame.to_world(q))
    return frame, regraph(s, frame, order)
