"""Local case analysis at a boundary point.

Single surface: Hessian shape, the asymptote angle theta0 of a saddle, the
sub-wedge cases around an asymptote, and the sector structure of the lowest
homogeneous part. Two surfaces: the decision tree on (M, N, N~, a00, a~00).
Every classification carries a predicted bound the tracer can check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AsymptoteDegenerate, DeltaOutOfRange, NonPositiveInput, NotASaddle, ZeroForm
from .geometry import (
    AngleClass,
    IntersectionCurve,
    NormalForm,
    Surface,
    TwoSurfaceFrame,
    extract_normal_form,
    intersection_curve,
    two_surface_frame,
)
from .series import ZERO_THRESHOLD, BivariateSeries, rotation2, transform

IMAG_TOL = 1e-7
CLUSTER_TOL = 1e-6
DELTA_MARGIN = 1e-6
A2_ZERO = 1e-12


class Shape(str, Enum):
    CONVEX_UP = "ConvexUp"
    CONCAVE_DOWN = "ConcaveDown"
    SADDLE = "Saddle"
    DEGENERATE = "DegenerateHigherOrder"


class SaddleCase(str, Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    CASE4 = "Case4"
    ASYMPTOTE = "Asymptote"


class TwoSurfaceCase(str, Enum):
    MLTN = "MltN_Reduces"
    NNEQ = "NneqNtilde_Reduces"
    NEGATIVE = "NegativeLeading_Reduces"
    MAIN = "MainAlternating"
    PHI_ZERO = "TrivialPhiZero"
    ONE_FLAT = "TrivialOneFlat"
    BOTH_FLAT = "TrivialBothFlat"


@dataclass(frozen=True, eq=False)
class HessianClass:
    a: float
    b: float
    rotation: np.ndarray  # P: rows are principal directions, P H P^T diagonal
    shape: Shape
    hessian: np.ndarray

    @property
    def chart_rotation(self) -> np.ndarray:
        """Rotation to pass to ``transform`` to reach principal axes."""
        return self.rotation.T


@dataclass(frozen=True, eq=False)
class WedgeDecomposition:
    degree: int
    boundary_slopes: list[float]
    vertical: bool
    rays: list[float]
    sectors: list[tuple[float, float, str]]
    form: np.ndarray


@dataclass(frozen=True, eq=False)
class SaddleClassification:
    theta0: float
    delta: float
    a2: float
    leading: float
    N: int
    case: SaddleCase
    predicted_max_switch_points: int
    predicted_max_intervals: int
    a: float
    b: float
    rotation: np.ndarray


@dataclass(frozen=True, eq=False)
class TwoSurfaceClassification:
    k: float | None
    k1: float
    k2: float
    angle_class: AngleClass
    tilt: float
    M: float
    aM: float | None
    N: float
    a00: float | None
    Ntilde: float
    a00tilde: float | None
    case_label: TwoSurfaceCase
    prediction: str
    predicted_switch_bound: int | None
    normalized: TwoSurfaceFrame = field(repr=False)
    curve: IntersectionCurve = field(repr=False)
    normal_form1: NormalForm = field(repr=False)
    normal_form2: NormalForm = field(repr=False)


@dataclass(frozen=True)
class PredictedBound:
    value: int | None
    quantity: str  # "switch_points", "intervals" or "qualitative"
    note: str
    intervals: int | None = None


def hessian_classify(g: BivariateSeries, tol: float = ZERO_THRESHOLD) -> HessianClass:
    c20, c11, c02 = g.coefficient(2, 0), g.coefficient(1, 1), g.coefficient(0, 2)
    H = np.array([[2 * c20, c11], [c11, 2 * c02]])
    w, V = np.linalg.eigh(H)
    half = w / 2
    # descending order: the larger half-eigenvalue comes first
    order = [1, 0]
    half = half[order]
    V = V[:, order]
    if abs(half[0]) <= tol and abs(half[1]) <= tol:
        shape = Shape.DEGENERATE
        a, b = float(half[0]), float(half[1])
        first = np.array([1.0, 0.0])
    elif half[0] > tol and half[1] < -tol:
        shape = Shape.SADDLE
        a, b = float(half[0]), float(-half[1])
        first = V[:, 0]
    elif half[1] >= -tol:
        shape = Shape.CONVEX_UP
        a, b = float(half[0]), float(half[1])
        first = V[:, 0]
    else:
        shape = Shape.CONCAVE_DOWN
        a, b = float(half[0]), float(half[1])
        first = V[:, 0]
    if first[0] < 0 or (first[0] == 0 and first[1] < 0):
        first = -first
    P = np.array([first, [-first[1], first[0]]])
    return HessianClass(a, b, P, shape, H)


def theta0(a: float, b: float) -> float:
    if not (a > 0 and b > 0):
        raise NonPositiveInput(f"theta0 needs a > 0 and b > 0, got a={a!r}, b={b!r}")
    return math.atan(math.sqrt(a / b))


def principal_form(g: BivariateSeries) -> tuple[HessianClass, BivariateSeries]:
    hc = hessian_classify(g)
    return hc, transform(g, hc.chart_rotation)


def _lowest_form(g: BivariateSeries, tol: float) -> tuple[int, np.ndarray]:
    for d in range(g.order + 1):
        f = g.homogeneous(d)
        if np.any(np.abs(f) > tol):
            if d < 2:
                raise ValueError(f"lowest homogeneous part has degree {d} < 2")
            return d, f
    raise ZeroForm("no nonvanishing homogeneous part within the working order")


def _form_value(f: np.ndarray, ang: float) -> float:
    k = len(f) - 1
    c, s = math.cos(ang), math.sin(ang)
    return float(sum(f[i] * c ** (k - i) * s**i for i in range(k + 1)))


def real_roots(coeffs: np.ndarray) -> list[float]:
    """Distinct real roots of sum coeffs[i] m^i via companion-matrix eigenvalues."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    d = len(c) - 1
    if d < 1:
        return []
    comp = np.zeros((d, d))
    comp[1:, :-1] = np.eye(d - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    eig = np.linalg.eigvals(comp)
    reals = sorted(float(z.real) for z in eig if abs(z.imag) <= IMAG_TOL * max(1.0, abs(z)))
    out: list[list[float]] = []
    for r in reals:
        if out and abs(r - out[-1][-1]) <= CLUSTER_TOL * max(1.0, abs(r)):
            out[-1].append(r)
        else:
            out.append([r])
    return [float(np.mean(grp)) for grp in out]


def wedge_decompose(g: BivariateSeries, tol: float = ZERO_THRESHOLD) -> WedgeDecomposition:
    k, f = _lowest_form(g, tol)
    # f[i] multiplies x^(k-i) y^i; along y = m x the form is x^k * sum f[i] m^i
    cleaned = np.where(np.abs(f) > tol, f, 0.0)
    slopes = real_roots(cleaned)
    vertical = abs(cleaned[k]) == 0.0
    rays = []
    for m in slopes:
        t = math.atan(m)
        rays += [t % (2 * math.pi), (t + math.pi) % (2 * math.pi)]
    if vertical:
        rays += [math.pi / 2, 3 * math.pi / 2]
    rays = sorted(rays)
    sectors = []
    if not rays:
        sectors.append((0.0, 2 * math.pi, _sign(_form_value(f, 0.0))))
    else:
        for i, lo in enumerate(rays):
            hi = rays[i + 1] if i + 1 < len(rays) else rays[0] + 2 * math.pi
            sectors.append((lo, hi, _sign(_form_value(f, 0.5 * (lo + hi)))))
    return WedgeDecomposition(k, slopes, vertical, rays, sectors, f)


def _sign(v: float) -> str:
    if abs(v) <= 1e-12:
        return "mixed-boundary"
    return "+" if v > 0 else "-"


def _case_of(a2: float, leading: float) -> SaddleCase:
    if abs(a2) <= A2_ZERO:
        return SaddleCase.ASYMPTOTE
    if a2 > 0:
        return SaddleCase.CASE1 if leading > 0 else SaddleCase.CASE4
    return SaddleCase.CASE3 if leading > 0 else SaddleCase.CASE2


# (max switch points, max intervals) per sub-wedge case
CASE_BOUNDS = {
    SaddleCase.CASE1: (1, 1),
    SaddleCase.CASE2: (0, 1),
    SaddleCase.CASE3: (2, 2),
    SaddleCase.CASE4: (1, 1),
    SaddleCase.ASYMPTOTE: (1, 1),
}


def saddle_case(g: BivariateSeries, delta: float) -> SaddleClassification:
    """Sub-wedge case of the direction theta0 + delta at a saddle.

    In principal axes g = a x^2 - b y^2 + ...; rotating by theta0 puts the
    asymptote on the x-axis and rotating further by delta gives a2(delta),
    the x^2 coefficient. ``leading`` is the first nonzero pure-x
    coefficient along the asymptote.
    """
    hc = hessian_classify(g)
    if hc.shape is not Shape.SADDLE:
        raise NotASaddle(f"Hessian shape is {hc.shape.value}")
    t0 = theta0(hc.a, hc.b)
    limit = min(2 * t0, math.pi - 2 * t0) - DELTA_MARGIN
    if not abs(delta) < limit:
        raise DeltaOutOfRange(f"|delta| = {abs(delta):.6g} must be below {limit:.6g}")
    gp = transform(g, hc.chart_rotation)
    g0 = transform(gp, rotation2(t0))
    pure = g0.restrict_x().coefficients.copy()
    pure[:3] = 0.0
    nz = np.nonzero(np.abs(pure) > ZERO_THRESHOLD)[0]
    if not len(nz):
        raise AsymptoteDegenerate("g vanishes along the asymptote through the working order")
    N = int(nz[0])
    leading = float(pure[N])
    a2 = transform(gp, rotation2(t0 + delta)).coefficient(2, 0)
    case = _case_of(a2, leading)
    sw, iv = CASE_BOUNDS[case]
    return SaddleClassification(t0, float(delta), float(a2), leading, N, case, sw, iv, hc.a, hc.b, hc.rotation)


def a2_closed_form(a: float, b: float, delta: float) -> float:
    t0 = theta0(a, b)
    return b * math.cos(t0 + delta) ** 2 / math.cos(t0) ** 2 - b


_PREDICTIONS = {
    TwoSurfaceCase.BOTH_FLAT: (None, "both surfaces contain the x-axis; the geodesic starts with a line segment"),
    TwoSurfaceCase.ONE_FLAT: (None, "the geodesic does not touch the flat surface near the origin; single-obstacle regime"),
    TwoSurfaceCase.PHI_ZERO: (None, "intersection curve is the x-axis; reduces to a single-obstacle regime"),
    TwoSurfaceCase.MLTN: (None, "M < N: only one surface is touched near the origin; single-obstacle regime"),
    TwoSurfaceCase.NNEQ: (None, "N differs from N~: one surface is avoided near the origin; single-obstacle regime"),
    TwoSurfaceCase.NEGATIVE: (None, "negative leading coefficient: that surface is not touched near the origin"),
    TwoSurfaceCase.MAIN: (
        None,
        "finitely many switch points; eventually a single-obstacle or line regime; "
        "boundary segments alternate between surfaces",
    ),
}


def classify_two_surfaces(s1: Surface, s2: Surface, p, order: int | None = None, asymmetric: bool = False) -> TwoSurfaceClassification:
    tf = two_surface_frame(s1, s2, p, order=order, asymmetric=asymmetric)
    ic = intersection_curve(tf.surface1, tf.surface2)
    nf1 = extract_normal_form(tf.surface1)
    nf2 = extract_normal_form(tf.surface2)
    N, Nt = nf1.N, nf2.N
    if nf1.flat and nf2.flat:
        label = TwoSurfaceCase.BOTH_FLAT
    elif nf1.flat or nf2.flat:
        label = TwoSurfaceCase.ONE_FLAT
    elif math.isinf(ic.M):
        label = TwoSurfaceCase.PHI_ZERO
    elif ic.M < min(N, Nt):
        label = TwoSurfaceCase.MLTN
    elif N != Nt:
        label = TwoSurfaceCase.NNEQ
    elif nf1.a00 < 0 or nf2.a00 < 0:
        label = TwoSurfaceCase.NEGATIVE
    else:
        label = TwoSurfaceCase.MAIN
    bound, text = _PREDICTIONS[label]
    return TwoSurfaceClassification(
        k=tf.k,
        k1=tf.k1,
        k2=tf.k2,
        angle_class=tf.angle_class,
        tilt=tf.tilt,
        M=ic.M,
        aM=ic.aM,
        N=N,
        a00=nf1.a00,
        Ntilde=Nt,
        a00tilde=nf2.a00,
        case_label=label,
        prediction=text,
        predicted_switch_bound=bound,
        normalized=tf,
        curve=ic,
        normal_form1=nf1,
        normal_form2=nf2,
    )


def predict_bound(c) -> PredictedBound:
    if isinstance(c, HessianClass):
        if c.shape is Shape.CONVEX_UP:
            return PredictedBound(1, "switch_points", "at most one switch point near p", intervals=1)
        if c.shape is Shape.CONCAVE_DOWN:
            return PredictedBound(0, "switch_points", "no switch point near p", intervals=1)
        if c.shape is Shape.SADDLE:
            return PredictedBound(2, "intervals", "at most two complete or partial line segments", intervals=2)
        return PredictedBound(None, "qualitative", "degenerate Hessian: bound depends on the lowest-degree form")
    if isinstance(c, SaddleClassification):
        return PredictedBound(
            2,
            "intervals",
            f"{c.case.value}: at most {c.predicted_max_switch_points} switch point(s) and "
            f"{c.predicted_max_intervals} interval(s) in this sub-wedge; at most two line segments overall",
            intervals=2,
        )
    if isinstance(c, TwoSurfaceClassification):
        q = "switch_points" if c.predicted_switch_bound is not None else "qualitative"
        return PredictedBound(c.predicted_switch_bound, q, c.prediction)
    raise TypeError(f"cannot predict a bound for {type(c).__name__}")
