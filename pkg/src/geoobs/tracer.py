"""Event-driven tracing of obstacle geodesics.

A trace alternates between boundary segments (RK4 on the constrained ODE
gamma'' = lambda * (-g_x, -g_y, 1)) and straight interior segments.
A boundary segment ends when the required normal acceleration turns
inward (lambda < -liftoff_tol). A line ends at the first contact with a
surface. What happens at the contact is decided by ``contact_decision``.

Positions and velocities in ``GeodesicState`` are world coordinates, which
coincide with chart coordinates when surfaces use the identity frame.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import InconsistentInitialState, LeftChart
from .geometry import Surface

SURFACE_TOL = 1e-9
TANGENT_TOL = 1e-8
SPEED_TOL = 1e-9
EVENT_TOL = 1e-10
NOISE = 1e-13
TOUCH_TOL = 1e-10
PENETRATION_TOL = 1e-14
PROBE = 1e-3
CHUNK = 4096
LINE_SAMPLES = 16


class Termination(str, Enum):
    EXITED_BALL = "exited_ball"
    MAX_SEGMENTS = "max_segments"
    TRANSVERSAL_IMPACT = "transversal_impact"
    LEFT_CHART = "left_chart"
    STEP_LIMIT = "step_limit"
    LENGTH_LIMIT = "length_limit"


class Decision(str, Enum):
    ATTACH = "Attach"
    CONTINUE = "ContinueStraight"
    TERMINATE = "TerminateTransversal"


@dataclass(frozen=True, eq=False)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray
    mode: int | None = None  # surface index when on a boundary, None in the interior
    s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).copy())
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).copy())

    @property
    def interior(self) -> bool:
        return self.mode is None

    def reversed(self) -> "GeodesicState":
        return GeodesicState(self.position, -self.velocity, self.mode, 0.0)


@dataclass(frozen=True, eq=False)
class Segment:
    kind: str  # "boundary" or "line"
    surface: int | None
    s_start: float
    s_end: float
    start: np.ndarray
    end: np.ndarray
    line_slope_T: float | None = None
    min_clearance: float | None = None

    @property
    def length(self) -> float:
        return self.s_end - self.s_start

    @property
    def feasible(self) -> bool:
        return self.min_clearance is None or self.min_clearance >= -1e-9

    def label(self) -> str:
        return "L" if self.kind == "line" else f"B{self.surface + 1}"


@dataclass(frozen=True, eq=False)
class SwitchPoint:
    s: float
    point: np.ndarray
    from_kind: str
    to_kind: str
    surface: int
    velocity: np.ndarray
    angle: float = 0.0


@dataclass(frozen=True, eq=False)
class ContactEvent:
    surface: int
    s_hit: float
    tangential: bool
    slope: float
    kind: str  # "crossing" or "touch"
    point: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Flag:
    s: float
    kind: str
    detail: str


@dataclass(frozen=True)
class TraceLimits:
    ds: float = 1e-4
    max_segments: int = 64
    max_steps: int = 200_000
    liftoff_tol: float = 1e-9
    tangency_tol: float = 1e-6
    deadband: float = 1e-6
    attach: str = "penetrating"  # or "supported"
    max_length: float | None = None
    center: tuple[float, float, float] | None = None
    scan_step: float | None = None

    def __post_init__(self):
        if self.attach not in ("penetrating", "supported"):
            raise ValueError("attach must be 'penetrating' or 'supported'")
        if not self.ds > 0:
            raise ValueError("ds must be positive")


@dataclass(eq=False)
class TraceResult:
    segments: list[Segment]
    switch_points: list[SwitchPoint]
    termination: Termination
    samples: np.ndarray
    sample_kinds: list[str]
    config: dict
    flags: list[Flag] = field(default_factory=list)
    final_state: GeodesicState | None = None
    sample_velocities: np.ndarray | None = None

    @property
    def length(self) -> float:
        return self.segments[-1].s_end if self.segments else 0.0

    @property
    def interval_count(self) -> int:
        return sum(1 for sg in self.segments if sg.kind == "line" and sg.length > 1e-12)

    @property
    def switch_count(self) -> int:
        return len(self.switch_points)

    def kinds(self) -> list[str]:
        return [sg.label() for sg in self.segments]


# -- packing ----------------------------------------------------------------


class _Packed:
    def __init__(self, surfaces: Sequence[Surface]):
        if not surfaces:
            raise ValueError("need at least one surface")
        n = max(s.g.order for s in surfaces) + 1
        self.surfaces = list(surfaces)
        self.C = np.zeros((len(surfaces), n, n))
        for k, s in enumerate(surfaces):
            a = s.g.array
            self.C[k, : a.shape[0], : a.shape[1]] = a
        self.R = np.stack([np.asarray(s.frame.rotation) for s in surfaces])
        self.O = np.stack([np.asarray(s.frame.origin) for s in surfaces])
        self.r = np.array([s.chart_radius for s in surfaces], dtype=float)

    def local(self, i: int, p):
        return self.R[i].T @ (np.asarray(p, dtype=float) - self.O[i])

    def world(self, i: int, q):
        return self.O[i] + self.R[i] @ np.asarray(q, dtype=float)

    def clearance(self, i: int, p) -> float:
        return K.clearance(self.C[i], self.R[i], self.O[i], p[0], p[1], p[2])

    def others(self, i: int):
        idx = [j for j in range(len(self.surfaces)) if j != i]
        n = self.C.shape[1]
        if not idx:
            return np.zeros((0, n, n)), np.zeros((0, 3, 3)), np.zeros((0, 3))
        return self.C[idx].copy(), self.R[idx].copy(), self.O[idx].copy()

    def line_derivs(self, j: int, p, v, t: float):
        """F, F', F'' of the clearance along p + t v for surface j."""
        q = self.local(j, p + t * v)
        w = self.R[j].T @ v
        g, gx, gy, gxx, gxy, gyy = K.poly_derivs(self.C[j], q[0], q[1])
        F = g - q[2]
        dF = gx * w[0] + gy * w[1] - w[2]
        d2F = gxx * w[0] ** 2 + 2 * gxy * w[0] * w[1] + gyy * w[1] ** 2
        return F, dF, d2F


def _as_list(surfaces) -> list[Surface]:
    return [surfaces] if isinstance(surfaces, Surface) else list(surfaces)


# -- single-step operations ------------------------------------------------


def surface_accel(s: Surface, x: float, y: float, vx: float, vy: float):
    """(x'', y'', z'', lambda) with gamma'' = lambda * (-g_x, -g_y, 1)."""
    C = np.ascontiguousarray(s.g.array)
    ax, ay, lam = K.accel(C, x, y, vx, vy)
    return ax, ay, lam, lam


def _normal_curvature(pk: _Packed, i: int, p, v) -> float:
    q = pk.local(i, p)
    w = pk.R[i].T @ v
    return K.accel(pk.C[i], q[0], q[1], w[0], w[1])[2]


def step_boundary(state: GeodesicState, ds: float, surfaces) -> GeodesicState:
    """One projected RK4 step on the surface ``state.mode``."""
    surfaces = _as_list(surfaces)
    if state.mode is None:
        raise ValueError("step_boundary needs a state on a surface")
    pk = _Packed(surfaces)
    i = state.mode
    q = pk.local(i, state.position)
    w = pk.R[i].T @ state.velocity
    x, y, vx, vy = K.rk4_step(pk.C[i], q[0], q[1], w[0], w[1], ds)
    if abs(x) > pk.r[i] or abs(y) > pk.r[i]:
        raise LeftChart(f"step leaves the chart box |x|,|y| <= {pk.r[i]}")
    ux, uy, uz, z = K.project(pk.C[i], x, y, vx, vy)
    return GeodesicState(pk.world(i, [x, y, z]), pk.R[i] @ np.array([ux, uy, uz]), i, state.s + ds)


def liftoff_event(state: GeodesicState, surfaces, tol: float = 1e-9) -> bool:
    surfaces = _as_list(surfaces)
    if state.mode is None:
        raise ValueError("liftoff_event needs a state on a surface")
    pk = _Packed(surfaces)
    return _normal_curvature(pk, state.mode, state.position, state.velocity) < -tol


# -- line contacts -----------------------------------------------------------


def _line_caps(pk: _Packed, p, v, s_now: float, eps: float, center, max_length):
    caps = []
    dc = p - center
    b = v @ dc
    disc = b * b - (dc @ dc - eps * eps)
    caps.append((max(-b + math.sqrt(disc), 0.0) if disc > 0 else 0.0, Termination.EXITED_BALL))
    t_chart = math.inf
    for j in range(len(pk.surfaces)):
        q = pk.local(j, p)
        w = pk.R[j].T @ v
        for k in (0, 1):
            if w[k] > 0:
                t_chart = min(t_chart, (pk.r[j] - q[k]) / w[k])
            elif w[k] < 0:
                t_chart = min(t_chart, (-pk.r[j] - q[k]) / w[k])
    caps.append((max(t_chart, 0.0), Termination.LEFT_CHART))
    if max_length is not None:
        caps.append((max(max_length - s_now, 0.0), Termination.LENGTH_LIMIT))
    return min(caps, key=lambda c: c[0])


def _scan_surface(pk: _Packed, j: int, p, v, t0: float, t1: float, h: float, tangency_tol: float):
    """First contact (t, kind, slope) of the line with surface j on [t0, t1], and min clearance."""
    if t1 <= t0:
        return None, math.inf
    n = max(int(math.ceil((t1 - t0) / h)), 2)
    ts = np.linspace(t0, t1, n + 1)
    F = K.line_clearance(pk.C[j], pk.R[j], pk.O[j], p, v, ts)
    fmin = float(F.min())
    best = None

    sig = np.where(np.abs(F) > NOISE, np.sign(F), 0.0)
    nz = np.nonzero(sig)[0]
    if len(nz) >= 2:
        flips = np.nonzero(sig[nz[1:]] != sig[nz[:-1]])[0]
        if len(flips):
            a, b = nz[flips[0]], nz[flips[0] + 1]
            lo, hi = ts[a], ts[b]
            flo = F[a]
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                fm = pk.line_derivs(j, p, v, mid)[0]
                if (fm > 0) == (flo > 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            t_hit = 0.5 * (lo + hi)
            best = (t_hit, "crossing", pk.line_derivs(j, p, v, t_hit)[1])

    # grazing touch: interior local minimum of F near zero on the feasible side
    k_end = len(ts) - 1 if best is None else int(np.searchsorted(ts, best[0]))
    cand = np.nonzero((F[1:k_end - 1] <= F[: k_end - 2]) & (F[1:k_end - 1] <= F[2:k_end]) & (F[1:k_end - 1] > -NOISE))[0] + 1 if k_end >= 3 else []
    for k in cand:
        if F[k] > 1e-6:
            continue
        t = ts[k]
        for _ in range(40):
            _, d1, d2 = pk.line_derivs(j, p, v, t)
            if d2 <= 0:
                break
            t_new = min(max(t - d1 / d2, ts[k - 1]), ts[k + 1])
            if abs(t_new - t) < 1e-15:
                t = t_new
                break
            t = t_new
        Fm, d1, _ = pk.line_derivs(j, p, v, t)
        if Fm <= TOUCH_TOL and abs(d1) < tangency_tol:
            if best is None or t < best[0]:
                best = (t, "touch", d1)
            break
    return best, fmin


def line_contact(state: GeodesicState, surfaces, t_end: float | None = None, limits: TraceLimits | None = None) -> ContactEvent | None:
    """First contact of the ray state.position + t * state.velocity after the deadband."""
    surfaces = _as_list(surfaces)
    lim = limits or TraceLimits()
    pk = _Packed(surfaces)
    p, v = state.position, state.velocity
    if t_end is None:
        t_end, _ = _line_caps(pk, p, v, state.s, math.inf, p, None)
    ev, _ = _first_contact(pk, p, v, lim.deadband, t_end, lim)
    if ev is None:
        return None
    t, j, kind, slope = ev
    return ContactEvent(j, state.s + t, abs(slope) < lim.tangency_tol * np.linalg.norm(v), float(slope), kind, p + t * v)


def _first_contact(pk: _Packed, p, v, t0: float, t1: float, lim: TraceLimits):
    h = lim.scan_step or lim.ds
    best = None
    fmin = math.inf
    for j in range(len(pk.surfaces)):
        hit, fm = _scan_surface(pk, j, p, v, t0, t1, h, lim.tangency_tol)
        fmin = min(fmin, fm)
        if hit is not None and (best is None or hit[0] < best[0]):
            best = (hit[0], j, hit[1], hit[2])
    return best, fmin


def contact_decision(state: GeodesicState, surface_index: int, surfaces, policy: str = "penetrating",
                     tangency_tol: float = 1e-6, liftoff_tol: float = 1e-9) -> tuple[Decision, bool]:
    """Decide what a line does at a contact; also returns a degeneracy flag.

    Transversal contacts terminate. At a tangential contact the default
    policy attaches only if going straight would enter the obstacle.
    ``policy="supported"`` attaches whenever the surface can carry the
    geodesic (normal curvature >= -liftoff_tol).
    """
    pk = _Packed(_as_list(surfaces))
    p, v = state.position, state.velocity
    _, d1, d2 = pk.line_derivs(surface_index, p, v, 0.0)
    if abs(d1) >= tangency_tol * np.linalg.norm(v):
        return Decision.TERMINATE, False
    lam = _normal_curvature(pk, surface_index, p, v)
    degenerate = abs(lam) <= liftoff_tol
    if policy == "supported":
        return (Decision.ATTACH if lam >= -liftoff_tol else Decision.CONTINUE), degenerate
    # minimum over t in (0, PROBE] of the quadratic model d1 t + d2 t^2 / 2
    cands = [PROBE]
    if d2 > 0 and d1 < 0:
        cands.append(min(-d1 / d2, PROBE))
    worst = min(d1 * t + 0.5 * d2 * t * t for t in cands)
    if degenerate and abs(d1) <= NOISE:
        return Decision.CONTINUE, True
    return (Decision.ATTACH if worst < -PENETRATION_TOL else Decision.CONTINUE), degenerate


# -- the trace loop -------------------------------------------------------------


def _check_start(pk: _Packed, s0: GeodesicState):
    speed = np.linalg.norm(s0.velocity)
    if abs(speed - 1.0) > SPEED_TOL:
        raise InconsistentInitialState(f"|velocity| = {speed:.12g}, expected 1")
    if s0.mode is None:
        for j in range(len(pk.surfaces)):
            if pk.clearance(j, s0.position) < -SURFACE_TOL:
                raise InconsistentInitialState(f"interior start lies inside obstacle {j}")
        return
    i = s0.mode
    if not 0 <= i < len(pk.surfaces):
        raise InconsistentInitialState(f"no surface with index {i}")
    if abs(pk.clearance(i, s0.position)) > SURFACE_TOL:
        raise InconsistentInitialState("start point is not on its surface")
    q = pk.local(i, s0.position)
    _, gx, gy, *_ = K.poly_derivs(pk.C[i], q[0], q[1])
    n = pk.R[i] @ np.array([-gx, -gy, 1.0])
    n /= np.linalg.norm(n)
    if abs(n @ s0.velocity) > TANGENT_TOL:
        raise InconsistentInitialState("start velocity is not tangent to the surface")


class _Tracer:
    def __init__(self, pk: _Packed, eps: float, lim: TraceLimits, center):
        self.pk = pk
        self.eps = eps
        self.lim = lim
        self.center = np.asarray(center, dtype=float)
        self.s_max = lim.max_length if lim.max_length is not None else math.inf
        self.segments: list[Segment] = []
        self.switches: list[SwitchPoint] = []
        self.flags: list[Flag] = []
        self.samples: list[np.ndarray] = []
        self.sample_kinds: list[str] = []
        self.steps = 0

    def _add_samples(self, arr: np.ndarray, kind: str):
        if len(arr):
            self.samples.append(arr)
            self.sample_kinds.extend([kind] * len(arr))

    # boundary ------------------------------------------------------------

    def _events_at(self, i, x, y, vx, vy, h, others):
        C = self.pk.C[i]
        xn, yn, vxn, vyn = K.rk4_step(C, x, y, vx, vy, h)
        out = {}
        r = self.pk.r[i]
        out[Termination.LEFT_CHART] = abs(xn) > r or abs(yn) > r
        zn = K.poly_eval(C, xn, yn)
        w = self.pk.world(i, [xn, yn, zn])
        out[Termination.EXITED_BALL] = float(np.sum((w - self.center) ** 2)) > self.eps**2
        oc, orot, oo = others
        out[Termination.TRANSVERSAL_IMPACT] = any(
            K.clearance(oc[j], orot[j], oo[j], w[0], w[1], w[2]) < -K.OTHER_TOL for j in range(oc.shape[0])
        )
        out["liftoff"] = K.accel(C, xn, yn, vxn, vyn)[2] < -self.lim.liftoff_tol
        return out, (xn, yn, vxn, vyn)

    def _locate(self, i, x, y, vx, vy, s, others):
        ds = self.lim.ds
        h_top = min(ds, self.s_max - s)
        found, _ = self._events_at(i, x, y, vx, vy, h_top, others)
        best = None
        for ev, hit in found.items():
            if not hit:
                continue
            lo, hi = 0.0, h_top
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                if self._events_at(i, x, y, vx, vy, mid, others)[0][ev]:
                    hi = mid
                else:
                    lo = mid
            if best is None or hi < best[0]:
                best = (hi, ev)
        if best is None:
            if h_top < ds:
                best = (h_top, Termination.LENGTH_LIMIT)
            else:
                best = (ds, None)
        h, ev = best
        _, st = self._events_at(i, x, y, vx, vy, h, others)
        return ev, st, s + h

    def boundary(self, st: GeodesicState):
        i = st.mode
        pk = self.pk
        C, R, O = pk.C[i], pk.R[i], pk.O[i]
        others = pk.others(i)
        q = pk.local(i, st.position)
        w = R.T @ st.velocity
        x, y, vx, vy, s = q[0], q[1], w[0], w[1], st.s
        start = st.position.copy()
        s_start = st.s
        while True:
            budget = min(CHUNK, self.lim.max_steps - self.steps)
            if budget <= 0:
                ev = Termination.STEP_LIMIT
                break
            buf = np.empty((budget, 7))
            code, k, x, y, vx, vy, s = K.boundary_run(
                C, R, O, x, y, vx, vy, s, self.lim.ds, budget, self.lim.liftoff_tol,
                self.center, self.eps, pk.r[i], others[0], others[1], others[2], self.s_max, buf,
            )
            self.steps += k
            self._add_samples(buf[:k], "boundary")
            if code == K.RUNNING:
                continue
            ev, (x, y, vx, vy), s = self._locate(i, x, y, vx, vy, s, others)
            if ev is None:  # event vanished under bisection; keep going
                self.steps += 1
                continue
            break
        ux, uy, uz, z = K.project(C, x, y, vx, vy)
        p = pk.world(i, [x, y, z])
        v = R @ np.array([ux, uy, uz])
        self._add_samples(np.array([[s, *p, *v]]), "boundary")
        self.segments.append(Segment("boundary", i, s_start, s, start, p))
        end = GeodesicState(p, v, i, s)
        if ev == "liftoff":
            self.switches.append(SwitchPoint(s, p.copy(), "boundary", "line", i, v.copy(), 0.0))
            return GeodesicState(p, v, None, s), None
        return end, ev

    # line ---------------------------------------------------------------

    def line(self, st: GeodesicState):
        pk, lim = self.pk, self.lim
        p, v = st.position, st.velocity
        t_end, cap = _line_caps(pk, p, v, st.s, self.eps, self.center, lim.max_length)
        t0 = lim.deadband
        fmin = math.inf
        outcome = None
        while True:
            ev, fm = _first_contact(pk, p, v, t0, t_end, lim)
            fmin = min(fmin, fm)
            if ev is None:
                t_stop, outcome = t_end, cap
                break
            t, j, kind, slope = ev
            fmin = min(fmin, *(pk.clearance(jj, p + t * v) for jj in range(len(pk.surfaces))))
            at = GeodesicState(p + t * v, v, None, st.s + t)
            decision, degenerate = contact_decision(at, j, pk.surfaces, lim.attach, lim.tangency_tol, lim.liftoff_tol)
            if degenerate:
                self.flags.append(Flag(st.s + t, "degenerate_contact", f"zero normal curvature at contact with surface {j}; chose {decision.value}"))
            if decision is Decision.TERMINATE:
                t_stop, outcome = t, Termination.TRANSVERSAL_IMPACT
                break
            if decision is Decision.ATTACH:
                if _normal_curvature(pk, j, at.position, v) < -lim.liftoff_tol:
                    self.flags.append(Flag(st.s + t, "attach_skipped", f"surface {j} cannot carry the geodesic at the contact"))
                    t0 = t + lim.deadband
                    continue
                t_stop, outcome = t, ("attach", j)
                break
            self.flags.append(Flag(st.s + t, "graze_continue", f"{kind} contact with surface {j}"))
            t0 = t + lim.deadband
        t_stop = max(t_stop, 0.0)
        end = p + t_stop * v
        q0 = pk.R[0].T @ v
        slope_T = float(q0[1] / q0[0]) if abs(q0[0]) > 1e-15 else None
        ts = np.linspace(0.0, t_stop, LINE_SAMPLES + 1)[1:]
        self._add_samples(np.column_stack([st.s + ts, p + ts[:, None] * v, np.tile(v, (len(ts), 1))]), "line")
        self.segments.append(Segment("line", None, st.s, st.s + t_stop, p.copy(), end, slope_T, float(fmin)))
        s_new = st.s + t_stop
        if isinstance(outcome, tuple):
            j = outcome[1]
            q = pk.local(j, end)
            w = pk.R[j].T @ v
            ux, uy, uz, z = K.project(pk.C[j], q[0], q[1], w[0], w[1])
            pnew = pk.world(j, [q[0], q[1], z])
            vnew = pk.R[j] @ np.array([ux, uy, uz])
            ang = math.acos(min(1.0, max(-1.0, float(vnew @ v))))
            self.switches.append(SwitchPoint(s_new, pnew.copy(), "line", "boundary", j, vnew.copy(), ang))
            return GeodesicState(pnew, vnew, j, s_new), None
        return GeodesicState(end, v, None, s_new), outcome

    def start_mode(self, st: GeodesicState) -> GeodesicState:
        if st.mode is None:
            return st
        lam = _normal_curvature(self.pk, st.mode, st.position, st.velocity)
        tol = self.lim.liftoff_tol
        if lam < -tol:
            return GeodesicState(st.position, st.velocity, None, st.s)
        if lam <= tol:
            ts = np.linspace(0.0, min(PROBE, self.eps), 33)[1:]
            F = K.line_clearance(self.pk.C[st.mode], self.pk.R[st.mode], self.pk.O[st.mode], st.position, st.velocity, ts)
            if F.min() >= -NOISE:
                self.flags.append(Flag(st.s, "flat_start", "zero normal curvature and feasible tangent line; starting straight"))
                return GeodesicState(st.position, st.velocity, None, st.s)
        return st


def trace(s0: GeodesicState, surfaces, eps: float, limits: TraceLimits | None = None) -> TraceResult:
    """Trace a geodesic from ``s0`` until it leaves the ball of radius ``eps``
    about its start (or ``limits.center``) or another stop condition fires."""
    surfaces = _as_list(surfaces)
    lim = limits or TraceLimits()
    if not eps > 0:
        raise ValueError("eps must be positive")
    pk = _Packed(surfaces)
    _check_start(pk, s0)
    center = s0.position if lim.center is None else lim.center
    tr = _Tracer(pk, eps, lim, center)
    st = GeodesicState(s0.position, s0.velocity, s0.mode, 0.0)
    tr._add_samples(np.array([[0.0, *st.position, *st.velocity]]), "boundary" if st.mode is not None else "line")
    st = tr.start_mode(st)
    termination = None
    while termination is None:
        if len(tr.segments) >= lim.max_segments:
            termination = Termination.MAX_SEGMENTS
            break
        if st.mode is None:
            st, termination = tr.line(st)
        else:
            st, termination = tr.boundary(st)
    config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(lim).items()}
    config["eps"] = eps
    config["center"] = [float(c) for c in center]
    samples = np.concatenate(tr.samples) if tr.samples else np.zeros((0, 7))
    return TraceResult(tr.segments, tr.switches, termination, samples[:, :4].copy(), tr.sample_kinds, config,
                       tr.flags, st, samples[:, 4:].copy())


# -- starting states ---------------------------------------------------------


def tangent_direction(s: Surface, x: float, y: float, theta: float) -> np.ndarray:
    """Unit chart-frame tangent at (x, y) whose xy-projection points along theta."""
    C = np.ascontiguousarray(s.g.array)
    _, gx, gy, *_ = K.poly_derivs(C, x, y)
    c, sn = math.cos(theta), math.sin(theta)
    v = np.array([c, sn, gx * c + gy * sn])
    return v / np.linalg.norm(v)


def surface_start(surfaces, index: int, x: float, y: float, theta: float) -> GeodesicState:
    """On-surface state at chart point (x, y) of surface ``index`` heading along theta."""
    surfaces = _as_list(surfaces)
    s = surfaces[index]
    p = s.frame.to_world(s.chart_point(x, y))
    v = s.frame.vector_to_world(tangent_direction(s, x, y, theta))
    return GeodesicState(p, v, index, 0.0)
