"""Two-point shortest paths around an obstacle by direction shooting.

The path is modelled as an optional tangent line from A onto the surface,
a boundary geodesic, and a tangent line leaving the surface towards B.
For one angular parameter the boundary geodesic is traced once. The best
departure point is the one whose tangent ray passes closest to B. A coarse
scan followed by golden-section search drives that miss distance to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels as K
from .errors import NonConverged, ValidationError
from .tracer import (
    GeodesicState,
    Segment,
    SwitchPoint,
    Termination,
    TraceLimits,
    TraceResult,
    _as_list,
    _Packed,
)

CLEAR_TOL = 1e-12


@dataclass(eq=False)
class ShotResult:
    trace: TraceResult
    length: float
    miss: float
    parameter: float | None


def _segment_clearance(pk: _Packed, a, b, n: int = 2000) -> float:
    d = b - a
    L = float(np.linalg.norm(d))
    if L == 0.0:
        return math.inf
    ts = np.linspace(0.0, L, n + 1)
    v = d / L
    return min(float(K.line_clearance(pk.C[j], pk.R[j], pk.O[j], a, v, ts).min()) for j in range(len(pk.surfaces)))


def _straight(pk, A, B) -> ShotResult:
    L = float(np.linalg.norm(B - A))
    v = (B - A) / L if L > 0 else np.array([1.0, 0.0, 0.0])
    seg = Segment("line", None, 0.0, L, A.copy(), B.copy(), None, _segment_clearance(pk, A, B))
    ts = np.linspace(0.0, L, 17)
    samples = np.column_stack([ts, A + ts[:, None] * v])
    tr = TraceResult([seg], [], Termination.LENGTH_LIMIT, samples, ["line"] * len(ts), {"mode": "straight"},
                     [], GeodesicState(B, v, None, L), np.tile(v, (len(ts), 1)))
    return ShotResult(tr, L, 0.0, None)


class _Shooter:
    def __init__(self, pk: _Packed, A, B, lim: TraceLimits, L_max: float):
        self.pk, self.A, self.B, self.lim, self.L_max = pk, A, B, lim, L_max
        self.on = next((i for i in range(len(pk.surfaces)) if abs(pk.clearance(i, A)) <= 1e-9), None)
        if self.on is None:
            self.target = self._penetrated_surface()

    def _penetrated_surface(self) -> int:
        d = self.B - self.A
        L = float(np.linalg.norm(d))
        ts = np.linspace(0.0, L, 2001)
        mins = [K.line_clearance(self.pk.C[j], self.pk.R[j], self.pk.O[j], self.A, d / L, ts).min()
                for j in range(len(self.pk.surfaces))]
        return int(np.argmin(mins))

    # start of the boundary arc for a given parameter ----------------------------

    def _touch(self, theta: float):
        """Ray from A with azimuth theta pitched so that it just touches the surface."""
        j = self.target
        pk = self.pk
        ts = np.linspace(0.0, self.L_max, 1201)[1:]

        def ray(beta):
            return np.array([math.cos(beta) * math.cos(theta), math.cos(beta) * math.sin(theta), math.sin(beta)])

        def fmin(beta):
            F = K.line_clearance(pk.C[j], pk.R[j], pk.O[j], self.A, ray(beta), ts)
            k = int(np.argmin(F))
            return F[k], k

        lo, hi = -math.pi / 2 + 1e-6, math.pi / 2 - 1e-6
        if fmin(lo)[0] <= 0 or fmin(hi)[0] > 0:
            return None
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if fmin(mid)[0] > 0:
                lo = mid
            else:
                hi = mid
        d = ray(lo)
        _, k = fmin(lo)
        if k == 0 or k == len(ts) - 1:
            return None
        # refine the touching parameter with Newton on F'(t) = 0
        t = ts[k]
        for _ in range(50):
            _, d1, d2 = pk.line_derivs(j, self.A, d, t)
            if d2 <= 0:
                break
            step = d1 / d2
            t -= step
            if abs(step) < 1e-15:
                break
        return j, t, d

    def _arc_start(self, theta: float):
        pk = self.pk
        if self.on is not None:
            i = self.on
            q = pk.local(i, self.A)
            _, gx, gy, *_ = K.poly_derivs(pk.C[i], q[0], q[1])
            w = np.array([math.cos(theta), math.sin(theta), gx * math.cos(theta) + gy * math.sin(theta)])
            return i, 0.0, q, w / np.linalg.norm(w)
        hit = self._touch(theta)
        if hit is None:
            return None
        j, t, d = hit
        q = pk.local(j, self.A + t * d)
        w = pk.R[j].T @ d
        ux, uy, uz, z = K.project(pk.C[j], q[0], q[1], w[0], w[1])
        return j, t, np.array([q[0], q[1], z]), np.array([ux, uy, uz])

    def _arc(self, j, s0, q, w):
        pk = self.pk
        n = max(int((self.L_max - s0) / self.lim.ds), 1)
        buf = np.empty((n, 7))
        oc, orot, oo = pk.others(j)
        code, k, *_ = K.boundary_run(
            pk.C[j], pk.R[j], pk.O[j], q[0], q[1], w[0], w[1], s0, self.lim.ds, n, self.lim.liftoff_tol,
            pk.world(j, q), 1e9, pk.r[j], oc, orot, oo, self.L_max, buf,
        )
        first = np.array([[s0, *pk.world(j, q), *(pk.R[j] @ w)]])
        return np.concatenate([first, buf[:k]])

    def evaluate(self, theta: float):
        start = self._arc_start(theta)
        if start is None:
            return math.inf, None
        j, s0, q, w = start
        arc = self._arc(j, s0, q, w)
        P, V = arc[:, 1:4], arc[:, 4:7]
        W = self.B - P
        tau = np.maximum(np.einsum("ij,ij->i", W, V), 0.0)
        dist = np.linalg.norm(W - tau[:, None] * V, axis=1)
        k = int(np.argmin(dist))
        return float(dist[k]), (j, s0, q, w, arc, k)

    def refine_departure(self, detail):
        """Sub-step search for the departure point around the best sample."""
        j, s0, q, w, arc, k = detail
        pk = self.pk
        k0 = max(k - 1, 0)
        base = arc[k0]
        qb = pk.local(j, base[1:4])
        wb = pk.R[j].T @ base[4:7]
        span = 2 * self.lim.ds if k0 + 1 < len(arc) else self.lim.ds

        def state(h):
            x, y, vx, vy = K.rk4_step(pk.C[j], qb[0], qb[1], wb[0], wb[1], h) if h > 0 else (qb[0], qb[1], wb[0], wb[1])
            ux, uy, uz, z = K.project(pk.C[j], x, y, vx, vy)
            return pk.world(j, [x, y, z]), pk.R[j] @ np.array([ux, uy, uz])

        def miss(h):
            P, V = state(h)
            Wv = self.B - P
            tau = max(float(Wv @ V), 0.0)
            return float(np.linalg.norm(Wv - tau * V))

        res = minimize_scalar(miss, bounds=(0.0, span), method="bounded", options={"xatol": 1e-13})
        h = float(res.x)
        P, V = state(h)
        return base[0] + h, P, V, float(res.fun)


def shoot_between(A, B, surfaces, tol: float = 1e-6, limits: TraceLimits | None = None,
                  n_scan: int = 72, max_length: float | None = None) -> ShotResult:
    """Locally shortest path from A to B, found by shooting over one angle."""
    surfaces = _as_list(surfaces)
    pk = _Packed(surfaces)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    lim = limits or TraceLimits()
    for name, P in (("A", A), ("B", B)):
        for j in range(len(surfaces)):
            if pk.clearance(j, P) < -1e-9:
                raise ValidationError(f"{name} lies inside obstacle {j + 1}", name)
    if _segment_clearance(pk, A, B) >= -CLEAR_TOL:
        return _straight(pk, A, B)

    chord = float(np.linalg.norm(B - A))
    L_max = max_length or 3.0 * chord
    sh = _Shooter(pk, A, B, lim, L_max)

    grid = np.linspace(0.0, 2 * math.pi, n_scan, endpoint=False)
    vals = [sh.evaluate(t)[0] for t in grid]
    kbest = int(np.argmin(vals))
    if not math.isfinite(vals[kbest]):
        raise NonConverged("no shooting direction produced a usable path")
    step = grid[1] - grid[0]
    lo, mid, hi = grid[kbest] - step, grid[kbest], grid[kbest] + step
    f = lambda t: sh.evaluate(t)[0]
    if f(mid) < min(f(lo), f(hi)):
        res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", tol=1e-12)
        theta = float(res.x)
    else:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        theta = float(res.x)
    miss, detail = sh.evaluate(theta)
    if detail is None:
        raise NonConverged("shooting lost the surface at the optimum")
    s_dep, P, V, miss = sh.refine_departure(detail)
    j, s0, q, w, arc, _ = detail

    segments, switches = [], []
    if s0 > 0:
        p_touch = pk.world(j, q)
        segments.append(Segment("line", None, 0.0, s0, A.copy(), p_touch, None, _segment_clearance(pk, A, p_touch)))
        switches.append(SwitchPoint(s0, p_touch, "line", "boundary", j, pk.R[j] @ w, 0.0))
    segments.append(Segment("boundary", j, s0, s_dep, pk.world(j, q), P.copy()))
    tail = float(np.linalg.norm(B - P))
    if tail > tol:
        switches.append(SwitchPoint(s_dep, P.copy(), "boundary", "line", j, V.copy(), 0.0))
        segments.append(Segment("line", None, s_dep, s_dep + tail, P.copy(), B.copy(), None, _segment_clearance(pk, P, B)))
    length = s_dep + (tail if tail > tol else 0.0)
    keep = arc[:, 0] <= s_dep
    samples = np.concatenate([np.array([[0.0, *A]]), arc[keep, :4], np.array([[length, *B]])])
    kinds = ["line"] + ["boundary"] * int(keep.sum()) + ["line"]
    vel = np.concatenate([np.array([pk.R[j] @ w]), arc[keep, 4:7], np.array([V])])
    tr = TraceResult(segments, switches, Termination.LENGTH_LIMIT, samples, kinds,
                     {"mode": "shooting", "theta": theta, "tol": tol, "ds": lim.ds}, [],
                     GeodesicState(B, V, None, length), vel)
    result = ShotResult(tr, length, miss, theta)
    if miss > tol:
        raise NonConverged(f"terminal miss {miss:.3g} exceeds tol {tol:.3g}", result)
    return result
