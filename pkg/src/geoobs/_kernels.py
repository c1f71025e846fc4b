"""Compiled inner loops for the tracer.

Surfaces arrive as dense coefficient matrices C[i, j] (x^i y^j) plus their
frame (R, O) with world = O + R @ chart. Several surfaces are packed into
zero-padded 3-D arrays.
"""

import math

import numpy as np
from numba import njit

# boundary_run exit codes
RUNNING = 0
LIFTOFF = 1
EXIT_BALL = 2
EXIT_CHART = 3
CROSSED_OTHER = 4
LENGTH_LIMIT = 5

OTHER_TOL = 1e-12


@njit(cache=True)
def poly_eval(C, x, y):
    n = C.shape[0]
    acc = 0.0
    for i in range(n - 1, -1, -1):
        inner = 0.0
        for j in range(n - 1 - i, -1, -1):
            inner = inner * y + C[i, j]
        acc = acc * x + inner
    return acc


@njit(cache=True)
def poly_derivs(C, x, y):
    """g, g_x, g_y, g_xx, g_xy, g_yy at (x, y)."""
    n = C.shape[0]
    xp = np.empty(n + 1)
    yp = np.empty(n + 1)
    xp[0] = 1.0
    yp[0] = 1.0
    for k in range(1, n + 1):
        xp[k] = xp[k - 1] * x
        yp[k] = yp[k - 1] * y
    g = gx = gy = gxx = gxy = gyy = 0.0
    for i in range(n):
        for j in range(n - i):
            c = C[i, j]
            if c == 0.0:
                continue
            g += c * xp[i] * yp[j]
            if i >= 1:
                gx += c * i * xp[i - 1] * yp[j]
                if i >= 2:
                    gxx += c * i * (i - 1) * xp[i - 2] * yp[j]
                if j >= 1:
                    gxy += c * i * j * xp[i - 1] * yp[j - 1]
            if j >= 1:
                gy += c * j * xp[i] * yp[j - 1]
                if j >= 2:
                    gyy += c * j * (j - 1) * xp[i] * yp[j - 2]
    return g, gx, gy, gxx, gxy, gyy


@njit(cache=True)
def accel(C, x, y, vx, vy):
    """(x'', y'', lambda) with gamma'' = lambda * (-g_x, -g_y, 1)."""
    g, gx, gy, gxx, gxy, gyy = poly_derivs(C, x, y)
    lam = (gxx * vx * vx + 2.0 * gxy * vx * vy + gyy * vy * vy) / (1.0 + gx * gx + gy * gy)
    return -lam * gx, -lam * gy, lam


@njit(cache=True)
def project(C, x, y, vx, vy):
    """Renormalize (vx, vy, g_x vx + g_y vy) to unit length."""
    g, gx, gy, gxx, gxy, gyy = poly_derivs(C, x, y)
    vz = gx * vx + gy * vy
    nrm = math.sqrt(vx * vx + vy * vy + vz * vz)
    return vx / nrm, vy / nrm, vz / nrm, g


@njit(cache=True)
def rk4_step(C, x, y, vx, vy, h):
    k1x, k1y = vx, vy
    a1x, a1y, _ = accel(C, x, y, vx, vy)
    x2, y2 = x + 0.5 * h * k1x, y + 0.5 * h * k1y
    v2x, v2y = vx + 0.5 * h * a1x, vy + 0.5 * h * a1y
    a2x, a2y, _ = accel(C, x2, y2, v2x, v2y)
    x3, y3 = x + 0.5 * h * v2x, y + 0.5 * h * v2y
    v3x, v3y = vx + 0.5 * h * a2x, vy + 0.5 * h * a2y
    a3x, a3y, _ = accel(C, x3, y3, v3x, v3y)
    x4, y4 = x + h * v3x, y + h * v3y
    v4x, v4y = vx + h * a3x, vy + h * a3y
    a4x, a4y, _ = accel(C, x4, y4, v4x, v4y)
    xn = x + h / 6.0 * (k1x + 2.0 * v2x + 2.0 * v3x + v4x)
    yn = y + h / 6.0 * (k1y + 2.0 * v2y + 2.0 * v3y + v4y)
    vxn = vx + h / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
    vyn = vy + h / 6.0 * (a1y + 2.0 * a2y + 2.0 * a3y + a4y)
    ux, uy, uz, g = project(C, xn, yn, vxn, vyn)
    return xn, yn, ux, uy


@njit(cache=True)
def clearance(C, R, O, px, py, pz):
    dx, dy, dz = px - O[0], py - O[1], pz - O[2]
    qx = R[0, 0] * dx + R[1, 0] * dy + R[2, 0] * dz
    qy = R[0, 1] * dx + R[1, 1] * dy + R[2, 1] * dz
    qz = R[0, 2] * dx + R[1, 2] * dy + R[2, 2] * dz
    return poly_eval(C, qx, qy) - qz


@njit(cache=True)
def line_clearance(C, R, O, p, v, ts):
    out = np.empty(ts.shape[0])
    for k in range(ts.shape[0]):
        t = ts[k]
        out[k] = clearance(C, R, O, p[0] + t * v[0], p[1] + t * v[1], p[2] + t * v[2])
    return out


@njit(cache=True)
def boundary_run(C, R, O, x, y, vx, vy, s, ds, nmax, lift_tol, center, eps, chart_r,
                 others_C, others_R, others_O, s_max, samples):
    """Take up to ``nmax`` RK4 steps on one surface.

    Stops before the first step whose end state triggers an event and
    returns (code, steps_taken, x, y, vx, vy, s). Accepted states are
    written to ``samples`` as (s, X, Y, Z) in world coordinates, followed by
    the world velocity when ``samples`` has 7 columns.
    """
    for k in range(nmax):
        if s + ds > s_max:
            return LENGTH_LIMIT, k, x, y, vx, vy, s
        xn, yn, vxn, vyn = rk4_step(C, x, y, vx, vy, ds)
        if abs(xn) > chart_r or abs(yn) > chart_r:
            return EXIT_CHART, k, x, y, vx, vy, s
        zn = poly_eval(C, xn, yn)
        wx = O[0] + R[0, 0] * xn + R[0, 1] * yn + R[0, 2] * zn
        wy = O[1] + R[1, 0] * xn + R[1, 1] * yn + R[1, 2] * zn
        wz = O[2] + R[2, 0] * xn + R[2, 1] * yn + R[2, 2] * zn
        d2 = (wx - center[0]) ** 2 + (wy - center[1]) ** 2 + (wz - center[2]) ** 2
        if d2 > eps * eps:
            return EXIT_BALL, k, x, y, vx, vy, s
        for j in range(others_C.shape[0]):
            if clearance(others_C[j], others_R[j], others_O[j], wx, wy, wz) < -OTHER_TOL:
                return CROSSED_OTHER, k, x, y, vx, vy, s
        _, _, lam = accel(C, xn, yn, vxn, vyn)
        if lam < -lift_tol:
            return LIFTOFF, k, x, y, vx, vy, s
        x, y, vx, vy = xn, yn, vxn, vyn
        s += ds
        samples[k, 0] = s
        samples[k, 1] = wx
        samples[k, 2] = wy
        samples[k, 3] = wz
        if samples.shape[1] >= 7:
            vzn = project(C, xn, yn, vxn, vyn)[2]
            samples[k, 4] = R[0, 0] * vxn + R[0, 1] * vyn + R[0, 2] * vzn
            samples[k, 5] = R[1, 0] * vxn + R[1, 1] * vyn + R[1, 2] * vzn
            samples[k, 6] = R[2, 0] * vxn + R[2, 1] * vyn + R[2, 2] * vzn
    return RUNNING, nmax, x, y, vx, vy, s
