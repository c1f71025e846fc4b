"""Independent reference computations used by the test suite."""

import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra


def great_circle(p0, v0, s, radius=1.0, center=(0.0, 0.0, 1.0)):
    """Point at arc length s on the great circle through p0 with unit tangent v0."""
    c = np.asarray(center, dtype=float)
    r = np.asarray(p0, dtype=float) - c
    t = s / radius
    return c + r * math.cos(t) + radius * np.asarray(v0) * math.sin(t)


def mesh_shortest_path(g, A, B, n=200, half=0.5, reach=5, samples=24):
    """Shortest path from A to B in {z <= g(x, y)} on a graph built from an n x n mesh.

    Vertices are the surface points over the grid plus A and B. Surface
    vertices are joined to every grid neighbour within ``reach`` cells.
    A and B connect to each other and to every vertex they can see.
    """
    xs = np.linspace(-half, half, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    Z = g(X, Y)
    P = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, wts = [], [], []
    for di in range(0, reach + 1):
        for dj in range(-reach, reach + 1):
            if (di == 0 and dj <= 0) or di * di + dj * dj > reach * reach:
                continue
            if math.gcd(di, abs(dj)) != 1:
                continue
            a = idx[: n - di, max(0, -dj): n - max(0, dj)]
            b = idx[di:, max(0, dj): n - max(0, -dj) if dj < 0 else n][:, : a.shape[1]]
            a, b = a.ravel(), b.ravel()
            rows.append(a)
            cols.append(b)
            wts.append(np.linalg.norm(P[a] - P[b], axis=1))
    ia, ib = n * n, n * n + 1
    ts = np.linspace(0.0, 1.0, samples + 1)[1:-1]

    def visible(Q):
        D = P - Q
        pts = Q[None, None, :] + ts[None, :, None] * D[:, None, :]
        return np.all(g(pts[..., 0], pts[..., 1]) - pts[..., 2] >= -1e-12, axis=1)

    for k, Q in ((ia, np.asarray(A, float)), (ib, np.asarray(B, float))):
        vis = np.nonzero(visible(Q))[0]
        rows.append(np.full(len(vis), k))
        cols.append(vis)
        wts.append(np.linalg.norm(P[vis] - Q, axis=1))
    AB = np.asarray(B, float) - np.asarray(A, float)
    pts = np.asarray(A, float) + ts[:, None] * AB
    if np.all(g(pts[:, 0], pts[:, 1]) - pts[:, 2] >= -1e-12):
        rows.append(np.array([ia]))
        cols.append(np.array([ib]))
        wts.append(np.array([np.linalg.norm(AB)]))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    w = np.concatenate(wts)
    G = coo_matrix((w, (r, c)), shape=(n * n + 2, n * n + 2)).tocsr()
    d = dijkstra(G, directed=False, indices=ia)
    return float(d[ib])


def cap_terms(degree=8, sign=1.0):
    """Taylor terms of sign * (1 - sqrt(1 - x^2 - y^2)) through the given even degree."""
    out = {}
    for m in range(1, degree // 2 + 1):
        # 1 - sqrt(1 - r) = sum_m c_m r^m
        c = math.comb(2 * m, m) / ((2 * m - 1) * 4**m)
        for k in range(m + 1):
            key = (2 * k, 2 * (m - k))
            out[key] = out.get(key, 0.0) + sign * c * math.comb(m, k)
    return out
