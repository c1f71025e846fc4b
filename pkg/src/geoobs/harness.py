"""Batch experiments that check the local finiteness bounds against traced geodesics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .classifier import (
    Shape,
    TwoSurfaceCase,
    classify_two_surfaces,
    hessian_classify,
    predict_bound,
    saddle_case,
    theta0,
    wedge_decompose,
)
from .errors import GeoObsError, NotASaddle, ZeroForm
from .geometry import Surface, reexpand_chart
from .io import dump_stable
from .series import BivariateSeries
from .tracer import (
    GeodesicState,
    TraceLimits,
    TraceResult,
    surface_start,
    trace,
)

REFINE = 10


@dataclass
class SweepReport:
    config: dict
    records: list[dict]
    max_interval_count: int
    max_switch_count: int
    prediction: dict
    infeasible: list[float] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(r["pass"] for r in self.records)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": self.records,
            "max_interval_count": self.max_interval_count,
            "max_switch_count": self.max_switch_count,
            "prediction": self.prediction,
            "infeasible": self.infeasible,
            "all_pass": self.all_pass,
        }


@dataclass
class CascadeReport:
    eps_list: list[float]
    counts: list[int]
    stabilized: bool
    config: dict
    termination: str = ""
    switch_s: list[float] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(a >= b for a, b in zip(self.counts, self.counts[1:]))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "eps_list": self.eps_list,
            "counts": self.counts,
            "stabilized": self.stabilized,
            "monotone": self.monotone,
            "termination": self.termination,
            "switch_s": self.switch_s,
        }


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("GEOOBS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# -- sweeps --------------------------------------------------------------------


def _directions(n_dirs: int, rays: Sequence[float]) -> list[float]:
    base = 2 * math.pi / n_dirs
    dirs = {round(2 * math.pi * j / n_dirs, 15) for j in range(n_dirs)}
    for ray in rays:
        for k in range(-REFINE, REFINE + 1):
            dirs.add(round((ray + k * base / REFINE) % (2 * math.pi), 15))
    return sorted(dirs)


def _trace_job(job):
    surfaces, state, eps, limits, theta = job
    try:
        r = trace(state, surfaces, eps, limits)
    except GeoObsError as exc:
        return theta, None, f"{type(exc).__name__}: {exc}"
    return theta, r, None


def _map(jobs, workers: int):
    if workers <= 1 or len(jobs) < 2:
        return [_trace_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_trace_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def alternation_check(t: TraceResult | Sequence[str]) -> tuple[bool, int | None]:
    """Segments must alternate boundary/line, with the surface changing across each line."""
    labels = t.kinds() if isinstance(t, TraceResult) else list(t)
    last_boundary = None
    for idx, lab in enumerate(labels):
        if idx and (lab == "L") == (labels[idx - 1] == "L"):
            return False, idx
        if lab != "L":
            if last_boundary is not None and lab == last_boundary:
                return False, idx
            last_boundary = lab
    return True, None


def _single_prediction(g: BivariateSeries):
    if abs(g.coefficient(0, 0)) > 1e-12 or abs(g.coefficient(1, 0)) > 1e-12 or abs(g.coefficient(0, 1)) > 1e-12:
        return None, []
    hc = hessian_classify(g)
    try:
        rays = wedge_decompose(g).rays
    except (ZeroForm, ValueError):
        rays = []
    return hc, rays


def _check(pred, r: TraceResult, two: bool, main_alt: bool) -> bool:
    if two:
        return alternation_check(r)[0] if main_alt else True
    if pred is None:
        return True
    if pred.shape is Shape.CONVEX_UP:
        return r.switch_count <= 1
    if pred.shape is Shape.CONCAVE_DOWN:
        return r.switch_count == 0
    if pred.shape is Shape.SADDLE:
        return r.interval_count <= 2
    return True


def sweep_directions(
    surfaces,
    p,
    n_dirs: int = 360,
    eps: float = 0.05,
    limits: TraceLimits | None = None,
    workers: int | None = None,
    refine: bool = True,
    directions: Sequence[float] | None = None,
) -> SweepReport:
    """Trace from p in every tangent direction and aggregate the counts."""
    surfaces = [surfaces] if isinstance(surfaces, Surface) else list(surfaces)
    if n_dirs < 4:
        raise ValueError("n_dirs must be at least 4")
    lim = limits or TraceLimits()
    p = np.asarray(p, dtype=float)
    two = len(surfaces) == 2
    main_alt = False
    if two:
        cls = classify_two_surfaces(surfaces[0], surfaces[1], p)
        tf = cls.normalized
        work = [tf.surface1, tf.surface2]
        rays = [0.0, math.pi]
        main_alt = cls.case_label is TwoSurfaceCase.MAIN
        pred = None
        prediction = {"case_label": cls.case_label.value, "alternation_expected": main_alt, "note": cls.prediction}
    else:
        s = surfaces[0]
        q = s.frame.to_local(p)
        if abs(s.g.eval(q[0], q[1]) - q[2]) > 1e-9:
            raise ValueError("sweep start point is not on the surface")
        work = surfaces
        pred, rays = _single_prediction(s.g) if np.allclose(q[:2], 0.0) else (None, [])
        if pred is None:
            prediction = {"shape": None, "note": "no Hessian prediction away from a critical point"}
        else:
            b = predict_bound(pred)
            prediction = {"shape": pred.shape.value, "bound": b.value, "quantity": b.quantity, "note": b.note}
    thetas = list(directions) if directions is not None else _directions(n_dirs, rays if refine else [])

    jobs, infeasible = [], []
    for th in thetas:
        if two:
            st = _two_surface_start(work, th)
            if st is None:
                infeasible.append(float(th))
                continue
        else:
            q = work[0].frame.to_local(p)
            st = surface_start(work, 0, q[0], q[1], th)
        jobs.append((work, st, eps, lim, th))
    results = _map(jobs, worker_count(workers))

    records = []
    for th, r, err in sorted(results, key=lambda x: x[0]):
        if r is None:
            records.append({"direction": float(th), "intervals": 0, "switches": 0, "termination": "error",
                            "segments": "", "error": err, "pass": False, "feasible_lines": True})
            continue
        records.append({
            "direction": float(th),
            "intervals": r.interval_count,
            "switches": r.switch_count,
            "termination": r.termination.value,
            "segments": " ".join(r.kinds()),
            "feasible_lines": all(sg.feasible for sg in r.segments),
            "pass": _check(pred, r, two, main_alt),
        })
    config = {"n_dirs": n_dirs, "eps": eps, "p": p.tolist(), "refine": refine, "n_traced": len(records),
              "limits": _limits_dict(lim), "surfaces": len(surfaces)}
    return SweepReport(
        config=config,
        records=records,
        max_interval_count=max((r["intervals"] for r in records), default=0),
        max_switch_count=max((r["switches"] for r in records), default=0),
        prediction=prediction,
        infeasible=sorted(infeasible),
    )


def _limits_dict(lim: TraceLimits) -> dict:
    from dataclasses import asdict

    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(lim).items()}


def _two_surface_start(work: list[Surface], theta: float) -> GeodesicState | None:
    """Start at the frame origin on whichever surface keeps the direction feasible."""
    from .geometry import unit_normal_world

    p = work[0].frame.origin
    for i in (0, 1):
        other = work[1 - i]
        st = surface_start(work, i, 0.0, 0.0, theta)
        if st.velocity @ unit_normal_world(other, p) <= 1e-12:
            return st
    return None


# -- cascades -------------------------------------------------------------------


def epsilon_cascade(surfaces, state0: GeodesicState, eps_list: Sequence[float], limits: TraceLimits | None = None) -> CascadeReport:
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("eps_list needs at least 3 entries")
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly descending")
    lim = limits or TraceLimits()
    r = trace(state0, surfaces, eps_list[0], lim)
    ss = [sp.s for sp in r.switch_points]
    counts = [sum(1 for s in ss if s < e) for e in eps_list]
    return CascadeReport(
        eps_list=eps_list,
        counts=counts,
        stabilized=counts[-1] == counts[-2],
        config={"limits": _limits_dict(lim), "start": state0.position.tolist(), "velocity": state0.velocity.tolist()},
        termination=r.termination.value,
        switch_s=ss,
    )


# -- sign lemmas ------------------------------------------------------------------


def check_sign_lemmas(s: Surface, contact_grid, expected: str = "positive", N: int | None = None) -> dict:
    """Signs of the pure-u coefficients b_2..b_N of the re-expanded chart at each contact."""
    if expected not in ("positive", "negative"):
        raise ValueError("expected must be 'positive' or 'negative'")
    if N is None:
        try:
            N = saddle_case(s.g, 0.0).N
        except NotASaddle:
            N = 3
    sign = 1.0 if expected == "positive" else -1.0
    rows = []
    for point, tangent in contact_grid:
        _, k = reexpand_chart(s, point, tangent, order=N + 1)
        b = [k.coefficient(n, 0) for n in range(2, N + 1)]
        rows.append({
            "point": [float(c) for c in point],
            "b": b,
            "lower_ok": all(sign * v > 0 for v in b[:-1]),
            "order_N_ok": sign * b[-1] > 0,
        })
    n = len(rows)
    lower = sum(r["lower_ok"] for r in rows)
    top = sum(r["order_N_ok"] for r in rows)
    return {
        "expected": expected,
        "N": N,
        "contacts": n,
        "lower_agreement": lower / n if n else 1.0,
        "order_N_agreement": top / n if n else 1.0,
        "agreement": sum(r["lower_ok"] and r["order_N_ok"] for r in rows) / n if n else 1.0,
        "rows": rows,
    }


# -- saddle test configurations --------------------------------------------------


def saddle_surface(a: float, b: float, leading: float, N: int = 3, order: int = 8, chart_radius: float = 0.5) -> Surface:
    """a x^2 - b y^2 + leading * (x cos t0 + y sin t0)^N in principal axes.

    Along the asymptote direction t0 the first pure term is leading * u^N.
    """
    t0 = theta0(a, b)
    X = BivariateSeries.linear(0.0, math.cos(t0), math.sin(t0), order)
    g = BivariateSeries({(2, 0): a, (0, 2): -b}, order) + (X**N) * leading
    return Surface(g, chart_radius=chart_radius)


def _profile(s: Surface, phi: float):
    d = np.array([math.cos(phi), math.sin(phi)])
    G = lambda r: s.g.eval(r * d[0], r * d[1])
    dG = lambda r: s.gx.eval(r * d[0], r * d[1]) * d[0] + s.gy.eval(r * d[0], r * d[1]) * d[1]
    return d, G, dG


def case3_start(s: Surface, phi: float, r_max: float) -> GeodesicState:
    """Line from the origin along azimuth phi, pitched to touch the surface once ahead."""
    d, G, dG = _profile(s, phi)
    H = lambda r: G(r) - r * dG(r)
    r0 = brentq(H, 1e-6, r_max, xtol=1e-15)
    m = dG(r0)
    v = np.array([d[0], d[1], m])
    return GeodesicState(np.array([0.0, 0.0, s.g.eval(0, 0)]), v / np.linalg.norm(v), None, 0.0)


def saddle_switch_contacts(s: Surface, case: str, deltas: Sequence[float], eps: float = 0.4, limits: TraceLimits | None = None):
    """Trace Case-3 or Case-4 geodesics from the origin and collect their switch points.

    Case 3 uses the pitched tangent line and collects attach points;
    Case 4 starts on the surface and collects liftoff points.
    Returns (contacts, traces) with contacts as (chart point, tangent).
    """
    hc = hessian_classify(s.g)
    if hc.shape is not Shape.SADDLE:
        raise NotASaddle("saddle_switch_contacts needs a saddle")
    P = hc.chart_rotation
    t0 = theta0(hc.a, hc.b)
    contacts, traces = [], []
    for delta in deltas:
        w = P @ np.array([math.cos(t0 + delta), math.sin(t0 + delta)])
        phi = math.atan2(w[1], w[0])
        if case == "Case3":
            st = case3_start(s, phi, eps * 0.95)
            lim = limits or TraceLimits(attach="supported")
            want = ("line", "boundary")
        elif case == "Case4":
            st = surface_start(s, 0, 0.0, 0.0, phi)
            lim = limits or TraceLimits()
            want = ("boundary", "line")
        else:
            raise ValueError("case must be 'Case3' or 'Case4'")
        r = trace(st, s, eps, lim)
        traces.append(r)
        for sp in r.switch_points:
            if (sp.from_kind, sp.to_kind) == want:
                q = s.frame.to_local(sp.point)
                contacts.append((q, s.frame.vector_to_local(sp.velocity)))
                break
    return contacts, traces


# -- export -----------------------------------------------------------------------


def export_report(r: SweepReport | CascadeReport, path, fmt: str = "json") -> None:
    if fmt == "json":
        text = dump_stable(r.to_dict())
    elif fmt == "csv":
        if isinstance(r, SweepReport):
            lines = ["direction,intervals,switches,termination"]
            for rec in r.records:
                lines.append(f"{format(rec['direction'], '.17g')},{rec['intervals']},{rec['switches']},{rec['termination']}")
        else:
            lines = ["eps,count"]
            lines += [f"{format(e, '.17g')},{c}" for e, c in zip(r.eps_list, r.counts)]
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError("format must be 'json' or 'csv'")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        from .errors import IoFailure

        raise IoFailure(str(exc)) from exc
