"""Command-line interface: geoobs {classify,trace,sweep,cascade,shoot,plot}.

Exit codes: 0 success, 1 invalid input, 2 computation error. Errors are
reported as a single JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from .classifier import (
    Shape,
    classify_two_surfaces,
    hessian_classify,
    predict_bound,
    saddle_case,
    theta0,
    wedge_decompose,
)
from .errors import GeoObsError, ValidationError
from .harness import epsilon_cascade, export_report, sweep_directions
from .io import dump_stable, load_surface, trace_to_dict
from .shooting import shoot_between
from .tracer import TraceLimits, surface_start, trace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_DELTAS = (-0.1, -0.05, 0.05, 0.1)

# built-in defaults; TOML values override these and flags override both
DEFAULTS = {
    "surface": None,
    "surface2": None,
    "point": None,
    "start": (0.0, 0.0),
    "dir": 0.0,
    "eps": 0.05,
    "eps_list": (0.1, 0.05, 0.02, 0.01, 0.005),
    "ds": 1e-4,
    "max_segments": 64,
    "max_steps": 200000,
    "attach": "penetrating",
    "n_dirs": 360,
    "refine": True,
    "workers": None,
    "order": None,
    "delta": None,
    "source": None,
    "target": None,
    "tol": 1e-6,
    "n_scan": 72,
    "out": None,
    "format": "json",
    "input": None,
}


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        # let comma lists such as "-0.3,0.1,0" through as values
        self._negative_number_matcher = re.compile(r"^-\.?\d")

    def error(self, message):
        raise ValidationError(message, None)


def _floats(n: int | None = None):
    def parse(text: str):
        try:
            vals = tuple(float(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
        if n is not None and len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        return vals

    return parse


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geoobs", description="Obstacle geodesics around polynomial graph surfaces.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, surfaces=True):
        sp.add_argument("--config", help="TOML file with default parameter values")
        if surfaces:
            sp.add_argument("--surface", help="surface JSON file")
            sp.add_argument("--surface2", help="second surface JSON file")
        sp.add_argument("--out", help="output path (default: stdout)")

    def limits(sp):
        sp.add_argument("--ds", type=float)
        sp.add_argument("--max-segments", type=int)
        sp.add_argument("--max-steps", type=int)
        sp.add_argument("--attach", choices=["penetrating", "supported"])

    c = sub.add_parser("classify", help="local classification at a point")
    common(c)
    c.add_argument("--point", type=_floats(3), help="x,y,z world point (two surfaces)")
    c.add_argument("--order", type=int)
    c.add_argument("--delta", type=_floats(), help="comma-separated offsets from the asymptote")

    t = sub.add_parser("trace", help="trace one geodesic")
    common(t)
    t.add_argument("--start", type=_floats(2), help="x,y chart point on the first surface")
    t.add_argument("--dir", type=float, help="heading angle in the chart plane")
    t.add_argument("--eps", type=float)
    limits(t)

    s = sub.add_parser("sweep", help="trace every direction from a point")
    common(s)
    s.add_argument("--point", type=_floats(3))
    s.add_argument("--n-dirs", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--no-refine", dest="refine", action="store_const", const=False)
    s.add_argument("--workers", type=int)
    s.add_argument("--format", choices=["json", "csv"])
    limits(s)

    k = sub.add_parser("cascade", help="switch counts in shrinking balls")
    common(k)
    k.add_argument("--start", type=_floats(2))
    k.add_argument("--dir", type=float)
    k.add_argument("--eps-list", type=_floats())
    k.add_argument("--format", choices=["json", "csv"])
    limits(k)

    h = sub.add_parser("shoot", help="locally shortest path between two points")
    common(h)
    h.add_argument("--from", dest="source", type=_floats(3))
    h.add_argument("--to", dest="target", type=_floats(3))
    h.add_argument("--tol", type=float)
    h.add_argument("--n-scan", type=int)
    limits(h)

    pl = sub.add_parser("plot", help="convert trace samples to CSV")
    common(pl, surfaces=False)
    pl.add_argument("--input", help="trace JSON produced by 'trace'")
    return p


# -- configuration --------------------------------------------------------------


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}", "config") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config {path} is not valid TOML: {exc}", "config") from exc
    flat = {}
    for key, val in doc.items():
        if key == "limits" and isinstance(val, dict):
            flat.update({k.replace("-", "_"): v for k, v in val.items()})
        elif key == "surfaces" and isinstance(val, list):
            if len(val) > 0:
                flat["surface"] = val[0]
            if len(val) > 1:
                flat["surface2"] = val[1]
        else:
            flat[key.replace("-", "_")] = val
    base = Path(path).parent
    for key in ("surface", "surface2", "input"):
        if isinstance(flat.get(key), str) and not Path(flat[key]).is_absolute():
            flat[key] = str(base / flat[key])
    if isinstance(flat.get("eps"), list):
        flat["eps_list"] = flat.pop("eps")
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}", unknown[0])
    return flat


def effective_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in DEFAULTS.items()}
    if getattr(args, "config", None):
        cfg.update(_load_toml(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    for key in ("start", "point", "source", "target", "eps_list", "delta"):
        if cfg[key] is not None:
            cfg[key] = [float(x) for x in cfg[key]]
    cfg["command"] = args.command
    return cfg


def _positive(cfg: dict, *names: str) -> None:
    for name in names:
        v = cfg[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or not v > 0:
            raise ValidationError(f"{name} must be a positive number, got {v!r}", name)


def _validate(cfg: dict) -> None:
    cmd = cfg["command"]
    if cmd != "plot" and not cfg["surface"]:
        raise ValidationError("--surface is required", "surface")
    if cmd in ("trace", "sweep", "cascade", "shoot"):
        _positive(cfg, "ds", "max_segments", "max_steps")
        if cfg["ds"] > 0.01:
            raise ValidationError("ds must not exceed 0.01", "ds")
        if cfg["attach"] not in ("penetrating", "supported"):
            raise ValidationError("attach must be 'penetrating' or 'supported'", "attach")
    if cmd in ("trace", "sweep"):
        _positive(cfg, "eps")
    if cmd == "sweep":
        _positive(cfg, "n_dirs")
        if cfg["n_dirs"] < 4:
            raise ValidationError("n_dirs must be at least 4", "n_dirs")
        if cfg["workers"] is not None:
            _positive(cfg, "workers")
    if cmd == "cascade":
        eps = cfg["eps_list"]
        if len(eps) < 3 or any(not e > 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValidationError("eps_list needs at least 3 strictly descending positive values", "eps_list")
    if cmd == "shoot":
        _positive(cfg, "tol", "n_scan")
        for name in ("source", "target"):
            if cfg[name] is None:
                raise ValidationError(f"--{'from' if name == 'source' else 'to'} is required", name)
    if cmd == "classify" and cfg["order"] is not None:
        _positive(cfg, "order")
    if cmd == "plot" and not cfg["input"]:
        raise ValidationError("--input is required", "input")
    if cfg["format"] not in ("json", "csv"):
        raise ValidationError("format must be 'json' or 'csv'", "format")
    if cmd in ("trace", "cascade") and not math.isfinite(cfg["dir"]):
        raise ValidationError("dir must be finite", "dir")


def _limits(cfg: dict) -> TraceLimits:
    return TraceLimits(ds=float(cfg["ds"]), max_segments=int(cfg["max_segments"]),
                       max_steps=int(cfg["max_steps"]), attach=cfg["attach"])


def _surfaces(cfg: dict):
    out = [load_surface(cfg["surface"])]
    if cfg["surface2"]:
        out.append(load_surface(cfg["surface2"]))
    return out


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        from .errors import IoFailure

        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _default_point(surfaces) -> np.ndarray:
    s = surfaces[0]
    return s.frame.to_world(s.chart_point(0.0, 0.0))


# -- subcommands ------------------------------------------------------------------


def _single_summary(s) -> dict:
    grad = [s.g.coefficient(1, 0), s.g.coefficient(0, 1)]
    if max(abs(v) for v in grad) > 1e-9:
        return {"gradient": grad, "note": "chart origin is not a critical point; single-surface analysis skipped"}
    hc = hessian_classify(s.g)
    b = predict_bound(hc)
    doc = {
        "hessian": {"a": hc.a, "b": hc.b, "shape": hc.shape.value, "rotation": hc.rotation.tolist()},
        "prediction": {"value": b.value, "quantity": b.quantity, "note": b.note},
    }
    try:
        wd = wedge_decompose(s.g)
        doc["wedge"] = {
            "degree": wd.degree,
            "boundary_slopes": wd.boundary_slopes,
            "vertical": wd.vertical,
            "rays": wd.rays,
            "sectors": [list(x) for x in wd.sectors],
        }
    except (GeoObsError, ValueError) as exc:
        doc["wedge"] = {"error": type(exc).__name__, "message": str(exc)}
    return doc


def _saddle_samples(s, deltas) -> dict:
    if max(abs(s.g.coefficient(1, 0)), abs(s.g.coefficient(0, 1))) > 1e-9:
        return {}
    hc = hessian_classify(s.g)
    if hc.shape is not Shape.SADDLE:
        return {}
    rows = []
    for d in deltas:
        try:
            sc = saddle_case(s.g, d)
        except GeoObsError as exc:
            rows.append({"delta": d, "error": type(exc).__name__, "message": str(exc)})
            continue
        rows.append({
            "delta": d,
            "a2": sc.a2,
            "case": sc.case.value,
            "N": sc.N,
            "leading": sc.leading,
            "predicted_max_switch_points": sc.predicted_max_switch_points,
            "predicted_max_intervals": sc.predicted_max_intervals,
        })
    return {"theta0": theta0(hc.a, hc.b), "a2_samples": rows}


def cmd_classify(cfg: dict) -> dict:
    surfaces = _surfaces(cfg)
    deltas = cfg["delta"] if cfg["delta"] is not None else list(DEFAULT_DELTAS)
    doc = {"surfaces": []}
    for s in surfaces:
        one = _single_summary(s)
        one.update(_saddle_samples(s, deltas))
        doc["surfaces"].append(one)
    if len(surfaces) == 2:
        p = np.array(cfg["point"]) if cfg["point"] is not None else _default_point(surfaces)
        c = classify_two_surfaces(surfaces[0], surfaces[1], p, order=cfg["order"])
        doc["pair"] = {
            "k": c.k,
            "k1": c.k1,
            "k2": c.k2,
            "angle_class": c.angle_class.value,
            "tilt": c.tilt,
            "M": c.M,
            "aM": c.aM,
            "N": c.N,
            "a00": c.a00,
            "Ntilde": c.Ntilde,
            "a00tilde": c.a00tilde,
            "case_label": c.case_label.value,
            "prediction": c.prediction,
            "predicted_switch_bound": c.predicted_switch_bound,
        }
    return doc


def cmd_trace(cfg: dict) -> dict:
    surfaces = _surfaces(cfg)
    x, y = cfg["start"]
    if not surfaces[0].in_chart(x, y):
        raise ValidationError("start lies outside the chart of the first surface", "start")
    st = surface_start(surfaces, 0, x, y, cfg["dir"])
    r = trace(st, surfaces, cfg["eps"], _limits(cfg))
    return trace_to_dict(r)


def cmd_sweep(cfg: dict):
    surfaces = _surfaces(cfg)
    p = np.array(cfg["point"]) if cfg["point"] is not None else _default_point(surfaces)
    return sweep_directions(surfaces, p, n_dirs=int(cfg["n_dirs"]), eps=cfg["eps"], limits=_limits(cfg),
                            workers=cfg["workers"], refine=bool(cfg["refine"]))


def cmd_cascade(cfg: dict):
    surfaces = _surfaces(cfg)
    x, y = cfg["start"]
    st = surface_start(surfaces, 0, x, y, cfg["dir"])
    return epsilon_cascade(surfaces, st, cfg["eps_list"], _limits(cfg))


def cmd_shoot(cfg: dict) -> dict:
    surfaces = _surfaces(cfg)
    res = shoot_between(cfg["source"], cfg["target"], surfaces, tol=cfg["tol"], limits=_limits(cfg),
                        n_scan=int(cfg["n_scan"]))
    doc = trace_to_dict(res.trace)
    doc.update({"length": res.length, "miss": res.miss, "parameter": res.parameter})
    return doc


def cmd_plot(cfg: dict) -> str:
    try:
        doc = json.loads(Path(cfg["input"]).read_text(encoding="utf-8"))
        samples, kinds = doc["samples"], doc["sample_kinds"]
    except OSError as exc:
        raise ValidationError(f"cannot read {cfg['input']}: {exc}", "input") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValidationError(f"{cfg['input']} is not a trace document", "input") from exc
    lines = ["s,x,y,z,kind"]
    for row, kind in zip(samples, kinds):
        lines.append(",".join(format(float(v), ".17g") for v in row[:4]) + f",{kind}")
    return "\n".join(lines) + "\n"


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in ("workers", "out")}


def _emit_error(exc: Exception, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "parameter", None) is not None:
        doc["parameter"] = exc.parameter
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = effective_config(args)
        _validate(cfg)
        cmd = cfg["command"]
        if cmd == "plot":
            _write(cmd_plot(cfg), cfg["out"])
        elif cmd in ("sweep", "cascade"):
            rep = cmd_sweep(cfg) if cmd == "sweep" else cmd_cascade(cfg)
            rep.config["effective"] = _echo(cfg)
            if cfg["out"]:
                export_report(rep, cfg["out"], cfg["format"])
            else:
                sys.stdout.write(dump_stable(rep.to_dict()))
            if cmd == "sweep":
                print(f"max_intervals={rep.max_interval_count} max_switches={rep.max_switch_count} "
                      f"all_pass={str(rep.all_pass).lower()}", file=sys.stdout if cfg["out"] else sys.stderr)
            else:
                print(f"counts={','.join(map(str, rep.counts))} stabilized={str(rep.stabilized).lower()}",
                      file=sys.stdout if cfg["out"] else sys.stderr)
        else:
            doc = {"classify": cmd_classify, "trace": cmd_trace, "shoot": cmd_shoot}[cmd](cfg)
            doc["effective_config"] = _echo(cfg)
            _write(dump_stable(doc), cfg["out"])
    except ValidationError as exc:
        return _emit_error(exc, 1)
    except ValueError as exc:
        return _emit_error(exc, 1)
    except GeoObsError as exc:
        return _emit_error(exc, 2)
    return 0


def main() -> None:
    sys.exit(run())
