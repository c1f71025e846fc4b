"""JSON formats for surfaces, traces and reports.

Output is byte-stable: keys sorted, floats written with 17 significant
digits, no trailing whitespace.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import Frame, Surface
from .series import from_json as series_from_json
from .series import to_json as series_to_json


def _fmt(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return json.dumps(str(x))
    return format(x + 0.0, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if hasattr(obj, "value"):
        return json.dumps(obj.value)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_stable(obj, indent: int = 1) -> str:
    return _encode(obj, indent, 0) + "\n"


def surface_from_dict(doc) -> Surface:
    if not isinstance(doc, dict) or "g" not in doc:
        raise ValidationError("surface file needs a 'g' series", "surface")
    try:
        g = series_from_json(doc["g"])
    except ValueError as exc:
        raise ValidationError(f"bad series: {exc}", "surface") from exc
    r = doc.get("chart_radius", 0.5)
    if isinstance(r, bool) or not isinstance(r, (int, float)) or not r > 0:
        raise ValidationError("chart_radius must be a positive number", "chart_radius")
    fr = doc.get("frame") or {}
    try:
        frame = Frame(fr.get("rotation", np.eye(3)), fr.get("origin", [0.0, 0.0, 0.0]))
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"bad frame: {exc}", "frame") from exc
    return Surface(g, frame, float(r))


def surface_to_dict(s: Surface) -> dict:
    return {
        "g": series_to_json(s.g),
        "chart_radius": s.chart_radius,
        "frame": {"rotation": s.frame.rotation.tolist(), "origin": s.frame.origin.tolist()},
    }


def load_surface(path) -> Surface:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read surface file {path}: {exc}", "surface") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"surface file {path} is not valid JSON: {exc}", "surface") from exc
    return surface_from_dict(doc)


def save_surface(s: Surface, path) -> None:
    Path(path).write_text(dump_stable(surface_to_dict(s)), encoding="utf-8")


def trace_to_dict(r) -> dict:
    return {
        "segments": [
            {
                "kind": sg.kind,
                "surface": None if sg.surface is None else sg.surface + 1,
                "s0": sg.s_start,
                "s1": sg.s_end,
                "p0": sg.start.tolist(),
                "p1": sg.end.tolist(),
                "line_slope_T": sg.line_slope_T,
                "min_clearance": sg.min_clearance,
            }
            for sg in r.segments
        ],
        "switch_points": [
            {
                "s": sp.s,
                "point": sp.point.tolist(),
                "from": sp.from_kind,
                "to": sp.to_kind,
                "surface": sp.surface + 1,
                "velocity": sp.velocity.tolist(),
                "angle": sp.angle,
            }
            for sp in r.switch_points
        ],
        "termination": r.termination.value,
        "intervals": r.interval_count,
        "switches": r.switch_count,
        "flags": [{"s": f.s, "kind": f.kind, "detail": f.detail} for f in r.flags],
        "samples": [[float(v) for v in row] for row in r.samples],
        "sample_kinds": list(r.sample_kinds),
        "config": r.config,
    }
