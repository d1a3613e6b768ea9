"""JSON sequence files.

A sequence file holds a perception window and a list of frames. Files are
written canonically: sorted keys, shortest round-trip float text, one frame
per line, elements ordered by category then by their front-left start
point. Reading a canonical file and writing it back is byte-identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .geom import DEFAULT_WINDOW, Category, MapElement, MapFrame, PerceptionWindow, Pose2

SCHEMA_VERSION = "1.0"
SUPPORTED_VERSIONS = ("1.0",)


class SchemaError(ValueError):
    """A sequence or config file does not follow the expected layout."""


def element_sort_key(e: MapElement):
    p = e.points[0]
    return (e.category.order, -p[1], p[0])


def canonical_order(elements: Sequence[MapElement]) -> list:
    return sorted(elements, key=element_sort_key)


def _swap_in(pts: np.ndarray, forward_axis: str) -> np.ndarray:
    # x-forward / y-left input becomes x-right / y-forward
    if forward_axis == "x":
        return np.stack([-pts[:, 1], pts[:, 0]], axis=1)
    return pts


def _swap_out(pts: np.ndarray, forward_axis: str) -> np.ndarray:
    if forward_axis == "x":
        return np.stack([pts[:, 1], -pts[:, 0]], axis=1)
    return pts


def element_to_record(e: MapElement, forward_axis: str = "y") -> dict:
    rec = {
        "category": e.category.value,
        "closed": e.closed,
        "points": _swap_out(e.points, forward_axis).tolist(),
    }
    if e.score is not None:
        rec["score"] = e.score
    return rec


def frame_to_record(f: MapFrame, forward_axis: str = "y") -> dict:
    pose = f.pose
    tx, ty = pose.tx, pose.ty
    if forward_axis == "x":
        tx, ty = ty, -tx
    return {
        "frame_id": f.frame_id,
        "timestamp_us": f.timestamp,
        "pose": {"tx": tx, "ty": ty, "yaw": pose.yaw},
        "elements": [element_to_record(e, forward_axis) for e in canonical_order(f.elements)],
    }


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps_sequence(
    frames: Sequence[MapFrame], window: PerceptionWindow = DEFAULT_WINDOW, forward_axis: str = "y"
) -> str:
    head = {
        "schema_version": SCHEMA_VERSION,
        "window": {
            "x_min": window.x_min,
            "x_max": window.x_max,
            "y_min": window.y_min,
            "y_max": window.y_max,
        },
    }
    lines = ",\n".join(_dumps(frame_to_record(f, forward_axis)) for f in frames)
    body = "[\n" + lines + "\n]" if frames else "[]"
    return '{"frames":' + body + "," + _dumps(head)[1:] + "\n"


def write_sequence(
    frames: Sequence[MapFrame],
    path,
    window: PerceptionWindow = DEFAULT_WINDOW,
    forward_axis: str = "y",
) -> None:
    Path(path).write_text(dumps_sequence(frames, window, forward_axis), encoding="utf-8")


def _need(obj, key, typ, where):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in obj:
        raise SchemaError(f"{where}.{key}: missing field")
    val = obj[key]
    if typ is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        if ok and not math.isfinite(val):
            raise SchemaError(f"{where}.{key}: non-finite number")
    else:
        ok = isinstance(val, typ) and not (typ is int and isinstance(val, bool))
    if not ok:
        raise SchemaError(f"{where}.{key}: expected {getattr(typ, '__name__', typ)}, got {val!r}")
    return val


def _parse_element(rec, where, forward_axis) -> MapElement:
    cat = _need(rec, "category", str, where)
    try:
        category = Category(cat)
    except ValueError:
        names = ", ".join(c.value for c in Category)
        raise SchemaError(f"{where}.category: unknown category {cat!r} (expected one of {names})")
    closed = _need(rec, "closed", bool, where)
    pts = _need(rec, "points", list, where)
    if len(pts) < 2:
        raise SchemaError(f"{where}.points: need at least 2 points")
    for k, p in enumerate(pts):
        if (
            not isinstance(p, list)
            or len(p) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
        ):
            raise SchemaError(f"{where}.points[{k}]: expected [x, y]")
        if not all(math.isfinite(v) for v in p):
            raise SchemaError(f"{where}.points[{k}]: non-finite coordinate")
    score = None
    if "score" in rec and rec["score"] is not None:
        score = _need(rec, "score", float, where)
    try:
        return MapElement(
            category,
            _swap_in(np.array(pts, dtype=np.float64), forward_axis),
            score=score,
            closed=closed,
        )
    except ValueError as err:
        raise SchemaError(f"{where}: {err}") from None


def _parse_frame(rec, where, forward_axis) -> MapFrame:
    fid = _need(rec, "frame_id", str, where)
    ts = _need(rec, "timestamp_us", int, where)
    pose = _need(rec, "pose", dict, where)
    tx = _need(pose, "tx", float, where + ".pose")
    ty = _need(pose, "ty", float, where + ".pose")
    yaw = _need(pose, "yaw", float, where + ".pose")
    if forward_axis == "x":
        tx, ty = -ty, tx
    elems = _need(rec, "elements", list, where)
    elements = [
        _parse_element(e, f"{where}.elements[{k}]", forward_axis) for k, e in enumerate(elems)
    ]
    return MapFrame(fid, ts, Pose2(tx, ty, yaw), elements)


def loads_sequence(text: str, forward_axis: str = "y") -> Tuple[List[MapFrame], PerceptionWindow]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"line {err.lineno}, column {err.colno}: {err.msg}") from None
    version = _need(doc, "schema_version", str, "$")
    if version not in SUPPORTED_VERSIONS:
        raise SchemaError(f"$.schema_version: unsupported version {version!r}")
    w = _need(doc, "window", dict, "$")
    try:
        window = PerceptionWindow(*(_need(w, k, float, "$.window") for k in ("x_min", "x_max", "y_min", "y_max")))
    except ValueError as err:
        raise SchemaError(f"$.window: {err}") from None
    frames_rec = _need(doc, "frames", list, "$")
    frames = []
    seen = set()
    for k, rec in enumerate(frames_rec):
        frame = _parse_frame(rec, f"$.frames[{k}]", forward_axis)
        if frame.frame_id in seen:
            raise SchemaError(f"$.frames[{k}].frame_id: duplicate id {frame.frame_id!r}")
        seen.add(frame.frame_id)
        frames.append(frame)
    return frames, window


def read_sequence(path, forward_axis: str = "y") -> Tuple[List[MapFrame], PerceptionWindow]:
    """Load frames and the perception window from a sequence file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SchemaError(f"{path}: no such file") from None
    try:
        return loads_sequence(text, forward_axis)
    except SchemaError as err:
        raise SchemaError(f"{path}: {err}") from None


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8")
