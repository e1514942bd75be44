"""File formats: point sets, patterns, graphs, reports."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .geometry import PointSet

__all__ = [
    "pointset_to_dict",
    "pointset_from_dict",
    "save_pointset",
    "load_pointset",
    "load_pointset_csv",
    "pattern_to_dict",
    "load_pattern",
    "graph_to_dict",
    "graph_from_dict",
    "canonical_json",
    "config_hash",
    "csv_text",
]


def _num(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_num(v) for v in x.tolist()]
    return x


def pointset_to_dict(P: PointSet) -> dict:
    return {
        "dim": P.dim,
        "r": P.r,
        "window": {"lo": P.lo.tolist(), "hi": P.hi.tolist()},
        "mode": P.mode,
        "points": P.points.tolist(),
    }


def pointset_from_dict(data: dict) -> PointSet:
    for k in ("dim", "r", "points"):
        if k not in data:
            raise ValueError(f"point-set record lacks {k!r}")
    mode = data.get("mode", "float")
    pts = np.asarray(data["points"], dtype=np.int64 if mode == "int" else float).reshape(-1, int(data["dim"]))
    win = data.get("window") or {}
    return PointSet(pts, float(data["r"]), lo=win.get("lo"), hi=win.get("hi"), mode=mode)


def save_pointset(P: PointSet, path) -> None:
    Path(path).write_text(canonical_json(pointset_to_dict(P)) + "\n")


def load_pointset(path) -> PointSet:
    return pointset_from_dict(json.loads(Path(path).read_text()))


def load_pointset_csv(path, r: float, window=None, mode: Optional[str] = None) -> PointSet:
    """One point per row, comma separated, no header."""
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    if mode == "int" or (mode is None and np.all(pts == np.round(pts))):
        pts = pts.astype(np.int64)
    lo, hi = (None, None) if window is None else (window["lo"], window["hi"])
    return PointSet(pts, r, lo=lo, hi=hi, mode=mode)


def pattern_to_dict(points) -> dict:
    pts = np.asarray(points)
    return {"dim": int(pts.shape[1]), "points": pts.tolist()}


def load_pattern(data) -> np.ndarray:
    """Pattern from ``{dim, points}`` or a plain list of points."""
    if isinstance(data, dict):
        pts = np.asarray(data["points"])
        return pts.reshape(-1, int(data.get("dim", pts.shape[-1] if pts.ndim > 1 else 1)))
    pts = np.asarray(data)
    return pts.reshape(-1, 1) if pts.ndim == 1 else pts


def graph_to_dict(G) -> dict:
    return {"vertices": G.vertices.points.tolist(), "edges": G.edges.tolist(), "r": G.vertices.r}


def graph_from_dict(data: dict):
    from .graphs import encode_graph

    pts = np.asarray(data["vertices"])
    V = PointSet(pts, float(data.get("r", 1.0)))
    return encode_graph(V, data.get("edges", []))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_num)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def _cell(v):
    v = _num(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return str(v)


def csv_text(rows: Iterable[dict]) -> str:
    rows = list(rows)
    buf = _io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0].keys())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()
