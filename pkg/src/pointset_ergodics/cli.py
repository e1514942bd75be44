"""Command-line front end.

Each subcommand reads an experiment config (JSON), runs one task and writes
a flat CSV of per-window rows plus a JSON sidecar with metadata.  Without
``--out`` the CSV goes to stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import io as pio
from .colouring import ColourLaw, Marginal
from .ergodics import (
    CylinderSpec,
    birkhoff_average_exact,
    birkhoff_average_mc,
    estimate_coloured_cylinder,
    estimate_cylinder_measure,
    lln_gap_diagnostic,
)
from .generators import GeneratorSpec, generate
from .graphs import Graph, grid_graph, patch, patch_frequency
from .groups import (
    GroupSpec,
    TwoSidedBox,
    folner_ratio,
    shulman_constant,
    unimodularity_check,
    van_hove_ratio,
    window_sequence,
)
from .patterns import Pattern, flc_enumerate, pattern_frequency
from .scanning import (
    BallIndicator,
    BoxIndicator,
    ColourIndicator,
    IntervalIndicator,
    ScanningFunction,
    Tent,
)

log = logging.getLogger("pointset_ergodics")

TASKS = ("generate", "frequency", "flc", "birkhoff", "cylinder", "coloured-cylinder",
         "lln", "graph-patch", "diagnostics")
ENV_WORKERS = "POINTSET_ERGODICS_WORKERS"

_VEC = {"type": "array", "items": {"type": "number"}}
_PTS = {"type": "array", "items": {"anyOf": [_VEC, {"type": "number"}]}, "minItems": 1}
_PHI = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["box", "ball", "tent"]},
        "lo": _VEC, "hi": _VEC, "center": _VEC,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "height": {"type": "number"},
    },
}
_PSI = {
    "anyOf": [
        {"type": "null"},
        {"type": "object", "required": ["kind"], "properties": {
            "kind": {"enum": ["colours", "interval"]},
            "values": {"type": "array"}, "lo": {"type": "number"}, "hi": {"type": "number"}}},
    ]
}
_MARGINAL = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["bernoulli", "categorical", "uniform", "constant"]},
        "p": {"type": "number", "minimum": 0, "maximum": 1},
        "alphabet": {"type": "array"}, "probs": _VEC,
        "lo": {"type": "number"}, "hi": {"type": "number"}, "value": {},
    },
}
SCHEMA = {
    "type": "object",
    "properties": {
        "task": {"enum": list(TASKS)},
        "generator": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["lattice", "fibonacci", "silver_chain", "grid_graph",
                                             "rotated_union", "jittered_lattice"]},
                           "params": {"type": "object"}},
        },
        "pointset": {"type": "string"},
        "r": {"type": "number", "exclusiveMinimum": 0},
        "group": {"enum": ["R1", "R2", "R3", "E2"]},
        "windows": {
            "type": "object",
            "required": ["shape", "radii"],
            "properties": {"shape": {"enum": ["box", "ball"]},
                           "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                                     "minItems": 1}},
        },
        "pattern": {"anyOf": [_PTS, {"type": "object", "required": ["points"]}]},
        "flc": {"type": "object", "required": ["V_radius"],
                "properties": {"V_radius": {"type": "number", "exclusiveMinimum": 0},
                               "n_windows": {"type": "integer", "minimum": 1}}},
        "function": {"type": "object", "required": ["factors"],
                     "properties": {"factors": {"type": "array", "items": {
                         "type": "object", "required": ["phi"],
                         "properties": {"phi": _PHI, "psi": _PSI}}}}},
        "method": {"enum": ["monte-carlo", "exact"]},
        "law": {"type": "object", "required": ["law", "marginal"],
                "properties": {"law": {"enum": ["iid", "ma"]}, "marginal": _MARGINAL,
                               "range": {"type": "number", "minimum": 0},
                               "combine": {"enum": ["mean", "threshold"]}}},
        "cylinder": {"type": "object", "required": ["centers", "eps"],
                     "properties": {"centers": _PTS, "eps": {"type": "number", "exclusiveMinimum": 0},
                                    "colour_sets": {"type": "array", "items": _PSI}}},
        "patch": {"type": "object", "required": ["vertices"],
                  "properties": {"vertices": _PTS, "edges": {"type": "array"}}},
        "K": {"type": "number", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Validated experiment description; serialises to canonical JSON."""

    data: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            jsonschema.validate(self.data, SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path)
            raise ConfigError(f"config invalid at '{path}': {exc.message}") from None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls(data)

    def to_json(self) -> str:
        return pio.canonical_json(self.data)

    @property
    def sha256(self) -> str:
        return pio.config_hash(self.data)

    def get(self, key, default=None):
        return self.data.get(key, default)


# -- builders ----------------------------------------------------------------

def _pointset(cfg: ExperimentConfig):
    if "generator" in cfg.data:
        g = cfg.data["generator"]
        return generate(GeneratorSpec(g["kind"], g.get("params", {})))
    if "pointset" in cfg.data:
        path = cfg.data["pointset"]
        if path.endswith(".csv"):
            if "r" not in cfg.data:
                raise ConfigError("CSV point sets need 'r' in the config")
            return pio.load_pointset_csv(path, cfg.data["r"])
        return pio.load_pointset(path)
    raise ConfigError("config needs 'generator' or 'pointset'")


def _group(cfg: ExperimentConfig, dim: int) -> GroupSpec:
    g = cfg.get("group")
    spec = GroupSpec.parse(g) if g else GroupSpec.translation(dim)
    if spec.dim != dim:
        raise ConfigError(f"group {spec.name} does not act on R^{dim}")
    return spec


def _windows(cfg: ExperimentConfig, spec: GroupSpec):
    w = cfg.get("windows")
    if w is None:
        raise ConfigError("config needs 'windows'")
    try:
        return window_sequence(w["shape"], w["radii"], spec.dim, spec.has_rotations)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _phi(d: dict):
    kind = d["kind"]
    if kind == "box":
        return BoxIndicator(tuple(d["lo"]), tuple(d["hi"]))
    if kind == "ball":
        return BallIndicator(d["radius"], tuple(d["center"]))
    return Tent(d["radius"], tuple(d["center"]), d.get("height"))


def _psi(d):
    if d is None:
        return None
    if d["kind"] == "colours":
        return ColourIndicator(tuple(d["values"]))
    return IntervalIndicator(d["lo"], d["hi"])


def _function(cfg: ExperimentConfig) -> ScanningFunction:
    f = cfg.get("function")
    if f is None:
        raise ConfigError("config needs 'function'")
    return ScanningFunction(tuple((_phi(x["phi"]), _psi(x.get("psi"))) for x in f["factors"]))


def _marginal(d: dict) -> Marginal:
    kind = d["kind"]
    if kind == "bernoulli":
        return Marginal.bernoulli(d.get("p", 0.5))
    if kind == "categorical":
        return Marginal.categorical(d["alphabet"], d["probs"])
    if kind == "uniform":
        return Marginal.uniform(d.get("lo", 0.0), d.get("hi", 1.0))
    return Marginal.constant(d.get("value", 0))


def _law(cfg: ExperimentConfig) -> ColourLaw:
    d = cfg.get("law")
    if d is None:
        raise ConfigError("config needs 'law'")
    m = _marginal(d["marginal"])
    if d["law"] == "iid":
        return ColourLaw.iid(m)
    return ColourLaw.moving_average(m, d.get("range", 2.0), d.get("combine", "mean"))


def _pattern(cfg: ExperimentConfig, dim: int):
    if "pattern" not in cfg.data:
        raise ConfigError("config needs 'pattern'")
    pts = pio.load_pattern(cfg.data["pattern"])
    if np.all(pts == np.round(pts)):
        pts = pts.astype(np.int64)
    if pts.shape[1] != dim:
        raise ConfigError("pattern dimension does not match the point set")
    return Pattern(pts)


# -- tasks -------------------------------------------------------------------

def _task_generate(cfg, seed, workers):
    obj = _pointset(cfg)
    if isinstance(obj, Graph):
        return [], {"graph": pio.graph_to_dict(obj), "vertices": obj.n_vertices, "edges": obj.n_edges}, []
    rows = [{"index": i, **{f"x{j}": v for j, v in enumerate(p)}} for i, p in enumerate(obj.points.tolist())]
    return rows, {"pointset": pio.pointset_to_dict(obj), "points": len(obj)}, []


def _flags(trunc):
    return [f"window {i + 1} truncated" for i, t in enumerate(trunc) if t]


def _task_frequency(cfg, seed, workers):
    P = _pointset(cfg)
    spec = _group(cfg, P.dim)
    seq = _windows(cfg, spec)
    Q = _pattern(cfg, P.dim)
    est = pattern_frequency(P, Q, seq, spec)
    return list(est.rows()), {"estimate": est.estimate, "diagnostic": est.diagnostic,
                              "oscillation": est.oscillation}, _flags(est.truncated)


def _task_flc(cfg, seed, workers):
    P = _pointset(cfg)
    spec = _group(cfg, P.dim)
    f = cfg.get("flc", {"V_radius": 1.2})
    n = f.get("n_windows", 4)
    res = flc_enumerate(P, f["V_radius"], n, spec)
    return list(res.rows()), {"verdict": "FLC" if res.verdict else "not FLC",
                              "strictly_increasing": res.strictly_increasing,
                              "classes": res.class_counts[-1]}, []


def _task_birkhoff(cfg, seed, workers):
    P = _pointset(cfg)
    spec = _group(cfg, P.dim)
    seq = _windows(cfg, spec)
    f = _function(cfg)
    if cfg.get("method", "monte-carlo") == "exact":
        res = birkhoff_average_exact(P, f, seq)
        return list(res.rows()), {"method": "exact"}, []
    if f.coloured:
        from .colouring import sample_colours

        P = sample_colours(P, _law(cfg), seed)
    res = birkhoff_average_mc(P, f, seq, cfg.get("samples", 100_000), seed, workers)
    return list(res.rows()), {"method": "monte-carlo", "estimate": res.estimate}, _flags(res.truncated)


def _cyl(cfg, coloured):
    c = cfg.get("cylinder")
    if c is None:
        raise ConfigError("config needs 'cylinder'")
    centers = pio.load_pattern(c["centers"])
    sets = None
    if coloured:
        if "colour_sets" not in c:
            raise ConfigError("coloured cylinder needs 'colour_sets'")
        sets = tuple(_psi(s) for s in c["colour_sets"])
    return CylinderSpec(centers, c["eps"], sets)


def _task_cylinder(cfg, seed, workers):
    P = _pointset(cfg)
    spec = _group(cfg, P.dim)
    seq = _windows(cfg, spec)
    res = estimate_cylinder_measure(P, _cyl(cfg, False), seq, cfg.get("samples", 100_000), seed, spec, workers)
    row = {"n": res.window_index, "estimate": res.direct, "stderr": res.stderr, "crosscheck": res.formula,
           "gap": res.gap, "flags": ""}
    return [row], {"frequency": res.frequency, "vol_D_eps": res.vol_D_eps,
                   "permutations": len(res.permutations), "z": res.z}, []


def _task_coloured_cylinder(cfg, seed, workers):
    P = _pointset(cfg)
    spec = _group(cfg, P.dim)
    seq = _windows(cfg, spec)
    res = estimate_coloured_cylinder(P, _law(cfg), _cyl(cfg, True), seq, cfg.get("trials", 10_000), seed,
                                     group=spec)
    row = {"n": len(seq), "estimate": res.direct, "stderr": res.stderr,
           "crosscheck": res.crosscheck, "gap": res.gap, "flags": res.crosscheck_note}
    return [row], {"z": res.z, "trials": res.trials}, []


def _task_lln(cfg, seed, workers):
    P = _pointset(cfg)
    spec = _group(cfg, P.dim)
    seq = _windows(cfg, spec)
    res = lln_gap_diagnostic(P, _law(cfg), _function(cfg), seq, cfg.get("trials", 50), seed)
    return list(res.rows()), {"exponent": res.exponent, "expectation": res.expectation_method}, []


def _task_graph_patch(cfg, seed, workers):
    G = _pointset(cfg)
    if not isinstance(G, Graph):
        raise ConfigError("graph-patch needs a grid_graph generator")
    spec = _group(cfg, 2)
    seq = _windows(cfg, spec)
    p = cfg.get("patch")
    if p is None:
        raise ConfigError("config needs 'patch'")
    H = patch(np.asarray(p["vertices"]), p.get("edges", []))
    est = patch_frequency(G, H, seq, spec)
    return list(est.rows()), {"estimate": est.estimate}, _flags(est.truncated)


def _task_diagnostics(cfg, seed, workers):
    gname = cfg.get("group", "R2")
    spec = GroupSpec.parse(gname)
    seq = _windows(cfg, spec)
    K = TwoSidedBox.centred(cfg.get("K", 1.0), spec.dim)
    rows = []
    for i, W in enumerate(seq, start=1):
        rows.append({"n": i, "radius": W.radius, "vol": W.volume,
                     "van_hove": van_hove_ratio(seq, K, i), "folner": folner_ratio(seq, K, i)})
    uni = unimodularity_check(spec, trials=5, seed=seed, samples=cfg.get("samples", 100_000))
    return rows, {"shulman": shulman_constant(seq), "unimodularity_gap": uni.max_relative_gap,
                  "unimodularity_z": uni.combined_z, "unimodularity_max_trial_z": uni.max_z}, []


RUNNERS = {
    "generate": _task_generate,
    "frequency": _task_frequency,
    "flc": _task_flc,
    "birkhoff": _task_birkhoff,
    "cylinder": _task_cylinder,
    "coloured-cylinder": _task_coloured_cylinder,
    "lln": _task_lln,
    "graph-patch": _task_graph_patch,
    "diagnostics": _task_diagnostics,
}


def resolve_workers(flag: Optional[int], cfg: ExperimentConfig) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(ENV_WORKERS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{ENV_WORKERS} must be an integer") from None
    return int(cfg.get("workers", 1))


def run(task: str, cfg: ExperimentConfig, seed: Optional[int] = None, workers: Optional[int] = None,
        out: Optional[str] = None, stdout=None):
    """Run one task; returns ``(rows, metadata)`` and writes reports."""
    if cfg.get("task") not in (None, task):
        raise ConfigError(f"config task {cfg.get('task')!r} does not match subcommand {task!r}")
    seed = int(cfg.get("seed", 0)) if seed is None else seed
    workers = resolve_workers(workers, cfg)
    t0 = time.perf_counter()
    rows, summary, flags = RUNNERS[task](cfg, seed, workers)
    wall = time.perf_counter() - t0
    meta = {"task": task, "config_sha256": cfg.sha256, "seed": seed, "workers": workers,
            "summary": summary, "flags": flags, "wall_clock_s": wall, "config": cfg.data}
    for fl in flags:
        log.warning(fl)
    text = pio.csv_text(rows)
    out = out or cfg.get("out")
    if out:
        base = Path(out)
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".csv").write_text(text)
        base.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2,
                                                        default=pio._num) + "\n")
        if task == "generate" and "pointset" in summary:
            base.with_suffix(".pointset.json").write_text(pio.canonical_json(summary["pointset"]) + "\n")
    else:
        (stdout or sys.stdout).write(text)
    return rows, meta


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointset-ergodics",
                                description="Pattern frequencies and ergodic averages of point sets.")
    sub = p.add_subparsers(dest="task", required=True)
    for t in TASKS:
        s = sub.add_parser(t)
        s.add_argument("--config", required=True, help="experiment config (JSON)")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--workers", type=int, default=None,
                       help=f"worker threads (fallback: ${ENV_WORKERS}, then config, then 1)")
        s.add_argument("--out", default=None, help="report path prefix (.csv and .json are written)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
        run(args.task, cfg, args.seed, args.workers, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
