"""Run export and reload: per-step JSONL log, JSON summary and their schemas."""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .engine import EngineConfig, RobotRecord, RunResult, StepRecord
from .model import ModelParams
from .verification import check_run_collision_free, collinearity_check, run_metrics

LOG_NAME = "trajectory.jsonl"
SUMMARY_NAME = "summary.json"
SVG_NAME = "traj.svg"

_vec = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3}
_num_or_null = {"type": ["number", "null"]}

RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["step", "t", "robot", "p", "v", "u", "w", "eta", "b_to", "iterations", "residual"],
    "properties": {
        "step": {"type": "integer", "minimum": 0},
        "t": {"type": "number", "minimum": 0},
        "robot": {"type": "integer", "minimum": 0},
        "p": _vec, "v": _vec,
        "u": {"oneOf": [_vec, {"type": "null"}]},
        "w": {"type": "object", "additionalProperties": {"type": "number"}},
        "rho": {"type": "object", "additionalProperties": {"type": "number"}},
        "eta": {"type": "number", "minimum": 0},
        "b_to": {"type": "boolean"},
        "iterations": {"type": "integer", "minimum": 0},
        "residual": _num_or_null,
        "kkt": _num_or_null,
        "objective": _num_or_null,
        "status": {"type": ["string", "null"]},
        "final": {"type": "boolean"},
    },
}

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["method", "status", "metrics", "params", "config", "starts", "targets",
                 "verification", "incidents"],
    "properties": {
        "method": {"enum": ["impc_dr", "bvc"]},
        "status": {"enum": ["arrived", "deadline", "infeasible", "aborted"]},
        "completion_time": _num_or_null,
        "metrics": {
            "type": "object",
            "required": ["success", "infeasible_events", "completion_time",
                         "min_continuous_distance", "path_length", "deadlock_activations"],
            "properties": {
                "success": {"type": "boolean"},
                "infeasible_events": {"type": "integer", "minimum": 0},
                "warm_start_violations": {"type": "integer", "minimum": 0},
                "completion_time": {"type": "number", "minimum": 0},
                "min_continuous_distance": _num_or_null,
                "path_length": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "deadlock_activations": {"type": "integer", "minimum": 0},
                "solver_incidents": {"type": "integer", "minimum": 0},
                "steps": {"type": "integer", "minimum": 0},
            },
        },
        "params": {"type": "object", "required": ["h", "K", "v_max", "a_max", "r_min", "eps", "d"]},
        "config": {"type": "object", "required": ["deadline", "arrival_tol", "rest_tol", "overlap_tol"]},
        "starts": {"type": "array", "items": _vec},
        "targets": {"type": "array", "items": _vec},
        "verification": {
            "type": "object",
            "required": ["collision", "warm_start_violations", "collinear"],
        },
        "incidents": {"type": "array", "items": {"type": "object"}},
        "wall_clock_s": {"type": "number", "minimum": 0},
    },
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["d", "workspace", "robots", "params"],
    "properties": {
        "d": {"enum": [2, 3]},
        "workspace": {"type": "object", "required": ["min", "max"],
                      "properties": {"min": _vec, "max": _vec}},
        "robots": {"type": "array", "minItems": 1,
                   "items": {"type": "object", "required": ["start", "target"],
                             "properties": {"start": _vec, "target": _vec}}},
        "params": {"type": "object"},
        "seed": {"type": "integer"},
        "kind": {"enum": ["symmetric_circle", "symmetric_square", "narrow_passage", "swap",
                          "random_transition"]},
    },
}


class ExportError(OSError):
    pass


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _finite(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def step_records(result: RunResult):
    """Yield one JSON-ready dict per robot per step, then a final state per robot."""
    for s_idx, st in enumerate(result.steps):
        for i, r in enumerate(st.robots):
            yield {
                "step": s_idx, "t": float(st.t), "robot": i,
                "p": r.p.tolist(), "v": r.v.tolist(), "u": r.u.tolist(),
                "w": {str(j): float(w) for j, w in r.w.items()},
                "rho": {str(j): float(x) for j, x in r.rho.items()},
                "eta": float(r.eta), "b_to": bool(r.b_to), "iterations": int(r.iterations),
                "residual": _finite(r.residual), "kkt": _finite(r.kkt),
                "objective": _finite(r.objective), "status": r.status,
            }
    T = len(result.positions) - 1
    if T == len(result.steps):
        for i in range(result.positions.shape[1]):
            yield {
                "step": T, "t": float(T * result.params.h), "robot": i,
                "p": result.positions[T, i].tolist(), "v": result.velocities[T, i].tolist(),
                "u": None, "w": {}, "rho": {}, "eta": 0.0, "b_to": False, "iterations": 0,
                "residual": None, "kkt": None, "objective": None, "status": None, "final": True,
            }


def summary_dict(result: RunResult) -> dict:
    m = run_metrics(result)
    coll = check_run_collision_free(result)
    flags = collinearity_check(targets=result.targets)
    return _jsonable({
        "method": result.method,
        "status": result.status,
        "completion_time": result.completion_time,
        "metrics": m.to_dict(),
        "params": result.params.to_dict(),
        "config": result.config.to_dict(),
        "starts": result.starts,
        "targets": result.targets,
        "verification": {
            "collision": coll.to_dict(),
            "warm_start_violations": result.warm_start_violations,
            "collinear": [list(f) for f in flags],
        },
        "incidents": result.incidents,
        "wall_clock_s": result.wall_clock_s,
    })


def export_run(result: RunResult, out_dir, formats=("jsonl", "json", "svg")) -> dict[str, Path]:
    out = Path(out_dir)
    written: dict[str, Path] = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "jsonl" in formats:
            path = out / LOG_NAME
            with open(path, "w") as fh:
                for rec in step_records(result):
                    fh.write(json.dumps(rec) + "\n")
            written["jsonl"] = path
        if "json" in formats:
            summ = summary_dict(result)
            jsonschema.validate(summ, SUMMARY_SCHEMA)
            path = out / SUMMARY_NAME
            path.write_text(json.dumps(summ, indent=2))
            written["json"] = path
        if "svg" in formats:
            from .plot import plot_paths
            path = out / SVG_NAME
            plot_paths(result.positions, result.targets, path,
                       title=f"{result.method}: {result.status}")
            written["svg"] = path
    except OSError as exc:
        raise ExportError(f"writing run to {out}: {exc}") from exc
    return written


def validate_log(path) -> int:
    """Validate every JSONL record; returns the record count."""
    n = 0
    with open(path) as fh:
        for line in fh:
            jsonschema.validate(json.loads(line), RECORD_SCHEMA)
            n += 1
    return n


def load_run(run_dir) -> RunResult:
    """Rebuild a RunResult from an exported directory (plans are not stored)."""
    d = Path(run_dir)
    summ = json.loads((d / SUMMARY_NAME).read_text())
    jsonschema.validate(summ, SUMMARY_SCHEMA)
    params = ModelParams.from_dict(summ["params"])
    cfg = EngineConfig.from_dict(summ["config"])
    steps: dict[int, dict[int, dict]] = {}
    with open(d / LOG_NAME) as fh:
        for line in fh:
            rec = json.loads(line)
            steps.setdefault(rec["step"], {})[rec["robot"]] = rec
    order = sorted(steps)
    n = len(summ["starts"])
    positions = np.array([[steps[s][i]["p"] for i in range(n)] for s in order], dtype=float)
    velocities = np.array([[steps[s][i]["v"] for i in range(n)] for s in order], dtype=float)
    recs = []
    for s in order:
        rows = steps[s]
        if rows[0].get("final"):
            continue
        robots = []
        for i in range(n):
            r = rows[i]
            nan = float("nan")
            robots.append(RobotRecord(
                np.array(r["p"]), np.array(r["v"]), np.array(r["u"]),
                {int(k): v for k, v in r["w"].items()}, {int(k): v for k, v in r.get("rho", {}).items()},
                r["eta"], r["b_to"], r.get("status"), r["iterations"],
                nan if r.get("kkt") is None else r["kkt"],
                nan if r.get("objective") is None else r["objective"],
                nan if r.get("residual") is None else r["residual"]))
        recs.append(StepRecord(rows[0]["t"], robots))
    m = summ["metrics"]
    return RunResult(summ["method"], params, cfg, np.array(summ["starts"], dtype=float),
                     np.array(summ["targets"], dtype=float), positions, velocities, recs,
                     summ["status"], summ.get("completion_time"), m["infeasible_events"],
                     m.get("warm_start_violations", 0), m.get("solver_incidents", 0),
                     m["deadlock_activations"], summ["incidents"], summ.get("wall_clock_s", 0.0))
