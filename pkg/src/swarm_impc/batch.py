"""Batch experiments: many seeded runs per (method, N), summarized as CSV rows."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import METHODS, EngineConfig, run
from .scenarios import KINDS, gen_scenario, preset
from .verification import run_metrics

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "N", "trials", "success_count", "infeasible_count",
               "mean_completion_s", "p95_completion_s", "min_distance_m", "mean_wall_clock_s")
THREADS_ENV = "SWARM_IMPC_THREADS"


@dataclass(frozen=True)
class BatchSpec:
    kind: str = "random_transition"
    counts: tuple[int, ...] = (4, 8, 14)
    trials: int = 20
    methods: tuple[str, ...] = ("impc_dr",)
    deadline: float = 50.0
    seed_base: int = 0
    preset: str = "2d_crowded"
    workspace: tuple | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        object.__setattr__(self, "methods", tuple(self.methods))

    def seed(self, n: int, trial: int) -> int:
        return self.seed_base + 1000 * n + trial

    @classmethod
    def from_dict(cls, data: dict) -> "BatchSpec":
        data = dict(data)
        if data.get("workspace") is not None:
            ws = data["workspace"]
            data["workspace"] = (tuple(ws["min"]), tuple(ws["max"])) if isinstance(ws, dict) else tuple(map(tuple, ws))
        for key in ("counts", "methods"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["counts"] = list(self.counts)
        out["methods"] = list(self.methods)
        return out


@dataclass
class TrialOutcome:
    method: str
    n: int
    seed: int
    success: bool
    status: str
    infeasible: bool
    warm_start_violations: int
    completion_time: float | None
    min_distance: float
    wall_clock_s: float
    deadlock_activations: int = 0
    solver_incidents: int = 0
    error: str | None = None


@dataclass
class BatchResult:
    spec: BatchSpec
    rows: list[dict]
    trials: list[TrialOutcome] = field(default_factory=list)


def run_trial(spec: BatchSpec, method: str, n: int, trial: int,
              config: EngineConfig | None = None) -> TrialOutcome:
    """One seeded run; any failure is captured in the outcome instead of raised."""
    seed = spec.seed(n, trial)
    params, ws = preset(spec.preset)
    if spec.workspace is not None:
        ws = tuple(np.asarray(w, dtype=float) for w in spec.workspace)
    cfg = config or EngineConfig(deadline=spec.deadline)
    cfg = EngineConfig(**{**{k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
                          "deadline": spec.deadline, "record_plans": False})
    try:
        sc = gen_scenario(spec.kind, n, params, ws, seed)
        res = run(sc.starts, sc.targets, params, cfg, method)
        m = run_metrics(res, spec.deadline)
        return TrialOutcome(method, n, seed, m.success, m.status, res.infeasible_events > 0,
                            res.warm_start_violations,
                            res.completion_time if m.success else None,
                            m.min_continuous_distance, res.wall_clock_s,
                            m.deadlock_activations, m.solver_incidents)
    except Exception as exc:  # recorded, never aborts the batch
        log.exception("trial %s N=%d seed=%d failed", method, n, seed)
        return TrialOutcome(method, n, seed, False, "error", False, 0, None, float("nan"), 0.0,
                            error=f"{type(exc).__name__}: {exc}")


def _job(args):
    return run_trial(*args)


def worker_count(default: int | None = None) -> int:
    env = os.environ.get(THREADS_ENV)
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return max(1, default if default is not None else cpus)


def summarize(outcomes: list[TrialOutcome], method: str, n: int) -> dict:
    sel = [o for o in outcomes if o.method == method and o.n == n]
    times = np.array([o.completion_time for o in sel if o.success], dtype=float)
    dists = np.array([o.min_distance for o in sel if np.isfinite(o.min_distance)], dtype=float)
    return {
        "method": method,
        "N": n,
        "trials": len(sel),
        "success_count": sum(o.success for o in sel),
        "infeasible_count": sum(o.infeasible for o in sel),
        "mean_completion_s": float(times.mean()) if times.size else float("nan"),
        "p95_completion_s": float(np.percentile(times, 95)) if times.size else float("nan"),
        "min_distance_m": float(dists.min()) if dists.size else float("nan"),
        "mean_wall_clock_s": float(np.mean([o.wall_clock_s for o in sel])) if sel else float("nan"),
    }


def run_batch(spec: BatchSpec, workers: int | None = None,
              config: EngineConfig | None = None) -> BatchResult:
    jobs = [(spec, m, n, t, config) for m in spec.methods for n in spec.counts
            for t in range(spec.trials)]
    workers = worker_count(workers)
    if workers <= 1:
        outcomes = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    rows = [summarize(outcomes, m, n) for m in spec.methods for n in spec.counts]
    return BatchResult(spec, rows, outcomes)


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in CSV_COLUMNS})
