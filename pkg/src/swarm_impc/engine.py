"""Synchronous multi-robot simulation loop for IMPC-DR and the BVC baseline."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .deadlock import (
    DeadlockState, all_w_at_eps, detect_terminal_overlap, equilibrium_residual,
    repulsion_coeff, signed_angle, update_eta,
)
from .model import (
    ModelParams, PredeterminedTrajectory, RobotState, init_predetermined,
    shift_predetermined, step_dynamics,
)
from .optimizer import (
    INFEASIBLE, OPTIMAL, RecursiveFeasibilityError, Solution, SolverConfig, assemble,
    candidate_solution, solve, warm_start,
)
from .separation import DegenerateGeometryError, build_bvc_constraints, build_constraints

log = logging.getLogger(__name__)

IMPC_DR = "impc_dr"
BVC = "bvc"
METHODS = (IMPC_DR, BVC)


@dataclass(frozen=True)
class EngineConfig:
    """Run-level knobs. ``comm_radius=None`` uses the bound from :func:`comm_range`;
    ``math.inf`` gives the full communication graph."""

    solver: SolverConfig = SolverConfig()
    comm_radius: float | None = None
    deadline: float = 50.0
    arrival_tol: float = 0.05
    rest_tol: float = 0.05
    overlap_tol: float = 1e-3
    history_depth: int = 2
    w_eps_rel_tol: float = 1e-3
    resolution: bool = True
    certify_warm_start: bool = True
    record_plans: bool = True
    # baseline detour heuristic
    detect_window: int = 3
    detour_dist_factor: float = 2.0
    clear_factor: float = 0.5

    def to_dict(self) -> dict:
        return {
            "comm_radius": self.comm_radius, "deadline": self.deadline,
            "arrival_tol": self.arrival_tol, "rest_tol": self.rest_tol,
            "overlap_tol": self.overlap_tol, "history_depth": self.history_depth,
            "w_eps_rel_tol": self.w_eps_rel_tol, "resolution": self.resolution,
            "certify_warm_start": self.certify_warm_start, "detect_window": self.detect_window,
            "detour_dist_factor": self.detour_dist_factor, "clear_factor": self.clear_factor,
            "solver": {k: getattr(self.solver, k) for k in self.solver.__dataclass_fields__},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        data = dict(data)
        solver = SolverConfig(**data.pop("solver", {}))
        return cls(solver=solver, **data)


def comm_range(params: ModelParams) -> float:
    """Distance beyond which two robots' constraint sets cannot interact."""
    return 2 * params.v_max * params.K * params.h + params.r_min_ext + 2 * params.eps


@dataclass
class WorldState:
    t: float
    states: list[RobotState]
    predetermined: list[PredeterminedTrajectory]
    deadlock: list[DeadlockState]
    solutions: list[Solution | None]
    targets: np.ndarray
    step: int = 0

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.states])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([s.velocity for s in self.states])


def init_world(starts, targets, params: ModelParams, history_depth: int = 2) -> WorldState:
    starts = np.asarray(starts, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if starts.shape != targets.shape or starts.ndim != 2 or starts.shape[1] != params.d:
        raise ValueError(f"starts/targets must both be (N, {params.d})")
    n = len(starts)
    return WorldState(
        0.0,
        [RobotState.at_rest(p) for p in starts],
        [init_predetermined(p, params.K) for p in starts],
        [DeadlockState(depth=history_depth) for _ in range(n)],
        [None] * n,
        targets.copy(),
    )


def exchange(world: WorldState, radius: float) -> list[dict]:
    """Per-robot inbox of neighbor predetermined trajectories, by ascending id."""
    P = world.positions
    D = np.linalg.norm(P[:, None] - P[None], axis=2)
    inbox = []
    for i in range(world.n):
        inbox.append({j: world.predetermined[j] for j in range(world.n)
                      if j != i and D[i, j] <= radius})
    return inbox


@dataclass
class RobotRecord:
    """What one robot did in one round."""

    p: np.ndarray
    v: np.ndarray
    u: np.ndarray
    w: dict
    rho: dict
    eta: float
    b_to: bool
    status: str
    iterations: int
    kkt: float
    objective: float
    residual: float
    plan: np.ndarray | None = None
    target: np.ndarray | None = None  # effective target (differs during a baseline detour)


@dataclass
class StepRecord:
    t: float
    robots: list[RobotRecord]


@dataclass
class RunResult:
    method: str
    params: ModelParams
    config: EngineConfig
    starts: np.ndarray
    targets: np.ndarray
    positions: np.ndarray          # (T+1, N, d) executed sample positions
    velocities: np.ndarray
    steps: list[StepRecord]
    status: str                    # arrived | deadline | infeasible | aborted
    completion_time: float | None
    infeasible_events: int = 0
    warm_start_violations: int = 0
    solver_incidents: int = 0
    deadlock_activations: int = 0
    incidents: list[dict] = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def success(self) -> bool:
        return self.status == "arrived"

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.positions)) * self.params.h


def _rho_map(i: int, world: WorldState, inbox: dict, params: ModelParams, eta: float) -> dict:
    own_K = world.predetermined[i].terminal
    out = {}
    for j, pt in inbox.items():
        theta = signed_angle(own_K, world.targets[i], pt.terminal)
        out[j] = repulsion_coeff(params.rho0, eta, theta)
    return out


def _impc_robot(i: int, world: WorldState, inbox: dict, params: ModelParams,
                cfg: EngineConfig, incidents: list) -> tuple[Solution, RobotRecord]:
    dl = world.deadlock[i]
    cons = build_constraints(world.predetermined[i], inbox, params)
    eta = dl.eta if cfg.resolution else 0.0
    rho = _rho_map(i, world, inbox, params, eta)
    inst = assemble(world.states[i], cons, world.targets[i], rho, params)
    tol = cfg.solver.feas_tol if cfg.certify_warm_start else None
    cand = warm_start(world.solutions[i], inst, tol=tol, robot=i)
    sol = solve(inst, cand, cfg.solver)
    if sol.status != OPTIMAL:
        incidents.append({"step": world.step, "t": world.t, "robot": i, "kind": "solver",
                          "detail": f"status {sol.status}, kkt {sol.kkt_residual:.3g}; "
                                    "executing warm-start candidate"})
        sol = replace(candidate_solution(inst, cand, sol.status), iterations=sol.iterations,
                      kkt_residual=sol.kkt_residual, mu=sol.mu)

    P = sol.positions
    K = params.K
    b_to = detect_terminal_overlap(P[-1], dl.previous_terminal(), P[K - 2], P[K - 3],
                                   world.targets[i], cfg.overlap_tol, cfg.arrival_tol)
    dl.b_to = b_to
    dl.last_w = sol.w_map
    dl.push_terminal(P[-1])
    if cfg.resolution:
        dl.eta = update_eta(dl.eta, b_to, all_w_at_eps(sol.w, params.eps, cfg.w_eps_rel_tol),
                            params.delta_eta)

    terms = [(cons.normals[r, -1], rho[j], sol.w[r]) for r, j in enumerate(cons.neighbors)]
    resid = equilibrium_residual(P[-1], world.targets[i], terms, params.q_terminal, params.eps)
    rec = RobotRecord(world.states[i].position, world.states[i].velocity, sol.inputs[0].copy(),
                      sol.w_map, rho, eta, b_to, sol.status, sol.iterations,
                      sol.kkt_residual, sol.objective, float(np.linalg.norm(resid)),
                      P.copy() if cfg.record_plans else None, world.targets[i].copy())
    return sol, rec


def plan_step(world: WorldState, params: ModelParams, cfg: EngineConfig,
              incidents: list | None = None) -> tuple[list[Solution], list[RobotRecord]]:
    """Every robot plans from the same snapshot; nothing is mutated except deadlock state."""
    incidents = [] if incidents is None else incidents
    radius = comm_range(params) if cfg.comm_radius is None else cfg.comm_radius
    inboxes = exchange(world, radius)
    sols, recs = [], []
    for i in range(world.n):
        s, r = _impc_robot(i, world, inboxes[i], params, cfg, incidents)
        sols.append(s)
        recs.append(r)
    return sols, recs


def execute(world: WorldState, solutions: Sequence[Solution], params: ModelParams) -> WorldState:
    """Apply each robot's first input and broadcast the shifted plans."""
    states = [step_dynamics(s, sol.inputs[0], params.h) for s, sol in zip(world.states, solutions)]
    pts = [shift_predetermined(sol.plan) for sol in solutions]
    return WorldState(world.t + params.h, states, pts, world.deadlock, list(solutions),
                      world.targets, world.step + 1)


def _arrived(world: WorldState, cfg: EngineConfig) -> bool:
    dp = np.linalg.norm(world.positions - world.targets, axis=1)
    sp = np.linalg.norm(world.velocities, axis=1)
    return bool(np.all(dp <= cfg.arrival_tol) and np.all(sp <= cfg.rest_tol))


@dataclass
class _Detour:
    static_steps: int = 0
    active: bool = False
    target: np.ndarray | None = None
    anchor: np.ndarray | None = None
    direction: np.ndarray | None = None
    activations: int = 0


def _right_hand_target(p, goal, dist: float) -> tuple[np.ndarray, np.ndarray] | None:
    g = np.asarray(goal, dtype=float) - p
    gxy = g[:2]
    n = np.linalg.norm(gxy)
    if n < 1e-9:
        return None
    right = np.zeros_like(p)
    right[:2] = np.array([gxy[1], -gxy[0]]) / n
    return p + dist * right, right


def bvc_plan_step(world: WorldState, params: ModelParams, cfg: EngineConfig,
                  detours: list[_Detour], incidents: list) -> tuple[list[Solution] | None, list[RobotRecord]]:
    """Baseline round: each robot plans inside its buffered Voronoi cell.

    Returns ``None`` for the solutions when some robot's program is infeasible.
    """
    radius = comm_range(params) if cfg.comm_radius is None else cfg.comm_radius
    P = world.positions
    D = np.linalg.norm(P[:, None] - P[None], axis=2)
    sols, recs = [], []
    infeasible = False
    for i in range(world.n):
        st = world.states[i]
        det = detours[i]
        goal = world.targets[i]
        at_goal = np.linalg.norm(st.position - goal) <= cfg.arrival_tol
        if np.linalg.norm(st.velocity) <= cfg.rest_tol and not at_goal:
            det.static_steps += 1
        else:
            det.static_steps = 0
        if det.active:
            progress = (st.position - det.anchor) @ det.direction
            if progress >= cfg.clear_factor * params.r_min or det.static_steps >= cfg.detect_window:
                det.active = False
                det.static_steps = 0
        elif det.static_steps >= cfg.detect_window:
            rh = _right_hand_target(st.position, goal, cfg.detour_dist_factor * params.r_min)
            if rh is not None:
                det.active, det.target, det.direction = True, rh[0], rh[1]
                det.anchor = st.position.copy()
                det.static_steps = 0
                det.activations += 1
        eff = det.target if det.active else goal

        nbr = {j: P[j] for j in range(world.n) if j != i and D[i, j] <= radius}
        cons = build_bvc_constraints(st.position, nbr, params)
        inst = assemble(st, cons, eff, None, params)
        cand = warm_start(world.solutions[i], inst, tol=None)
        sol = solve(inst, cand, cfg.solver)
        if sol.status == INFEASIBLE:
            infeasible = True
            incidents.append({"step": world.step, "t": world.t, "robot": i, "kind": "infeasible",
                              "detail": "no point inside the buffered Voronoi cell meets the bounds"})
        elif sol.status != OPTIMAL:
            incidents.append({"step": world.step, "t": world.t, "robot": i, "kind": "solver",
                              "detail": f"status {sol.status}, kkt {sol.kkt_residual:.3g}"})
        sols.append(sol)
        recs.append(RobotRecord(st.position, st.velocity, sol.inputs[0].copy(), {}, {}, 0.0,
                                det.active, sol.status, sol.iterations, sol.kkt_residual,
                                sol.objective, 0.0,
                                sol.positions.copy() if cfg.record_plans else None,
                                np.asarray(eff, dtype=float).copy()))
    return (None if infeasible else sols), recs


def run(starts, targets, params: ModelParams, config: EngineConfig = EngineConfig(),
        method: str = IMPC_DR) -> RunResult:
    """Simulate until every robot rests at its target or the deadline passes."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    t0 = time.perf_counter()
    world = init_world(starts, targets, params, config.history_depth)
    positions = [world.positions]
    velocities = [world.velocities]
    steps: list[StepRecord] = []
    incidents: list[dict] = []
    detours = [_Detour() for _ in range(world.n)]
    status, completion = "deadline", None
    ws_viol = infeas = 0
    n_steps = int(math.floor(config.deadline / params.h + 1e-9))

    if _arrived(world, config):
        status, completion = "arrived", 0.0
    else:
        for _ in range(n_steps):
            if method == IMPC_DR:
                try:
                    sols, recs = plan_step(world, params, config, incidents)
                except RecursiveFeasibilityError as exc:
                    ws_viol += 1
                    incidents.append({"step": world.step, "t": world.t, "robot": exc.robot,
                                      "kind": "warm_start", "detail": str(exc),
                                      "violations": [vars(v) for v in exc.report.violations]
                                      if exc.report else []})
                    status = "aborted"
                    break
                except DegenerateGeometryError as exc:
                    incidents.append({"step": world.step, "t": world.t, "robot": None,
                                      "kind": "degenerate", "detail": str(exc)})
                    status = "aborted"
                    break
            else:
                sols, recs = bvc_plan_step(world, params, config, detours, incidents)
                if sols is None:
                    infeas += 1
                    steps.append(StepRecord(world.t, recs))
                    status = "infeasible"
                    break
            steps.append(StepRecord(world.t, recs))
            world = execute(world, sols, params)
            positions.append(world.positions)
            velocities.append(world.velocities)
            if _arrived(world, config):
                status, completion = "arrived", world.t
                break

    n_solver = sum(1 for x in incidents if x["kind"] == "solver")
    if method == IMPC_DR:
        activ = sum(r.b_to for s in steps for r in s.robots) if config.resolution else 0
    else:
        activ = sum(d.activations for d in detours)
    return RunResult(method, params, config, np.asarray(starts, dtype=float),
                     np.asarray(targets, dtype=float), np.array(positions), np.array(velocities),
                     steps, status, completion, infeas, ws_viol, n_solver, activ, incidents,
                     time.perf_counter() - t0)
