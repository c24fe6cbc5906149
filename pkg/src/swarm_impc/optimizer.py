"""Per-robot convex program: assembly, warm start, feasibility check and solve.

Decision variables are condensed to z = (u_0..u_{K-2}, w): the states are
eliminated through the dynamics and u_{K-1} is fixed by v_K = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .barrier import Constraints, Objective, barrier_minimize, phase_one
from .model import Condensed, ModelParams, PlannedTrajectory, RobotState, condense
from .separation import ConstraintSet

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITER = "max-iterations"
INFEASIBLE = "infeasible"


class AssemblyError(ValueError):
    pass


class RecursiveFeasibilityError(RuntimeError):
    """The shifted previous plan violates the new program; never expected."""

    def __init__(self, msg: str, report: "FeasibilityReport | None" = None, robot=None):
        super().__init__(msg)
        self.report = report
        self.robot = robot


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-7
    kkt_tol: float = 1e-7
    mu0: float = 1.0
    mu_min: float = 1e-8
    mu_refine: float | None = 1e-10
    mu_factor: float = 10.0
    alpha: float = 0.25
    beta: float = 0.5
    max_newton: int = 50
    nudge: float = 1e-3


@dataclass
class ProblemInstance:
    x0: RobotState
    params: ModelParams
    constraints: ConstraintSet
    target: np.ndarray
    rho: np.ndarray
    condensed: Condensed
    objective: Objective
    cons: Constraints
    # z-space maps, flattened index m*d + a over u_0..u_{K-2}
    Jp: np.ndarray       # (K, d, nz)
    Jv: np.ndarray       # (K, d, nz)
    Ju: np.ndarray       # (K, d, nz)
    pc: np.ndarray       # (K, d)
    vc: np.ndarray
    uc: np.ndarray

    @property
    def n_w(self) -> int:
        return self.rho.size

    @property
    def n_z(self) -> int:
        return self.Jp.shape[2]

    @property
    def n_u(self) -> int:
        return self.n_z - self.n_w

    @property
    def neighbors(self) -> tuple:
        return self.constraints.neighbors

    def z_from(self, U: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(U)[:-1].reshape(-1), np.asarray(w, dtype=float)])

    def inputs(self, z: np.ndarray) -> np.ndarray:
        return self.uc + self.Ju @ z

    def positions(self, z: np.ndarray) -> np.ndarray:
        return self.pc + self.Jp @ z

    def velocities(self, z: np.ndarray) -> np.ndarray:
        return self.vc + self.Jv @ z


@dataclass
class Candidate:
    inputs: np.ndarray   # (K, d)
    w: np.ndarray        # (n_w,)


@dataclass
class Violation:
    kind: str            # halfplane | accel | velocity | terminal_velocity | w_upper | w_lower
    neighbor: object
    k: int | None
    amount: float


@dataclass
class FeasibilityReport:
    feasible: bool
    violations: list[Violation] = field(default_factory=list)

    def worst(self) -> float:
        return max((v.amount for v in self.violations), default=0.0)


@dataclass
class Solution:
    inputs: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    w: np.ndarray
    neighbors: tuple
    objective: float
    status: str
    iterations: int = 0
    kkt_residual: float = 0.0
    mu: float = 0.0
    phase_one: bool = False

    @property
    def w_map(self) -> dict:
        return {j: float(w) for j, w in zip(self.neighbors, self.w)}

    @property
    def plan(self) -> PlannedTrajectory:
        return PlannedTrajectory(self.positions, self.velocities, self.inputs)


def assemble(
    x0: RobotState,
    constraints: ConstraintSet,
    target,
    rho: Mapping[object, float] | np.ndarray | None,
    params: ModelParams,
) -> ProblemInstance:
    K, d, h = params.K, params.d, params.h
    target = np.asarray(target, dtype=float)
    if x0.position.size != d or target.size != d or constraints.normals.shape[2:] not in ((d,), ()):
        raise AssemblyError(f"dimension mismatch: params d={d}, state {x0.position.size}, "
                            f"target {target.size}")
    if constraints.K != K:
        raise AssemblyError(f"constraint horizon {constraints.K} != K={K}")
    nb = constraints.neighbors
    if constraints.warning_band:
        if rho is None:
            rho_arr = np.full(len(nb), params.rho0)
        elif isinstance(rho, Mapping):
            rho_arr = np.array([float(rho[j]) for j in nb])
        else:
            rho_arr = np.asarray(rho, dtype=float)
        if rho_arr.size != len(nb) or np.any(rho_arr <= 0):
            raise AssemblyError("need one positive repulsion coefficient per neighbor")
    else:
        rho_arr = np.zeros(0)
    n_w = rho_arr.size
    n_u = (K - 1) * d
    n_z = n_u + n_w

    cd = condense(x0, params)
    # U = E z + e, with u_{K-1} = -v0/h - sum_{m<K-1} u_m
    E = np.zeros((K, K - 1))
    E[: K - 1] = np.eye(K - 1)
    E[K - 1] = -1.0
    e = np.zeros((K, d))
    e[K - 1] = -x0.velocity / h
    eye = np.eye(d)

    def lift(T):
        J = np.kron(T, eye).reshape(K, d, n_u)
        return np.concatenate([J, np.zeros((K, d, n_w))], axis=2)

    Ju, uc = lift(E), e
    Jp, pc = lift(cd.Sp @ E), cd.pos_const + cd.Sp @ e
    Jv, vc = lift(cd.Sv @ E), cd.vel_const + cd.Sv @ e

    # objective: 1/2 Q_K |p_K - target|^2 + 1/2 sum_k Q_k h^2 |v_k|^2 + sum rho (w/eps - ln w)
    q = params.q_schedule
    JK = Jp[K - 1]
    rK = pc[K - 1] - target
    H = q[K] * JK.T @ JK
    g = q[K] * JK.T @ rK
    c0 = 0.5 * q[K] * rK @ rK
    for k in range(1, K):
        Jk = Jv[k - 1]
        wk = q[k] * h * h
        H += wk * Jk.T @ Jk
        g += wk * Jk.T @ vc[k - 1]
        c0 += 0.5 * wk * vc[k - 1] @ vc[k - 1]
    w_idx = np.arange(n_u, n_z)
    obj = Objective(H, g, float(c0), w_idx, rho_arr.copy(), rho_arr / params.eps)

    # linear slacks: half-planes then w <= eps
    G_rows, h_rows = [], []
    if nb:
        a = constraints.normals                       # (n, K, d)
        Ga = np.einsum("nkd,kdz->nkz", a, Jp)        # (n, K, nz)
        ha = np.einsum("nkd,kd->nk", a, pc) - constraints.offsets
        if constraints.warning_band:
            Ga[np.arange(n_w), K - 1, n_u + np.arange(n_w)] -= 1.0
        k0 = constraints.k_start - 1
        G_rows.append(Ga[:, k0:].reshape(-1, n_z))
        h_rows.append(ha[:, k0:].reshape(-1))
    if n_w:
        Gw = np.zeros((n_w, n_z))
        Gw[np.arange(n_w), w_idx] = -1.0
        G_rows.append(Gw)
        h_rows.append(np.full(n_w, params.eps))
    G = np.vstack(G_rows) if G_rows else np.zeros((0, n_z))
    hl = np.concatenate(h_rows) if h_rows else np.zeros(0)

    # quadratic slacks: accel cones for u_0..u_{K-1}, velocity cones for v_1..v_{K-1}
    ta = np.asarray(params.theta_a)
    tv = np.asarray(params.theta_v)
    M = np.concatenate([ta[None, :, None] * Ju, tv[None, :, None] * Jv[: K - 1]], axis=0)
    m = np.concatenate([ta * uc, tv * vc[: K - 1]], axis=0)
    c = np.concatenate([np.full(K, params.a_max**2), np.full(K - 1, params.v_max**2)])
    cons = Constraints(G, hl, M, m, c)
    return ProblemInstance(x0, params, constraints, target, rho_arr, cd, obj, cons,
                           Jp, Jv, Ju, pc, vc, uc)


def objective_value(inst: ProblemInstance, U: np.ndarray, w: np.ndarray) -> float:
    """Cost of a full input sequence evaluated by the uncondensed formula."""
    p = inst.params
    P, V = inst.condensed.evaluate(np.asarray(U, dtype=float))
    q = p.q_schedule
    val = 0.5 * q[p.K] * np.sum((P[-1] - inst.target) ** 2)
    val += 0.5 * sum(q[k] * p.h**2 * V[k - 1] @ V[k - 1] for k in range(1, p.K))
    if inst.n_w:
        w = np.asarray(w, dtype=float)
        val += float(np.sum(inst.rho * (w / p.eps - np.log(w))))
    return float(val)


def warm_start(prev: Solution | None, inst: ProblemInstance, tol: float | None = 1e-7,
               robot=None) -> Candidate:
    """Shift the previous plan one step and pick the largest admissible slack.

    With ``tol`` set, the candidate is certified by :func:`check_feasible`
    and a :class:`RecursiveFeasibilityError` is raised on any violation.
    """
    K, d = inst.params.K, inst.params.d
    if prev is None:
        U = np.zeros((K, d))
    else:
        U = np.vstack([prev.inputs[1:], np.zeros((1, d))])
    w = np.zeros(0)
    if inst.n_w:
        pK = inst.condensed.positions(U)[-1]
        slack = inst.constraints.normals[:, -1] @ pK - inst.constraints.offsets[:, -1]
        w = np.minimum(inst.params.eps, slack)
    cand = Candidate(U, w)
    if tol is not None:
        report = check_feasible(inst, cand, tol)
        if not report.feasible:
            raise RecursiveFeasibilityError(
                f"robot {robot}: warm-start candidate violates {len(report.violations)} "
                f"constraint(s), worst {report.worst():.3g}", report, robot)
    return cand


def check_feasible(inst: ProblemInstance, cand: Candidate, tol: float = 1e-7) -> FeasibilityReport:
    p = inst.params
    U = np.asarray(cand.inputs, dtype=float)
    w = np.asarray(cand.w, dtype=float)
    P, V = inst.condensed.evaluate(U)
    out: list[Violation] = []
    cs = inst.constraints
    for row, j in enumerate(cs.neighbors):
        lhs = np.einsum("kd,kd->k", cs.normals[row], P)
        rhs = cs.offsets[row].copy()
        if cs.warning_band:
            rhs[-1] += w[row]
        gap = rhs - lhs
        gap[: cs.k_start - 1] = 0.0
        for k in np.nonzero(gap > tol)[0]:
            out.append(Violation("halfplane", j, int(k) + 1, float(gap[k])))
        if cs.warning_band:
            if w[row] > p.eps + tol:
                out.append(Violation("w_upper", j, p.K, float(w[row] - p.eps)))
            if w[row] <= 0:
                out.append(Violation("w_lower", j, p.K, float(-w[row])))
    ta, tv = np.asarray(p.theta_a), np.asarray(p.theta_v)
    acc = np.linalg.norm(U * ta, axis=1) - p.a_max
    for k in np.nonzero(acc > tol)[0]:
        out.append(Violation("accel", None, int(k), float(acc[k])))
    vel = np.linalg.norm(V * tv, axis=1) - p.v_max
    for k in np.nonzero(vel > tol)[0]:
        out.append(Violation("velocity", None, int(k) + 1, float(vel[k])))
    vK = float(np.linalg.norm(V[-1]))
    if cs.terminal_velocity_zero and vK > tol:
        out.append(Violation("terminal_velocity", None, p.K, vK))
    return FeasibilityReport(not out, out)


def _solution(inst: ProblemInstance, z: np.ndarray, status: str, **kw) -> Solution:
    U = inst.inputs(z)
    w = z[inst.n_u:].copy()
    return Solution(U, inst.positions(z), inst.velocities(z), w, inst.neighbors,
                    inst.objective.value(z), status, **kw)


def candidate_solution(inst: ProblemInstance, cand: Candidate, status: str) -> Solution:
    U = np.asarray(cand.inputs, dtype=float)
    P, V = inst.condensed.evaluate(U)
    return Solution(U, P, V, np.asarray(cand.w, dtype=float).copy(), inst.neighbors,
                    objective_value(inst, U, cand.w), status)


def best_slacks(inst: ProblemInstance, z: np.ndarray) -> np.ndarray:
    """Replace each w by its exact minimizer for the given inputs, min(eps, terminal slack).

    The slack cost is decreasing on (0, eps] and w only enters its own terminal
    face, so this never raises the objective. It removes the O(sqrt(mu)) gap the
    barrier leaves on slacks that end up at eps.
    """
    if not inst.n_w:
        return z
    z = z.copy()
    cs = inst.constraints
    slack = cs.normals[:, -1] @ inst.positions(z)[-1] - cs.offsets[:, -1]
    w = z[inst.n_u:]
    z[inst.n_u:] = np.where(slack > w, np.minimum(inst.params.eps, slack), w)
    return z


def _interior_start(inst: ProblemInstance, cand: Candidate, cfg: SolverConfig):
    """Strictly interior start near the candidate, plus whether phase I ran."""
    z = inst.z_from(cand.inputs, cand.w)
    if inst.n_w:
        z[inst.n_u:] *= 1.0 - cfg.nudge
    cons, obj = inst.cons, inst.objective
    if cons.strictly_feasible(z) and obj.in_domain(z):
        return z, False
    pos_idx = np.arange(inst.n_u, inst.n_z)
    z_int, s = phase_one(cons, z, pos_idx, mu_min=cfg.mu_min, max_newton=cfg.max_newton)
    if not s < 0:
        return None, True
    theta = cfg.nudge
    while theta < 1.0:
        zt = z + theta * (z_int - z)
        if cons.strictly_feasible(zt) and obj.in_domain(zt):
            return zt, True
        theta *= 10.0
    return z_int, True


def solve(inst: ProblemInstance, cand: Candidate, cfg: SolverConfig = SolverConfig()) -> Solution:
    """Barrier-Newton solve started from (a nudged copy of) the candidate.

    Returns status ``infeasible`` when no strictly feasible point exists and
    ``max-iterations`` when the final centering step misses ``kkt_tol``.
    """
    z0, used_p1 = _interior_start(inst, cand, cfg)
    if z0 is None:
        return candidate_solution(inst, cand, INFEASIBLE)
    res = barrier_minimize(
        inst.objective, inst.cons, z0, mu0=cfg.mu0, mu_min=cfg.mu_min,
        mu_factor=cfg.mu_factor, alpha=cfg.alpha, beta=cfg.beta,
        max_newton=cfg.max_newton, mu_refine=cfg.mu_refine,
    )
    kkt = res.kkt
    status = OPTIMAL if kkt <= cfg.kkt_tol else MAX_ITER
    return _solution(inst, best_slacks(inst, res.best_x), status, iterations=res.newton_iters,
                     kkt_residual=kkt, mu=res.mu, phase_one=used_p1)
