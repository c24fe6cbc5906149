"""Independent checks: continuous segment distance, collision reports, collinearity and run metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

COLLISION_SLACK = 1e-6
COLLINEAR_TOL = 1e-6


@dataclass(frozen=True)
class SegmentPair:
    """Two robots moving at constant velocity over the same interval: p1->q1 and p2->q2."""

    p1: np.ndarray
    q1: np.ndarray
    p2: np.ndarray
    q2: np.ndarray

    @property
    def r1(self) -> np.ndarray:
        """Relative offset at the start."""
        return np.asarray(self.p2, dtype=float) - np.asarray(self.p1, dtype=float)

    @property
    def r2(self) -> np.ndarray:
        return np.asarray(self.q2, dtype=float) - np.asarray(self.q1, dtype=float)

    @property
    def l1(self) -> np.ndarray:
        return np.asarray(self.q1, dtype=float) - np.asarray(self.p1, dtype=float)

    @property
    def l2(self) -> np.ndarray:
        return np.asarray(self.q2, dtype=float) - np.asarray(self.p2, dtype=float)


def min_distance_offsets(r1, r2) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized minimum of ||r1 + t (r2 - r1)|| over t in [0, 1].

    ``r1``/``r2`` are (..., d) relative offsets at the start and end of the interval.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    dr = r2 - r1
    den = np.einsum("...d,...d->...", dr, dr)
    num = -np.einsum("...d,...d->...", r1, dr)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    d = np.linalg.norm(r1 + t[..., None] * dr, axis=-1)
    return d, t


def segment_pair_min_distance(pair: SegmentPair) -> tuple[float, float]:
    """Closed-form closest approach and the normalized time at which it happens."""
    d, t = min_distance_offsets(pair.r1, pair.r2)
    return float(d), float(t)


def endpoint_clearance_condition(pair: SegmentPair, r_min: float) -> bool:
    """Sufficient endpoint test: both offsets exceed sqrt(r_min^2 + ||l2 - l1||^2 / 4)."""
    thr = np.sqrt(r_min**2 + 0.25 * np.sum((pair.l2 - pair.l1) ** 2))
    return bool(np.linalg.norm(pair.r1) >= thr and np.linalg.norm(pair.r2) >= thr)


@dataclass
class CollisionReport:
    passed: bool
    min_distance: float
    worst_pair: tuple[int, int] | None
    worst_step: int | None
    violations: list[tuple[int, int, int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "min_distance": self.min_distance,
                "worst_pair": list(self.worst_pair) if self.worst_pair else None,
                "worst_step": self.worst_step,
                "violations": [list(v) for v in self.violations[:50]]}


def check_positions_collision_free(positions, r_min: float, slack: float = COLLISION_SLACK) -> CollisionReport:
    """Continuous check over executed samples ``positions`` shaped (T+1, N, d)."""
    X = np.asarray(positions, dtype=float)
    n = X.shape[1] if X.ndim == 3 else 0
    if n < 2 or len(X) == 0:
        return CollisionReport(True, float("inf"), None, None)
    ii, jj = np.triu_indices(n, 1)
    rel = X[:, jj] - X[:, ii]                        # (T+1, P, d)
    if len(X) == 1:
        D = np.linalg.norm(rel, axis=-1)[None]
    else:
        D, _ = min_distance_offsets(rel[:-1], rel[1:])  # (T, P)
    step, pidx = np.unravel_index(int(np.argmin(D)), D.shape)
    dmin = float(D[step, pidx])
    bad = np.argwhere(D < r_min - slack)
    viol = [(int(ii[p]), int(jj[p]), int(s), float(D[s, p])) for s, p in bad]
    return CollisionReport(not viol, dmin, (int(ii[pidx]), int(jj[pidx])), int(step), viol)


def check_run_collision_free(result, r_min: float | None = None,
                             slack: float = COLLISION_SLACK) -> CollisionReport:
    r_min = result.params.r_min if r_min is None else r_min
    return check_positions_collision_free(result.positions, r_min, slack)


def _perp_dist(a, b, c) -> float:
    """Distance of c from the line through a and b (xy only)."""
    ab = b - a
    n = np.linalg.norm(ab)
    if n < COLLINEAR_TOL:
        return float(np.linalg.norm(c - a))
    return float(abs(ab[0] * (c - a)[1] - ab[1] * (c - a)[0]) / n)


def _triple_spread(a, b, c) -> float:
    """Offset of the middle point from the line through the two farthest apart."""
    pairs = [(a, b, c), (b, c, a), (c, a, b)]
    u, v, w = max(pairs, key=lambda t: np.linalg.norm(t[1] - t[0]))
    return _perp_dist(u, v, w)


def collinearity_check(positions=None, targets=None, tol: float = COLLINEAR_TOL) -> list[tuple]:
    """Flag collinear target triples and collinear two-robot deadlock signatures.

    Triples ``("targets", i, j, k)`` come from the xy-projected targets. Pairs
    ``("pair", i, j)`` mark robots whose current positions and targets all
    lie on one line, the configuration in which two robots can block each
    other symmetrically.
    """
    out: list[tuple] = []
    T = None if targets is None else np.asarray(targets, dtype=float)[:, :2]
    if T is not None:
        for i, j, k in combinations(range(len(T)), 3):
            if _triple_spread(T[i], T[j], T[k]) < tol:
                out.append(("targets", i, j, k))
    if positions is not None and T is not None:
        P = np.asarray(positions, dtype=float)[:, :2]
        for i, j in combinations(range(len(P)), 2):
            pts = [P[i], T[i], P[j], T[j]]
            a, b = P[i], P[j]
            if np.linalg.norm(b - a) < tol:
                continue
            if all(_perp_dist(a, b, c) < tol for c in pts):
                out.append(("pair", i, j))
    return out


@dataclass
class Metrics:
    success: bool
    status: str
    infeasible_events: int
    warm_start_violations: int
    completion_time: float
    min_continuous_distance: float
    path_length: list[float]
    deadlock_activations: int
    solver_incidents: int
    steps: int

    def to_dict(self) -> dict:
        return dict(vars(self))


def run_metrics(result, deadline: float | None = None) -> Metrics:
    """Derived statistics; ``completion_time`` is the deadline for unsuccessful runs."""
    deadline = result.config.deadline if deadline is None else deadline
    X = np.asarray(result.positions, dtype=float)
    success = (result.status == "arrived" and result.completion_time is not None
               and result.completion_time <= deadline + 1e-9
               and result.warm_start_violations == 0 and result.infeasible_events == 0)
    lengths = (np.linalg.norm(np.diff(X, axis=0), axis=2).sum(axis=0).tolist()
               if len(X) > 1 else [0.0] * X.shape[1])
    coll = check_run_collision_free(result)
    return Metrics(
        success=bool(success),
        status=result.status,
        infeasible_events=int(result.infeasible_events),
        warm_start_violations=int(result.warm_start_violations),
        completion_time=float(result.completion_time) if success else float(deadline),
        min_continuous_distance=coll.min_distance,
        path_length=[float(x) for x in lengths],
        deadlock_activations=int(result.deadlock_activations),
        solver_incidents=int(result.solver_incidents),
        steps=len(X) - 1,
    )
