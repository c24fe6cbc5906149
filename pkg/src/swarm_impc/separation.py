"""Half-plane separation between robots: MBVC-WB and the plain BVC baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import ModelParams, PredeterminedTrajectory

DEGENERATE_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """Two positions that should be separated coincide."""

    def __init__(self, msg: str, neighbor=None, k: int | None = None):
        super().__init__(msg)
        self.neighbor = neighbor
        self.k = k


def extended_buffer(r_min: float, h: float, v_max: float) -> float:
    return float(np.sqrt(r_min * r_min + h * h * v_max * v_max))


def halfplane(p_i, p_j, r_ext: float) -> tuple[np.ndarray, float]:
    """Separating half-plane a^T p >= b for robot i against robot j.

    The normal points from j toward i; the buffer is r_ext/2 past the midpoint.
    """
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    diff = p_i - p_j
    n = np.linalg.norm(diff)
    if n < DEGENERATE_TOL:
        raise DegenerateGeometryError(f"coincident positions {p_i} and {p_j}")
    a = diff / n
    return a, float(a @ (p_i + p_j) / 2 + r_ext / 2)


def bvc_halfplane(p_i, p_j, r_min: float) -> tuple[np.ndarray, float]:
    """Buffered Voronoi cell face from current positions, buffer r_min/2."""
    return halfplane(p_i, p_j, r_min)


@dataclass(frozen=True)
class HalfPlane:
    normal: np.ndarray
    offset: float
    k: int  # 1-based horizon index
    neighbor: object
    is_terminal: bool


@dataclass(frozen=True)
class ConstraintSet:
    """All inter-robot half-planes of one robot's program plus its cone bounds.

    ``normals`` is (n_neighbors, K, d) and ``offsets`` (n_neighbors, K); row
    order follows ``neighbors``. With ``warning_band`` set, the horizon-K
    face of each neighbor carries that neighbor's slack w.
    """

    neighbors: tuple
    normals: np.ndarray
    offsets: np.ndarray
    eps: float
    v_max: float
    a_max: float
    theta_v: tuple[float, ...]
    theta_a: tuple[float, ...]
    warning_band: bool = True
    terminal_velocity_zero: bool = True
    k_start: int = 1  # first constrained horizon

    @property
    def K(self) -> int:
        return self.normals.shape[1]

    @property
    def n_neighbors(self) -> int:
        return len(self.neighbors)

    def halfplanes(self) -> list[HalfPlane]:
        out = []
        K = self.K
        for row, j in enumerate(self.neighbors):
            for k in range(self.k_start, K + 1):
                out.append(HalfPlane(self.normals[row, k - 1], float(self.offsets[row, k - 1]),
                                     k, j, self.warning_band and k == K))
        return out

    def counts(self) -> tuple[int, int]:
        """(non-terminal, terminal) half-plane counts."""
        n = self.n_neighbors
        rows = self.K - self.k_start + 1
        if self.warning_band:
            return (rows - 1) * n, n
        return rows * n, 0


def _empty(params: ModelParams, warning_band: bool) -> ConstraintSet:
    return ConstraintSet((), np.zeros((0, params.K, params.d)), np.zeros((0, params.K)),
                         params.eps, params.v_max, params.a_max, params.theta_v,
                         params.theta_a, warning_band)


def build_constraints(
    own: PredeterminedTrajectory,
    neighbors: Mapping[object, PredeterminedTrajectory],
    params: ModelParams,
) -> ConstraintSet:
    """MBVC-WB faces for every (neighbor, horizon) pair, in neighbor-key order."""
    if own.K != params.K:
        raise ValueError(f"own trajectory has {own.K} entries, expected K={params.K}")
    if not neighbors:
        return _empty(params, True)
    ids = tuple(neighbors)
    nb = np.stack([neighbors[j].positions for j in ids])
    if nb.shape[1] != params.K:
        raise ValueError("neighbor trajectories must have K entries")
    P = own.positions[None]
    diff = P - nb
    dist = np.linalg.norm(diff, axis=2)
    bad = np.argwhere(dist < DEGENERATE_TOL)
    if bad.size:
        row, k = bad[0]
        raise DegenerateGeometryError(
            f"predetermined positions coincide with neighbor {ids[row]} at k={k + 1}",
            ids[row], int(k) + 1)
    a = diff / dist[..., None]
    b = np.einsum("nkd,nkd->nk", a, (P + nb) / 2) + params.r_min_ext / 2
    return ConstraintSet(ids, a, b, params.eps, params.v_max, params.a_max,
                         params.theta_v, params.theta_a, True)


def build_bvc_constraints(
    own_position,
    neighbor_positions: Mapping[object, np.ndarray],
    params: ModelParams,
    k_start: int = 2,
) -> ConstraintSet:
    """BVC faces from current positions, applied to horizons ``k_start..K``.

    The first planned position is fixed by the current state and equals the
    second position of the previous plan, which already lay in the previous
    cell; constraining it again only adds infeasibility, so ``k_start`` is 2
    by default.
    """
    if not neighbor_positions:
        return _empty(params, False)
    ids = tuple(neighbor_positions)
    rows = []
    for j in ids:
        try:
            rows.append(bvc_halfplane(own_position, neighbor_positions[j], params.r_min))
        except DegenerateGeometryError as exc:
            raise DegenerateGeometryError(str(exc), j, None) from None
    a = np.stack([r[0] for r in rows])
    b = np.array([r[1] for r in rows])
    K = params.K
    return ConstraintSet(ids, np.repeat(a[:, None, :], K, axis=1),
                         np.repeat(b[:, None], K, axis=1), params.eps, params.v_max,
                         params.a_max, params.theta_v, params.theta_a, False, k_start=k_start)
