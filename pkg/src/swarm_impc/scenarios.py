"""Parameter presets and scenario generators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams
from .verification import COLLINEAR_TOL, collinearity_check

KINDS = ("symmetric_circle", "symmetric_square", "narrow_passage", "swap", "random_transition")
SAMPLING_BUDGET = 1_000_000


class ScenarioError(ValueError):
    pass


def _ramp(K: int) -> tuple[float, ...]:
    # Q_k = k^2: early steps are cheap, so plans front-load motion instead of
    # spreading it evenly over the horizon (see the decisions ledger)
    return tuple(float(k * k) for k in range(1, K))


PRESETS: dict[str, dict] = {
    "2d_typical": {
        "params": dict(h=0.2, K=10, v_max=1.0, a_max=1.5, r_min=0.3, eps=0.1, q_terminal=30.0,
                       rho0=2.0, delta_eta=2.0, d=2, q_stage=_ramp(10)),
        "workspace": ((-1.0, -1.0), (1.0, 1.0)),
    },
    "2d_crowded": {
        "params": dict(h=0.15, K=12, v_max=1.0, a_max=1.5, r_min=0.3, eps=0.1, q_terminal=30.0,
                       rho0=2.0, delta_eta=2.0, d=2, q_stage=_ramp(12)),
        "workspace": ((-1.0, -1.0), (1.0, 1.0)),
    },
    "3d_highspeed": {
        "params": dict(h=0.2, K=10, v_max=3.0, a_max=2.0, r_min=1.0, eps=0.2, q_terminal=30.0,
                       rho0=2.0, delta_eta=2.0, d=3, q_stage=_ramp(10)),
        "workspace": ((-5.0, -5.0, 0.0), (5.0, 5.0, 5.0)),
    },
}


def preset(name: str) -> tuple[ModelParams, tuple[np.ndarray, np.ndarray]]:
    """``(params, (ws_min, ws_max))`` for a named preset."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    lo, hi = p["workspace"]
    return ModelParams(**p["params"]), (np.array(lo, dtype=float), np.array(hi, dtype=float))


@dataclass
class Scenario:
    d: int
    ws_min: np.ndarray
    ws_max: np.ndarray
    starts: np.ndarray
    targets: np.ndarray
    params: ModelParams
    seed: int = 0
    kind: str = "random_transition"
    notes: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.starts)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "workspace": {"min": self.ws_min.tolist(), "max": self.ws_max.tolist()},
            "robots": [{"start": s.tolist(), "target": t.tolist()}
                       for s, t in zip(self.starts, self.targets)],
            "params": self.params.to_dict(),
            "seed": self.seed,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        robots = data["robots"]
        return cls(
            int(data["d"]),
            np.array(data["workspace"]["min"], dtype=float),
            np.array(data["workspace"]["max"], dtype=float),
            np.array([r["start"] for r in robots], dtype=float),
            np.array([r["target"] for r in robots], dtype=float),
            ModelParams.from_dict(data["params"]),
            int(data.get("seed", 0)),
            data.get("kind", "random_transition"),
        )


def _min_pairwise(X: np.ndarray) -> float:
    if len(X) < 2:
        return float("inf")
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    return float(D[np.triu_indices(len(X), 1)].min())


def scenario_violations(sc: Scenario) -> list[str]:
    """Invariants every generated scenario must satisfy (empty list when valid)."""
    p = sc.params
    out = []
    if _min_pairwise(sc.starts) <= p.r_min_ext:
        out.append(f"start separation {_min_pairwise(sc.starts):.4g} <= r'_min {p.r_min_ext:.4g}")
    if _min_pairwise(sc.targets) <= p.r_min_ext + 2 * p.eps:
        out.append(f"target separation {_min_pairwise(sc.targets):.4g} <= r'_min + 2 eps")
    if any(f[0] == "targets" for f in collinearity_check(targets=sc.targets)):
        out.append("three or more targets are collinear in the xy-plane")
    for name, X in (("start", sc.starts), ("target", sc.targets)):
        if np.any(X < sc.ws_min - 1e-12) or np.any(X > sc.ws_max + 1e-12):
            out.append(f"{name} outside the workspace")
    return out


def _ring(n: int, center: np.ndarray, radius: float, d: int, phase: float = 0.0) -> np.ndarray:
    ang = phase + 2 * np.pi * np.arange(n) / n
    P = np.tile(center, (n, 1))
    P[:, 0] += radius * np.cos(ang)
    P[:, 1] += radius * np.sin(ang)
    return P


def _collinear_with(P: np.ndarray, q: np.ndarray, tol: float = COLLINEAR_TOL) -> bool:
    """Whether q forms a collinear xy triple with any two rows of P.

    Same measure as the verification check: twice the triangle area over its
    longest side, i.e. the offset of the middle point from the outer two.
    """
    ii, jj = np.triu_indices(len(P), 1)
    a, b, c = P[ii, :2], P[jj, :2], np.broadcast_to(q[:2], (len(ii), 2))
    ab, ac = b - a, c - a
    cross = np.abs(ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    longest = np.max([np.linalg.norm(ab, axis=1), np.linalg.norm(ac, axis=1),
                      np.linalg.norm(c - b, axis=1)], axis=0)
    return bool(np.any(cross < tol * longest))


def _random_points(rng: np.random.Generator, n: int, lo, hi, min_sep: float,
                   budget: list[int], check_collinear: bool, what: str) -> np.ndarray:
    total = budget[0]
    """Sequential rejection sampling; the whole set restarts if a point gets stuck."""
    d = np.asarray(lo).size
    while True:
        pts = np.empty((n, d))
        k = 0
        stuck = 0
        while k < n:
            if budget[0] <= 0:
                raise ScenarioError(
                    f"could not place {n} {what}s with separation > {min_sep:.4g}"
                    f"{' and no collinear triples' if check_collinear else ''} "
                    f"with the {total} sampling attempts left")
            budget[0] -= 1
            q = rng.uniform(lo, hi)
            ok = k == 0 or np.sqrt(((pts[:k] - q) ** 2).sum(axis=1)).min() > min_sep
            if ok and check_collinear and k >= 2:
                ok = not _collinear_with(pts[:k], q)
            if ok:
                pts[k] = q
                k += 1
                stuck = 0
            else:
                stuck += 1
                if stuck > 2000:
                    break
        if k == n:
            return pts


def gen_scenario(kind: str, n: int, params: ModelParams, workspace=None, seed: int = 0,
                 budget: int = SAMPLING_BUDGET) -> Scenario:
    """Deterministic scenario of the given kind; ``workspace`` is (min, max) corners.

    ``budget`` caps the total rejection-sampling attempts of random scenarios.
    """
    if kind not in KINDS:
        raise ScenarioError(f"unknown scenario kind {kind!r}; choose from {KINDS}")
    if n < 1:
        raise ScenarioError("need at least one robot")
    d = params.d
    if workspace is None:
        ext = 1.0
        lo, hi = -np.full(d, ext), np.full(d, ext)
    else:
        lo, hi = (np.asarray(w, dtype=float) for w in workspace)
    if lo.shape != (d,) or hi.shape != (d,) or np.any(hi <= lo):
        raise ScenarioError(f"workspace must be two {d}-vectors with min < max")
    center = (lo + hi) / 2
    half = float(np.min((hi - lo)[:2]) / 2)
    rng = np.random.default_rng(seed)
    notes: list[str] = []

    if kind == "symmetric_square":
        if n != 4:
            raise ScenarioError("symmetric_square places exactly 4 robots")
        starts = _ring(4, center, half * np.sqrt(2), d, np.pi / 4)
        starts[:, :2] = center[:2] + np.clip(starts[:, :2] - center[:2], -half, half)
        targets = starts[[2, 3, 0, 1]].copy()
    elif kind == "symmetric_circle":
        starts = _ring(n, center, 0.9 * half, d)
        targets = starts[(np.arange(n) + n // 2) % n].copy() if n > 1 else starts.copy()
    elif kind == "swap":
        if n != 2:
            raise ScenarioError("swap exchanges exactly 2 robots")
        base = np.tile(center, (2, 1))
        base[0, 0] -= 0.8 * half
        base[1, 0] += 0.8 * half
        targets = base[[1, 0]].copy()
        # a seeded lateral offset on the starts only, so starts and targets are not
        # collinear and the exchange is not the exactly symmetric blocking case
        jitter = 1e-3 * (0.5 + 0.5 * rng.uniform()) * rng.choice([-1.0, 1.0])
        starts = base.copy()
        starts[:, 1] += np.array([jitter, -jitter])
    elif kind == "narrow_passage":
        if n != 3:
            raise ScenarioError("narrow_passage uses exactly 3 robots")
        lo_gap = params.r_min_ext + 2 * params.eps
        hi_gap = 2 * params.r_min
        if lo_gap >= hi_gap:
            raise ScenarioError("parameters leave no gap narrower than 2 r_min that keeps targets apart")
        gap = (lo_gap + hi_gap) / 2
        flank = np.tile(center, (2, 1))
        flank[0, 1] += gap / 2
        flank[1, 1] -= gap / 2
        mover_s = center.copy()
        mover_t = center.copy()
        mover_s[0] -= 2 * half / 3
        mover_t[0] += 2 * half / 3
        starts = np.vstack([mover_s, flank])
        targets = np.vstack([mover_t, flank])
        notes.append(f"passage gap {gap:.4f} m < 2 r_min = {hi_gap:.4f} m")
    else:
        budget = [budget]
        starts = _random_points(rng, n, lo, hi, params.r_min_ext, budget, False, "start")
        targets = _random_points(rng, n, lo, hi, params.r_min_ext + 2 * params.eps, budget,
                                 True, "target")

    sc = Scenario(d, lo, hi, starts, targets, params, seed, kind, notes)
    bad = scenario_violations(sc)
    if bad:
        raise ScenarioError(f"{kind} with N={n} violates: " + "; ".join(bad))
    return sc
