"""Terminal-overlap detection, adaptive right-hand repulsion and the force-balance residual."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

OVERLAP_TOL = 1e-3
ARRIVAL_TOL = 0.05


class DeadlockDomainError(ValueError):
    pass


def detect_terminal_overlap(p_K_now, p_K_prev, p_Km1, p_Km2, target,
                            tol: float = OVERLAP_TOL, arrival_tol: float = ARRIVAL_TOL) -> bool:
    """Terminal plan point frozen in time and collapsed over the last horizons, away from target.

    Pass ``p_K_prev=None`` while the history is too short; the result is then False.
    """
    if p_K_prev is None:
        return False
    p_K_now = np.asarray(p_K_now, dtype=float)
    if np.linalg.norm(p_K_now - np.asarray(target, dtype=float)) <= arrival_tol:
        return False
    return bool(
        np.linalg.norm(p_K_now - np.asarray(p_K_prev, dtype=float)) <= tol
        and np.linalg.norm(p_K_now - np.asarray(p_Km1, dtype=float)) <= tol
        and np.linalg.norm(np.asarray(p_Km1, dtype=float) - np.asarray(p_Km2, dtype=float)) <= tol
    )


def signed_angle(p_i, target, p_j, degenerate_tol: float = 1e-9) -> float:
    """xy-plane angle from the ray (p_i -> target) to (p_i -> p_j), positive to the left."""
    p_i = np.asarray(p_i, dtype=float)[:2]
    r = np.asarray(target, dtype=float)[:2] - p_i
    s = np.asarray(p_j, dtype=float)[:2] - p_i
    if np.linalg.norm(r) < degenerate_tol or np.linalg.norm(s) < degenerate_tol:
        return 0.0
    theta = math.atan2(r[0] * s[1] - r[1] * s[0], r @ s)
    return math.pi if theta == -math.pi else theta


def repulsion_coeff(rho0: float, eta: float, theta: float) -> float:
    if not rho0 > 0:
        raise DeadlockDomainError("rho0 must be positive")
    return float(rho0 * math.exp(eta * math.sin(theta)))


@dataclass
class DeadlockState:
    """Per-robot resolution state: eta, last overlap flag and terminal-plan history."""

    eta: float = 0.0
    b_to: bool = False
    history: list = field(default_factory=list)  # most recent terminal positions, newest last
    last_w: dict = field(default_factory=dict)
    depth: int = 2

    def push_terminal(self, p_K) -> None:
        self.history.append(np.asarray(p_K, dtype=float).copy())
        del self.history[:-self.depth]

    def previous_terminal(self):
        return self.history[-1] if self.history else None


def all_w_at_eps(w: Iterable[float], eps: float, rel_tol: float = 1e-3) -> bool:
    """True when every warning slack sits at its upper bound (vacuous with no neighbors).

    The barrier solver stops at a relative gap of order mu, so "equal" means
    within ``rel_tol * eps``.
    """
    return all(x >= eps * (1 - rel_tol) for x in w)


def update_eta(eta: float, b_to: bool, w_at_eps: bool, delta_eta: float) -> float:
    """Increment on overlap, reset when all slacks are at eps, otherwise hold.

    The increment wins when both conditions hold.
    """
    if b_to:
        if w_at_eps:
            log.debug("overlap and all slacks at eps in the same step; incrementing")
        return eta + delta_eta
    if w_at_eps:
        return 0.0
    return eta


def equilibrium_residual(p_K, target, neighbors, q_terminal: float, eps: float) -> np.ndarray:
    """Target pull plus warning-band pushes; ``neighbors`` holds (a_K, rho, w) tuples."""
    p_K = np.asarray(p_K, dtype=float)
    res = q_terminal * (np.asarray(target, dtype=float) - p_K)
    for a, rho, w in neighbors:
        if not w > 0:
            raise DeadlockDomainError(f"warning slack must be positive, got {w}")
        delta = (eps - w) / (eps * w)
        res = res + rho * delta * np.asarray(a, dtype=float)
    return res
