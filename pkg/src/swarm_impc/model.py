"""Double-integrator robot model, parameters and trajectory bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


class ModelError(ValueError):
    """Raised for invalid parameters or non-finite model inputs."""


def _vec(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size not in (2, 3):
        raise ModelError(f"{name} must be a 2- or 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite components: {arr}")
    return arr


@dataclass(frozen=True)
class RobotState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = _vec(self.position, "position")
        v = _vec(self.velocity, "velocity")
        if p.shape != v.shape:
            raise ModelError("position and velocity dimensions differ")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)

    @classmethod
    def at_rest(cls, position) -> "RobotState":
        p = _vec(position, "position")
        return cls(p, np.zeros_like(p))


@dataclass(frozen=True)
class ModelParams:
    """Dynamics, bounds, cost weights and deadlock-resolution knobs.

    ``q_stage`` holds the velocity weights Q_1..Q_{K-1}; Q_0 is always zero
    and ``q_terminal`` is Q_K. ``theta_v``/``theta_a`` are the diagonals of
    the velocity/acceleration scaling matrices.
    """

    h: float = 0.2
    K: int = 10
    v_max: float = 1.0
    a_max: float = 1.5
    r_min: float = 0.3
    eps: float = 0.1
    q_terminal: float = 30.0
    q_stage: tuple[float, ...] | None = None
    rho0: float = 2.0
    delta_eta: float = 2.0
    d: int = 2
    theta_v: tuple[float, ...] | None = None
    theta_a: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ModelError(f"d must be 2 or 3, got {self.d}")
        if not self.h > 0:
            raise ModelError("h must be positive")
        if self.K < 3:
            raise ModelError("K must be at least 3")
        if not (self.v_max > 0 and self.a_max > 0):
            raise ModelError("v_max and a_max must be positive")
        if not self.K > self.v_max / (self.a_max * self.h):
            raise ModelError(
                f"K={self.K} cannot brake from v_max: need K > v_max/(a_max*h) = "
                f"{self.v_max / (self.a_max * self.h):.4g}"
            )
        if not self.r_min > 0:
            raise ModelError("r_min must be positive")
        if not (self.r_min / 6 < self.eps < self.r_min / 2):
            raise ModelError(
                f"eps={self.eps} outside ({self.r_min / 6:.4g}, {self.r_min / 2:.4g})"
            )
        if not (self.rho0 > 0 and self.delta_eta > 0 and self.q_terminal > 0):
            raise ModelError("rho0, delta_eta and q_terminal must be positive")
        if self.q_stage is None:
            object.__setattr__(self, "q_stage", (1.0,) * (self.K - 1))
        else:
            object.__setattr__(self, "q_stage", tuple(float(q) for q in self.q_stage))
        if len(self.q_stage) != self.K - 1 or min(self.q_stage) <= 0:
            raise ModelError("q_stage needs K-1 strictly positive weights")
        for name in ("theta_v", "theta_a"):
            val = getattr(self, name)
            val = (1.0,) * self.d if val is None else tuple(float(x) for x in val)
            if len(val) != self.d or min(val) <= 0:
                raise ModelError(f"{name} must hold d positive diagonal entries")
            object.__setattr__(self, name, val)

    @property
    def q_schedule(self) -> np.ndarray:
        """Weights Q_0..Q_K."""
        return np.array([0.0, *self.q_stage, self.q_terminal])

    @property
    def r_min_ext(self) -> float:
        return float(np.sqrt(self.r_min**2 + self.h**2 * self.v_max**2))

    def with_(self, **changes) -> "ModelParams":
        if "K" in changes and "q_stage" not in changes:
            changes["q_stage"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "h": self.h, "K": self.K, "v_max": self.v_max, "a_max": self.a_max,
            "r_min": self.r_min, "eps": self.eps, "q_terminal": self.q_terminal,
            "q_stage": list(self.q_stage), "rho0": self.rho0,
            "delta_eta": self.delta_eta, "d": self.d,
            "theta_v": list(self.theta_v), "theta_a": list(self.theta_a),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        data = dict(data)
        for key in ("q_stage", "theta_v", "theta_a"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class PlannedTrajectory:
    """States x_1..x_K and inputs u_0..u_{K-1} of one plan, each shaped (K, d)."""

    positions: np.ndarray
    velocities: np.ndarray
    inputs: np.ndarray

    @property
    def K(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class PredeterminedTrajectory:
    positions: np.ndarray  # (K, d)

    def __post_init__(self):
        arr = np.asarray(self.positions, dtype=float)
        if arr.ndim != 2 or not np.all(np.isfinite(arr)):
            raise ModelError("predetermined trajectory must be a finite (K, d) array")
        object.__setattr__(self, "positions", arr)

    @property
    def K(self) -> int:
        return self.positions.shape[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.positions[-1]


def step_dynamics(state: RobotState, u, h: float) -> RobotState:
    """One sample of x+ = A x + B u; the input only enters the velocity."""
    if not (np.isfinite(h) and h > 0):
        raise ModelError("h must be a positive finite number")
    u = _vec(u, "input")
    return RobotState(state.position + h * state.velocity, state.velocity + h * u)


@dataclass(frozen=True)
class Condensed:
    """Affine maps from stacked inputs U (K, d) to positions/velocities (K, d).

    Row k-1 of each map gives the quantity at horizon k:
        P = pos_const + Sp @ U,   V = vel_const + Sv @ U
    """

    pos_const: np.ndarray
    vel_const: np.ndarray
    Sp: np.ndarray
    Sv: np.ndarray

    def positions(self, U: np.ndarray) -> np.ndarray:
        return self.pos_const + self.Sp @ U

    def velocities(self, U: np.ndarray) -> np.ndarray:
        return self.vel_const + self.Sv @ U

    def evaluate(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.positions(U), self.velocities(U)


def condense(x0: RobotState, params: ModelParams) -> Condensed:
    K, h = params.K, params.h
    k = np.arange(1, K + 1)
    m = np.arange(K)
    lag = k[:, None] - 1 - m[None, :]
    Sp = np.where(lag >= 1, h * h * lag, 0.0)
    Sv = np.where(lag >= 0, h, 0.0)
    pos_const = x0.position[None, :] + h * k[:, None] * x0.velocity[None, :]
    vel_const = np.broadcast_to(x0.velocity, (K, x0.velocity.size)).copy()
    return Condensed(pos_const, vel_const, Sp, Sv)


def rollout(x0: RobotState, U: Sequence, h: float) -> PlannedTrajectory:
    """Iterate step_dynamics over an input sequence."""
    U = np.asarray(U, dtype=float)
    P, V = [], []
    s = x0
    for u in U:
        s = step_dynamics(s, u, h)
        P.append(s.position)
        V.append(s.velocity)
    return PlannedTrajectory(np.array(P), np.array(V), U.copy())


def shift_predetermined(prev: PlannedTrajectory | PredeterminedTrajectory) -> PredeterminedTrajectory:
    P = np.asarray(prev.positions, dtype=float)
    return PredeterminedTrajectory(np.concatenate([P[1:], P[-1:]], axis=0))


def init_predetermined(p0, K: int) -> PredeterminedTrajectory:
    p0 = _vec(p0, "p0")
    if K < 1:
        raise ModelError("K must be positive")
    return PredeterminedTrajectory(np.tile(p0, (K, 1)))
