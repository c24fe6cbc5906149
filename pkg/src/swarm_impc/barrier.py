"""Log-barrier Newton method for small convex programs.

Constraints come in two families, both written as slacks that must stay
strictly positive:

    linear:     G x + h
    quadratic:  c + l^T x - ||M x + m||^2

The objective is a convex quadratic plus optional ``lin*x_i - coef*ln(x_i)``
terms on selected coordinates; those coordinates must stay positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass
class Objective:
    H: np.ndarray
    g: np.ndarray
    c: float = 0.0
    log_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    log_coef: np.ndarray = field(default_factory=lambda: np.zeros(0))
    log_lin: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def value(self, x: np.ndarray) -> float:
        v = 0.5 * x @ self.H @ x + self.g @ x + self.c
        if self.log_idx.size:
            y = x[self.log_idx]
            v += self.log_lin @ y - self.log_coef @ np.log(y)
        return float(v)

    def grad(self, x: np.ndarray) -> np.ndarray:
        gr = self.H @ x + self.g
        if self.log_idx.size:
            y = x[self.log_idx]
            gr[self.log_idx] += self.log_lin - self.log_coef / y
        return gr

    def hess(self, x: np.ndarray) -> np.ndarray:
        H = self.H.copy()
        if self.log_idx.size:
            y = x[self.log_idx]
            H[self.log_idx, self.log_idx] += self.log_coef / (y * y)
        return H

    def in_domain(self, x: np.ndarray) -> bool:
        return not self.log_idx.size or bool(np.all(x[self.log_idx] > 0))


@dataclass
class Constraints:
    G: np.ndarray          # (nl, n)
    h: np.ndarray          # (nl,)
    M: np.ndarray          # (nq, d, n)
    m: np.ndarray          # (nq, d)
    c: np.ndarray          # (nq,)
    l: np.ndarray | None = None  # (nq, n)
    _MtM: np.ndarray | None = field(default=None, repr=False)

    @property
    def MtM(self) -> np.ndarray:
        if self._MtM is None:
            self._MtM = np.einsum("qdi,qdj->qij", self.M, self.M)
        return self._MtM

    @property
    def n_lin(self) -> int:
        return self.G.shape[0]

    @property
    def n_quad(self) -> int:
        return self.M.shape[0]

    def slacks(self, x: np.ndarray):
        s_lin = self.G @ x + self.h
        Y = self.M @ x + self.m
        s_q = self.c - np.einsum("qd,qd->q", Y, Y)
        if self.l is not None:
            s_q = s_q + self.l @ x
        return s_lin, s_q, Y

    def strictly_feasible(self, x: np.ndarray) -> bool:
        s_lin, s_q, _ = self.slacks(x)
        return bool(np.all(s_lin > 0) and np.all(s_q > 0))

    def barrier(self, x: np.ndarray) -> float:
        s_lin, s_q, _ = self.slacks(x)
        if (s_lin.size and s_lin.min() <= 0) or (s_q.size and s_q.min() <= 0):
            return np.inf
        return float(-np.log(s_lin).sum() - np.log(s_q).sum())

    def barrier_grad_hess(self, x: np.ndarray):
        s_lin, s_q, Y = self.slacks(x)
        inv_l = 1.0 / s_lin
        Gs = self.G * inv_l[:, None]
        grad = -(self.G.T @ inv_l)
        H = Gs.T @ Gs
        if self.n_quad:
            inv_q = 1.0 / s_q
            ds = -2.0 * np.einsum("qdi,qd->qi", self.M, Y)
            if self.l is not None:
                ds = ds + self.l
            grad -= ds.T @ inv_q
            Ds = ds * inv_q[:, None]
            n = x.shape[0]
            H += Ds.T @ Ds + 2.0 * (inv_q @ self.MtM.reshape(-1, n * n)).reshape(n, n)
        return grad, H, s_lin, s_q


@dataclass
class BarrierResult:
    x: np.ndarray
    mu: float
    newton_iters: int
    kkt: float
    best_x: np.ndarray
    best_value: float
    duals_lin: np.ndarray | None = None
    duals_quad: np.ndarray | None = None


def _newton_dir(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        c = cho_factor(H, check_finite=False)
    except np.linalg.LinAlgError:
        reg = 1e-12 * max(1.0, float(np.abs(np.diag(H)).max()))
        c = cho_factor(H + reg * np.eye(H.shape[0]), check_finite=False)
    return cho_solve(c, -g, check_finite=False)


def barrier_minimize(
    obj: Objective,
    cons: Constraints,
    x0: np.ndarray,
    *,
    mu0: float = 1.0,
    mu_min: float = 1e-8,
    mu_factor: float = 10.0,
    alpha: float = 0.25,
    beta: float = 0.5,
    max_newton: int = 50,
    newton_tol: float = 1e-14,
    stop=None,
    mu_refine: float | None = None,
) -> BarrierResult:
    """Path-following barrier method from a strictly feasible ``x0``.

    ``stop(x)`` may end the iteration early (used by phase I). With
    ``mu_refine < mu_min`` the path is followed further, and the refined point
    replaces the one at ``mu_min`` only if every extra centering converged and
    its KKT residual is smaller.
    """
    x = np.array(x0, dtype=float)
    if not (cons.strictly_feasible(x) and obj.in_domain(x)):
        raise ValueError("barrier start point is not strictly feasible")
    best_x, best_val = x.copy(), obj.value(x)
    mu = mu0
    total = 0
    checkpoint = None

    def merit(y):
        if not obj.in_domain(y):
            return np.inf
        b = cons.barrier(y)
        return np.inf if not np.isfinite(b) else obj.value(y) + mu * b

    def finish(x, mu, best_x, best_val):
        x, kkt, lam_l, lam_q = kkt_polish(obj, cons, x, mu)
        val = obj.value(x)
        if val < best_val:
            best_x, best_val = x.copy(), val
        return BarrierResult(x, mu, total, kkt, best_x, best_val, lam_l, lam_q)

    while True:
        centered = False
        for _ in range(max_newton):
            bg, bH, _, _ = cons.barrier_grad_hess(x)
            g = obj.grad(x) + mu * bg
            H = obj.hess(x) + mu * bH
            dx = _newton_dir(H, g)
            lam2 = float(-g @ dx)
            if not np.isfinite(lam2) or lam2 / 2 <= newton_tol:
                centered = True
                break
            f0 = merit(x)
            t = 1.0
            while t > 1e-14:
                ft = merit(x + t * dx)
                if ft <= f0 - alpha * t * lam2:
                    break
                t *= beta
            else:
                centered = True  # no descent left at working precision
                break
            x = x + t * dx
            total += 1
            if stop is not None and stop(x):
                return BarrierResult(x, mu, total, np.inf, x, obj.value(x))
        if checkpoint is not None and not centered:
            return checkpoint
        val = obj.value(x)
        if val < best_val:
            best_x, best_val = x.copy(), val
        if checkpoint is None and mu <= mu_min * (1 + 1e-12):
            checkpoint = finish(x, mu, best_x, best_val)
            if mu_refine is None or mu_refine >= mu_min:
                return checkpoint
        if checkpoint is not None and mu <= mu_refine * (1 + 1e-12):
            break
        mu /= mu_factor
    refined = finish(x, mu, best_x, best_val)
    return refined if refined.kkt < checkpoint.kkt else checkpoint


def kkt_polish(obj: Objective, cons: Constraints, x: np.ndarray, mu: float):
    """One more Newton step and the KKT residual of the resulting primal-dual pair.

    Duals come from the linearized slacks, lam = mu/s * (1 - ds.dx/s), which
    avoids the 1/s^2 amplification of rounding in lam = mu/s. The residual is
    the max of stationarity, complementarity, primal and dual infeasibility.
    """
    bg, bH, s_lin, s_q = cons.barrier_grad_hess(x)
    g = obj.grad(x) + mu * bg
    H = obj.hess(x) + mu * bH
    dx = _newton_dir(H, g)
    ds_lin = cons.G @ dx
    Y = cons.M @ x + cons.m
    dsq_dx = -2.0 * np.einsum("qdi,qd->qi", cons.M, Y)
    if cons.l is not None:
        dsq_dx = dsq_dx + cons.l
    ds_q = dsq_dx @ dx
    lam_l = mu / s_lin * (1.0 - ds_lin / s_lin)
    lam_q = mu / s_q * (1.0 - ds_q / s_q)
    xn = x + dx
    if not (cons.strictly_feasible(xn) and obj.in_domain(xn)):
        xn = x
    s_lin_n, s_q_n, Yn = cons.slacks(xn)
    grad_q = -2.0 * np.einsum("qdi,qd->qi", cons.M, Yn)
    if cons.l is not None:
        grad_q = grad_q + cons.l
    r = obj.grad(xn) - cons.G.T @ lam_l - grad_q.T @ lam_q
    parts = [np.abs(r).max(initial=0.0),
             np.abs(lam_l * s_lin_n).max(initial=0.0),
             np.abs(lam_q * s_q_n).max(initial=0.0),
             max(0.0, -s_lin_n.min(initial=0.0)), max(0.0, -s_q_n.min(initial=0.0)),
             max(0.0, -lam_l.min(initial=0.0)), max(0.0, -lam_q.min(initial=0.0))]
    return xn, float(max(parts)), lam_l, lam_q


def phase_one(cons: Constraints, x0: np.ndarray, pos_idx: np.ndarray | None = None,
              target: float = 1e-6, **kw) -> tuple[np.ndarray, float]:
    """Find a strictly feasible point by minimizing a shared constraint relaxation.

    Quadratic slacks are normalized by ``c`` so that every relaxation is
    comparable. ``pos_idx`` lists coordinates that must also be positive.
    Returns ``(x, s)``; ``s < 0`` means ``x`` is strictly feasible.
    """
    n = x0.size
    pos_idx = np.zeros(0, dtype=int) if pos_idx is None else np.asarray(pos_idx, dtype=int)
    G = cons.G
    h = cons.h
    if pos_idx.size:
        E = np.zeros((pos_idx.size, n))
        E[np.arange(pos_idx.size), pos_idx] = 1.0
        G = np.vstack([G, E])
        h = np.concatenate([h, np.zeros(pos_idx.size)])
    G1 = np.hstack([G, np.ones((G.shape[0], 1))])
    sc = np.sqrt(cons.c)
    M1 = np.concatenate([cons.M / sc[:, None, None], np.zeros((cons.n_quad, cons.M.shape[1], 1))], axis=2)
    m1 = cons.m / sc[:, None]
    l1 = np.zeros((cons.n_quad, n + 1))
    if cons.l is not None:
        l1[:, :n] = cons.l / cons.c[:, None]
    l1[:, n] = 1.0
    aug = Constraints(G1, h, M1, m1, np.ones(cons.n_quad), l1)

    s_lin = G @ x0 + h
    Y = m1 + (cons.M / sc[:, None, None]) @ x0
    s_q = 1.0 - np.einsum("qd,qd->q", Y, Y)
    if cons.l is not None:
        s_q = s_q + (cons.l / cons.c[:, None]) @ x0
    worst = -min(s_lin.min(initial=np.inf), s_q.min(initial=np.inf))
    if worst < -target:
        return x0.copy(), worst
    x = np.concatenate([x0, [max(worst, 0.0) + 1.0]])
    obj = Objective(np.zeros((n + 1, n + 1)), np.eye(n + 1)[n])
    res = barrier_minimize(obj, aug, x, stop=lambda y: y[n] < -target, **kw)
    return res.x[:n], float(res.x[n])
