"""Reference implementations written independently of the package internals."""

import cvxpy as cp
import numpy as np


def dense_reference(x0_p, x0_v, target, normals, offsets, rho, params, warning_band=True):
    """Per-robot program with explicit states, solved by a conic solver.

    ``normals`` (n, K, d) and ``offsets`` (n, K) are the half-planes a^T p_k >= b_k
    (the horizon-K row also carries w when ``warning_band``).
    """
    K, d, h = params.K, params.d, params.h
    q = np.array([0.0, *params.q_stage, params.q_terminal])
    p = cp.Variable((K + 1, d))
    v = cp.Variable((K + 1, d))
    u = cp.Variable((K, d))
    n = len(offsets)
    cons = [p[0] == x0_p, v[0] == x0_v, v[K] == 0]
    for k in range(K):
        cons += [p[k + 1] == p[k] + h * v[k], v[k + 1] == v[k] + h * u[k]]
        cons += [cp.norm(cp.multiply(np.array(params.theta_a), u[k])) <= params.a_max]
    for k in range(1, K):
        cons += [cp.norm(cp.multiply(np.array(params.theta_v), v[k])) <= params.v_max]
    obj = 0.5 * q[K] * cp.sum_squares(p[K] - target)
    for k in range(1, K):
        obj += 0.5 * q[k] * cp.sum_squares(p[k + 1] - p[k])
    w = None
    if n and warning_band:
        w = cp.Variable(n)
        cons += [w <= params.eps]
        obj += cp.sum(cp.multiply(rho, w / params.eps - cp.log(w)))
    for j in range(n):
        for k in range(1, K + 1):
            rhs = offsets[j, k - 1] + (w[j] if (warning_band and k == K) else 0)
            cons += [normals[j, k - 1] @ p[k] >= rhs]
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12,
               tol_ktratio=1e-10, max_iter=500)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"reference solver status {prob.status}")
    return u.value, (w.value if w is not None else np.zeros(0)), prob.value


def iterate_dynamics(p0, v0, U, h):
    """Plain loop over the double-integrator update."""
    P, V = [], []
    p, v = np.array(p0, dtype=float), np.array(v0, dtype=float)
    for u in U:
        p, v = p + h * v, v + h * np.asarray(u, dtype=float)
        P.append(p)
        V.append(v)
    return np.array(P), np.array(V)


def sampled_min_distance(p1, q1, p2, q2, n=100_001):
    t = np.linspace(0.0, 1.0, n)[:, None]
    a = p1 + t * (q1 - p1)
    b = p2 + t * (q2 - p2)
    return float(np.linalg.norm(a - b, axis=1).min())


def sampled_min_distance_batch(p1, q1, p2, q2, n=20_001):
    """Grid-sampled closest approach for many pairs at once; inputs are (B, d)."""
    t = np.linspace(0.0, 1.0, n)[None, :, None]
    r0 = (p2 - p1)[:, None, :]
    dr = ((q2 - p2) - (q1 - p1))[:, None, :]
    return np.linalg.norm(r0 + t * dr, axis=2).min(axis=1)
