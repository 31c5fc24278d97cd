"""Independent reference implementations used only by the tests.

These deliberately share no code path with the solvers they check:

* :func:`active_set_qp_oracle` enumerates every {lower, interior, upper}
  pattern of the box-and-simplex QP and keeps the best feasible candidate.
* :func:`admm_socp_reference` is a first-order projection (ADMM) method for
  standard-form conic programs.
* :func:`slsqp_robust_kernel_reference` solves the nonsmooth robust kernel
  training problem directly with scipy's SLSQP on its native variables.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

LOWER, INTERIOR, UPPER = 0, 1, 2


def qp_objective(Q, q, lam):
    return float(-0.5 * lam @ Q @ lam + q @ lam)


def active_set_qp_oracle(Q, q, nu, ub, feas_tol=1e-9):
    """Globally maximize ``-1/2 lam'Q lam + q'lam`` over the box-simplex set.

    Enumerates all 3^m activity patterns, solves each equality-constrained
    stationarity system, and keeps the best feasible point.  Intended for
    m <= 7.
    """
    Q = np.asarray(Q, dtype=float)
    q = np.asarray(q, dtype=float)
    m = Q.shape[0]
    best_val, best_lam = -np.inf, None
    e = np.ones(m)
    for pattern in itertools.product((LOWER, INTERIOR, UPPER), repeat=m):
        pattern = np.array(pattern)
        lam = np.where(pattern == UPPER, ub, 0.0)
        interior = np.flatnonzero(pattern == INTERIOR)
        k = interior.size
        if k == 0:
            if abs(lam.sum() - nu) > feas_tol * max(1.0, nu):
                continue
        else:
            # stationarity on the face: Q_II lam_I - mu e = q_I - Q_IF lam_F,
            # e' lam_I = nu - e' lam_F
            fixed = np.flatnonzero(pattern != INTERIOR)
            rhs1 = q[interior] - Q[np.ix_(interior, fixed)] @ lam[fixed]
            sys = np.zeros((k + 1, k + 1))
            sys[:k, :k] = Q[np.ix_(interior, interior)]
            sys[:k, k] = -1.0
            sys[k, :k] = 1.0
            rhs = np.concatenate([rhs1, [nu - lam.sum()]])
            sol, *_ = np.linalg.lstsq(sys, rhs, rcond=None)
            if not np.allclose(sys @ sol, rhs, atol=1e-8 * max(1.0, np.abs(rhs).max())):
                continue  # inconsistent face; optimum lies on a subface
            lam_i = sol[:k]
            if np.any(lam_i < -feas_tol) or np.any(lam_i > ub + feas_tol):
                continue
            lam = lam.copy()
            lam[interior] = np.clip(lam_i, 0.0, ub)
            if abs(lam.sum() - nu) > 1e-7 * max(1.0, nu):
                continue
        val = qp_objective(Q, q, lam)
        if val > best_val:
            best_val, best_lam = val, lam.copy()
    return best_lam, best_val


# ---------------------------------------------------------------------------
# conic projections and the ADMM reference


def project_soc(u):
    """Euclidean projection onto the second-order cone."""
    t, z = u[0], u[1:]
    nz = np.linalg.norm(z)
    if t >= nz:
        return u.copy()
    if t <= -nz:
        return np.zeros_like(u)
    coef = (t + nz) / 2.0
    out = np.empty_like(u)
    out[0] = coef
    out[1:] = coef * z / nz
    return out


def project_cone(program, v):
    out = v.copy()
    off = 0
    for blk in program.cones:
        seg = slice(off, off + blk.dim)
        if blk.kind == "nonneg":
            out[seg] = np.maximum(v[seg], 0.0)
        elif blk.kind == "soc":
            out[seg] = project_soc(v[seg])
        off += blk.dim
    return out


def admm_socp_reference(program, tol=1e-9, max_iter=200_000, rho=1.0,
                        over_relax=1.7):
    """First-order reference for ``min c'x : Ax = b, x in K``.

    Splitting: x carries the equality constraints (projection by a cached
    KKT solve), z carries the cone; scaled dual u.  Returns ``(z, objective,
    converged)``.
    """
    c, A, b = program.c, program.A, program.b
    n = c.shape[0]
    m = A.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = rho * np.eye(n)
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    from scipy.linalg import lu_factor, lu_solve

    lu = lu_factor(kkt)
    rhs = np.zeros(n + m)
    rhs[n:] = b

    z = np.zeros(n)
    u = np.zeros(n)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    for it in range(max_iter):
        rhs[:n] = rho * (z - u) - c
        x = lu_solve(lu, rhs)[:n]
        x_r = over_relax * x + (1.0 - over_relax) * z
        z_new = project_cone(program, x_r + u)
        r_prim = float(np.abs(x - z_new).max(initial=0.0))
        r_dual = rho * float(np.abs(z_new - z).max(initial=0.0))
        z = z_new
        u = u + x_r - z
        if max(r_prim, r_dual) <= tol * scale:
            return z, float(c @ z), True
    return z, float(c @ z), False


def random_feasible_program(rng, n_free=2, n_nonneg=4, soc_dims=(3,), m_rows=4):
    """Conic program with a known strictly feasible primal-dual pair."""
    from tpmsvm.conic import ConeBlock, ConicProgram

    def soc_interior(d):
        tail = rng.normal(size=d - 1)
        return np.concatenate([[np.linalg.norm(tail) + rng.uniform(0.5, 2.0)], tail])

    cones = []
    x0_parts, s0_parts = [], []
    if n_free:
        cones.append(ConeBlock("free", n_free))
        x0_parts.append(rng.normal(size=n_free))
        s0_parts.append(np.zeros(n_free))
    if n_nonneg:
        cones.append(ConeBlock("nonneg", n_nonneg))
        x0_parts.append(rng.uniform(0.5, 1.5, n_nonneg))
        s0_parts.append(rng.uniform(0.5, 1.5, n_nonneg))
    for d in soc_dims:
        cones.append(ConeBlock("soc", d))
        x0_parts.append(soc_interior(d))
        s0_parts.append(soc_interior(d))
    x0 = np.concatenate(x0_parts)
    s0 = np.concatenate(s0_parts)
    A = rng.normal(size=(m_rows, x0.size))
    y0 = rng.normal(size=m_rows)
    return ConicProgram(A.T @ y0 + s0, A, A @ x0, tuple(cones))


# ---------------------------------------------------------------------------
# direct NLP solve of the robust kernel training problem


def slsqp_robust_kernel_reference(data, c, h, spec, eps_feature):
    """Solve the robust kernel model on its native variables with SLSQP.

    Variables are (beta on the class's own samples, theta, xi); the pinned
    coefficients are substituted.  Returns the optimal objective value.
    """
    from scipy.optimize import minimize

    from tpmsvm.kernels import gram
    from tpmsvm.trainer import class_view

    view = class_view(data, c)
    K = gram(spec, data.features)
    m = data.m
    mc, mr = view.idx_in.size, view.idx_out.size
    eps_f = np.broadcast_to(np.asarray(eps_feature, dtype=float), (m,))
    pin = -h.nu / mr

    def unpack(v):
        beta = np.empty(m)
        beta[view.idx_in] = v[:mc]
        beta[view.idx_out] = pin
        return beta, v[mc], v[mc + 1:]

    def norm_h(beta):
        return math.sqrt(max(float(beta @ K @ beta), 1e-300))

    def objective(v):
        beta, theta, xi = unpack(v)
        nh = norm_h(beta)
        proj = K @ beta
        rest = float((eps_f[view.idx_out] * nh + proj[view.idx_out]).sum())
        return (0.5 * nh**2 + (h.nu / mr) * rest + h.nu * theta
                + (h.alpha / mc) * float(xi.sum()))

    cons = []
    for i_local, gi in enumerate(view.idx_in):
        def margin(v, i_local=i_local, gi=gi):
            beta, theta, xi = unpack(v)
            return (theta - eps_f[gi] * norm_h(beta)
                    + float(K[gi] @ beta) + xi[i_local])
        cons.append({"type": "ineq", "fun": margin})

    bounds = [(None, None)] * (mc + 1) + [(0.0, None)] * mc
    v0 = np.concatenate([np.full(mc, h.nu / mc), [0.0], np.full(mc, 0.1)])
    res = minimize(objective, v0, method="SLSQP", bounds=bounds, constraints=cons,
                   options={"maxiter": 600, "ftol": 1e-12})
    return float(res.fun), res
