"""Dense primal-dual interior-point solver for small conic programs.

Solves the standard form of :mod:`tpmsvm.conic`:

    minimize    c' x
    subject to  A x = b,   x in K

with ``K`` a product of free, nonnegative and second-order blocks.  The
algorithm is a Mehrotra predictor-corrector on the homogeneous self-dual
embedding, with Nesterov-Todd scaling of the cone blocks and a dense
factorization of the reduced KKT system.  Problem sizes in this package are a
few hundred variables, so everything is dense and deterministic: no
randomization, fixed elimination order, identical results on every run.

The embedding tracks ``(x, y, s, tau, kappa)`` satisfying

    A x            = b tau
    A' y + s       = c tau
    b' y - c' x    = kappa

with ``x in K``, ``s in K*`` and ``tau, kappa >= 0``.  At convergence
``tau > 0`` yields the optimal pair ``(x, y, s) / tau``; ``kappa > 0`` yields
an infeasibility or unboundedness certificate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor as scipy_lu_factor, lu_solve as scipy_lu_solve

from .conic import FREE, NONNEG, SOC, ConicProgram, presolve
from .errors import InvalidInput

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"

_STEP_BACK = 0.99  # fraction of the distance to the cone boundary


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    status: str
    iterations: int


# ---------------------------------------------------------------------------
# cone-block algebra


class _Blocks:
    """Index bookkeeping for the cone blocks of one program."""

    def __init__(self, program: ConicProgram):
        self.nonneg: list[np.ndarray] = []
        self.soc: list[np.ndarray] = []
        off = 0
        for blk in program.cones:
            idx = np.arange(off, off + blk.dim)
            if blk.kind == NONNEG:
                self.nonneg.append(idx)
            elif blk.kind == SOC:
                self.soc.append(idx)
            off += blk.dim
        self.n = off
        self.nonneg_all = (np.concatenate(self.nonneg)
                           if self.nonneg else np.array([], dtype=int))
        self.coned = np.concatenate([self.nonneg_all] + self.soc) if (
            self.nonneg or self.soc) else np.array([], dtype=int)
        self.degree = self.nonneg_all.size + len(self.soc)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[self.nonneg_all] = 1.0
        for idx in self.soc:
            e[idx[0]] = 1.0
        return e


def _jdot(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[0] - u[1:] @ v[1:])


def _soc_residual(u: np.ndarray) -> float:
    return float(u[0] - np.linalg.norm(u[1:]))


def _max_step_nonneg(u: np.ndarray, du: np.ndarray) -> float:
    neg = du < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-u[neg] / du[neg]))


def _max_step_soc(u: np.ndarray, du: np.ndarray) -> float:
    # largest alpha with u + alpha du inside the second-order cone
    a = _jdot(du, du)
    b = 2.0 * _jdot(u, du)
    c = _jdot(u, u)
    roots = []
    if abs(a) < 1e-300:
        if b < 0:
            roots.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0:
            sq = np.sqrt(disc)
            qq = -(b + np.copysign(sq, b)) / 2.0
            for r in (qq / a, c / qq if qq != 0 else np.inf):
                if r > 0:
                    roots.append(r)
    if u[0] + min(roots, default=np.inf) * du[0] < 0 and du[0] < 0:
        roots.append(-u[0] / du[0])
    return float(min(roots, default=np.inf))


class _Scaling:
    """Nesterov-Todd scaling ``W`` with ``lam = W x = W^{-1} s`` per block."""

    def __init__(self, blocks: _Blocks, x: np.ndarray, s: np.ndarray):
        self.blocks = blocks
        nn = blocks.nonneg_all
        self.w_nonneg = np.sqrt(s[nn] / x[nn])
        self.soc_eta: list[float] = []
        self.soc_v: list[np.ndarray] = []
        self.lam = np.zeros(blocks.n)
        self.lam[nn] = np.sqrt(x[nn] * s[nn])
        for idx in blocks.soc:
            xb, sb = x[idx], s[idx]
            rx = np.sqrt(_jdot(xb, xb))
            rs = np.sqrt(_jdot(sb, sb))
            xbar, sbar = xb / rx, sb / rs
            gamma = np.sqrt((1.0 + xbar @ sbar) / 2.0)
            wbar = (sbar + _jflip(xbar)) / (2.0 * gamma)
            # Jordan square root of the unit-determinant midpoint
            v = np.empty_like(wbar)
            v[0] = np.sqrt((wbar[0] + 1.0) / 2.0)
            v[1:] = wbar[1:] / (2.0 * v[0])
            eta = np.sqrt(rs / rx)
            self.soc_eta.append(float(eta))
            self.soc_v.append(v)
            self.lam[idx] = self._apply_soc(len(self.soc_eta) - 1, xb, inverse=False)

    def _apply_soc(self, k: int, u: np.ndarray, inverse: bool) -> np.ndarray:
        v, eta = self.soc_v[k], self.soc_eta[k]
        if inverse:
            vj = _jflip(v)
            return (2.0 * vj * (vj @ u) - _jflip(u)) / eta
        return eta * (2.0 * v * (v @ u) - _jflip(u))

    def apply(self, u: np.ndarray, inverse: bool = False) -> np.ndarray:
        """W u (or W^-1 u); zero on free coordinates."""
        out = np.zeros_like(u)
        nn = self.blocks.nonneg_all
        out[nn] = u[nn] / self.w_nonneg if inverse else u[nn] * self.w_nonneg
        for k, idx in enumerate(self.blocks.soc):
            out[idx] = self._apply_soc(k, u[idx], inverse)
        return out

    def w_squared_dense(self) -> np.ndarray:
        """Dense N x N scatter of W^2 over the coned coordinates."""
        n = self.blocks.n
        D = np.zeros((n, n))
        nn = self.blocks.nonneg_all
        D[nn, nn] = self.w_nonneg**2
        for k, idx in enumerate(self.blocks.soc):
            v, eta = self.soc_v[k], self.soc_eta[k]
            H = 2.0 * np.outer(v, v) - _jmat(idx.size)
            D[np.ix_(idx, idx)] = (eta * eta) * (H @ H)
        return D


def _jflip(u: np.ndarray) -> np.ndarray:
    out = -u
    out[0] = u[0]
    return out


def _jmat(d: int) -> np.ndarray:
    J = -np.eye(d)
    J[0, 0] = 1.0
    return J


def _jordan_product(blocks: _Blocks, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros(blocks.n)
    nn = blocks.nonneg_all
    out[nn] = u[nn] * v[nn]
    for idx in blocks.soc:
        ub, vb = u[idx], v[idx]
        out[idx[0]] = ub @ vb
        out[idx[1:]] = ub[0] * vb[1:] + vb[0] * ub[1:]
    return out


def _jordan_solve(blocks: _Blocks, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve ``lam o u = r`` blockwise."""
    out = np.zeros(blocks.n)
    nn = blocks.nonneg_all
    out[nn] = r[nn] / lam[nn]
    for idx in blocks.soc:
        lb, rb = lam[idx], r[idx]
        det = _jdot(lb, lb)
        u0 = (lb[0] * rb[0] - lb[1:] @ rb[1:]) / det
        out[idx[0]] = u0
        out[idx[1:]] = (rb[1:] - u0 * lb[1:]) / lb[0]
    return out


def _max_step(blocks: _Blocks, u: np.ndarray, du: np.ndarray) -> float:
    alpha = np.inf
    nn = blocks.nonneg_all
    if nn.size:
        alpha = min(alpha, _max_step_nonneg(u[nn], du[nn]))
    for idx in blocks.soc:
        alpha = min(alpha, _max_step_soc(u[idx], du[idx]))
    return alpha


# ---------------------------------------------------------------------------
# the interior-point iteration


class _Kkt:
    """Factorization wrapper for the reduced Newton system.

    Solves ``[[-D - dI, A'], [A, dI]] [dx, dy] = rhs`` with one round of
    iterative refinement against the unregularized matrix.  The matrix is
    factored once and reused for every right-hand side of the iteration.
    """

    def __init__(self, A: np.ndarray, D: np.ndarray, delta: float):
        n = D.shape[0]
        m = A.shape[0]
        M = np.zeros((n + m, n + m))
        M[:n, :n] = -D
        M[:n, n:] = A.T
        M[n:, :n] = A
        self.M0 = M
        idx = np.arange(n + m)
        self.Mreg = M.copy()
        self.Mreg[idx[:n], idx[:n]] -= delta
        self.Mreg[idx[n:], idx[n:]] += delta
        self._lu = scipy_lu_factor(self.Mreg, check_finite=False)
        self.n, self.m = n, m

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sol = scipy_lu_solve(self._lu, rhs, check_finite=False)
        resid = rhs - self.M0 @ sol
        sol += scipy_lu_solve(self._lu, resid, check_finite=False)
        return sol


def _solve_reduced(program: ConicProgram, tol: float, max_iter: int) -> ConicSolution:
    A = program.A
    m, n = A.shape
    if m:
        rank = np.linalg.matrix_rank(A)
        if rank < m:
            raise InvalidInput(
                f"equality matrix is rank deficient after presolve ({rank} < {m})")

    # normalize objective and right-hand side; solutions scale back linearly
    sig_c = max(1.0, float(np.abs(program.c).max(initial=0.0)))
    sig_b = max(1.0, float(np.abs(program.b).max(initial=0.0)))
    c = program.c / sig_c
    b = program.b / sig_b

    blocks = _Blocks(program)
    e = blocks.identity()
    deg = blocks.degree + 1

    x = e.copy()
    s = e.copy()
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0

    # residual normalizers in original units
    norm_b0 = float(np.abs(program.b).max(initial=0.0))
    norm_c0 = float(np.abs(program.c).max(initial=0.0))
    delta = 1e-10 * max(1.0, float(np.abs(A).max(initial=0.0)))

    best = None
    status = MAX_ITER
    stall = 0
    iters = 0
    for iters in range(1, max_iter + 1):
        xh = x / tau
        yh = y / tau
        sh = s / tau
        pres = sig_b * float(np.abs(A @ xh - b).max(initial=0.0)) / (1.0 + norm_b0)
        dres = sig_c * float(np.abs(A.T @ yh + sh - c).max(initial=0.0)) / (1.0 + norm_c0)
        pobj = sig_c * sig_b * float(c @ xh)
        dobj = sig_c * sig_b * float(b @ yh)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj))
        worst = max(pres, dres, relgap)
        if np.isfinite(worst) and (best is None or worst < best[0]):
            best = (worst, xh.copy(), yh.copy(), sh.copy())
            stall = 0
        else:
            stall += 1
        if worst <= tol:
            break
        if stall >= 8:
            break

        # certificate checks: the homogeneous ray has tau -> 0
        if tau <= tol * min(1.0, kappa):
            by = float(b @ y)
            cx = float(c @ x)
            if by > tol and float(np.abs(A.T @ y + s).max(initial=0.0)) <= tol * by:
                return ConicSolution(x, y, np.nan, np.inf, np.inf, np.inf,
                                     INFEASIBLE, iters)
            if cx < -tol and float(np.abs(A @ x).max(initial=0.0)) <= -tol * cx:
                return ConicSolution(x, y, -np.inf, np.inf, np.inf, np.inf,
                                     UNBOUNDED, iters)

        mu = (float(x @ s) + tau * kappa) / deg

        scaling = _Scaling(blocks, x, s)
        lam = scaling.lam
        D = scaling.w_squared_dense()
        if not np.all(np.isfinite(D)):
            break
        try:
            kkt = _Kkt(A, D, delta)
        except (np.linalg.LinAlgError, ValueError):
            break

        r_p = b * tau - A @ x
        r_d = c * tau - A.T @ y - s
        r_g = float(c @ x - b @ y + kappa)

        rhs_cb = np.concatenate([c, b])
        sol_cb = kkt.solve(rhs_cb)
        u2, v2 = sol_cb[:n], sol_cb[n:]
        denom = float(b @ v2 - c @ u2) + kappa / tau

        def newton(eta: float, rc: np.ndarray, rtk: float):
            w_lam_rc = scaling.apply(_jordan_solve(blocks, lam, rc))
            rhs = np.concatenate([eta * r_d - w_lam_rc, eta * r_p])
            sol = kkt.solve(rhs)
            u1, v1 = sol[:n], sol[n:]
            dtau = (eta * r_g + rtk / tau - float(b @ v1) + float(c @ u1)) / denom
            dx = u1 + dtau * u2
            dy = v1 + dtau * v2
            ds = w_lam_rc - D @ dx
            dkappa = (rtk - kappa * dtau) / tau
            return dx, dy, ds, dtau, dkappa

        # predictor
        rc_aff = -_jordan_product(blocks, lam, lam)
        dxa, dya, dsa, dta, dka = newton(1.0, rc_aff, -tau * kappa)
        alpha_aff = min(
            1.0,
            _max_step(blocks, x, dxa),
            _max_step(blocks, s, dsa),
            -tau / dta if dta < 0 else np.inf,
            -kappa / dka if dka < 0 else np.inf,
        )
        mu_aff = (float((x + alpha_aff * dxa) @ (s + alpha_aff * dsa))
                  + (tau + alpha_aff * dta) * (kappa + alpha_aff * dka)) / deg
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        correction = _jordan_product(blocks, scaling.apply(dxa),
                                     scaling.apply(dsa, inverse=True))
        rc = sigma * mu * e - _jordan_product(blocks, lam, lam) - correction
        rtk = sigma * mu - tau * kappa - dta * dka
        dx, dy, ds, dtau, dkappa = newton(1.0 - sigma, rc, rtk)

        alpha = _STEP_BACK * min(
            _max_step(blocks, x, dx),
            _max_step(blocks, s, ds),
            -tau / dtau if dtau < 0 else np.inf,
            -kappa / dkappa if dkappa < 0 else np.inf,
        )
        alpha = min(1.0, alpha)
        if not np.isfinite(alpha) or alpha <= 1e-13:
            break

        x = x + alpha * dx
        s = s + alpha * ds
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkappa

    if best is None:
        return ConicSolution(np.zeros(n), np.zeros(m), np.nan, np.inf, np.inf,
                             np.inf, MAX_ITER, iters)
    # unscale and judge convergence against the original data
    _, xh, yh, sh = best
    x_out = xh * sig_b
    y_out = yh * sig_c
    s_out = sh * sig_c
    c0, b0 = program.c, program.b
    pres = float(np.abs(A @ x_out - b0).max(initial=0.0)) / (
        1.0 + float(np.abs(b0).max(initial=0.0)))
    dres = float(np.abs(A.T @ y_out + s_out - c0).max(initial=0.0)) / (
        1.0 + float(np.abs(c0).max(initial=0.0)))
    pobj = float(c0 @ x_out)
    relgap = abs(pobj - float(b0 @ y_out)) / (1.0 + abs(pobj))
    status = OPTIMAL if max(pres, dres, relgap) <= tol else MAX_ITER
    return ConicSolution(x_out, y_out, pobj, pres, dres, relgap, status, iters)


def solve_socp(program: ConicProgram, tol: float = 1e-8,
               max_iter: int = 200) -> ConicSolution:
    """Solve a standard-form conic program.

    Parameters
    ----------
    program : ConicProgram
    tol : float
        Relative tolerance on primal/dual residuals and the duality gap.
    max_iter : int

    Returns
    -------
    ConicSolution
        ``status`` is ``"optimal"``, ``"infeasible"``, ``"unbounded"`` or
        ``"max_iter"``.  For optimal solutions ``x`` and ``y`` are lifted back
        to the original variable/row indexing (presolve pins restored) and
        ``objective`` is ``c' x``.

    Raises
    ------
    InvalidInput
        If the equality matrix is rank deficient after presolve.
    """
    pre = presolve(program)
    if pre.status == "infeasible":
        return ConicSolution(np.zeros(program.num_vars), np.zeros(program.num_rows),
                             np.nan, np.inf, np.inf, np.inf, INFEASIBLE, 0)
    reduced = pre.program
    if reduced.num_vars == 0:
        x = pre.lift_x(np.zeros(0))
        y = pre.lift_y(np.zeros(reduced.num_rows), program, x)
        return ConicSolution(x, y, float(program.c @ x), 0.0, 0.0, 0.0, OPTIMAL, 0)

    sol = _solve_reduced(reduced, tol, max_iter)
    if sol.status in (INFEASIBLE, UNBOUNDED):
        return ConicSolution(sol.x, sol.y, sol.objective, sol.primal_residual,
                             sol.dual_residual, sol.gap, sol.status, sol.iterations)

    x = pre.lift_x(sol.x)
    y = pre.lift_y(sol.y, program, x)
    objective = float(program.c @ x)
    pres = float(np.abs(program.A @ x - program.b).max(initial=0.0)) / (
        1.0 + float(np.abs(program.b).max(initial=0.0)))
    return ConicSolution(x, y, objective, pres, sol.dual_residual, sol.gap,
                         sol.status, sol.iterations)
