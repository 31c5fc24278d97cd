"""Solver for the box-and-simplex quadratic duals.

Every training dual in this package has the same shape:

    maximize    -1/2 lam' Q lam + q' lam
    subject to  e' lam = nu
                0 <= lam_i <= ub

with ``Q`` positive semidefinite.  The solver is a pairwise coordinate
exchange: each step picks the maximal violating pair ``(i, j)`` and moves mass
between the two coordinates, which keeps ``e' lam = nu`` invariant and has a
closed-form optimal step.  Ties in the pair selection resolve to the lowest
index so runs are deterministic.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, NumericsWarning

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpProblem:
    """Data of one box-and-simplex QP (maximization form)."""

    Q: np.ndarray
    q: np.ndarray
    nu: float
    ub: float

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InvalidInput(f"Q must be square, got shape {Q.shape}")
        if q.shape != (Q.shape[0],):
            raise InvalidInput(f"q must have shape ({Q.shape[0]},), got {q.shape}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(q))):
            raise InvalidInput("Q and q must be finite")
        if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-10 * max(1.0, float(np.abs(Q).max()))):
            raise InvalidInput("Q must be symmetric")
        if not self.nu > 0:
            raise InvalidInput(f"nu must be > 0, got {self.nu}")
        if not self.ub > 0:
            raise InvalidInput(f"ub must be > 0, got {self.ub}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        return self.Q.shape[0]


@dataclass
class QpSolution:
    lam: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str
    repair_jitter: float = 0.0
    notes: list[str] = field(default_factory=list)


def _repair_psd(Q: np.ndarray) -> tuple[np.ndarray, float]:
    """Add jitter to Q if its smallest eigenvalue is meaningfully negative."""
    m = Q.shape[0]
    eigs = np.linalg.eigvalsh(Q)
    min_eig = float(eigs[0])
    scale = float(max(abs(eigs[0]), abs(eigs[-1])))
    if min_eig >= -1e-8 * max(scale, 1e-300):
        return Q, 0.0
    eta = max(0.0, -min_eig) + 1e-10 * float(np.trace(Q)) / m
    warnings.warn(
        f"quadratic term is indefinite (min eig {min_eig:.3e}); adding jitter {eta:.3e}",
        NumericsWarning,
        stacklevel=3,
    )
    return Q + eta * np.eye(m), eta


def solve_box_simplex_qp(problem: QpProblem, tol: float = 1e-8,
                         max_iter: int | None = None) -> QpSolution:
    """Maximize ``-1/2 lam' Q lam + q' lam`` over the box-and-simplex set.

    Parameters
    ----------
    problem : QpProblem
    tol : float
        Stop when the violating-pair gradient gap is at most ``tol``; the
        reported KKT residual is then at most ``tol / 2``.
    max_iter : int, optional
        Defaults to ``100 * m**2``.

    Returns
    -------
    QpSolution
        With ``status`` one of ``"optimal"``, ``"max_iter"``, ``"infeasible"``.
    """
    m = problem.m
    nu, ub = float(problem.nu), float(problem.ub)
    if max_iter is None:
        max_iter = 100 * m * m
    if nu > m * ub * (1.0 + 1e-12):
        return QpSolution(np.zeros(m), -np.inf, np.inf, 0, INFEASIBLE,
                          notes=[f"equality rhs nu={nu} exceeds m*ub={m * ub}"])

    Q, jitter = _repair_psd(problem.Q)
    q = problem.q

    lam = np.full(m, min(nu / m, ub))
    g = q - Q @ lam  # gradient of the maximization objective
    snap = 1e-12 * max(ub, 1.0)

    iters = 0
    neg_inf = -np.inf
    pos_inf = np.inf
    while iters < max_iter:
        up = lam < ub  # mass can move in
        dn = lam > 0.0  # mass can move out
        gi_up = np.where(up, g, neg_inf)
        gj_dn = np.where(dn, g, pos_inf)
        i = int(np.argmax(gi_up))
        j = int(np.argmin(gj_dn))
        if not up[i] or not dn[j]:
            break
        gap = g[i] - g[j]
        if gap <= tol:
            break
        eta = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
        if eta > 1e-300:
            delta = gap / eta
        else:
            delta = pos_inf
        delta = min(delta, ub - lam[i], lam[j])
        lam[i] += delta
        lam[j] -= delta
        if ub - lam[i] <= snap:
            lam[i] = ub
        if lam[j] <= snap:
            lam[j] = 0.0
        g -= delta * (Q[:, i] - Q[:, j])
        iters += 1

    residual = kkt_residual(lam, g, ub)
    status = OPTIMAL if residual <= tol else MAX_ITER
    objective = float(-0.5 * lam @ (Q @ lam) + q @ lam)
    return QpSolution(lam, objective, residual, iters, status, repair_jitter=jitter)


def kkt_residual(lam: np.ndarray, g: np.ndarray, ub: float) -> float:
    """Smallest max-violation of the stationarity conditions over all choices
    of the equality multiplier.

    ``g`` is the gradient of the maximization objective.  The value equals
    ``max(0, (max_up g - min_dn g) / 2)`` where *up* are the coordinates below
    the upper bound and *dn* those above zero.
    """
    up = lam < ub
    dn = lam > 0.0
    hi = float(np.max(g[up])) if np.any(up) else -np.inf
    lo = float(np.min(g[dn])) if np.any(dn) else np.inf
    return max(0.0, 0.5 * (hi - lo))


def interior_index_set(solution: QpSolution, ub: float, margin_tol: float) -> np.ndarray:
    """Indices whose multiplier is strictly inside ``(0, ub)``.

    Returns the sorted 0-based indices ``{i : margin_tol < lam_i < ub - margin_tol}``.
    May be empty; callers decide the fallback.
    """
    lam = solution.lam
    return np.flatnonzero((lam > margin_tol) & (lam < ub - margin_tol))


def default_margin_tol(ub: float) -> float:
    return 1e-6 * ub
