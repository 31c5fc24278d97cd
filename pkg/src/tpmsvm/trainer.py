"""Training of twin parametric-margin classifiers.

One model per class: the hyperplane ``w_c' x + theta_c = 0`` (or its
kernel-space analogue) is fit so that same-class points lie on its
nonnegative side while the projections of all other points are pushed down.
Deterministic training solves the box-and-simplex dual with
:func:`tpmsvm.qp.solve_box_simplex_qp` and recovers ``(w_c, theta_c)`` from
the multipliers; robust training solves a second-order cone reformulation
that charges each sample the worst perturbation within an lp ball (or a
feature-space ball of mapped radius, for kernels) and reads the parameters
directly from the conic solution.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import conic, qp, socp
from .errors import (
    ConicSolveError,
    DegenerateClassifier,
    IndefiniteKernel,
    InvalidHyperparams,
    InvalidInput,
    NumericsWarning,
    TrainingWarning,
    TpmsvmError,
)
from .kernels import KernelSpec, feature_radius, gram

ARGMIN = "argmin"
ARGMAX = "argmax"

_DEGENERATE_NORM = 1e-12


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Dataset:
    """Labeled samples: ``features`` is (m, n), ``labels`` holds ids 1..C."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if X.ndim != 2:
            raise InvalidInput(f"features must be 2-d, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidInput("labels must align with feature rows")
        if not np.all(np.isfinite(X)):
            raise InvalidInput("features must be finite")
        if y.size == 0:
            raise InvalidInput("dataset is empty")
        C = int(y.max())
        present = np.unique(y)
        if y.min() < 1 or present.size != C:
            raise InvalidInput("labels must cover every id in 1..C at least once")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max())

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes + 1)[1:]


@dataclass(frozen=True)
class ClassView:
    """Index split of a dataset into class ``c`` and the rest."""

    c: int
    idx_in: np.ndarray
    idx_out: np.ndarray


def class_view(data: Dataset, c: int) -> ClassView:
    if not 1 <= c <= data.num_classes:
        raise InvalidInput(f"class id {c} outside 1..{data.num_classes}")
    mask = data.labels == c
    return ClassView(c, np.flatnonzero(mask), np.flatnonzero(~mask))


@dataclass(frozen=True)
class Hyperparams:
    """Margin-error weights; ``nu/alpha`` controls the error fraction."""

    nu: float
    alpha: float

    def __post_init__(self):
        if not (self.nu > 0 and self.alpha > 0):
            raise InvalidHyperparams(f"nu and alpha must be positive, got {self.nu}, {self.alpha}")
        if self.nu > self.alpha:
            raise InvalidHyperparams(f"nu={self.nu} cannot exceed alpha={self.alpha}")


@dataclass(frozen=True)
class UncertaintySpec:
    """Perturbation budget: lp balls of radius ``eps`` around each sample.

    ``eps`` may be a scalar (uniform) or a length-m vector.  ``eps_feature``
    optionally overrides the feature-space radii used by kernel trainers;
    when absent they are derived with :func:`tpmsvm.kernels.feature_radius`.
    """

    p: float
    eps: float | np.ndarray
    eps_feature: float | np.ndarray | None = None

    def __post_init__(self):
        if self.p not in (1, 2) and not math.isinf(self.p):
            raise InvalidInput(f"norm order p must be 1, 2 or inf, got {self.p}")
        eps = np.asarray(self.eps, dtype=float)
        if np.any(eps < 0) or not np.all(np.isfinite(eps)):
            raise InvalidInput("eps radii must be finite and >= 0")
        if self.eps_feature is not None:
            ef = np.asarray(self.eps_feature, dtype=float)
            if np.any(ef < 0) or not np.all(np.isfinite(ef)):
                raise InvalidInput("feature-space radii must be finite and >= 0")
            shape = np.broadcast_shapes(eps.shape, ef.shape)
            e_in = np.broadcast_to(eps, shape)
            e_feat = np.broadcast_to(ef, shape)
            if np.any((e_in == 0) & (e_feat != 0)):
                raise InvalidInput("eps_i = 0 forces the feature-space radius to 0")

    def eps_vector(self, m: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.eps, dtype=float), (m,)).copy()

    def feature_vector(self, spec: KernelSpec, n: int, m: int) -> np.ndarray:
        """Per-sample feature-space radii, mapped from ``eps`` if not given."""
        if self.eps_feature is not None:
            return np.broadcast_to(np.asarray(self.eps_feature, dtype=float), (m,)).copy()
        eps = self.eps_vector(m)
        out = np.zeros(m)
        cache: dict[float, float] = {}
        for i, e in enumerate(eps):
            if e not in cache:
                cache[float(e)] = feature_radius(spec, self.p, float(e), n)
            out[i] = cache[float(e)]
        return out


@dataclass(frozen=True)
class LinearClassModel:
    """Hyperplane ``w' x + theta = 0`` with cached Euclidean norm."""

    w: np.ndarray
    theta: float
    notes: tuple[str, ...] = ()
    norm_w: float = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        norm = float(np.linalg.norm(w))
        if not np.all(np.isfinite(w)) or not np.isfinite(self.theta):
            raise InvalidInput("model parameters must be finite")
        if norm <= _DEGENERATE_NORM:
            raise DegenerateClassifier("normal vector is (numerically) zero")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "norm_w", norm)


@dataclass(frozen=True)
class KernelClassModel:
    """Kernel expansion ``sum_i beta_i k(x^i, .) + theta`` over the training set."""

    beta: np.ndarray
    theta: float
    spec: KernelSpec
    train_features: np.ndarray
    norm_h: float
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        X = np.asarray(self.train_features, dtype=float)
        if beta.shape != (X.shape[0],):
            raise InvalidInput("beta must align with training rows")
        if self.norm_h <= _DEGENERATE_NORM:
            raise DegenerateClassifier("kernel-space norm is (numerically) zero")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "train_features", X)


@dataclass(frozen=True)
class MulticlassModel:
    """One class model per id, plus the decision rule used to combine them."""

    models: tuple
    rule: str
    provenance: str = "deterministic"

    def __post_init__(self):
        if self.rule not in (ARGMIN, ARGMAX):
            raise InvalidInput(f"rule must be {ARGMIN!r} or {ARGMAX!r}")
        kinds = {type(mdl) for mdl in self.models}
        if len(self.models) == 0 or len(kinds) != 1:
            raise InvalidInput("need at least one class model, all of the same kind")
        object.__setattr__(self, "models", tuple(self.models))

    @property
    def num_classes(self) -> int:
        return len(self.models)

    @property
    def kind(self) -> str:
        return "kernel" if isinstance(self.models[0], KernelClassModel) else "linear"


@dataclass(frozen=True)
class BinaryModelPair:
    """Positive/negative models in the two-hyperplane sign convention."""

    positive: LinearClassModel | KernelClassModel
    negative: LinearClassModel | KernelClassModel


# ---------------------------------------------------------------------------
# deterministic training


def _dual_problem_linear(data: Dataset, view: ClassView, h: Hyperparams) -> qp.QpProblem:
    Xc = data.features[view.idx_in]
    rest_sum = data.features[view.idx_out].sum(axis=0)
    mr = view.idx_out.size
    Q = gram(KernelSpec("linear"), Xc)
    qvec = (h.nu / mr) * (Xc @ rest_sum)
    return qp.QpProblem(Q, qvec, h.nu, h.alpha / view.idx_in.size)


def _optimal_theta_interval(values: np.ndarray, h: Hyperparams) -> tuple[float, float]:
    """Minimizers of ``nu*theta + (alpha/m_c) sum_i max(0, -(values_i + theta))``.

    The objective is piecewise linear in ``theta`` with breakpoints at
    ``-values_i``; its slope crosses zero where the active-slack count passes
    ``k = nu * m_c / alpha``.  Integer ``k`` gives a flat interval between
    consecutive breakpoints, otherwise a single breakpoint.
    """
    v = np.sort(-values)[::-1]  # descending breakpoints
    mc = v.size
    k = h.nu * mc / h.alpha
    k_int = round(k)
    if abs(k - k_int) <= 1e-9 * mc and 1 <= k_int <= mc:
        hi = float(v[k_int - 1])
        lo = float(v[k_int]) if k_int < mc else -math.inf
        return lo, hi
    j = math.ceil(k)  # in 1..mc since 0 < k <= mc
    theta = float(v[j - 1])
    return theta, theta


def _recover_theta(values: np.ndarray, sol: qp.QpSolution, ub: float,
                   h: Hyperparams) -> tuple[float, list[str]]:
    """Intercept from the interior multiplier set, with a primal fallback.

    ``values[i]`` is the projection of in-class sample ``i`` on the trained
    normal; the interior-set average is minus their mean.  If no multiplier
    is strictly interior that formula is undefined, and the intercept is
    instead chosen to minimize the primal objective in ``theta`` (midpoint of
    the optimal interval), which keeps strong duality exact.
    """
    tol = qp.default_margin_tol(ub)
    interior = qp.interior_index_set(sol, ub, tol)
    if interior.size:
        return float(-np.mean(values[interior])), []
    lo, hi = _optimal_theta_interval(values, h)
    if math.isinf(lo) and math.isinf(hi):
        theta = 0.0
    elif math.isinf(lo):
        theta = hi
    elif math.isinf(hi):
        theta = lo
    else:
        theta = 0.5 * (lo + hi)
    note = "empty interior multiplier set; intercept set to the primal-optimal midpoint"
    warnings.warn(note, TrainingWarning, stacklevel=3)
    return float(theta), [note]


def train_linear_class(data: Dataset, c: int, h: Hyperparams, *,
                       tol: float = 1e-8,
                       max_iter: int | None = None) -> tuple[LinearClassModel, qp.QpSolution]:
    """Fit the hyperplane of class ``c`` against all remaining samples.

    Solves the dual

        max  -1/2 lam' (X_c X_c') lam + (nu/m_rest) e' X_rest X_c' lam
        s.t. e' lam = nu,  0 <= lam <= alpha/m_c

    and recovers ``w = X_c' lam - (nu/m_rest) X_rest' e`` and the intercept as
    minus the mean projection over the interior multiplier set.
    """
    view = class_view(data, c)
    problem = _dual_problem_linear(data, view, h)
    sol = qp.solve_box_simplex_qp(problem, tol=tol, max_iter=max_iter)
    if sol.status == qp.INFEASIBLE:
        raise InvalidHyperparams(f"dual infeasible for class {c}: {sol.notes}")
    Xc = data.features[view.idx_in]
    rest_sum = data.features[view.idx_out].sum(axis=0)
    w = Xc.T @ sol.lam - (h.nu / view.idx_out.size) * rest_sum
    theta, notes = _recover_theta(Xc @ w, sol, problem.ub, h)
    return LinearClassModel(w, theta, notes=tuple(notes)), sol


def train_kernel_class(data: Dataset, c: int, h: Hyperparams, spec: KernelSpec, *,
                       tol: float = 1e-8,
                       max_iter: int | None = None) -> tuple[KernelClassModel, qp.QpSolution]:
    """Kernel analogue of :func:`train_linear_class`.

    The dual uses the in-class Gram block and cross sums; the returned model
    stores the expansion coefficients over all training samples, with the
    out-of-class entries pinned to ``-nu/m_rest``.
    """
    view = class_view(data, c)
    Xc = data.features[view.idx_in]
    Xr = data.features[view.idx_out]
    mr = view.idx_out.size
    Kcc = gram(spec, Xc)
    Krc = gram(spec, Xr, Xc)
    qvec = (h.nu / mr) * Krc.sum(axis=0)
    problem = qp.QpProblem(Kcc, qvec, h.nu, h.alpha / view.idx_in.size)
    sol = qp.solve_box_simplex_qp(problem, tol=tol, max_iter=max_iter)
    if sol.status == qp.INFEASIBLE:
        raise InvalidHyperparams(f"dual infeasible for class {c}: {sol.notes}")

    beta = np.empty(data.m)
    beta[view.idx_in] = sol.lam
    beta[view.idx_out] = -h.nu / mr
    # projections of in-class samples: K(x^i, X_c) lam - (nu/mr) K(x^i, X_r) e
    proj = Kcc @ sol.lam - (h.nu / mr) * Krc.sum(axis=0)
    theta, notes = _recover_theta(proj, sol, problem.ub, h)

    Krr = gram(spec, Xr)
    norm_sq = kernel_norm_sq_expansion(sol.lam, Kcc, Krc, Krr, h.nu / mr)
    if norm_sq < -1e-10:
        raise IndefiniteKernel(f"squared kernel norm came out negative ({norm_sq:.3e})")
    model = KernelClassModel(beta, theta, spec, data.features,
                             math.sqrt(max(norm_sq, 0.0)), notes=tuple(notes))
    return model, sol


def kernel_norm_sq_expansion(lam: np.ndarray, Kcc: np.ndarray, Krc: np.ndarray,
                             Krr: np.ndarray, nu_over_mr: float) -> float:
    """Four-term expansion of the squared kernel-space norm of the normal."""
    t1 = float(lam @ Kcc @ lam)
    cross = float(Krc.sum(axis=0) @ lam)
    t4 = float(Krr.sum()) * nu_over_mr**2
    return t1 - 2.0 * nu_over_mr * cross + t4


def train_binary(data: Dataset, h_pos: Hyperparams, h_neg: Hyperparams,
                 spec: KernelSpec | None = None, *,
                 tol: float = 1e-8) -> BinaryModelPair:
    """Train the two-hyperplane binary classifier.

    Class 1 is the positive class, class 2 the negative one.  The negative
    subproblem keeps the sign convention in which its hyperplane faces the
    positive samples, so the trained pair satisfies ``w_neg = -w_2`` relative
    to the one-versus-all form of class 2.
    """
    if data.num_classes != 2:
        raise InvalidInput(f"binary training needs exactly 2 classes, got {data.num_classes}")
    if spec is None:
        pos, _ = train_linear_class(data, 1, h_pos, tol=tol)
        neg_ova, _ = train_linear_class(data, 2, h_neg, tol=tol)
        neg = LinearClassModel(-neg_ova.w, -neg_ova.theta, notes=neg_ova.notes)
    else:
        pos, _ = train_kernel_class(data, 1, h_pos, spec, tol=tol)
        neg_ova, _ = train_kernel_class(data, 2, h_neg, spec, tol=tol)
        neg = KernelClassModel(-neg_ova.beta, -neg_ova.theta, spec,
                               neg_ova.train_features, neg_ova.norm_h,
                               notes=neg_ova.notes)
    return BinaryModelPair(pos, neg)


# ---------------------------------------------------------------------------
# robust training


def _square_objective_blocks(builder: conic.ProgramBuilder, t_idx: int) -> None:
    u_idx, v_idx = conic.encode_square_gadget(builder, t_idx)
    builder.add_objective(u_idx, 0.5)
    builder.add_objective(v_idx, -0.5)


def train_robust_linear_class(data: Dataset, c: int, h: Hyperparams,
                              u: UncertaintySpec, *,
                              tol: float = 1e-8,
                              max_iter: int = 200
                              ) -> tuple[LinearClassModel, socp.ConicSolution]:
    """Robust counterpart of :func:`train_linear_class` under lp balls.

    Each out-of-class projection is charged its worst-case increase
    ``eps_i |w|_p'`` (p' the Hoelder conjugate) and each in-class margin
    constraint is tightened by the same amount; the dual-norm term is encoded
    with the conic gadget matching ``u.p`` and the quadratic margin term is
    moved to the constraints, giving a second-order cone program whose
    solution carries ``(w, theta)`` directly.
    """
    view = class_view(data, c)
    Xc = data.features[view.idx_in]
    Xr = data.features[view.idx_out]
    mc, mr, n = view.idx_in.size, view.idx_out.size, data.n
    eps = u.eps_vector(data.m)

    builder = conic.ProgramBuilder()
    soc_w = builder.add_block(conic.SOC, n + 1)
    t_idx = soc_w[0]
    w_idx = list(soc_w[1:])
    _square_objective_blocks(builder, t_idx)
    theta_idx = builder.add_block(conic.FREE, 1)[0]
    xi_idx = builder.add_block(conic.NONNEG, mc)

    # dual-norm carrier: coefficients standing in for |w|_p'
    if u.p == 1:
        s_idx = builder.add_block(conic.NONNEG, 1)[0]
        for wj in w_idx:
            builder.add_ineq_ge({s_idx: 1.0, wj: -1.0}, 0.0)
            builder.add_ineq_ge({s_idx: 1.0, wj: 1.0}, 0.0)
        norm_terms = {s_idx: 1.0}
    elif u.p == 2:
        norm_terms = {t_idx: 1.0}
    else:  # p = inf, dual norm l1
        s_rng = builder.add_block(conic.NONNEG, n)
        conic.encode_abs_bounds(builder, w_idx, s_rng)
        norm_terms = {sj: 1.0 for sj in s_rng}

    rest_eps_total = float(eps[view.idx_out].sum())
    rest_sum = Xr.sum(axis=0)
    for j, wj in enumerate(w_idx):
        builder.add_objective(wj, (h.nu / mr) * rest_sum[j])
    for idx, coef in norm_terms.items():
        builder.add_objective(idx, (h.nu / mr) * rest_eps_total * coef)
    builder.add_objective(theta_idx, h.nu)
    for xi in xi_idx:
        builder.add_objective(xi, h.alpha / mc)

    for i_local, gi in enumerate(view.idx_in):
        row = {wj: float(Xc[i_local, j]) for j, wj in enumerate(w_idx)}
        row[theta_idx] = 1.0
        row[xi_idx[i_local]] = 1.0
        for idx, coef in norm_terms.items():
            row[idx] = row.get(idx, 0.0) - float(eps[gi]) * coef
        builder.add_ineq_ge(row, 0.0)

    program = builder.build()
    sol = socp.solve_socp(program, tol=tol, max_iter=max_iter)
    if sol.status != socp.OPTIMAL:
        raise ConicSolveError(f"robust linear training for class {c} ended with "
                              f"status {sol.status!r}", program=program, solution=sol)
    w = sol.x[list(soc_w[1:])]
    theta = float(sol.x[theta_idx])
    return LinearClassModel(w, theta), sol


def _jittered_cholesky(K: np.ndarray) -> np.ndarray:
    """Cholesky factor of ``K`` with an escalating diagonal jitter."""
    m = K.shape[0]
    base = float(np.trace(K)) / m
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    eta = 1e-10 * base
    while eta <= 1e-4 * base:
        if eta >= 1e-6 * base:
            warnings.warn(f"kernel matrix needs jitter {eta:.3e} to factorize",
                          NumericsWarning, stacklevel=3)
        try:
            return np.linalg.cholesky(K + eta * np.eye(m))
        except np.linalg.LinAlgError:
            eta *= 10.0
    raise IndefiniteKernel("kernel matrix is not positive semidefinite within "
                           "the jitter budget")


def train_robust_kernel_class(data: Dataset, c: int, h: Hyperparams,
                              spec: KernelSpec, u: UncertaintySpec, *,
                              tol: float = 1e-8,
                              max_iter: int = 200
                              ) -> tuple[KernelClassModel, socp.ConicSolution]:
    """Robust kernel training against feature-space balls of radius
    ``eps_feature`` (mapped from ``u.eps`` when not supplied).

    The expansion coefficients on out-of-class samples are pinned to
    ``-nu/m_rest``; the kernel-space norm enters through ``t >= |L' beta|_2``
    with ``K = L L'`` from a jittered Cholesky factorization.
    """
    view = class_view(data, c)
    mc, mr = view.idx_in.size, view.idx_out.size
    m = data.m
    eps_f = u.feature_vector(spec, data.n, m)

    K = gram(spec, data.features)
    L = _jittered_cholesky(K)

    builder = conic.ProgramBuilder()
    beta_idx = builder.add_block(conic.FREE, m)
    theta_idx = builder.add_block(conic.FREE, 1)[0]
    xi_idx = builder.add_block(conic.NONNEG, mc)
    soc_k = builder.add_block(conic.SOC, m + 1)
    t_idx = soc_k[0]
    _square_objective_blocks(builder, t_idx)

    # tie the cone tail to L' beta
    for k in range(m):
        row = {soc_k[1 + k]: 1.0}
        for j in range(m):
            if L[j, k] != 0.0:
                row[beta_idx[j]] = row.get(beta_idx[j], 0.0) - float(L[j, k])
        builder.add_eq(row, 0.0)

    for gi in view.idx_out:
        builder.add_eq({beta_idx[gi]: 1.0}, -h.nu / mr)

    rest_eps_total = float(eps_f[view.idx_out].sum())
    builder.add_objective(t_idx, (h.nu / mr) * rest_eps_total)
    col_sums = K[view.idx_out].sum(axis=0)
    for j in range(m):
        if col_sums[j] != 0.0:
            builder.add_objective(beta_idx[j], (h.nu / mr) * float(col_sums[j]))
    builder.add_objective(theta_idx, h.nu)
    for xi in xi_idx:
        builder.add_objective(xi, h.alpha / mc)

    for i_local, gi in enumerate(view.idx_in):
        row = {theta_idx: 1.0, xi_idx[i_local]: 1.0, t_idx: -float(eps_f[gi])}
        for j in range(m):
            if K[gi, j] != 0.0:
                row[beta_idx[j]] = row.get(beta_idx[j], 0.0) + float(K[gi, j])
        builder.add_ineq_ge(row, 0.0)

    program = builder.build()
    sol = socp.solve_socp(program, tol=tol, max_iter=max_iter)
    if sol.status != socp.OPTIMAL:
        raise ConicSolveError(f"robust kernel training for class {c} ended with "
                              f"status {sol.status!r}", program=program, solution=sol)
    beta = sol.x[list(beta_idx)]
    theta = float(sol.x[theta_idx])
    norm_sq = float(beta @ K @ beta)
    if norm_sq < -1e-10:
        raise IndefiniteKernel(f"squared kernel norm came out negative ({norm_sq:.3e})")
    model = KernelClassModel(beta, theta, spec, data.features,
                             math.sqrt(max(norm_sq, 0.0)))
    return model, sol


def train_multiclass(data: Dataset, h: Hyperparams, spec: KernelSpec | None = None,
                     uncertainty: UncertaintySpec | None = None,
                     rule: str = ARGMIN, *, tol: float = 1e-8) -> MulticlassModel:
    """Train one model per class (one-versus-all) and attach the decision rule."""
    models = []
    for c in range(1, data.num_classes + 1):
        try:
            if uncertainty is None and spec is None:
                mdl, _ = train_linear_class(data, c, h, tol=tol)
            elif uncertainty is None:
                mdl, _ = train_kernel_class(data, c, h, spec, tol=tol)
            elif spec is None:
                mdl, _ = train_robust_linear_class(data, c, h, uncertainty, tol=tol)
            else:
                mdl, _ = train_robust_kernel_class(data, c, h, spec, uncertainty, tol=tol)
        except TpmsvmError as exc:
            raise type(exc)(f"class {c}: {exc}") from exc
        models.append(mdl)
    if uncertainty is None:
        provenance = "deterministic"
    else:
        eps = np.asarray(uncertainty.eps, dtype=float)
        eps_repr = repr(float(eps)) if eps.ndim == 0 else "per-sample"
        provenance = f"robust(p={uncertainty.p}, eps={eps_repr})"
    return MulticlassModel(tuple(models), rule, provenance)


# ---------------------------------------------------------------------------
# primal objective values (used by strong-duality checks)


def linear_dual_shift(data: Dataset, c: int, h: Hyperparams) -> float:
    """Constant dropped from the class-``c`` dual objective.

    The solved dual maximizes ``-1/2 lam' Q lam + q' lam``; the true
    Lagrangian dual value (equal to the primal optimum) is that quantity
    minus ``1/2 (nu/m_rest)^2 |X_rest' e|^2``.
    """
    view = class_view(data, c)
    rest_sum = data.features[view.idx_out].sum(axis=0)
    return 0.5 * (h.nu / view.idx_out.size) ** 2 * float(rest_sum @ rest_sum)


def kernel_dual_shift(data: Dataset, c: int, h: Hyperparams, spec: KernelSpec,
                      Krr: np.ndarray | None = None) -> float:
    """Kernel analogue of :func:`linear_dual_shift` (uses ``e' K_rr e``)."""
    view = class_view(data, c)
    if Krr is None:
        Krr = gram(spec, data.features[view.idx_out])
    return 0.5 * (h.nu / view.idx_out.size) ** 2 * float(Krr.sum())


def linear_primal_value(data: Dataset, c: int, h: Hyperparams,
                        w: np.ndarray, theta: float) -> float:
    """Objective of the class-``c`` primal at ``(w, theta)`` with slack
    reconstructed pointwise as ``max(0, -(X_c w + theta))``."""
    view = class_view(data, c)
    Xc = data.features[view.idx_in]
    Xr = data.features[view.idx_out]
    xi = np.maximum(0.0, -(Xc @ w + theta))
    margin = float((Xr @ w + theta).sum())
    return float(0.5 * w @ w + (h.nu / view.idx_out.size) * margin
                 + (h.alpha / view.idx_in.size) * xi.sum())


def kernel_primal_value(data: Dataset, c: int, h: Hyperparams, spec: KernelSpec,
                        beta: np.ndarray, theta: float,
                        K: np.ndarray | None = None) -> float:
    """Kernel-space primal objective at ``(beta, theta)``."""
    view = class_view(data, c)
    if K is None:
        K = gram(spec, data.features)
    proj = K @ beta
    xi = np.maximum(0.0, -(proj[view.idx_in] + theta))
    margin = float(proj[view.idx_out].sum()) + view.idx_out.size * theta
    return float(0.5 * beta @ proj + (h.nu / view.idx_out.size) * margin
                 + (h.alpha / view.idx_in.size) * xi.sum())


def binary_negative_primal_value(data: Dataset, h: Hyperparams,
                                 w: np.ndarray, theta: float) -> float:
    """Objective of the negative-class binary primal (class 2 faces class 1)."""
    view = class_view(data, 2)
    Xneg = data.features[view.idx_in]
    Xpos = data.features[view.idx_out]
    xi = np.maximum(0.0, Xneg @ w + theta)
    margin = float((Xpos @ w + theta).sum())
    return float(0.5 * w @ w - (h.nu / view.idx_out.size) * margin
                 + (h.alpha / view.idx_in.size) * xi.sum())


# ---------------------------------------------------------------------------
# model serialization


def _digest(X: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(X.shape).encode())
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    return h.hexdigest()


def save_model(model: MulticlassModel, path, scaling=None) -> None:
    """Write a multiclass model to a versioned JSON document.

    Real fields are serialized as shortest round-trip decimals (at most 17
    significant digits), so loading restores them bit-exactly.  Kernel models
    store a digest of the training samples rather than the samples
    themselves; supply the same samples to :func:`load_model`.  ``scaling``
    optionally embeds the feature scaler used before training so prediction
    inputs can be mapped identically.
    """
    doc: dict = {
        "format": "tpmsvm-model",
        "version": 1,
        "kind": model.kind,
        "rule": model.rule,
        "provenance": model.provenance,
    }
    if scaling is not None:
        doc["scaling"] = {"lo": [float(v) for v in scaling.lo],
                          "hi": [float(v) for v in scaling.hi]}
    entries = []
    for mdl in model.models:
        if isinstance(mdl, LinearClassModel):
            entries.append({"w": [float(v) for v in mdl.w], "theta": float(mdl.theta)})
        else:
            entries.append({
                "beta": [float(v) for v in mdl.beta],
                "theta": float(mdl.theta),
                "norm_h": float(mdl.norm_h),
                "kernel": mdl.spec.config_fragment(),
                "train_digest": _digest(mdl.train_features),
            })
    doc["models"] = entries
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path, train_features: np.ndarray | None = None) -> MulticlassModel:
    """Load a model written by :func:`save_model`.

    Kernel models need the original training features; their digest is
    verified against the stored one.
    """
    model, _ = load_model_with_scaling(path, train_features)
    return model


def load_model_with_scaling(path, train_features: np.ndarray | None = None):
    """Like :func:`load_model` but also returns the embedded scaler (or None)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "tpmsvm-model" or doc.get("version") != 1:
        raise InvalidInput(f"{path}: not a recognized model file")
    models = []
    for entry in doc["models"]:
        if doc["kind"] == "linear":
            models.append(LinearClassModel(np.array(entry["w"]), float(entry["theta"])))
        else:
            if train_features is None:
                raise InvalidInput("kernel models need the training features to load")
            X = np.asarray(train_features, dtype=float)
            if _digest(X) != entry["train_digest"]:
                raise InvalidInput("training features do not match the stored digest")
            models.append(KernelClassModel(
                np.array(entry["beta"]), float(entry["theta"]),
                KernelSpec.from_config_fragment(entry["kernel"]), X,
                float(entry["norm_h"])))
    scaling = None
    if "scaling" in doc:
        from .data import ScalingParams

        scaling = ScalingParams(np.array(doc["scaling"]["lo"]),
                                np.array(doc["scaling"]["hi"]))
    return MulticlassModel(tuple(models), doc["rule"], doc["provenance"]), scaling
