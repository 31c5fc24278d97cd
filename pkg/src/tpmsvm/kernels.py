"""Kernel evaluation, Gram-matrix assembly and feature-space radii.

Supported kernel families (``k(x, x')``):

================================  ==============================  =================
family                            formula                         parameters
================================  ==============================  =================
``linear``                        ``x . x'``                      none
``homogeneous-polynomial``        ``(x . x')^d``                  ``d >= 1``
``inhomogeneous-polynomial``      ``(gamma + x . x')^d``          ``gamma >= 0, d``
``gaussian``                      ``exp(-|x - x'|^2 / 2 sigma^2)``  ``sigma > 0``
``sigmoid``                       ``tanh(a (x . x') + b)``        ``a, b``
================================  ==============================  =================

The linear family is identical to the inhomogeneous polynomial with
``d=1, gamma=0`` and the two evaluate bit-identically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, UnsupportedRadiusMapping

FAMILIES = (
    "linear",
    "homogeneous-polynomial",
    "inhomogeneous-polynomial",
    "gaussian",
    "sigmoid",
)

#: Relative tolerance used when checking Gram matrices for positive
#: semidefiniteness (scaled by the largest eigenvalue magnitude).
TOL_PSD = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    Unused parameters are ignored (e.g. ``sigma`` for polynomial families).
    """

    family: str
    d: int = 1
    gamma: float = 0.0
    sigma: float = 1.0
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInput(f"unknown kernel family {self.family!r}")
        if self.family in ("homogeneous-polynomial", "inhomogeneous-polynomial"):
            if int(self.d) != self.d or self.d < 1:
                raise InvalidInput(f"polynomial degree must be a positive integer, got {self.d}")
        if self.family == "inhomogeneous-polynomial" and self.gamma < 0:
            raise InvalidInput(f"polynomial offset gamma must be >= 0, got {self.gamma}")
        if self.family == "gaussian" and not self.sigma > 0:
            raise InvalidInput(f"gaussian width sigma must be > 0, got {self.sigma}")

    def config_fragment(self) -> dict[str, str]:
        """Flat key-value form used inside experiment config files."""
        out = {"kernel.family": self.family}
        if self.family in ("homogeneous-polynomial", "inhomogeneous-polynomial"):
            out["kernel.d"] = str(int(self.d))
        if self.family == "inhomogeneous-polynomial":
            out["kernel.gamma"] = repr(float(self.gamma))
        if self.family == "gaussian":
            out["kernel.sigma"] = repr(float(self.sigma))
        if self.family == "sigmoid":
            out["kernel.a"] = repr(float(self.a))
            out["kernel.b"] = repr(float(self.b))
        return out

    @staticmethod
    def from_config_fragment(fragment: dict[str, str]) -> "KernelSpec":
        kwargs = {}
        if "kernel.d" in fragment:
            kwargs["d"] = int(fragment["kernel.d"])
        for key, name in (("kernel.gamma", "gamma"), ("kernel.sigma", "sigma"),
                          ("kernel.a", "a"), ("kernel.b", "b")):
            if key in fragment:
                kwargs[name] = float(fragment[key])
        return KernelSpec(fragment["kernel.family"], **kwargs)


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InvalidInput(f"expected a vector or sample matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("samples must be finite")
    return arr


def _apply_family(spec: KernelSpec, dots: np.ndarray, sq_dists: np.ndarray | None) -> np.ndarray:
    if spec.family == "linear":
        return dots
    if spec.family == "homogeneous-polynomial":
        return dots ** int(spec.d)
    if spec.family == "inhomogeneous-polynomial":
        return (spec.gamma + dots) ** int(spec.d)
    if spec.family == "gaussian":
        return np.exp(-sq_dists / (2.0 * spec.sigma**2))
    if spec.family == "sigmoid":
        return np.tanh(spec.a * dots + spec.b)
    raise InvalidInput(f"unknown kernel family {spec.family!r}")


def eval_kernel(spec: KernelSpec, x, x_other) -> float:
    """Evaluate ``k(x, x')`` for a single pair of samples.

    Parameters
    ----------
    spec : KernelSpec
    x, x_other : array_like, shape (n,)
        Feature vectors of equal dimension.

    Returns
    -------
    float

    Raises
    ------
    InvalidInput
        If the vectors have mismatched dimensions or non-finite entries.
    """
    a = _as_matrix(x)[0]
    b = _as_matrix(x_other)[0]
    if a.shape != b.shape:
        raise InvalidInput(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    dots = float(a @ b)
    if spec.family == "gaussian":
        diff = a - b
        return float(_apply_family(spec, np.float64(dots), np.float64(diff @ diff)))
    return float(_apply_family(spec, np.float64(dots), None))


def gram(spec: KernelSpec, A, B=None) -> np.ndarray:
    """Pairwise kernel matrix ``K[i, j] = k(A_i, B_j)``.

    When ``B`` is omitted (or is the same array object as ``A``) the matrix is
    assembled from one triangle only, so the result is exactly symmetric and,
    for the gaussian family, has an exact unit diagonal.

    Parameters
    ----------
    spec : KernelSpec
    A : array_like, shape (m1, n)
    B : array_like, shape (m2, n), optional

    Returns
    -------
    ndarray, shape (m1, m2)
    """
    Am = _as_matrix(A)
    same = B is None or B is A
    Bm = Am if same else _as_matrix(B)
    if Am.shape[1] != Bm.shape[1]:
        raise InvalidInput(f"feature dimension mismatch: {Am.shape[1]} vs {Bm.shape[1]}")

    dots = Am @ Bm.T
    if same:
        # mirror the upper triangle so K is exactly symmetric
        dots = np.triu(dots) + np.triu(dots, 1).T

    if spec.family != "gaussian":
        return _apply_family(spec, dots, None)

    sq_a = np.einsum("ij,ij->i", Am, Am)
    sq_b = sq_a if same else np.einsum("ij,ij->i", Bm, Bm)
    sq_dists = np.maximum(sq_a[:, None] + sq_b[None, :] - 2.0 * dots, 0.0)
    if same:
        np.fill_diagonal(sq_dists, 0.0)
        sq_dists = np.triu(sq_dists) + np.triu(sq_dists, 1).T
    return _apply_family(spec, dots, sq_dists)


def min_gram_eigenvalue(K: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric kernel matrix."""
    return float(np.linalg.eigvalsh(K)[0])


def _l2_enclosing_radius(p: float, eps: float, n: int) -> float:
    # radius of the smallest Euclidean ball containing the lp ball of radius eps
    if p not in (1, 2) and not math.isinf(p):
        raise UnsupportedRadiusMapping(f"norm order p={p} is not supported (use 1, 2 or inf)")
    if math.isinf(p):
        return eps * math.sqrt(n)
    return eps


def feature_radius(spec: KernelSpec, p: float, eps: float, n: int) -> float:
    """Feature-space perturbation radius induced by an input-space lp ball.

    Returns ``eps_f`` such that ``|phi(x + delta) - phi(x)|_H <= eps_f`` for
    every perturbation with ``|delta|_p <= eps``, where ``phi`` is the feature
    map of ``spec``.  The bound is tight for the supported families:

    * ``linear``: ``phi`` is the identity, so ``eps_f`` is the Euclidean
      radius enclosing the lp ball, ``eps * n**max(0, 1/2 - 1/p)``.
    * ``gaussian``: ``|phi(u) - phi(v)|_H^2 = 2 - 2 k(u, v)`` is increasing in
      ``|u - v|_2``, giving ``sqrt(2 - 2 exp(-r^2 / (2 sigma^2)))`` at the
      enclosing radius ``r``.

    For the polynomial and sigmoid families no data-independent bound is
    implemented; callers must supply a feature-space radius explicitly.

    Parameters
    ----------
    spec : KernelSpec
    p : float
        Norm order of the input-space ball; one of ``1``, ``2``, ``inf``.
    eps : float
        Input-space radius, ``>= 0``.
    n : int
        Input dimension.

    Raises
    ------
    UnsupportedRadiusMapping
        If no bound is implemented for this family / norm order.
    """
    if eps < 0:
        raise InvalidInput(f"radius eps must be >= 0, got {eps}")
    if eps == 0:
        return 0.0
    if spec.family == "linear":
        return _l2_enclosing_radius(p, eps, n)
    if spec.family == "gaussian":
        r = _l2_enclosing_radius(p, eps, n)
        return math.sqrt(max(0.0, 2.0 - 2.0 * math.exp(-(r * r) / (2.0 * spec.sigma**2))))
    raise UnsupportedRadiusMapping(
        f"no feature-space radius bound for family {spec.family!r}; pass one explicitly"
    )
