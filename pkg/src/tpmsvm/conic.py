"""Standard-form conic programs and the gadgets used to build them.

A :class:`ConicProgram` is

    minimize    c' x
    subject to  A x = b
                x in K

where ``K`` is an ordered product of blocks that partition the variable
vector: ``Free(d)`` (unconstrained), ``NonNeg(d)`` (componentwise ``>= 0``)
and ``SecondOrder(d)`` (``x_0 >= |(x_1 .. x_{d-1})|_2``, ``d >= 2``).

:class:`ProgramBuilder` accumulates blocks, equality rows and objective
coefficients; inequalities are written as equalities with fresh nonnegative
slack variables.  The module also provides the epigraph gadgets shared by the
robust trainers and a plain-text dump for cross-checking against external
solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, UnsupportedRadiusMapping

FREE = "free"
NONNEG = "nonneg"
SOC = "soc"


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in (FREE, NONNEG, SOC):
            raise InvalidInput(f"unknown cone kind {self.kind!r}")
        if self.dim < 1:
            raise InvalidInput("cone block dimension must be >= 1")
        if self.kind == SOC and self.dim < 2:
            raise InvalidInput("second-order blocks need dimension >= 2")


@dataclass(frozen=True)
class ConicProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: tuple[ConeBlock, ...]

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        n = c.shape[0]
        if A.ndim != 2 or A.shape[1] != n or b.shape != (A.shape[0],):
            raise InvalidInput(f"inconsistent shapes: c {c.shape}, A {A.shape}, b {b.shape}")
        if sum(blk.dim for blk in self.cones) != n:
            raise InvalidInput("cone dimensions must sum to the variable count")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidInput("program data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "cones", tuple(self.cones))

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def cone_membership_violation(self, x: np.ndarray) -> float:
        """Largest violation of the cone constraints at ``x``."""
        worst = 0.0
        off = 0
        for blk in self.cones:
            seg = x[off:off + blk.dim]
            if blk.kind == NONNEG:
                worst = max(worst, float(np.maximum(-seg, 0.0).max(initial=0.0)))
            elif blk.kind == SOC:
                worst = max(worst, float(np.linalg.norm(seg[1:]) - seg[0]))
            off += blk.dim
        return worst


class ProgramBuilder:
    """Incrementally assembles a :class:`ConicProgram`."""

    def __init__(self):
        self._cones: list[ConeBlock] = []
        self._nvars = 0
        self._obj: dict[int, float] = {}
        self._rows: list[dict[int, float]] = []
        self._rhs: list[float] = []

    @property
    def num_vars(self) -> int:
        return self._nvars

    def add_block(self, kind: str, dim: int) -> range:
        """Append a cone block; returns the global indices of its variables."""
        blk = ConeBlock(kind, dim)
        start = self._nvars
        self._cones.append(blk)
        self._nvars += dim
        return range(start, start + dim)

    def add_objective(self, index: int, coef: float) -> None:
        self._obj[index] = self._obj.get(index, 0.0) + float(coef)

    def add_eq(self, coeffs: dict[int, float], rhs: float) -> int:
        """Add one equality row ``sum coeffs[j] * x_j = rhs``; returns its index."""
        self._rows.append(dict(coeffs))
        self._rhs.append(float(rhs))
        return len(self._rows) - 1

    def add_ineq_ge(self, coeffs: dict[int, float], rhs: float) -> int:
        """Add ``sum coeffs[j] * x_j >= rhs`` via a fresh nonnegative slack."""
        (slack,) = self.add_block(NONNEG, 1)
        row = dict(coeffs)
        row[slack] = -1.0
        return self.add_eq(row, rhs)

    def build(self) -> ConicProgram:
        n, m = self._nvars, len(self._rows)
        c = np.zeros(n)
        for j, v in self._obj.items():
            c[j] = v
        A = np.zeros((m, n))
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                A[i, j] = v
        return ConicProgram(c, A, np.asarray(self._rhs, dtype=float), tuple(self._cones))


@dataclass(frozen=True)
class NormEpigraphFragment:
    """Handles to the variables a norm gadget introduced."""

    norm: float
    aux: range  # per-coordinate bound variables (empty for the l2 gadget)
    soc: range  # the second-order block (empty for l1 / linf gadgets)


def encode_abs_bounds(builder: ProgramBuilder, w_idx, bound_idx) -> None:
    """Rows ``bound_j >= w_j`` and ``bound_j >= -w_j`` for aligned index lists."""
    for wj, sj in zip(w_idx, bound_idx):
        builder.add_ineq_ge({sj: 1.0, wj: -1.0}, 0.0)
        builder.add_ineq_ge({sj: 1.0, wj: 1.0}, 0.0)


def encode_norm_epigraph(builder: ProgramBuilder, w_idx, t_idx: int,
                         norm: float) -> NormEpigraphFragment:
    """Constrain ``x_t >= |x_w|_norm`` for ``norm`` in ``{1, 2, inf}``.

    * ``inf``: ``2n`` linear rows ``t >= w_j`` and ``t >= -w_j``.
    * ``2``: one second-order block tied to ``(t, w)`` by equalities.
    * ``1``: nonnegative per-coordinate bounds ``s_j >= |w_j|`` plus
      ``t >= sum_j s_j``.

    Returns a fragment recording any variables the gadget created.
    """
    w_idx = list(w_idx)
    n = len(w_idx)
    if math.isinf(norm):
        for wj in w_idx:
            builder.add_ineq_ge({t_idx: 1.0, wj: -1.0}, 0.0)
            builder.add_ineq_ge({t_idx: 1.0, wj: 1.0}, 0.0)
        return NormEpigraphFragment(norm, range(0), range(0))
    if norm == 2:
        soc = builder.add_block(SOC, n + 1)
        builder.add_eq({soc[0]: 1.0, t_idx: -1.0}, 0.0)
        for k, wj in enumerate(w_idx):
            builder.add_eq({soc[1 + k]: 1.0, wj: -1.0}, 0.0)
        return NormEpigraphFragment(norm, range(0), soc)
    if norm == 1:
        s = builder.add_block(NONNEG, n)
        encode_abs_bounds(builder, w_idx, s)
        row = {t_idx: 1.0}
        for sj in s:
            row[sj] = -1.0
        builder.add_ineq_ge(row, 0.0)
        return NormEpigraphFragment(norm, s, range(0))
    raise UnsupportedRadiusMapping(f"unsupported norm order {norm!r} (use 1, 2 or inf)")


def encode_square_gadget(builder: ProgramBuilder, t_idx: int) -> tuple[int, int]:
    """Variables ``(u, v)`` with ``u + v = 1`` and ``u >= sqrt(t^2 + v^2)``.

    At any optimum that minimizes ``(u - v) / 2`` the identity
    ``(u - v) = t^2`` holds, which moves a squared norm out of the objective.
    Returns the indices of ``u`` and ``v``.
    """
    soc = builder.add_block(SOC, 3)
    u, t2, v = soc[0], soc[1], soc[2]
    builder.add_eq({t2: 1.0, t_idx: -1.0}, 0.0)
    builder.add_eq({u: 1.0, v: 1.0}, 1.0)
    return u, v


# ---------------------------------------------------------------------------
# presolve


@dataclass
class PresolveResult:
    program: ConicProgram | None
    status: str  # "reduced" or "infeasible"
    keep_cols: np.ndarray
    keep_rows: np.ndarray
    pinned_values: np.ndarray  # full-length; zero where kept
    pinned_mask: np.ndarray
    pin_row_for_col: dict[int, int]  # original row index that pinned each column
    obj_offset: float

    def lift_x(self, x_reduced: np.ndarray) -> np.ndarray:
        x = np.array(self.pinned_values, copy=True)
        x[self.keep_cols] = x_reduced
        return x

    def lift_y(self, y_reduced: np.ndarray, original: ConicProgram,
               x_full: np.ndarray) -> np.ndarray:
        """Duals for the original rows: kept rows copy over, pin rows are
        recovered from stationarity of their pinned column, dropped
        duplicates get zero."""
        y = np.zeros(original.num_rows)
        y[self.keep_rows] = y_reduced
        for col, row in self.pin_row_for_col.items():
            coef = original.A[row, col]
            rest = float(original.A[:, col] @ y) - original.A[row, col] * y[row]
            y[row] = (original.c[col] - rest) / coef
        return y


def _free_mask(program: ConicProgram) -> np.ndarray:
    mask = np.zeros(program.num_vars, dtype=bool)
    off = 0
    for blk in program.cones:
        if blk.kind == FREE:
            mask[off:off + blk.dim] = True
        off += blk.dim
    return mask


def presolve(program: ConicProgram, tol: float = 0.0) -> PresolveResult:
    """Pin free variables fixed by singleton rows, drop zero/duplicate rows.

    Exact (bitwise) comparisons are used for zero and duplicate detection;
    the rows this targets are generated programmatically, not measured.
    """
    A = np.array(program.A, copy=True)
    b = np.array(program.b, copy=True)
    n, m = program.num_vars, program.num_rows
    free = _free_mask(program)

    pinned = np.zeros(n, dtype=bool)
    pinned_values = np.zeros(n)
    pin_row_for_col: dict[int, int] = {}
    row_alive = np.ones(m, dtype=bool)
    obj_offset = 0.0

    changed = True
    while changed:
        changed = False
        for i in range(m):
            if not row_alive[i]:
                continue
            nz = np.flatnonzero(A[i])
            if nz.size == 0:
                if abs(b[i]) > tol:
                    return PresolveResult(None, "infeasible", np.array([], dtype=int),
                                          np.array([], dtype=int), pinned_values, pinned,
                                          pin_row_for_col, obj_offset)
                row_alive[i] = False
                changed = True
                continue
            if nz.size == 1 and free[nz[0]] and not pinned[nz[0]]:
                j = int(nz[0])
                val = b[i] / A[i, j]
                pinned[j] = True
                pinned_values[j] = val
                pin_row_for_col[j] = i
                row_alive[i] = False
                obj_offset += program.c[j] * val
                b -= A[:, j] * val
                b[i] = 0.0
                A[:, j] = 0.0
                changed = True

    # drop exact duplicate rows (same coefficients; conflicting rhs is infeasible)
    alive_idx = np.flatnonzero(row_alive)
    seen: dict[bytes, int] = {}
    for i in alive_idx:
        key = A[i].tobytes()
        if key in seen:
            if b[i] != b[seen[key]]:
                return PresolveResult(None, "infeasible", np.array([], dtype=int),
                                      np.array([], dtype=int), pinned_values, pinned,
                                      pin_row_for_col, obj_offset)
            row_alive[i] = False
        else:
            seen[key] = i

    keep_rows = np.flatnonzero(row_alive)
    keep_cols = np.flatnonzero(~pinned)

    new_cones: list[ConeBlock] = []
    off = 0
    for blk in program.cones:
        kept = int(np.count_nonzero(~pinned[off:off + blk.dim]))
        if kept:
            new_cones.append(ConeBlock(blk.kind, kept))
        off += blk.dim

    reduced = ConicProgram(
        program.c[keep_cols],
        A[np.ix_(keep_rows, keep_cols)],
        b[keep_rows],
        tuple(new_cones),
    )
    return PresolveResult(reduced, "reduced", keep_cols, keep_rows, pinned_values,
                          pinned, pin_row_for_col, obj_offset)


# ---------------------------------------------------------------------------
# plain-text interchange dump


def dump_program(program: ConicProgram, path) -> None:
    """Write a program to a plain-text interchange file.

    Format: a ``minimize`` line with the objective coefficients, one
    ``eq:`` line per equality row (coefficients, then ``| rhs``), and a
    ``cones:`` line listing ``kind:dim`` blocks in variable order.
    """
    lines = ["# conic program: minimize c'x  s.t.  A x = b,  x in cones"]
    lines.append("minimize " + " ".join(repr(float(v)) for v in program.c))
    for i in range(program.num_rows):
        row = " ".join(repr(float(v)) for v in program.A[i])
        lines.append(f"eq: {row} | {float(program.b[i])!r}")
    lines.append("cones: " + " ".join(f"{blk.kind}:{blk.dim}" for blk in program.cones))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_program(path) -> ConicProgram:
    """Parse a file written by :func:`dump_program`."""
    c = None
    rows, rhs, cones = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("minimize "):
                c = np.array([float(v) for v in line[len("minimize "):].split()])
            elif line.startswith("eq:"):
                body, _, tail = line[3:].partition("|")
                rows.append([float(v) for v in body.split()])
                rhs.append(float(tail))
            elif line.startswith("cones:"):
                for tok in line[len("cones:"):].split():
                    kind, _, dim = tok.partition(":")
                    cones.append(ConeBlock(kind, int(dim)))
    if c is None:
        raise InvalidInput(f"{path}: missing objective line")
    A = np.array(rows) if rows else np.zeros((0, c.shape[0]))
    return ConicProgram(c, A, np.array(rhs), tuple(cones))
