"""Exact rational linear algebra.

Row reduction, row-space membership, and null-space bases are computed over
arbitrary-precision rationals: membership is a yes/no question and float
tolerances would corrupt the downstream precision guarantee.  The two
fitting routines (least squares, least absolute deviations) back the noisy
baselines and run in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Mapping
from .errors import DimensionMismatch

Rational = Fraction
_ZERO = Fraction(0)
_ONE = Fraction(1)


def _to_fraction_rows(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(Fraction(v) for v in row) for row in rows)


@dataclass(frozen=True)
class RationalMatrix:
    """Dense matrix of exact rationals (Fractions keep lowest terms themselves)."""

    rows: tuple[tuple[Fraction, ...], ...]

    @staticmethod
    def from_rows(rows) -> "RationalMatrix":
        rows = _to_fraction_rows(rows)
        if rows and any(len(r) != len(rows[0]) for r in rows):
            raise DimensionMismatch("ragged rows")
        return RationalMatrix(rows)

    @staticmethod
    def identity(n: int) -> "RationalMatrix":
        return RationalMatrix(
            tuple(tuple(_ONE if i == j else _ZERO for j in range(n)) for i in range(n))
        )

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.rows[i]

    def column(self, j: int) -> tuple[Fraction, ...]:
        return tuple(r[j] for r in self.rows)

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix(tuple(zip(*self.rows)) if self.rows else ())

    def matmul(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.ncols != other.nrows:
            raise DimensionMismatch("inner dimensions disagree")
        cols = other.transpose().rows
        return RationalMatrix(
            tuple(
                tuple(sum((a * b for a, b in zip(row, col)), _ZERO) for col in cols)
                for row in self.rows
            )
        )

    def to_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.rows], dtype=float).reshape(
            self.shape
        )

    def is_zero(self) -> bool:
        return all(v == 0 for row in self.rows for v in row)


@dataclass(frozen=True)
class RrefResult:
    """RREF plus the row-operation record.

    transform is square (nrows x nrows): transform @ input == rref exactly.
    Rows past `rank` of the transform combine input rows to zero, which is
    what consistency checks against augmented columns use.
    """

    rref: RationalMatrix
    pivot_cols: tuple[int, ...]
    rank: int
    transform: RationalMatrix


def rref(m: RationalMatrix) -> RrefResult:
    """Exact Gauss-Jordan reduction; first nonzero entry per column scan pivots."""
    n, c = m.shape
    work = [list(row) for row in m.rows]
    trans = [[_ONE if i == j else _ZERO for j in range(n)] for i in range(n)]
    pivots: list[int] = []
    r = 0
    for col in range(c):
        pivot_row = next((i for i in range(r, n) if work[i][col] != 0), None)
        if pivot_row is None:
            continue
        work[r], work[pivot_row] = work[pivot_row], work[r]
        trans[r], trans[pivot_row] = trans[pivot_row], trans[r]
        inv = _ONE / work[r][col]
        work[r] = [v * inv for v in work[r]]
        trans[r] = [v * inv for v in trans[r]]
        for i in range(n):
            if i != r and work[i][col] != 0:
                f = work[i][col]
                work[i] = [a - f * b for a, b in zip(work[i], work[r])]
                trans[i] = [a - f * b for a, b in zip(trans[i], trans[r])]
        pivots.append(col)
        r += 1
        if r == n:
            break
    return RrefResult(
        rref=RationalMatrix(tuple(tuple(row) for row in work)),
        pivot_cols=tuple(pivots),
        rank=r,
        transform=RationalMatrix(tuple(tuple(row) for row in trans)),
    )


def eliminate_against_rref(rr: RrefResult, x) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Reduce x by the rref rows; returns (coefficients per pivot row, residual).

    x is in the row space iff the residual is zero, in which case
    x == sum_j coeff[j] * rref.row(j).
    """
    cur = [Fraction(v) for v in x]
    if len(cur) != rr.rref.ncols:
        raise DimensionMismatch("vector length does not match matrix columns")
    coeffs = []
    for j, col in enumerate(rr.pivot_cols):
        f = cur[col]
        coeffs.append(f)
        if f != 0:
            row = rr.rref.row(j)
            cur = [a - f * b for a, b in zip(cur, row)]
    return tuple(coeffs), tuple(cur)


def row_space_membership(S: RationalMatrix, x) -> tuple[Fraction, ...] | None:
    """Some alpha with alpha^T S = x exactly, or None if x is outside the row space."""
    rr = rref(S)
    coeffs, residual = eliminate_against_rref(rr, x)
    if any(v != 0 for v in residual):
        return None
    n = S.nrows
    alpha = [_ZERO] * n
    for j, f in enumerate(coeffs):
        if f != 0:
            trow = rr.transform.row(j)
            alpha = [a + f * w for a, w in zip(alpha, trow)]
    return tuple(alpha)


@dataclass(frozen=True)
class NullBasis:
    """Columns of B span null(S) exactly; zero rows of B mark pinned source atoms."""

    B: RationalMatrix

    @property
    def dim(self) -> int:
        return self.B.ncols

    def zero_rows(self) -> tuple[int, ...]:
        return tuple(i for i, row in enumerate(self.B.rows) if all(v == 0 for v in row))


def null_space_basis(S: RationalMatrix) -> NullBasis:
    """Exact basis of {b : S b = 0} read off the free columns of the RREF."""
    rr = rref(S)
    n_cols = S.ncols
    free = [c for c in range(n_cols) if c not in rr.pivot_cols]
    cols = []
    for f in free:
        vec = [_ZERO] * n_cols
        vec[f] = _ONE
        for j, p in enumerate(rr.pivot_cols):
            vec[p] = -rr.rref.rows[j][f]
        cols.append(vec)
    rows = tuple(tuple(col[i] for col in cols) for i in range(n_cols))
    return NullBasis(RationalMatrix(rows))


def least_squares(S: np.ndarray, T: np.ndarray) -> Mapping:
    """Minimum-norm least-squares mapping: pinv(S) @ T."""
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    if S.ndim != 2 or T.ndim != 2 or S.shape[0] != T.shape[0]:
        raise DimensionMismatch("S and T must be matrices with equal row counts")
    return Mapping(np.linalg.pinv(S) @ T)


def l1_residual_fit(S: np.ndarray, T: np.ndarray) -> tuple[Mapping, np.ndarray]:
    """Real-valued M minimizing total |SM - T|, plus each row's L1 residual.

    Solved as one LP per target column (columns are independent):
        min sum_i (e+_i + e-_i)  s.t.  S m + e+ - e- = T[:, t],  e >= 0, m free.
    """
    from . import lp

    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    n, n_s = S.shape
    n_t = T.shape[1]
    M = np.zeros((n_s, n_t))
    if n == 0:
        return Mapping(M), np.zeros(0)
    for t in range(n_t):
        nvar = n_s + 2 * n
        c = np.zeros(nvar)
        c[n_s:] = -1.0  # maximize -(sum of slacks)
        rows = np.hstack([S, np.eye(n), -np.eye(n)])
        problem = lp.LpProblem(
            objective=c,
            rows=rows,
            relations=("=",) * n,
            rhs=T[:, t].copy(),
            free=np.arange(nvar) < n_s,
        )
        res = lp.solve_lp(problem)
        if res.status != "optimal":
            raise RuntimeError(f"L1 fit LP unexpectedly {res.status}")
        M[:, t] = res.x[:n_s]
    residuals = np.abs(S @ M - T).sum(axis=1)
    return Mapping(M), residuals
