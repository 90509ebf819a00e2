"""Simplex LP solver, consistency polytopes, and the relative-interior construction.

The solver is a dense two-phase tableau simplex with Bland's pivot rule
(deterministic, cannot cycle) and a 1e-9 feasibility tolerance.

relative_interior implements the slack-maximizing LP

    max 1'xi   s.t.   A p + xi <= alpha b,  0 <= xi <= 1,  alpha >= 1

whose optimum classifies every row as always-active (xi*=0) or
slack-capable (xi*=1), then returns p1 = p*/alpha*, the sampling radius
R = 1/(alpha* max ||a_j||) over slack-capable rows, and an orthonormal
basis N of the null space of the always-active rows.  The optimum of the
slack LP is generally a face, not a point, so two more LPs pin a canonical
optimum deterministically: minimize alpha, then minimize ||p||_1.  Any
point of the face satisfies a_j p* + 1 <= alpha* b_j on slack-capable
rows, which is the containment fact the ball sampler relies on, so the
tie-breaking stages cannot affect correctness.

Internally the polytope is split into variable-connected components
(rows touching disjoint variable sets are independent), each component's
equality-derived rows are eliminated exactly (rational particular solution
plus null basis), and only genuinely free rows reach the simplex.  This is
what keeps dataset-scale instances small: SM = T separates per target atom
and per co-occurrence block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Dataset
from .errors import (
    CycleDetected,
    DimensionMismatch,
    InfeasiblePolytope,
    NumericalAmbiguity,
)
from .linalg import RationalMatrix, null_space_basis, rref

FEAS_TOL = 1e-9
XI_CLASS_TOL = 1e-6


# ---------------------------------------------------------------------------
# simplex


@dataclass(eq=False)
class LpProblem:
    """maximize objective . x subject to rows[i] . x (rel_i) rhs[i].

    Variables are non-negative unless flagged free.  Upper bounds, when
    needed, are expressed as constraint rows by the callers.
    """

    objective: np.ndarray
    rows: np.ndarray
    relations: tuple[str, ...]
    rhs: np.ndarray
    free: np.ndarray

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.free = np.asarray(self.free, dtype=bool).reshape(-1)
        if self.rows.shape[0] != self.rhs.shape[0] or len(self.relations) != self.rhs.shape[0]:
            raise DimensionMismatch("constraint sizes disagree")
        if self.free.shape[0] != n:
            raise DimensionMismatch("free flags must match variable count")
        if any(r not in ("<=", "=", ">=") for r in self.relations):
            raise ValueError("relation must be <=, = or >=")


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None


def _pivot(tab: np.ndarray, zrow: np.ndarray, basis: list[int], prow: int, pcol: int) -> None:
    piv = tab[prow, pcol]
    tab[prow] /= piv
    col = tab[:, pcol].copy()
    col[prow] = 0.0
    tab -= np.outer(col, tab[prow])
    zrow -= zrow[pcol] * tab[prow]
    basis[prow] = pcol


def _bland_iterate(
    tab: np.ndarray,
    zrow: np.ndarray,
    basis: list[int],
    allowed: np.ndarray,
    max_iter: int,
) -> str:
    """Run simplex pivots until optimal or unbounded; Bland's rule throughout."""
    ncols = tab.shape[1] - 1
    for _ in range(max_iter):
        enter = -1
        for j in range(ncols):
            if allowed[j] and zrow[j] < -FEAS_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal"
        pos = tab[:, enter] > FEAS_TOL
        if not pos.any():
            return "unbounded"
        ratios = np.full(tab.shape[0], np.inf)
        ratios[pos] = tab[pos, -1] / tab[pos, enter]
        best = ratios.min()
        tied = np.nonzero(ratios <= best + FEAS_TOL)[0]
        prow = min(tied, key=lambda i: basis[i])
        _pivot(tab, zrow, basis, prow, enter)
    raise CycleDetected("simplex iteration cap exceeded")


def solve_lp(problem: LpProblem, max_iter: int | None = None) -> LpResult:
    """Two-phase dense simplex; deterministic for a fixed problem."""
    m, n = problem.rows.shape
    free_idx = np.nonzero(problem.free)[0]
    n_neg = free_idx.shape[0]

    # standard-form columns: [original | negated free parts | slacks | artificials]
    A = problem.rows
    cols = [A, -A[:, free_idx].reshape(m, n_neg)]
    slack_cols = np.zeros((m, m))
    for i, rel in enumerate(problem.relations):
        if rel == "<=":
            slack_cols[i, i] = 1.0
        elif rel == ">=":
            slack_cols[i, i] = -1.0
    cols.append(slack_cols)
    body = np.hstack(cols)
    b = problem.rhs.copy()
    neg = b < 0
    body[neg] *= -1.0
    b[neg] *= -1.0

    n_struct = n + n_neg + m
    art_rows = [
        i
        for i, rel in enumerate(problem.relations)
        if rel == "=" or (rel == "<=" and neg[i]) or (rel == ">=" and not neg[i])
    ]
    art_of_row = {}
    art_block = np.zeros((m, len(art_rows)))
    for k, i in enumerate(art_rows):
        art_block[i, k] = 1.0
        art_of_row[i] = n_struct + k
    tab = np.hstack([body, art_block, b.reshape(-1, 1)])
    ncols = n_struct + len(art_rows)
    basis = [art_of_row.get(i, n + n_neg + i) for i in range(m)]

    if max_iter is None:
        max_iter = 2000 + 40 * (m + ncols)

    is_art = np.zeros(ncols, dtype=bool)
    is_art[n_struct:] = True
    if art_rows:
        c1 = np.where(is_art, -1.0, 0.0)
        zrow = np.zeros(ncols + 1)
        for i in range(m):
            zrow += c1[basis[i]] * tab[i]
        zrow[:-1] -= c1
        allowed = np.ones(ncols, dtype=bool)
        status = _bland_iterate(tab, zrow, basis, allowed, max_iter)
        if status != "optimal" or zrow[-1] < -1e-7:
            return LpResult("infeasible", None, None)
        # pivot surviving artificials out; drop rows that are redundant
        drop = []
        for i in range(m):
            if basis[i] >= n_struct:
                j = next(
                    (jj for jj in range(n_struct) if abs(tab[i, jj]) > FEAS_TOL),
                    None,
                )
                if j is None:
                    drop.append(i)
                else:
                    _pivot(tab, zrow, basis, i, j)
        if drop:
            keep = [i for i in range(m) if i not in drop]
            tab = tab[keep]
            basis = [basis[i] for i in keep]

    c2 = np.zeros(ncols)
    c2[:n] = problem.objective
    c2[n : n + n_neg] = -problem.objective[free_idx]
    zrow = np.zeros(ncols + 1)
    for i in range(len(basis)):
        zrow += c2[basis[i]] * tab[i]
    zrow[:-1] -= c2
    allowed = ~is_art
    status = _bland_iterate(tab, zrow, basis, allowed, max_iter)
    if status == "unbounded":
        return LpResult("unbounded", None, None)

    x_std = np.zeros(ncols)
    for i, bi in enumerate(basis):
        x_std[bi] = tab[i, -1]
    x = x_std[:n].copy()
    x[free_idx] -= x_std[n : n + n_neg]
    return LpResult("optimal", x, float(problem.objective @ x))


# ---------------------------------------------------------------------------
# consistency polytope


@dataclass(frozen=True, eq=False)
class Polytope:
    """{p : A p <= b} over vec(M); integer coefficients (counts).

    Rows flagged equality_derived come in (a, b)/(-a, -b) pairs encoding one
    equation of SM = T each.
    """

    A: np.ndarray
    b: np.ndarray
    equality_derived: tuple[bool, ...]

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=np.int64)
        b = np.asarray(self.b, dtype=np.int64).reshape(-1)
        if A.shape[0] != b.shape[0] or A.shape[0] != len(self.equality_derived):
            raise DimensionMismatch("row counts disagree")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, p: np.ndarray, tol: float = FEAS_TOL) -> bool:
        return bool((self.A @ p <= self.b + tol).all())


def vec_index(s: int, t: int, n_target: int) -> int:
    """Position of M[s, t] in vec(M) (row-major)."""
    return s * n_target + t


def mapping_from_vec(p: np.ndarray, n_source: int, n_target: int) -> np.ndarray:
    return np.asarray(p).reshape(n_source, n_target)


def build_consistency_polytope(d: Dataset) -> Polytope:
    """The LP-relaxed consistent set {vec(M) : SM = T as inequality pairs, M >= 0}."""
    n, n_s, n_t = d.n, d.n_source, d.n_target
    dim = n_s * n_t
    rows: list[np.ndarray] = []
    rhs: list[int] = []
    flags: list[bool] = []
    for i in range(n):
        for t in range(n_t):
            a = np.zeros(dim, dtype=np.int64)
            a[t::n_t] = d.S[i]
            rows.append(a)
            rhs.append(int(d.T[i, t]))
            flags.append(True)
            rows.append(-a)
            rhs.append(-int(d.T[i, t]))
            flags.append(True)
    for k in range(dim):
        a = np.zeros(dim, dtype=np.int64)
        a[k] = -1
        rows.append(a)
        rhs.append(0)
        flags.append(False)
    A = np.array(rows, dtype=np.int64).reshape(len(rows), dim)
    return Polytope(A, np.array(rhs, dtype=np.int64), tuple(flags))


# ---------------------------------------------------------------------------
# relative interior


@dataclass(frozen=True, eq=False)
class InteriorPoint:
    """Canonical relative-interior point plus everything the ball sampler needs."""

    p1: np.ndarray
    alpha_star: float
    xi_star: np.ndarray
    always_active: frozenset[int]
    R: float
    N: np.ndarray

    @property
    def d(self) -> int:
        return self.N.shape[1]


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def _component_interior(
    comp_vars: list[int],
    eq_rows: list[tuple[tuple[Fraction, ...], Fraction]],
    plain: list[tuple[int, np.ndarray, int]],
) -> dict:
    """Solve the slack LP for one variable-connected component.

    comp_vars: global variable indices (sorted); eq_rows: deduped equations
    over local coordinates; plain: (global row index, local coeffs, rhs).
    Returns local results keyed for reassembly.
    """
    size = len(comp_vars)

    # exact particular solution and null basis of the equation system
    if eq_rows:
        aug = RationalMatrix.from_rows([list(a) + [bb] for a, bb in eq_rows])
        rr = rref(aug)
        if any(c == size for c in rr.pivot_cols):
            raise InfeasiblePolytope("equality rows are inconsistent")
        p_part = [Fraction(0)] * size
        for j, c in enumerate(rr.pivot_cols):
            p_part[c] = rr.rref.rows[j][size]
        eq_mat = RationalMatrix.from_rows([list(a) for a, _ in eq_rows])
        basis = null_space_basis(eq_mat).B
    else:
        p_part = [Fraction(0)] * size
        basis = RationalMatrix.identity(size)
    d_free = basis.ncols

    lp_rows = []  # (row index, aB float, q float, ||  exact q)
    resolved: dict[int, float] = {}  # row index -> xi* for rows the LP never sees
    alpha_floor = 1.0
    for ridx, coeffs, bval in plain:
        a_rat = [Fraction(int(v)) for v in coeffs]
        aB = [
            sum((a_rat[i] * basis.rows[i][j] for i in range(size)), Fraction(0))
            for j in range(d_free)
        ]
        q = Fraction(bval) - sum((a_rat[i] * p_part[i] for i in range(size)), Fraction(0))
        if any(v != 0 for v in aB):
            lp_rows.append((ridx, np.array([float(v) for v in aB]), float(q)))
        elif q < 0:
            raise InfeasiblePolytope("row violated on the equality-constrained subspace")
        elif q == 0:
            resolved[ridx] = 0.0
        else:
            resolved[ridx] = 1.0
            alpha_floor = max(alpha_floor, 1.0 / float(q))

    xi_lp: dict[int, float] = {}
    z_star = np.zeros(d_free)
    alpha_comp = alpha_floor
    if lp_rows:
        k = len(lp_rows)
        # stage 1: max sum(xi) over (z, xi, alpha)
        nvar = d_free + k + 1
        obj = np.zeros(nvar)
        obj[d_free : d_free + k] = 1.0
        rows = []
        rhs = []
        rel = []
        for r, (_, aB, q) in enumerate(lp_rows):
            row = np.zeros(nvar)
            row[:d_free] = aB
            row[d_free + r] = 1.0
            row[-1] = -q
            rows.append(row)
            rhs.append(0.0)
            rel.append("<=")
        for r in range(k):
            row = np.zeros(nvar)
            row[d_free + r] = 1.0
            rows.append(row)
            rhs.append(1.0)
            rel.append("<=")
        row = np.zeros(nvar)
        row[-1] = -1.0
        rows.append(row)
        rhs.append(-1.0)
        rel.append("<=")
        free = np.zeros(nvar, dtype=bool)
        free[:d_free] = True
        stage1 = solve_lp(LpProblem(obj, np.array(rows), tuple(rel), np.array(rhs), free))
        if stage1.status == "infeasible":
            raise InfeasiblePolytope("slack LP infeasible")
        if stage1.status != "optimal":
            raise NumericalAmbiguity(f"slack LP {stage1.status}")
        for r, (ridx, _, _) in enumerate(lp_rows):
            xi = stage1.x[d_free + r]
            if xi > XI_CLASS_TOL and xi < 1.0 - XI_CLASS_TOL:
                raise NumericalAmbiguity(f"xi* = {xi} for row {ridx}")
            xi_lp[ridx] = 0.0 if xi <= XI_CLASS_TOL else 1.0

        # stage 2: minimal alpha achieving that slack pattern
        nvar2 = d_free + 1
        obj2 = np.zeros(nvar2)
        obj2[-1] = -1.0
        rows2 = []
        rhs2 = []
        for r, (ridx, aB, q) in enumerate(lp_rows):
            row = np.zeros(nvar2)
            row[:d_free] = aB
            row[-1] = -q
            rows2.append(row)
            rhs2.append(-1.0 if xi_lp[ridx] == 1.0 else 0.0)
        row = np.zeros(nvar2)
        row[-1] = -1.0
        rows2.append(row)
        rhs2.append(-alpha_floor)
        free2 = np.zeros(nvar2, dtype=bool)
        free2[:d_free] = True
        stage2 = solve_lp(
            LpProblem(obj2, np.array(rows2), ("<=",) * len(rows2), np.array(rhs2), free2)
        )
        if stage2.status != "optimal":
            raise NumericalAmbiguity(f"alpha LP {stage2.status}")
        alpha_comp = max(alpha_floor, stage2.x[-1])

    return {
        "vars": comp_vars,
        "p_part": p_part,
        "basis": basis,
        "lp_rows": lp_rows,
        "resolved": resolved,
        "xi_lp": xi_lp,
        "alpha": alpha_comp,
        "eq_rows": eq_rows,
    }


def _component_point(comp: dict, alpha_star: float) -> np.ndarray:
    """Stage 3: minimal-l1 point of the alpha*-scaled slack pattern, local coords."""
    size = len(comp["vars"])
    basis: RationalMatrix = comp["basis"]
    d_free = basis.ncols
    p_part = np.array([float(v) for v in comp["p_part"]])
    B = basis.to_float().reshape(size, d_free)
    if d_free == 0:
        return p_part.copy()  # pinned exactly; p* = alpha* p_part, p1 = p_part

    # variables: z (free) | u (per coordinate, >= 0)
    nvar = d_free + size
    obj = np.zeros(nvar)
    obj[d_free:] = -1.0
    rows = []
    rhs = []
    for r, (ridx, aB, q) in enumerate(comp["lp_rows"]):
        row = np.zeros(nvar)
        row[:d_free] = aB
        rows.append(row)
        rhs.append(alpha_star * q - (1.0 if comp["xi_lp"][ridx] == 1.0 else 0.0))
    for i in range(size):
        row = np.zeros(nvar)
        row[:d_free] = B[i]
        row[d_free + i] = -1.0
        rows.append(row)
        rhs.append(-alpha_star * p_part[i])
        row = np.zeros(nvar)
        row[:d_free] = -B[i]
        row[d_free + i] = -1.0
        rows.append(row)
        rhs.append(alpha_star * p_part[i])
    free = np.zeros(nvar, dtype=bool)
    free[:d_free] = True
    res = solve_lp(
        LpProblem(obj, np.array(rows), ("<=",) * len(rows), np.array(rhs), free)
    )
    if res.status != "optimal":
        raise NumericalAmbiguity(f"centering LP {res.status}")
    z = res.x[:d_free]
    return (alpha_star * p_part + B @ z) / alpha_star


def relative_interior(poly: Polytope) -> InteriorPoint:
    """Classify rows always-active vs slack-capable and return the canonical p1."""
    dim = poly.dim
    uf = _UnionFind(dim) if dim else None
    supports = [np.nonzero(poly.A[i])[0] for i in range(poly.m)]
    xi_star = np.zeros(poly.m)
    always_active: set[int] = set()
    alpha_floor = 1.0
    slack_rows: list[int] = []

    for i, sup in enumerate(supports):
        if sup.shape[0] == 0:
            bval = int(poly.b[i])
            if bval < 0:
                raise InfeasiblePolytope("0 <= negative row")
            if bval == 0:
                always_active.add(i)
                xi_star[i] = 0.0
            else:
                xi_star[i] = 1.0
                slack_rows.append(i)
                alpha_floor = max(alpha_floor, 1.0 / bval)
        else:
            for v in sup[1:]:
                uf.union(int(sup[0]), int(v))

    comp_of_var = {}
    comp_vars: dict[int, list[int]] = {}
    for v in range(dim):
        root = uf.find(v)
        comp_of_var[v] = root
        comp_vars.setdefault(root, []).append(v)

    comp_eqs: dict[int, dict] = {}
    comp_plain: dict[int, list] = {}
    for i, sup in enumerate(supports):
        if sup.shape[0] == 0:
            continue
        root = comp_of_var[int(sup[0])]
        local = comp_vars[root]
        pos = {g: l for l, g in enumerate(local)}
        coeffs = np.zeros(len(local), dtype=np.int64)
        for g in sup:
            coeffs[pos[int(g)]] = poly.A[i, g]
        if poly.equality_derived[i]:
            lead = coeffs[np.nonzero(coeffs)[0][0]]
            sign = 1 if lead > 0 else -1
            key = (tuple(int(v) * sign for v in coeffs), int(poly.b[i]) * sign)
            comp_eqs.setdefault(root, {})[key] = (
                tuple(Fraction(int(v) * sign) for v in coeffs),
                Fraction(int(poly.b[i]) * sign),
            )
            always_active.add(i)
            xi_star[i] = 0.0
        else:
            comp_plain.setdefault(root, []).append((i, coeffs, int(poly.b[i])))

    comps = []
    for root, local in sorted(comp_vars.items()):
        comp = _component_interior(
            local,
            list(comp_eqs.get(root, {}).values()),
            comp_plain.get(root, []),
        )
        comps.append(comp)

    alpha_star = alpha_floor
    for comp in comps:
        alpha_star = max(alpha_star, comp["alpha"])
        for ridx, xi in comp["resolved"].items():
            xi_star[ridx] = xi
            if xi == 1.0:
                slack_rows.append(ridx)
            else:
                always_active.add(ridx)
        for ridx, xi in comp["xi_lp"].items():
            xi_star[ridx] = xi
            if xi == 1.0:
                slack_rows.append(ridx)
            else:
                always_active.add(ridx)

    p1 = np.zeros(dim)
    n_cols = []
    for comp in comps:
        local_p1 = _component_point(comp, alpha_star)
        for l, g in enumerate(comp["vars"]):
            p1[g] = local_p1[l]

        # exact null space of this component's always-active rows
        active_rows = [list(a) for a, _ in comp["eq_rows"]]
        for ridx, coeffs, _ in comp_plain.get(comp_of_var[comp["vars"][0]], []):
            if ridx in always_active:
                active_rows.append([Fraction(int(v)) for v in coeffs])
        if active_rows:
            nb = null_space_basis(RationalMatrix.from_rows(active_rows))
        else:
            nb = null_space_basis(RationalMatrix.from_rows([[Fraction(0)] * len(comp["vars"])]))
        if nb.dim:
            block = nb.B.to_float().reshape(len(comp["vars"]), nb.dim)
            q_mat, _ = np.linalg.qr(block)
            col = np.zeros((dim, nb.dim))
            for l, g in enumerate(comp["vars"]):
                col[g] = q_mat[:, : nb.dim][l]
            n_cols.append(col)

    N = np.hstack(n_cols) if n_cols else np.zeros((dim, 0))

    if slack_rows:
        norms = np.sqrt((poly.A[sorted(set(slack_rows))].astype(float) ** 2).sum(axis=1))
        max_norm = norms.max()
        R = 1.0 / (alpha_star * max_norm) if max_norm > 0 else 1.0
    else:
        R = 1.0

    ip = InteriorPoint(
        p1=p1,
        alpha_star=float(alpha_star),
        xi_star=xi_star,
        always_active=frozenset(always_active),
        R=float(R),
        N=N,
    )
    _check_interior(poly, ip)
    return ip


def _check_interior(poly: Polytope, ip: InteriorPoint) -> None:
    resid = poly.A @ ip.p1 - poly.b
    if (resid > 1e-7).any():
        raise NumericalAmbiguity("interior point violates the polytope")
    for i in ip.always_active:
        if abs(resid[i]) > 1e-7:
            raise NumericalAmbiguity("always-active row not tight at p1")


def sample_second_point(ip: InteriorPoint, rng: np.random.Generator) -> np.ndarray:
    """p2 = p1 + R N v with v uniform in the unit d-ball; p2 stays in the polytope."""
    d = ip.d
    if d == 0:
        return ip.p1.copy()
    g = rng.standard_normal(d)
    norm = np.linalg.norm(g)
    while norm < 1e-12:  # astronomically unlikely; keep the density proper
        g = rng.standard_normal(d)
        norm = np.linalg.norm(g)
    v = g / norm * rng.random() ** (1.0 / d)
    return ip.p1 + ip.R * (ip.N @ v)
