"""Branch-and-bound integer programming plus the three consistency systems.

Three constraint families share one carrier type:

    exact       {M integer >= 0 : SM = T}
    noise       {M integer >= 0 : ||SM - T||_1 <= n_mistakes} via e+/e- slacks
    denotation  {(M, pi) : x_i M = pi_i T_i, pi_i selects exactly one candidate}

The minmax projection of Prop.-2 style deciding (min and max of x M v over
the set; equal iff every consistent mapping maps x the same way, with
probability 1 over Gaussian v) is solved by decomposition: variables that
never share a row are independent, so each connected component is its own
small ILP.  The noise budget couples components; there the components not
touched by the test input are collapsed into their minimal achievable
residual (an integer precomputed per component), and only the touched
block is solved monolithically with the leftover budget.  Both reductions
are exact: feasible sets are products over components, and residual budget
not spent on untouched components is freed for the touched ones.

Slack variables e+/e- stay continuous in the ILP: for integral M the
canonical split e = (SM-T)_+ / (T-SM)_+ is integral and no smaller total
exists, so the projection onto M is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CountVector, Dataset
from .errors import BudgetExceeded, DimensionMismatch, InfeasibleData
from .lp import LpProblem, LpResult, solve_lp

INT_TOL = 1e-6
NODE_CAP = 1_000_000


# ---------------------------------------------------------------------------
# branch and bound


@dataclass(eq=False)
class IlpProblem:
    """LpProblem plus per-variable integrality flags.

    Integral variables must be bounded by the constraint rows (the
    constructors below add explicit box rows), otherwise the search tree
    need not be finite.
    """

    lp: LpProblem
    integral: np.ndarray

    def __post_init__(self) -> None:
        self.integral = np.asarray(self.integral, dtype=bool).reshape(-1)
        if self.integral.shape[0] != self.lp.objective.shape[0]:
            raise DimensionMismatch("integrality flags must match variable count")


@dataclass(frozen=True)
class IlpResult:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None
    value: float | None


def _most_fractional(x: np.ndarray, integral: np.ndarray) -> int | None:
    best, best_score = None, None
    for j in np.nonzero(integral)[0]:
        frac = x[j] - np.floor(x[j])
        dist = min(frac, 1.0 - frac)
        if dist <= INT_TOL:
            continue
        score = abs(frac - 0.5)
        if best is None or score < best_score - 1e-12:
            best, best_score = int(j), score
    return best


def _with_bound(lp: LpProblem, j: int, bound: float, upper: bool) -> LpProblem:
    n = lp.objective.shape[0]
    row = np.zeros(n)
    row[j] = 1.0 if upper else -1.0
    return LpProblem(
        lp.objective,
        np.vstack([lp.rows, row]),
        lp.relations + ("<=",),
        np.append(lp.rhs, bound if upper else -bound),
        lp.free,
    )


def solve_ilp(p: IlpProblem, node_cap: int = NODE_CAP) -> IlpResult:
    """Maximize over the integral points; DFS branch-and-bound on the LP solver.

    Branches on the most-fractional variable (smallest index on ties) and
    explores the child with the better LP bound first.
    """
    root = solve_lp(p.lp)
    if root.status == "infeasible":
        return IlpResult("infeasible", None, None)
    if root.status == "unbounded":
        raise ValueError("relaxation unbounded; integral variables must be boxed")

    best_x: np.ndarray | None = None
    best_val = -np.inf
    stack: list[tuple[LpProblem, LpResult]] = [(p.lp, root)]
    nodes = 1
    while stack:
        sub, res = stack.pop()
        if res.value <= best_val + 1e-9:
            continue
        j = _most_fractional(res.x, p.integral)
        if j is None:
            if res.value > best_val:
                best_val = res.value
                best_x = res.x.copy()
            continue
        lo = _with_bound(sub, j, np.floor(res.x[j]), upper=True)
        hi = _with_bound(sub, j, np.ceil(res.x[j]), upper=False)
        children = []
        for child in (lo, hi):
            nodes += 1
            if nodes > node_cap:
                raise BudgetExceeded(f"branch-and-bound exceeded {node_cap} nodes")
            cres = solve_lp(child)
            if cres.status == "optimal":
                children.append((child, cres))
        children.sort(key=lambda cr: cr[1].value)  # better bound popped first
        stack.extend(children)

    if best_x is None:
        return IlpResult("infeasible", None, None)
    x = best_x.copy()
    mask = p.integral
    x[mask] = np.round(x[mask])
    return IlpResult("optimal", x, float(best_val))


# ---------------------------------------------------------------------------
# consistency systems


@dataclass(eq=False)
class ConstraintSet:
    """Linear system over [vec(M) | extras] with integrality flags and box bounds.

    upper[j] is the finite box bound for variable j (-1 means no explicit
    box; such variables must be bounded through the rows).  The budget of
    the noise family is not materialized as a row here; the solve paths
    add it over whichever variables participate.
    """

    kind: str  # "exact" | "noise" | "denotation"
    n_source: int
    n_target: int
    rows: np.ndarray
    relations: tuple[str, ...]
    rhs: np.ndarray
    integral: np.ndarray
    upper: np.ndarray
    seen: np.ndarray
    n_mistakes: int | None = None
    slack_vars: np.ndarray | None = None  # indices of e+/e- variables
    _components: Optional[list] = field(default=None, repr=False)
    _r_min: Optional[dict] = field(default=None, repr=False)

    @property
    def n_vars(self) -> int:
        return self.rows.shape[1] if self.rows.size else self.upper.shape[0]

    def mapping_vars(self) -> int:
        return self.n_source * self.n_target


def _upper_bounds(d: Dataset, extra: int = 0) -> np.ndarray:
    """U[s,t]: max target count seen alongside s, plus any noise allowance.

    Every integral solution keeps M[s,t] <= T[i,t] (+ budget) whenever
    example i contains s; atoms never seen in training get a zero box and
    must be screened out by the caller.
    """
    n_s, n_t = d.n_source, d.n_target
    U = np.zeros((n_s, n_t), dtype=np.int64)
    for s in range(n_s):
        rows = np.nonzero(d.S[:, s] > 0)[0]
        if rows.shape[0]:
            U[s] = d.T[rows].max(axis=0) + extra
    return U


def build_exact_consistency(d: Dataset) -> ConstraintSet:
    """{vec(M) integer >= 0 : SM = T}, boxed by the per-atom upper bounds."""
    n, n_s, n_t = d.n, d.n_source, d.n_target
    dim = n_s * n_t
    rows = np.zeros((n * n_t, dim), dtype=np.int64)
    rhs = np.zeros(n * n_t, dtype=np.int64)
    for i in range(n):
        for t in range(n_t):
            rows[i * n_t + t, t::n_t] = d.S[i]
            rhs[i * n_t + t] = d.T[i, t]
    return ConstraintSet(
        kind="exact",
        n_source=n_s,
        n_target=n_t,
        rows=rows,
        relations=("=",) * (n * n_t),
        rhs=rhs,
        integral=np.ones(dim, dtype=bool),
        upper=_upper_bounds(d).ravel(),
        seen=d.seen_source_mask(),
    )


def build_noise_consistency(d: Dataset, n_mistakes: int) -> ConstraintSet:
    """{M integer >= 0 : ||SM - T||_1 <= n_mistakes} via SM - T = e+ - e-."""
    if n_mistakes < 0:
        raise ValueError("n_mistakes must be non-negative")
    n, n_s, n_t = d.n, d.n_source, d.n_target
    dim = n_s * n_t
    cells = n * n_t
    nvar = dim + 2 * cells
    rows = np.zeros((cells, nvar), dtype=np.int64)
    rhs = np.zeros(cells, dtype=np.int64)
    for i in range(n):
        for t in range(n_t):
            r = i * n_t + t
            rows[r, t:dim:n_t] = d.S[i]
            rows[r, dim + r] = -1  # e+
            rows[r, dim + cells + r] = 1  # e-
            rhs[r] = d.T[i, t]
    integral = np.zeros(nvar, dtype=bool)
    integral[:dim] = True
    # e variables carry no box: the budget row (or the minimization objective
    # when measuring unavoidable residual) is what bounds them
    upper = np.full(nvar, -1, dtype=np.int64)
    upper[:dim] = _upper_bounds(d, extra=n_mistakes).ravel()
    return ConstraintSet(
        kind="noise",
        n_source=n_s,
        n_target=n_t,
        rows=rows,
        relations=("=",) * cells,
        rhs=rhs,
        integral=integral,
        upper=upper,
        seen=d.seen_source_mask(),
        n_mistakes=int(n_mistakes),
        slack_vars=np.arange(dim, nvar),
    )


def build_denotation_consistency(
    inputs: list[CountVector],
    candidate_sets: list[list[CountVector]],
    n_source: int,
    n_target: int,
) -> ConstraintSet:
    """{(M, pi) : x_i M = pi_i T_i, sum_j pi_ij = 1, pi binary, M integer >= 0}."""
    if len(inputs) != len(candidate_sets) or any(len(c) < 1 for c in candidate_sets):
        raise DimensionMismatch("every example needs at least one candidate")
    dim = n_source * n_target
    n = len(inputs)
    pi_offsets = []
    nvar = dim
    for cands in candidate_sets:
        pi_offsets.append(nvar)
        nvar += len(cands)

    rows_l: list[np.ndarray] = []
    rhs_l: list[int] = []
    rel_l: list[str] = []
    for i, (x, cands) in enumerate(zip(inputs, candidate_sets)):
        xa = x.array
        for t in range(n_target):
            row = np.zeros(nvar, dtype=np.int64)
            row[t:dim:n_target] = xa
            for j, cand in enumerate(cands):
                row[pi_offsets[i] + j] = -int(cand.counts[t])
            rows_l.append(row)
            rhs_l.append(0)
            rel_l.append("=")
        row = np.zeros(nvar, dtype=np.int64)
        row[pi_offsets[i] : pi_offsets[i] + len(cands)] = 1
        rows_l.append(row)
        rhs_l.append(1)
        rel_l.append("=")

    seen = np.zeros(n_source, dtype=bool)
    U = np.zeros((n_source, n_target), dtype=np.int64)
    for s in range(n_source):
        caps = []
        for x, cands in zip(inputs, candidate_sets):
            if x.counts[s] > 0:
                caps.append(np.array([c.counts for c in cands]).max(axis=0))
        if caps:
            seen[s] = True
            U[s] = np.minimum.reduce(caps)
    upper = np.concatenate([U.ravel(), np.ones(nvar - dim, dtype=np.int64)])
    return ConstraintSet(
        kind="denotation",
        n_source=n_source,
        n_target=n_target,
        rows=np.array(rows_l, dtype=np.int64).reshape(len(rows_l), nvar),
        relations=tuple(rel_l),
        rhs=np.array(rhs_l, dtype=np.int64),
        integral=np.ones(nvar, dtype=bool),
        upper=upper,
        seen=seen,
    )


# ---------------------------------------------------------------------------
# decomposition and the minmax projection


def _components(cs: ConstraintSet) -> list[dict]:
    """Variable-connected components: vars plus the row indices touching them."""
    if cs._components is not None:
        return cs._components
    nvar = cs.n_vars
    parent = list(range(nvar))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    supports = [np.nonzero(cs.rows[r])[0] for r in range(cs.rows.shape[0])]
    for sup in supports:
        if sup.shape[0] > 1:
            r0 = find(int(sup[0]))
            for v in sup[1:]:
                rv = find(int(v))
                if rv != r0:
                    parent[max(r0, rv)] = min(r0, rv)
                    r0 = min(r0, rv)
    groups: dict[int, dict] = {}
    for v in range(nvar):
        groups.setdefault(find(v), {"vars": [], "rows": []})["vars"].append(v)
    for r, sup in enumerate(supports):
        if sup.shape[0]:
            groups[find(int(sup[0]))]["rows"].append(r)
        elif cs.rhs[r] < 0 or (cs.relations[r] == "=" and cs.rhs[r] != 0):
            raise InfeasibleData("constant row cannot be satisfied")
    cs._components = [groups[k] for k in sorted(groups)]
    return cs._components


def _assemble(
    cs: ConstraintSet,
    comp_list: list[dict],
    objective: np.ndarray,
    budget: int | None,
) -> IlpProblem:
    """Sub-ILP over the union of the given components, plus box and budget rows."""
    vars_ = [v for comp in comp_list for v in comp["vars"]]
    rows_ = [r for comp in comp_list for r in comp["rows"]]
    pos = {g: l for l, g in enumerate(vars_)}
    sub_rows = cs.rows[np.array(rows_, dtype=int)][:, np.array(vars_, dtype=int)] if rows_ else np.zeros((0, len(vars_)))
    rel = [cs.relations[r] for r in rows_]
    rhs = [float(cs.rhs[r]) for r in rows_]
    extra_rows = []
    for g in vars_:
        if cs.upper[g] >= 0:
            row = np.zeros(len(vars_))
            row[pos[g]] = 1.0
            extra_rows.append((row, float(cs.upper[g])))
    if budget is not None:
        slack = set(cs.slack_vars.tolist())
        row = np.zeros(len(vars_))
        for g in vars_:
            if g in slack:
                row[pos[g]] = 1.0
        extra_rows.append((row, float(budget)))
    all_rows = np.vstack([np.asarray(sub_rows, dtype=float)] + [r for r, _ in extra_rows]) if extra_rows else np.asarray(sub_rows, dtype=float)
    rel += ["<="] * len(extra_rows)
    rhs += [b for _, b in extra_rows]
    lp = LpProblem(
        objective[np.array(vars_, dtype=int)],
        all_rows,
        tuple(rel),
        np.array(rhs),
        np.zeros(len(vars_), dtype=bool),
    )
    return IlpProblem(lp, cs.integral[np.array(vars_, dtype=int)])


def _min_residuals(cs: ConstraintSet) -> dict[int, int]:
    """Per-component minimal total slack, cached; integers by integrality of M."""
    if cs._r_min is not None:
        return cs._r_min
    slack = set(cs.slack_vars.tolist())
    out: dict[int, int] = {}
    for idx, comp in enumerate(_components(cs)):
        if not any(v in slack for v in comp["vars"]):
            out[idx] = 0
            continue
        obj = np.zeros(cs.n_vars)
        for v in comp["vars"]:
            if v in slack:
                obj[v] = -1.0
        res = solve_ilp(_assemble(cs, [comp], obj, budget=None))
        if res.status != "optimal":
            raise InfeasibleData("component admits no mapping at any budget")
        out[idx] = int(round(-res.value))
    cs._r_min = out
    return out


def feasible(cs: ConstraintSet) -> bool:
    """Whether the constraint set contains any point (component-wise check)."""
    try:
        comps = _components(cs)
    except InfeasibleData:
        return False
    if cs.kind == "noise":
        return sum(_min_residuals(cs).values()) <= cs.n_mistakes
    for comp in comps:
        res = solve_ilp(_assemble(cs, [comp], np.zeros(cs.n_vars), budget=None))
        if res.status != "optimal":
            return False
    return True


def minmax_projection(
    cs: ConstraintSet, x: CountVector, v: np.ndarray
) -> tuple[float, float]:
    """(min, max) of x M v over the constraint set.

    Components the objective never touches contribute nothing in the exact
    and denotation families; in the noise family they are folded into the
    budget as their minimal residual.
    """
    if len(x) != cs.n_source or v.shape[0] != cs.n_target:
        raise DimensionMismatch("projection operands disagree with the system")
    obj = np.zeros(cs.n_vars)
    obj[: cs.mapping_vars()] = np.outer(x.array.astype(float), v).ravel()
    comps = _components(cs)
    touched = [c for c in comps if any(abs(obj[v_]) > 0 for v_ in c["vars"])]
    if not touched:
        return 0.0, 0.0

    if cs.kind == "noise":
        r_min = _min_residuals(cs)
        untouched = sum(
            r_min[i] for i, c in enumerate(comps) if c not in touched
        )
        k_eff = cs.n_mistakes - untouched
        if k_eff < 0:
            raise InfeasibleData("noise budget below the unavoidable residual")
        lo = solve_ilp(_assemble(cs, touched, -obj, budget=k_eff))
        hi = solve_ilp(_assemble(cs, touched, obj, budget=k_eff))
        if lo.status != "optimal" or hi.status != "optimal":
            raise InfeasibleData("noise system infeasible")
        return -lo.value, hi.value

    a = 0.0
    b = 0.0
    for comp in touched:
        lo = solve_ilp(_assemble(cs, [comp], -obj, budget=None))
        hi = solve_ilp(_assemble(cs, [comp], obj, budget=None))
        if lo.status != "optimal" or hi.status != "optimal":
            raise InfeasibleData("consistency system infeasible")
        a += -lo.value
        b += hi.value
    return a, b


def witness_output(cs: ConstraintSet, x: CountVector) -> np.ndarray:
    """x M for one feasible mapping; callers use it after establishing unanimity."""
    if len(x) != cs.n_source:
        raise DimensionMismatch("input length disagrees with the system")
    xa = x.array.astype(float)
    dim = cs.mapping_vars()
    n_t = cs.n_target
    support = {
        s * n_t + t for s in np.nonzero(xa)[0] for t in range(n_t)
    }
    comps = _components(cs)
    touched = [c for c in comps if any(v_ in support for v_ in c["vars"])]
    y = np.zeros(n_t)
    if not touched:
        return y

    def accumulate(vars_: list[int], solution: np.ndarray) -> None:
        for local, g in enumerate(vars_):
            if g < dim:
                s, t = divmod(g, n_t)
                y[t] += xa[s] * solution[local]

    if cs.kind == "noise":
        r_min = _min_residuals(cs)
        untouched = sum(r_min[i] for i, c in enumerate(comps) if c not in touched)
        k_eff = cs.n_mistakes - untouched
        if k_eff < 0:
            raise InfeasibleData("noise budget below the unavoidable residual")
        res = solve_ilp(_assemble(cs, touched, np.zeros(cs.n_vars), budget=k_eff))
        if res.status != "optimal":
            raise InfeasibleData("noise system infeasible")
        accumulate([v_ for comp in touched for v_ in comp["vars"]], res.x)
        return y

    for comp in touched:
        res = solve_ilp(_assemble(cs, [comp], np.zeros(cs.n_vars), budget=None))
        if res.status != "optimal":
            raise InfeasibleData("consistency system infeasible")
        accumulate(comp["vars"], res.x)
    return y


def unanimous(a: float, b: float) -> bool:
    """Min and max agree up to the relative tolerance of the projection test."""
    return abs(a - b) <= 1e-6 * (1.0 + abs(a))
