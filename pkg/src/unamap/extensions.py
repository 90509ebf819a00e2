"""Active label selection, paraphrase grouping, and denotation supervision.

Active selection asks for a label only when the input lies outside the row
space of the inputs already labeled: the linear-system decider trained on
those rank(S) answers is indistinguishable from one trained on everything.

Two safe inputs are paraphrases when their pinned outputs coincide exactly;
since the output of a safe input is a rational combination of training
rows, this is decidable with no tolerance at all.

Denotation supervision replaces each training output with a candidate set;
prediction is unanimity over every (mapping, candidate choice) pair that
explains the training data, so the candidate indicators are marginalized
away rather than resolved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ilp as ilp_mod
from .core import AbstainReason, CountVector, Prediction
from .errors import DimensionMismatch, InfeasibleData, NotSafe
from .linalg import RationalMatrix, RrefResult, eliminate_against_rref, rref
from .lp import LpProblem, solve_lp
from .unanimity import Decider, Mode, _validated_answer, exact_linear_output


@dataclass(frozen=True)
class ActiveState:
    """Which stream indices were queried, plus the exact reduction of their rows."""

    queried: tuple[int, ...]
    rows: RationalMatrix
    reduction: RrefResult | None

    @property
    def rank(self) -> int:
        return self.reduction.rank if self.reduction is not None else 0


def active_select(inputs) -> tuple[list[int], ActiveState]:
    """One pass over the stream; query an input iff its label is not implied yet.

    An input already in the row space of the queried ones has a pinned
    output, so its label buys nothing.  Query count equals the rank of the
    full input matrix.
    """
    queried: list[int] = []
    rows: list[list[int]] = []
    reduction: RrefResult | None = None
    for i, x in enumerate(inputs):
        vec = [int(c) for c in x.counts]
        if reduction is not None:
            _, residual = eliminate_against_rref(reduction, vec)
            if all(v == 0 for v in residual):
                continue
        elif all(v == 0 for v in vec):
            continue
        queried.append(i)
        rows.append(vec)
        reduction = rref(RationalMatrix.from_rows(rows))
    return queried, ActiveState(tuple(queried), RationalMatrix.from_rows(rows), reduction)


# ---------------------------------------------------------------------------
# paraphrases


def _require_ls(dec: Decider) -> None:
    if dec.mode is not Mode.LS:
        raise ValueError("paraphrase tests are defined against the exact linear-system decider")


def are_paraphrases(x: CountVector, x2: CountVector, dec: Decider) -> bool:
    """Whether two safe inputs are pinned to exactly the same output."""
    _require_ls(dec)
    y1 = exact_linear_output(dec, x)
    if y1 is None:
        raise NotSafe("first")
    y2 = exact_linear_output(dec, x2)
    if y2 is None:
        raise NotSafe("second")
    return y1 == y2


@dataclass(frozen=True)
class ParaphraseClass:
    """Pool indices sharing one exact output (rational coordinates)."""

    output: tuple[Fraction, ...]
    members: tuple[int, ...]


def paraphrase_classes(pool, dec: Decider) -> tuple[list[ParaphraseClass], list[int]]:
    """Partition the safe pool members by exact output; unsafe ones set aside."""
    _require_ls(dec)
    classes: dict[tuple[Fraction, ...], list[int]] = {}
    unsafe: list[int] = []
    for i, x in enumerate(pool):
        y = exact_linear_output(dec, x)
        if y is None:
            unsafe.append(i)
        else:
            classes.setdefault(y, []).append(i)
    ordered = sorted(classes.items(), key=lambda kv: kv[1][0])
    return [ParaphraseClass(y, tuple(members)) for y, members in ordered], unsafe


# ---------------------------------------------------------------------------
# denotation supervision


def predict_with_denotations(
    inputs,
    candidate_sets,
    x: CountVector,
    n_source: int,
    n_target: int,
    mode: Mode = Mode.ILP,
    seed: int = 0,
) -> Prediction:
    """Unanimous output over every (mapping, candidate selection) explanation.

    Integral mode decides over integer mappings with one candidate chosen
    per example; lp mode relaxes both to reals in [0, 1], giving a faster
    but more abstaining test.  Raises InfeasibleData when no explanation
    exists at all.
    """
    if mode not in (Mode.ILP, Mode.LP):
        raise ValueError("denotation prediction supports the ilp and lp modes")
    if len(x) != n_source:
        raise DimensionMismatch("input length disagrees with the source vocabulary")
    cs = ilp_mod.build_denotation_consistency(inputs, candidate_sets, n_source, n_target)
    if (x.array[~cs.seen] > 0).any():
        return Prediction.abstain(AbstainReason.UNSEEN_ATOM)
    if x.total == 0:
        return Prediction.answer(CountVector.zeros(n_target))

    rng = np.random.default_rng([seed, *x.counts])
    v = rng.standard_normal(n_target)
    if mode is Mode.ILP:
        a, b = ilp_mod.minmax_projection(cs, x, v)
        if not ilp_mod.unanimous(a, b):
            return Prediction.abstain(AbstainReason.NOT_UNANIMOUS)
        return _validated_answer(ilp_mod.witness_output(cs, x))

    obj = np.zeros(cs.n_vars)
    obj[: cs.mapping_vars()] = np.outer(x.array.astype(float), v).ravel()
    comps = ilp_mod._components(cs)
    relaxed = ilp_mod._assemble(cs, comps, obj, budget=None).lp
    flipped = LpProblem(
        -relaxed.objective, relaxed.rows, relaxed.relations, relaxed.rhs, relaxed.free
    )
    lo = solve_lp(flipped)
    hi = solve_lp(relaxed)
    if lo.status != "optimal" or hi.status != "optimal":
        raise InfeasibleData("no mapping and candidate selection fit the data")
    if not ilp_mod.unanimous(-lo.value, hi.value):
        return Prediction.abstain(AbstainReason.NOT_UNANIMOUS)
    order = [v_ for comp in comps for v_ in comp["vars"]]
    dim = cs.mapping_vars()
    y = np.zeros(n_target)
    xa = x.array.astype(float)
    for local, g in enumerate(order):
        if g < dim:
            s, t = divmod(g, n_target)
            y[t] += xa[s] * hi.x[local]
    return _validated_answer(y)
