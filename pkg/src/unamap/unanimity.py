"""The three safe-set deciders plus cleaning and the brute-force oracle.

A decider answers only when every mapping consistent with training maps the
input the same way, giving 100% precision whenever training outputs are
correct; otherwise it abstains.  Three nested notions of "consistent":

    ls   SM = T over unconstrained reals: answer iff x is in the row space
         of S (then x M is pinned), computed with exact rationals
    lp   SM = T, M >= 0 over reals: answer iff two generic interior
         mappings agree on x (probability-1 test over the sampled pair)
    ilp  SM = T over non-negative integers (optionally with an L1 noise
         budget): answer iff min and max of x M v coincide for Gaussian v

The safe sets nest (ls ⊆ lp ⊆ ilp in answering power), and the package's
experiments assert that containment empirically.

Cleaning: clean_leave_one_out drops an example when, under the noise-budget
decider trained on the rest, its input is unsafe or its unanimous
prediction contradicts its label; the default rule is strictly stronger
than keeping only safe inputs (a safe-but-contradicted label is proof of
corruption), and the weaker keep-if-safe rule is available via
`drop_on_mismatch=False`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from . import ilp as ilp_mod
from .core import AbstainReason, CountVector, Dataset, Mapping, Prediction, Vocabulary
from .errors import (
    CleaningFailed,
    DimensionMismatch,
    InconsistentData,
    InfeasibleData,
    InfeasiblePolytope,
    NoiseUnsupportedInRelaxation,
    SearchSpaceTooLarge,
)
from .linalg import RationalMatrix, RrefResult, eliminate_against_rref, rref
from .lp import build_consistency_polytope, relative_interior, sample_second_point

LP_AGREE_TOL = 1e-6
LP_ROUND_TOL = 1e-4
ENUM_CAP = 10**8


class Mode(Enum):
    ILP = "ilp"
    ILP_EXACT = "ilp-exact"
    LP = "lp"
    LS = "ls"


@dataclass(frozen=True, eq=False)
class MappingPair:
    """Two generic mappings from the relative interior of the LP feasible set."""

    M1: Mapping
    M2: Mapping
    seed: int
    fingerprint: str


def dataset_fingerprint(d: Dataset) -> str:
    h = hashlib.sha256()
    h.update(repr(d.S.shape).encode())
    h.update(d.S.tobytes())
    h.update(d.T.tobytes())
    h.update("\x00".join(d.source_vocab.atoms + d.target_vocab.atoms).encode())
    return h.hexdigest()[:16]


@dataclass(eq=False)
class Decider:
    """Trained state for one mode; immutable after train()."""

    mode: Mode
    dataset: Dataset
    n_mistakes: int
    seed: int
    system: ilp_mod.ConstraintSet | None = None
    pair: MappingPair | None = None
    s_rref: RrefResult | None = None
    wt: RationalMatrix | None = None  # transform @ T, aligned with s_rref rows

    @property
    def source_vocab(self) -> Vocabulary:
        return self.dataset.source_vocab

    @property
    def target_vocab(self) -> Vocabulary:
        return self.dataset.target_vocab


def train(d: Dataset, mode: Mode, n_mistakes: int = 0, seed: int = 0) -> Decider:
    """Build the mode-specific state; see the module docstring for the modes."""
    if n_mistakes < 0:
        raise ValueError("n_mistakes must be non-negative")
    if mode in (Mode.LP, Mode.LS) and n_mistakes > 0:
        raise NoiseUnsupportedInRelaxation(
            "slack-budget training collapses to budget-spending in the relaxations; "
            "clean the data first and train with n_mistakes=0"
        )
    dec = Decider(mode=mode, dataset=d, n_mistakes=n_mistakes, seed=seed)
    if mode is Mode.LS:
        S_rat = RationalMatrix.from_rows(d.S.tolist())
        st_rat = RationalMatrix.from_rows(np.hstack([d.S, d.T]).tolist())
        rr = rref(S_rat)
        if rref(st_rat).rank != rr.rank:
            raise InconsistentData("no real-valued mapping satisfies SM = T")
        dec.s_rref = rr
        dec.wt = rr.transform.matmul(RationalMatrix.from_rows(d.T.tolist()))
    elif mode is Mode.LP:
        try:
            ip = relative_interior(build_consistency_polytope(d))
        except InfeasiblePolytope as e:
            raise InconsistentData(str(e)) from e
        rng = np.random.default_rng(seed)
        p2 = sample_second_point(ip, rng)
        n_s, n_t = d.n_source, d.n_target
        M1 = Mapping(ip.p1.reshape(n_s, n_t))
        M2 = Mapping(p2.reshape(n_s, n_t))
        for M in (M1, M2):
            if (M.entries < -1e-9).any() or np.abs(d.S @ M.entries - d.T).max() > 1e-9:
                raise InconsistentData("sampled mapping violates the training system")
        dec.pair = MappingPair(M1, M2, seed, dataset_fingerprint(d))
    elif mode in (Mode.ILP, Mode.ILP_EXACT):
        if n_mistakes > 0:
            dec.system = ilp_mod.build_noise_consistency(d, n_mistakes)
        else:
            dec.system = ilp_mod.build_exact_consistency(d)
    else:
        raise ValueError(f"unknown mode {mode}")
    return dec


def _projection_direction(dec: Decider, x: CountVector) -> np.ndarray:
    """Gaussian v, drawn deterministically per (decider seed, input)."""
    rng = np.random.default_rng([dec.seed, *x.counts])
    return rng.standard_normal(dec.dataset.n_target)


def exact_linear_output(dec: Decider, x: CountVector) -> tuple[Fraction, ...] | None:
    """x M as exact rationals (constant over all real solutions), or None.

    None means x is outside the row space of S, i.e. the unconstrained
    linear relaxation does not pin the output.  Requires an ls-mode decider.
    """
    coeffs, residual = eliminate_against_rref(dec.s_rref, [int(c) for c in x.counts])
    if any(v != 0 for v in residual):
        return None
    y = [Fraction(0)] * dec.dataset.n_target
    for j, f in enumerate(coeffs):
        if f != 0:
            y = [a + f * w for a, w in zip(y, dec.wt.rows[j])]
    return tuple(y)


def _validated_answer(y: np.ndarray) -> Prediction:
    rounded = np.round(y)
    if np.abs(rounded - y).max() > LP_ROUND_TOL or (rounded < 0).any():
        return Prediction.abstain(AbstainReason.NON_INTEGRAL_OUTPUT)
    return Prediction.answer(CountVector.from_array(rounded.astype(np.int64)))


def predict(dec: Decider, x: CountVector) -> Prediction:
    """Unanimous output or an abstention with its reason; never wrong on clean data."""
    d = dec.dataset
    if len(x) != d.n_source:
        raise DimensionMismatch("input length disagrees with the source vocabulary")
    unseen = ~d.seen_source_mask()
    if (x.array[unseen] > 0).any():
        return Prediction.abstain(AbstainReason.UNSEEN_ATOM)
    if x.total == 0:
        return Prediction.answer(CountVector.zeros(d.n_target))

    if dec.mode is Mode.LS:
        y = exact_linear_output(dec, x)
        if y is None:
            return Prediction.abstain(AbstainReason.NOT_UNANIMOUS)
        if any(v.denominator != 1 or v < 0 for v in y):
            return Prediction.abstain(AbstainReason.NON_INTEGRAL_OUTPUT)
        return Prediction.answer(CountVector(tuple(int(v) for v in y)))

    if dec.mode is Mode.LP:
        y1 = dec.pair.M1.apply(x)
        y2 = dec.pair.M2.apply(x)
        if np.abs(y1 - y2).max() > LP_AGREE_TOL:
            return Prediction.abstain(AbstainReason.NOT_UNANIMOUS)
        return _validated_answer(y1)

    try:
        if dec.mode is Mode.ILP:
            v = _projection_direction(dec, x)
            a, b = ilp_mod.minmax_projection(dec.system, x, v)
            if not ilp_mod.unanimous(a, b):
                return Prediction.abstain(AbstainReason.NOT_UNANIMOUS)
            return _validated_answer(ilp_mod.witness_output(dec.system, x))
        # per-coordinate min/max: deterministic, no probability-1 caveat
        y = np.zeros(d.n_target)
        for t in range(d.n_target):
            e = np.zeros(d.n_target)
            e[t] = 1.0
            a, b = ilp_mod.minmax_projection(dec.system, x, e)
            if not ilp_mod.unanimous(a, b):
                return Prediction.abstain(AbstainReason.NOT_UNANIMOUS)
            y[t] = a
        return _validated_answer(y)
    except InfeasibleData:
        return Prediction.abstain(AbstainReason.INFEASIBLE_MODEL)


# ---------------------------------------------------------------------------
# brute-force oracle


def enumerate_consistent_bounded(d: Dataset, bound=None) -> list[Mapping]:
    """Every integral M in the box with SM = T, lexicographically ordered.

    The box defaults to the per-atom upper bounds implied by the data;
    `bound` (scalar or array) overrides it, which matters for atoms that
    never occur in training.
    """
    n_s, n_t = d.n_source, d.n_target
    if bound is None:
        U = ilp_mod._upper_bounds(d)
    else:
        U = np.broadcast_to(np.asarray(bound, dtype=np.int64), (n_s, n_t)).copy()
    space = float(np.prod((U + 1.0).ravel()))
    if space > ENUM_CAP:
        raise SearchSpaceTooLarge(f"box holds ~{space:.2e} candidate mappings")

    # columns are independent: enumerate per target atom, then combine
    per_col: list[list[tuple[int, ...]]] = []
    for t in range(n_t):
        sols: list[tuple[int, ...]] = []
        col_bounds = U[:, t]
        target = d.T[:, t]

        def walk(s: int, partial: np.ndarray, acc: list[int]) -> None:
            if s == n_s:
                if (partial == target).all():
                    sols.append(tuple(acc))
                return
            for val in range(int(col_bounds[s]) + 1):
                new = partial + val * d.S[:, s]
                if (new <= target).all():
                    acc.append(val)
                    walk(s + 1, new, acc)
                    acc.pop()

        walk(0, np.zeros(d.n, dtype=np.int64), [])
        per_col.append(sorted(sols))

    out: list[Mapping] = []

    def combine(t: int, cols: list[tuple[int, ...]]) -> None:
        if t == n_t:
            out.append(Mapping(np.array(cols, dtype=np.int64).T.copy()))
            return
        for col in per_col[t]:
            combine(t + 1, cols + [col])

    combine(0, [])
    return out


# ---------------------------------------------------------------------------
# cleaning


def _ls_consistent(d: Dataset) -> bool:
    if d.n == 0:
        return True
    S_rat = RationalMatrix.from_rows(d.S.tolist())
    st_rat = RationalMatrix.from_rows(np.hstack([d.S, d.T]).tolist())
    return rref(S_rat).rank == rref(st_rat).rank


def clean_leave_one_out(
    d: Dataset, n_mistakes: int, drop_on_mismatch: bool = True
) -> Dataset:
    """Drop examples the noise-budget decider cannot vouch for.

    Each example is judged by a decider trained on the others.  Passes
    repeat until the survivors admit an exactly consistent real-valued
    mapping; a pass that drops nothing while the data is still inconsistent
    raises CleaningFailed.
    """
    current = d
    while True:
        if current.n == 0:
            return current
        keep: list[int] = []
        for i in range(current.n):
            rest = current.drop_row(i)
            ex = current.example(i)
            dec = train(rest, Mode.ILP, n_mistakes=n_mistakes, seed=0)
            pred = predict(dec, ex.input)
            if pred.is_abstain:
                continue
            if drop_on_mismatch and pred.output != ex.output:
                continue
            keep.append(i)
        cleaned = current.subset(keep)
        if _ls_consistent(cleaned):
            return cleaned
        if cleaned.n == current.n:
            raise CleaningFailed(
                "cleaning reached a fixpoint but the data is still inconsistent"
            )
        current = cleaned


def clean_l1_residual(d: Dataset) -> Dataset:
    """Keep only rows an L1-optimal real-valued mapping fits exactly."""
    from .linalg import l1_residual_fit

    if d.n == 0:
        return d
    _, residuals = l1_residual_fit(d.S, d.T)
    keep = [i for i in range(d.n) if residuals[i] <= 1e-6]
    return d.subset(keep)


# ---------------------------------------------------------------------------
# serialization (versioned JSON; LP keeps its sampled pair verbatim)


def decider_to_json(dec: Decider) -> str:
    doc = {
        "version": 1,
        "mode": dec.mode.value,
        "seed": dec.seed,
        "n_mistakes": dec.n_mistakes,
        "source_vocab": list(dec.source_vocab.atoms),
        "target_vocab": list(dec.target_vocab.atoms),
        "S": dec.dataset.S.tolist(),
        "T": dec.dataset.T.tolist(),
        "fingerprint": dataset_fingerprint(dec.dataset),
    }
    if dec.mode is Mode.LP:
        doc["pair"] = {
            "M1": dec.pair.M1.entries.tolist(),
            "M2": dec.pair.M2.entries.tolist(),
            "seed": dec.pair.seed,
            "fingerprint": dec.pair.fingerprint,
        }
    return json.dumps(doc)


def decider_from_json(text: str) -> Decider:
    doc = json.loads(text)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported decider document version {doc.get('version')}")
    d = Dataset(
        Vocabulary(doc["source_vocab"]),
        Vocabulary(doc["target_vocab"]),
        np.array(doc["S"], dtype=np.int64).reshape(-1, len(doc["source_vocab"])),
        np.array(doc["T"], dtype=np.int64).reshape(-1, len(doc["target_vocab"])),
    )
    if dataset_fingerprint(d) != doc["fingerprint"]:
        raise ValueError("fingerprint mismatch: stored matrices are corrupt")
    mode = Mode(doc["mode"])
    if mode is Mode.LP and "pair" in doc:
        dec = Decider(mode=mode, dataset=d, n_mistakes=doc["n_mistakes"], seed=doc["seed"])
        dec.pair = MappingPair(
            Mapping(np.array(doc["pair"]["M1"], dtype=float)),
            Mapping(np.array(doc["pair"]["M2"], dtype=float)),
            doc["pair"]["seed"],
            doc["pair"]["fingerprint"],
        )
        return dec
    return train(d, mode, n_mistakes=doc["n_mistakes"], seed=doc["seed"])
