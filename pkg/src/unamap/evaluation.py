"""Metrics, the rounded point-estimate baseline, and experiment sweeps.

The baseline fits one least-squares mapping and answers whenever every
coordinate's epsilon window contains an integer, which trades precision
for recall as epsilon grows.  The sweeps reproduce the standard picture:
precision pinned at 1.0 for every unanimous decider cell while recall
varies with training fraction, noise budget, adversarial subsampling,
and the active-vs-passive labeling strategy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import AbstainReason, CountVector, Dataset, Example, Mapping, Prediction
from .data import (
    NoiseSpec,
    SubsampleObjective,
    SynthConfig,
    adversarial_subsample,
    inject_noise,
    synth_generate,
)
from .errors import UnamapError
from .extensions import active_select
from .unanimity import Decider, Mode, predict, train

EPSILONS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
WINDOW_CUSHION = 1e-9


@dataclass(frozen=True)
class PrecisionRecall:
    """Counts first; the ratios are derived so the degenerate cases stay explicit."""

    answered: int
    correct: int
    total: int

    def __post_init__(self) -> None:
        if not 0 <= self.correct <= self.answered <= self.total:
            raise ValueError("inconsistent counts")

    @property
    def nothing_answered(self) -> bool:
        return self.answered == 0

    @property
    def precision(self) -> float:
        # vacuous precision: no answers means no wrong answers
        return 1.0 if self.answered == 0 else self.correct / self.answered

    @property
    def recall(self) -> float:
        return 1.0 if self.total == 0 else self.correct / self.total

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass(frozen=True)
class EpsilonPolicy:
    """Per-coordinate snapping window [y - epsilon, y + epsilon), half-open."""

    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 0.5:
            raise ValueError("epsilon must be in [0, 0.5]")

    def snap(self, value: float) -> int | None:
        candidate = math.ceil(value - self.epsilon - WINDOW_CUSHION)
        if candidate < value + self.epsilon + WINDOW_CUSHION:
            return candidate
        return None


def least_squares_mapping(d: Dataset) -> Mapping:
    """The real mapping minimizing the squared residual of the training system."""
    entries, *_ = np.linalg.lstsq(d.S.astype(float), d.T.astype(float), rcond=None)
    return Mapping(entries)


def point_estimate_predict(mapping: Mapping, x: CountVector, policy: EpsilonPolicy) -> Prediction:
    """Answer with the snapped image of x iff every coordinate snaps to a valid count."""
    y = mapping.apply(x)
    snapped = [policy.snap(float(v)) for v in y]
    if any(s is None or s < 0 for s in snapped):
        return Prediction.abstain(AbstainReason.NON_INTEGRAL_OUTPUT)
    return Prediction.answer(CountVector(tuple(snapped)))


def point_estimator(mapping: Mapping, policy: EpsilonPolicy):
    """The baseline as a plain input -> Prediction callable."""
    return lambda x: point_estimate_predict(mapping, x, policy)


def evaluate(predictor, examples) -> PrecisionRecall:
    """Exact-match precision/recall of a decider or any input -> Prediction callable."""
    fn = (lambda x: predict(predictor, x)) if isinstance(predictor, Decider) else predictor
    answered = correct = 0
    examples = list(examples)
    for ex in examples:
        pred = fn(ex.input)
        if not pred.is_abstain:
            answered += 1
            correct += pred.output == ex.output
    return PrecisionRecall(answered, correct, len(examples))


def partial_recovery_recall(predicted, gold) -> float:
    """Mean multiset-overlap percentage against gold bags; empty-gold rows are skipped."""
    ratios = []
    for pred, g in zip(predicted, gold, strict=True):
        if g.total == 0:
            continue
        overlap = 0 if pred is None else int(np.minimum(pred.array, g.array).sum())
        ratios.append(overlap / g.total)
    if not ratios:
        raise ValueError("every gold bag is empty; nothing to score")
    return 100.0 * sum(ratios) / len(ratios)


def f1_gap(train_d: Dataset, gold, mode: Mode = Mode.LS) -> float:
    """F1(unanimous) minus the best F1 the epsilon-swept point estimate achieves."""
    gold = list(gold)
    unanimous = evaluate(train(train_d, mode), gold).f1
    mapping = least_squares_mapping(train_d)
    best = max(
        evaluate(point_estimator(mapping, EpsilonPolicy(eps)), gold).f1
        for eps in EPSILONS
    )
    return unanimous - best


class ExperimentKind(Enum):
    FRACTION_CURVE = "fraction_curve"
    NOISE_CURVE = "noise_curve"
    ADVERSARIAL = "adversarial"
    ACTIVE_VS_PASSIVE = "active_vs_passive"


@dataclass(frozen=True)
class ExperimentConfig:
    """One bundle of knobs shared by all four sweeps."""

    synth: SynthConfig = field(default_factory=SynthConfig)
    fractions: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    modes: tuple[Mode, ...] = (Mode.ILP, Mode.LP, Mode.LS)
    noise_budgets: tuple[int, ...] = (0, 25, 50, 75, 100, 125, 150)
    adversarial_fractions: tuple[float, ...] = (0.2, 0.5, 0.7)
    adversarial_trials: int = 100
    objective: SubsampleObjective = SubsampleObjective.MAX_DIFF
    adversarial_mode: Mode = Mode.ILP
    label_budgets: tuple[int, ...] = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
    seed: int = 0


@dataclass(frozen=True)
class ExperimentResult:
    kind: ExperimentKind
    header: tuple[str, ...]
    rows: list[tuple]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header)
            writer.writerows(self.rows)


_SCORE_COLS = ("precision", "recall", "answered", "correct", "total", "fault")


def _score_cells(fn) -> tuple:
    """Run one cell, folding solver faults into the row instead of aborting."""
    try:
        pr = fn()
    except UnamapError as err:
        return ("", "", "", "", "", type(err).__name__)
    return (pr.precision, pr.recall, pr.answered, pr.correct, pr.total, "")


def _fraction_curve(cfg: ExperimentConfig) -> ExperimentResult:
    _, train_d, test = synth_generate(cfg.synth)
    order = np.random.default_rng([cfg.seed, 0]).permutation(train_d.n)
    rows = []
    for mode in cfg.modes:
        for f in cfg.fractions:
            take = sorted(int(i) for i in order[: max(1, round(f * train_d.n))])
            cell = _score_cells(lambda: evaluate(train(train_d.subset(take), mode), test))
            rows.append((f, mode.value) + cell)
    return ExperimentResult(
        ExperimentKind.FRACTION_CURVE, ("fraction", "mode") + _SCORE_COLS, rows
    )


def _noise_curve(cfg: ExperimentConfig) -> ExperimentResult:
    _, train_d, test = synth_generate(cfg.synth)
    rows = []
    for k in cfg.noise_budgets:
        # one shared noise seed makes the edit sequences nested, so each
        # budget sees the previous budget's corruptions plus new ones
        noisy = inject_noise(train_d, NoiseSpec(k, seed=cfg.seed))
        cell = _score_cells(lambda: evaluate(train(noisy, Mode.ILP, n_mistakes=k), test))
        rows.append((k,) + cell)
    return ExperimentResult(ExperimentKind.NOISE_CURVE, ("n_mistakes",) + _SCORE_COLS, rows)


def _adversarial(cfg: ExperimentConfig) -> ExperimentResult:
    _, train_d, test = synth_generate(cfg.synth)
    rows = []
    for f in cfg.adversarial_fractions:
        sub = adversarial_subsample(
            train_d, f, cfg.objective, trials=cfg.adversarial_trials, seed=cfg.seed
        )
        cell = _score_cells(lambda: evaluate(train(sub, cfg.adversarial_mode), test))
        rows.append((f, "unanimous", "") + cell)
        mapping = least_squares_mapping(sub)
        for eps in EPSILONS:
            cell = _score_cells(
                lambda: evaluate(point_estimator(mapping, EpsilonPolicy(eps)), test)
            )
            rows.append((f, "point-estimate", eps) + cell)
    return ExperimentResult(
        ExperimentKind.ADVERSARIAL, ("fraction", "predictor", "epsilon") + _SCORE_COLS, rows
    )


def _active_vs_passive(cfg: ExperimentConfig) -> ExperimentResult:
    _, train_d, test = synth_generate(cfg.synth)
    order = [int(i) for i in np.random.default_rng([cfg.seed, 3]).permutation(train_d.n)]
    stream = [train_d.example(i).input for i in order]
    queried, _ = active_select(stream)
    rows = []
    for budget in cfg.label_budgets:
        chosen = {
            "active": sorted(order[p] for p in queried[:budget]),
            "passive": sorted(order[:budget]),
        }
        for strategy, take in chosen.items():
            cell = _score_cells(lambda: evaluate(train(train_d.subset(take), Mode.LS), test))
            rows.append((budget, strategy) + cell)
    return ExperimentResult(
        ExperimentKind.ACTIVE_VS_PASSIVE, ("budget", "strategy") + _SCORE_COLS, rows
    )


_RUNNERS = {
    ExperimentKind.FRACTION_CURVE: _fraction_curve,
    ExperimentKind.NOISE_CURVE: _noise_curve,
    ExperimentKind.ADVERSARIAL: _adversarial,
    ExperimentKind.ACTIVE_VS_PASSIVE: _active_vs_passive,
}


def run_experiment(kind: ExperimentKind, cfg: ExperimentConfig) -> ExperimentResult:
    """Deterministic sweep of the requested kind; cells never abort the table."""
    return _RUNNERS[kind](cfg)
