"""Metrics, the epsilon-rounding baseline, and the experiment sweeps."""

import numpy as np
import pytest

from unamap.core import AbstainReason, CountVector, Mapping, Prediction
from unamap.data import SynthConfig, SubsampleObjective
from unamap.errors import InconsistentData
from unamap import evaluation
from unamap.evaluation import (
    EPSILONS,
    EpsilonPolicy,
    ExperimentConfig,
    ExperimentKind,
    PrecisionRecall,
    evaluate,
    f1_gap,
    least_squares_mapping,
    partial_recovery_recall,
    point_estimate_predict,
    point_estimator,
    run_experiment,
)
from unamap.unanimity import Mode

SMALL = SynthConfig(n_source=12, n_target=6, n_train=16, n_test=8, n_clusters=3, len_min=3, len_max=5, seed=7)


class TestPrecisionRecall:
    def test_nothing_answered_has_vacuous_precision(self):
        pr = PrecisionRecall(answered=0, correct=0, total=9)
        assert pr.precision == 1.0
        assert pr.nothing_answered
        assert pr.recall == 0.0
        assert pr.f1 == 0.0

    def test_ratios(self):
        pr = PrecisionRecall(answered=4, correct=3, total=6)
        assert pr.precision == 0.75
        assert pr.recall == 0.5
        assert pr.f1 == pytest.approx(0.6)

    def test_empty_test_set(self):
        assert PrecisionRecall(0, 0, 0).recall == 1.0

    def test_inconsistent_counts_rejected(self):
        with pytest.raises(ValueError):
            PrecisionRecall(answered=2, correct=3, total=5)
        with pytest.raises(ValueError):
            PrecisionRecall(answered=6, correct=0, total=5)


class TestEpsilonPolicy:
    @pytest.mark.parametrize("eps", [-0.1, 0.51])
    def test_range_checked(self, eps):
        with pytest.raises(ValueError):
            EpsilonPolicy(eps)

    def test_half_interval_without_integer_abstains(self):
        assert EpsilonPolicy(0.1).snap(0.5) is None  # [0.4, 0.6)

    def test_exact_integer_at_zero_epsilon(self):
        assert EpsilonPolicy(0.0).snap(2.0) == 2
        assert EpsilonPolicy(0.0).snap(2.0000001) is None

    def test_window_is_half_open_on_the_right(self):
        # [1.0, 2.0) holds 1 but not 2
        assert EpsilonPolicy(0.5).snap(1.5) == 1

    def test_snapping(self):
        assert EpsilonPolicy(0.3).snap(2.3) == 2
        assert EpsilonPolicy(0.2).snap(2.3) is None
        assert EpsilonPolicy(0.3).snap(-0.2) == 0


class TestPointEstimate:
    def test_full_column_rank_answers_exactly(self):
        S = np.array([[1, 0], [0, 1], [1, 1]])
        M_star = np.array([[1, 0, 1], [0, 2, 0]])
        mapping = least_squares_mapping(
            _dataset(S, S @ M_star)
        )
        assert np.allclose(mapping.entries, M_star)
        pred = point_estimate_predict(mapping, CountVector((2, 1)), EpsilonPolicy(0.0))
        assert pred.output == CountVector((2, 2, 2))

    def test_negative_snap_abstains(self):
        pred = point_estimate_predict(Mapping(np.array([[-1.0]])), CountVector((1,)), EpsilonPolicy(0.5))
        assert pred.reason is AbstainReason.NON_INTEGRAL_OUTPUT

    def test_fractional_coordinate_abstains(self):
        pred = point_estimate_predict(Mapping(np.array([[0.5]])), CountVector((1,)), EpsilonPolicy(0.1))
        assert pred.reason is AbstainReason.NON_INTEGRAL_OUTPUT

    def test_abstention_monotone_in_epsilon(self):
        rng = np.random.default_rng(3)
        mapping = Mapping(rng.normal(size=(4, 3)))
        for _ in range(20):
            x = CountVector.from_array(rng.integers(0, 3, size=4))
            answered = [
                not point_estimate_predict(mapping, x, EpsilonPolicy(e)).is_abstain
                for e in EPSILONS
            ]
            # answering at some epsilon implies answering at every larger one
            assert answered == sorted(answered)


def _dataset(S, T):
    from unamap.core import Dataset, Vocabulary

    return Dataset(
        Vocabulary([f"s{i}" for i in range(S.shape[1])]),
        Vocabulary([f"t{j}" for j in range(T.shape[1])]),
        S,
        T,
    )


class TestEvaluate:
    def test_oracle_predictor_is_perfect(self):
        from unamap.data import synth_generate

        mapping, _, test = synth_generate(SMALL)
        oracle = lambda x: Prediction.answer(CountVector.from_array(x.array @ mapping.entries))
        pr = evaluate(oracle, test)
        assert (pr.precision, pr.recall) == (1.0, 1.0)

    def test_mute_predictor(self):
        mute = lambda x: Prediction.abstain(AbstainReason.NOT_UNANIMOUS)
        pr = evaluate(mute, [_ex((1,), (1,)), _ex((2,), (2,))])
        assert (pr.answered, pr.recall, pr.precision) == (0, 0.0, 1.0)

    def test_counts(self):
        wrong_on_big = lambda x: Prediction.answer(CountVector((min(x.counts[0], 1),)))
        pr = evaluate(wrong_on_big, [_ex((1,), (1,)), _ex((2,), (2,)), _ex((0,), (0,))])
        assert (pr.answered, pr.correct, pr.total) == (3, 2, 3)


def _ex(x, y):
    from unamap.core import Example

    return Example(CountVector(x), CountVector(y))


class TestPartialRecovery:
    def test_perfect(self):
        assert partial_recovery_recall([CountVector((2, 1))], [CountVector((2, 1))]) == 100.0

    def test_disjoint(self):
        assert partial_recovery_recall([CountVector((0, 3))], [CountVector((2, 0))]) == 0.0

    def test_multiset_overlap(self):
        # gold {a,a,b} vs predicted {a,b} recovers 2 of 3
        got = partial_recovery_recall([CountVector((1, 1))], [CountVector((2, 1))])
        assert got == pytest.approx(200 / 3)

    def test_empty_gold_rows_skipped(self):
        got = partial_recovery_recall(
            [CountVector((1, 1)), CountVector((9, 9))],
            [CountVector((1, 1)), CountVector((0, 0))],
        )
        assert got == 100.0

    def test_abstentions_score_zero(self):
        got = partial_recovery_recall([None, CountVector((2, 1))], [CountVector((2, 1))] * 2)
        assert got == 50.0

    def test_all_gold_empty_rejected(self):
        with pytest.raises(ValueError):
            partial_recovery_recall([CountVector((1,))], [CountVector((0,))])


class TestF1Gap:
    def test_full_rank_exact_data_has_no_gap(self):
        S = np.eye(3, dtype=np.int64)
        M_star = np.array([[1, 0], [0, 1], [1, 1]])
        d = _dataset(S, S @ M_star)
        assert f1_gap(d, d.examples(), mode=Mode.LS) == pytest.approx(0.0)


class TestExperiments:
    def test_fraction_curve_shape_and_containment(self):
        cfg = ExperimentConfig(synth=SMALL, fractions=(0.5, 1.0), seed=0)
        res = run_experiment(ExperimentKind.FRACTION_CURVE, cfg)
        assert res.header[:2] == ("fraction", "mode")
        assert len(res.rows) == len(cfg.modes) * len(cfg.fractions)
        by_cell = {(r[0], r[1]): r for r in res.rows}
        for f in cfg.fractions:
            for mode in cfg.modes:
                assert by_cell[(f, mode.value)][2] == 1.0  # precision column
            # answer-set nesting shows up as ordered answered counts
            assert by_cell[(f, "ls")][4] <= by_cell[(f, "lp")][4] <= by_cell[(f, "ilp")][4]
        assert by_cell[(1.0, "ilp")][3] == 1.0  # full-data recall

    def test_noise_curve_monotone(self):
        cfg = ExperimentConfig(
            synth=SynthConfig(n_source=16, n_target=4, n_train=12, n_test=8,
                              n_clusters=4, len_min=2, len_max=3, seed=1),
            noise_budgets=(0, 2, 4),
            seed=1,
        )
        res = run_experiment(ExperimentKind.NOISE_CURVE, cfg)
        recalls = [row[2] for row in res.rows]
        assert all(row[1] == 1.0 for row in res.rows)
        assert all(a >= b for a, b in zip(recalls, recalls[1:]))

    def test_adversarial_rows(self):
        cfg = ExperimentConfig(
            synth=SMALL, adversarial_fractions=(0.5,), adversarial_trials=4, seed=2
        )
        res = run_experiment(ExperimentKind.ADVERSARIAL, cfg)
        unanimous = [r for r in res.rows if r[1] == "unanimous"]
        baseline = [r for r in res.rows if r[1] == "point-estimate"]
        assert len(unanimous) == 1 and len(baseline) == len(EPSILONS)
        assert unanimous[0][3] == 1.0
        assert [r[2] for r in baseline] == list(EPSILONS)

    def test_active_recall_dominates_passive(self):
        cfg = ExperimentConfig(synth=SMALL, label_budgets=(2, 4, 6, 8), seed=3)
        res = run_experiment(ExperimentKind.ACTIVE_VS_PASSIVE, cfg)
        by_cell = {(r[0], r[1]): r for r in res.rows}
        for b in cfg.label_budgets:
            assert by_cell[(b, "active")][3] >= by_cell[(b, "passive")][3]

    def test_csv_roundtrip_deterministic(self, tmp_path):
        cfg = ExperimentConfig(synth=SMALL, label_budgets=(2, 4), seed=5)
        paths = []
        for name in ("a.csv", "b.csv"):
            res = run_experiment(ExperimentKind.ACTIVE_VS_PASSIVE, cfg)
            p = tmp_path / name
            res.write_csv(p)
            paths.append(p)
        first, second = (p.read_bytes() for p in paths)
        assert first == second
        assert first.decode().splitlines()[0] == "budget,strategy,precision,recall,answered,correct,total,fault"

    def test_faulted_cells_recorded_not_raised(self, monkeypatch):
        def boom(*args, **kwargs):
            raise InconsistentData("forced")

        monkeypatch.setattr(evaluation, "train", boom)
        cfg = ExperimentConfig(synth=SMALL, fractions=(0.5, 1.0), seed=0)
        res = run_experiment(ExperimentKind.FRACTION_CURVE, cfg)
        assert len(res.rows) == len(cfg.modes) * 2
        assert all(row[-1] == "InconsistentData" for row in res.rows)
        assert all(row[2] == "" for row in res.rows)
