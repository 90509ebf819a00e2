"""Unanimous prediction for bag-of-atoms semantic mappings.

Train a decider on (input bag, output bag) pairs and it answers only when
every mapping consistent with the training data produces the same output,
abstaining otherwise.  Exact integer, linear-programming, and linear-system
consistency notions give a ladder of deciders trading recall for speed,
all sharing the answers-are-always-correct guarantee on realizable data.
"""

from .core import (
    AbstainReason,
    CountVector,
    Dataset,
    Example,
    Mapping,
    Prediction,
    UnseenPolicy,
    Vocabulary,
    bag_from_tokens,
    dataset_matrices,
)
from .data import (
    NoiseSpec,
    SubsampleObjective,
    SynthConfig,
    adversarial_subsample,
    inject_noise,
    load_dataset,
    save_dataset,
    synth_generate,
)
from .errors import UnamapError
from .evaluation import (
    EpsilonPolicy,
    ExperimentConfig,
    ExperimentKind,
    PrecisionRecall,
    evaluate,
    least_squares_mapping,
    point_estimate_predict,
    run_experiment,
)
from .extensions import (
    active_select,
    are_paraphrases,
    paraphrase_classes,
    predict_with_denotations,
)
from .semparse import (
    CompatibilityTable,
    FeaturizerConfig,
    LogicalForm,
    TargetScheme,
    annotate_safe_spans,
    build_dataset,
    parse_logical_form,
    reconstruct,
)
from .unanimity import (
    Decider,
    Mode,
    clean_l1_residual,
    clean_leave_one_out,
    decider_from_json,
    decider_to_json,
    enumerate_consistent_bounded,
    predict,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AbstainReason",
    "CountVector",
    "Dataset",
    "Example",
    "Mapping",
    "Prediction",
    "UnseenPolicy",
    "Vocabulary",
    "bag_from_tokens",
    "dataset_matrices",
    "NoiseSpec",
    "SubsampleObjective",
    "SynthConfig",
    "adversarial_subsample",
    "inject_noise",
    "load_dataset",
    "save_dataset",
    "synth_generate",
    "UnamapError",
    "EpsilonPolicy",
    "ExperimentConfig",
    "ExperimentKind",
    "PrecisionRecall",
    "evaluate",
    "least_squares_mapping",
    "point_estimate_predict",
    "run_experiment",
    "active_select",
    "are_paraphrases",
    "paraphrase_classes",
    "predict_with_denotations",
    "CompatibilityTable",
    "FeaturizerConfig",
    "LogicalForm",
    "TargetScheme",
    "annotate_safe_spans",
    "build_dataset",
    "parse_logical_form",
    "reconstruct",
    "Decider",
    "Mode",
    "clean_l1_residual",
    "clean_leave_one_out",
    "decider_from_json",
    "decider_to_json",
    "enumerate_consistent_bounded",
    "predict",
    "train",
]
