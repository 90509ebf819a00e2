"""Synthetic corpora, dataset files, noise injection, and adversarial subsampling.

The synthetic generator draws a ground-truth mapping and cluster-local
inputs, which gives realizable data whose difficulty is controlled by how
much of each cluster the training set happens to cover.  Noise injection
perturbs output bags by unit edits so the noise-tolerant decider has
something honest to recover from, and the adversarial subsampler searches
random subsamples for the one that most separates unanimous prediction
from a least-squares point estimate.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import (
    CountVector,
    Dataset,
    Example,
    Mapping,
    UnseenPolicy,
    Vocabulary,
    bag_from_tokens,
)
from .unanimity import Mode


@dataclass(frozen=True)
class SynthConfig:
    """Scale knobs for the synthetic corpus; defaults give the standard benchmark."""

    n_source: int = 50
    n_target: int = 20
    n_train: int = 120
    n_test: int = 50
    n_clusters: int = 10
    len_min: int = 5
    len_max: int = 10
    max_targets_per_source: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.len_min <= self.len_max:
            raise ValueError("need 1 <= len_min <= len_max")
        if self.n_source % self.n_clusters != 0:
            raise ValueError("clusters must divide the source atoms evenly")
        if not 0 <= self.max_targets_per_source <= self.n_target:
            raise ValueError("targets per source out of range")
        if min(self.n_train, self.n_test) < 0:
            raise ValueError("negative corpus size")

    @property
    def cluster_size(self) -> int:
        return self.n_source // self.n_clusters


@dataclass(frozen=True)
class NoiseSpec:
    """Unit-edit budget applied to the output matrix."""

    n_mistakes: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_mistakes < 0:
            raise ValueError("n_mistakes must be non-negative")


def _sample_input(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    cluster = int(rng.integers(cfg.n_clusters))
    length = int(rng.integers(cfg.len_min, cfg.len_max + 1))
    lo = cluster * cfg.cluster_size
    draws = rng.integers(lo, lo + cfg.cluster_size, size=length)
    return np.bincount(draws, minlength=cfg.n_source)


def synth_generate(cfg: SynthConfig) -> tuple[Mapping, Dataset, list[Example]]:
    """Ground-truth mapping, realizable training set, and held-out labeled inputs."""
    rng = np.random.default_rng(cfg.seed)
    M = np.zeros((cfg.n_source, cfg.n_target), dtype=np.int64)
    for i in range(cfg.n_source):
        k = int(rng.integers(cfg.max_targets_per_source + 1))
        if k:
            M[i, rng.choice(cfg.n_target, size=k, replace=False)] = 1

    S = np.stack([_sample_input(rng, cfg) for _ in range(cfg.n_train)]) if cfg.n_train else np.zeros((0, cfg.n_source), dtype=np.int64)
    train = Dataset(
        Vocabulary(f"w{i}" for i in range(cfg.n_source)),
        Vocabulary(f"p{j}" for j in range(cfg.n_target)),
        S,
        S @ M,
    )
    test = []
    for _ in range(cfg.n_test):
        x = _sample_input(rng, cfg)
        test.append(Example(CountVector.from_array(x), CountVector.from_array(x @ M)))
    return Mapping(M), train, test


def inject_noise(d: Dataset, spec: NoiseSpec) -> Dataset:
    """Apply exactly the budgeted number of unit edits to T, none cancelling.

    Each edit picks a cell uniformly among those with a legal move, then an
    addition or deletion equiprobably where both keep the cell moving away
    from its original value (so the L1 distance to the original T equals
    the budget exactly).
    """
    if spec.n_mistakes == 0:
        return d
    rng = np.random.default_rng(spec.seed)
    T = d.T.copy()
    for _ in range(spec.n_mistakes):
        moves = []
        for i in range(T.shape[0]):
            for t in range(T.shape[1]):
                cur, orig = T[i, t], d.T[i, t]
                if cur > orig:
                    moves.append((i, t, (1,)))
                elif cur < orig:
                    if cur > 0:
                        moves.append((i, t, (-1,)))
                elif cur > 0:
                    moves.append((i, t, (1, -1)))
                else:
                    moves.append((i, t, (1,)))
        if not moves:
            raise ValueError("noise budget exceeds the edits the matrix admits")
        i, t, dirs = moves[rng.integers(len(moves))]
        T[i, t] += dirs[rng.integers(len(dirs))]
    assert np.abs(T - d.T).sum() == spec.n_mistakes
    return Dataset(d.source_vocab, d.target_vocab, d.S, T)


class SubsampleObjective(Enum):
    """Which extreme of the unanimous-vs-point-estimate F1 gap to select."""

    MAX_DIFF = "max-diff"
    MIN_DIFF = "min-diff"


def adversarial_subsample(
    d: Dataset,
    fraction: float,
    objective: SubsampleObjective = SubsampleObjective.MAX_DIFF,
    trials: int = 100,
    seed: int = 0,
    mode: Mode = Mode.LS,
) -> Dataset:
    """The random subsample extremizing F1(unanimous) - F1(best point estimate).

    Both predictors are trained on each candidate subsample and scored
    against the full dataset's gold labels; the point estimate gets the
    best epsilon on its rounding sweep.
    """
    from . import evaluation  # deferred: evaluation builds on this module

    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if trials < 1:
        raise ValueError("need at least one trial")
    if fraction == 1.0:
        return d
    size = max(1, round(fraction * d.n))
    gold = d.examples()
    best_score, best = None, None
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        idx = sorted(rng.choice(d.n, size=size, replace=False).tolist())
        sub = d.subset(idx)
        score = evaluation.f1_gap(sub, gold, mode=mode)
        better = best_score is None or (
            score > best_score
            if objective is SubsampleObjective.MAX_DIFF
            else score < best_score
        )
        if better:
            best_score, best = score, sub
    return best


# dataset files: one JSON object per line, bags spelled out as token lists

def save_dataset(d: Dataset, path) -> None:
    save_examples(d.examples(), d.source_vocab, d.target_vocab, path)


def save_examples(examples, source_vocab: Vocabulary, target_vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            record = {
                "source": ex.input.to_multiset(source_vocab),
                "target": ex.output.to_multiset(target_vocab),
            }
            fh.write(json.dumps(record) + "\n")


def read_records(path, require: str = "source") -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            if require and require not in record:
                raise ValueError(f"{path}:{line_no}: record lacks a {require!r} field")
            records.append(record)
    return records


def load_dataset(path, source_vocab: Vocabulary | None = None, target_vocab: Vocabulary | None = None) -> Dataset:
    """Dataset from a JSONL file; vocabularies default to first-appearance order."""
    records = read_records(path)
    if any("target" not in r for r in records):
        raise ValueError("dataset rows need a 'target' field; use load_inputs for unlabeled files")
    if source_vocab is None:
        source_vocab = Vocabulary.from_token_lists(r["source"] for r in records)
    if target_vocab is None:
        target_vocab = Vocabulary.from_token_lists(r["target"] for r in records)
    S = np.zeros((len(records), len(source_vocab)), dtype=np.int64)
    T = np.zeros((len(records), len(target_vocab)), dtype=np.int64)
    for i, r in enumerate(records):
        S[i] = bag_from_tokens(r["source"], source_vocab)[0].array
        T[i] = bag_from_tokens(r["target"], target_vocab)[0].array
    return Dataset(source_vocab, target_vocab, S, T)


def load_inputs(path) -> list[list[str]]:
    """Just the source token lists of a JSONL file (labels optional and ignored)."""
    return [r["source"] for r in read_records(path)]


def load_denotation_corpus(path) -> tuple[list[CountVector], list[list[CountVector]], Vocabulary, Vocabulary]:
    """Inputs paired with candidate output bags from the candidate-set file format."""
    records = read_records(path)
    if any("candidates" not in r for r in records):
        raise ValueError("denotation rows need a 'candidates' field")
    source_vocab = Vocabulary.from_token_lists(r["source"] for r in records)
    target_vocab = Vocabulary.from_token_lists(
        cand for r in records for cand in r["candidates"]
    )
    inputs, candidate_sets = [], []
    for r in records:
        inputs.append(bag_from_tokens(r["source"], source_vocab)[0])
        candidate_sets.append(
            [bag_from_tokens(cand, target_vocab)[0] for cand in r["candidates"]]
        )
    return inputs, candidate_sets, source_vocab, target_vocab


def save_synthetic(out_dir, cfg: SynthConfig, mapping: Mapping, train: Dataset, test) -> Path:
    """Write train/test JSONL plus a sidecar with the ground truth for auditing."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(train, out / "train.jsonl")
    save_examples(test, train.source_vocab, train.target_vocab, out / "test.jsonl")
    truth = {
        "config": asdict(cfg),
        "mapping": mapping.entries.tolist(),
        "source_atoms": list(train.source_vocab.atoms),
        "target_atoms": list(train.target_vocab.atoms),
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
    return out


def load_synthetic(out_dir) -> tuple[Mapping, Dataset, list[Example], SynthConfig]:
    """Reload a generated corpus with vocabularies aligned to the sidecar mapping."""
    out = Path(out_dir)
    truth = json.loads((out / "truth.json").read_text(encoding="utf-8"))
    source_vocab = Vocabulary(truth["source_atoms"])
    target_vocab = Vocabulary(truth["target_atoms"])
    train = load_dataset(out / "train.jsonl", source_vocab, target_vocab)
    test_d = load_dataset(out / "test.jsonl", source_vocab, target_vocab)
    mapping = Mapping(np.array(truth["mapping"], dtype=np.int64))
    return mapping, train, test_d.examples(), SynthConfig(**truth["config"])
