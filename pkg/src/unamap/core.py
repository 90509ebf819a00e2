"""Vocabularies, count-vector bags, and dataset matrices.

Notation used throughout the package:

    n      number of training examples
    n_s    number of source atom types (input vocabulary size)
    n_t    number of target atom types (output vocabulary size)
    S      n x n_s matrix of input bags (one example per row)
    T      n x n_t matrix of output bags
    M      n_s x n_t mapping: M[s, t] is how many copies of target atom t
           one occurrence of source atom s produces

All counts are non-negative integers. Everything here is immutable after
construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, UnseenAtomError


class UnseenPolicy(Enum):
    """What bag_from_tokens does with a token missing from the vocabulary."""

    REJECT = "reject"
    EXTEND = "extend"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered list of distinct atom strings with stable positions."""

    atoms: tuple[str, ...]
    index: dict[str, int] = field(compare=False, repr=False)

    def __init__(self, atoms) -> None:
        atoms = tuple(atoms)
        index = {}
        for pos, atom in enumerate(atoms):
            if atom in index:
                raise ValueError(f"duplicate atom {atom!r}")
            index[atom] = pos
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.atoms)

    def __contains__(self, atom: str) -> bool:
        return atom in self.index

    def position(self, atom: str) -> int:
        return self.index[atom]

    def extended(self, new_atoms) -> "Vocabulary":
        """New vocabulary with unseen atoms appended in first-appearance order."""
        extra = []
        seen = set(self.index)
        for atom in new_atoms:
            if atom not in seen:
                seen.add(atom)
                extra.append(atom)
        return Vocabulary(self.atoms + tuple(extra)) if extra else self

    @staticmethod
    def from_token_lists(token_lists) -> "Vocabulary":
        """First-appearance-order vocabulary over every token in the lists."""
        return Vocabulary(()).extended(t for tokens in token_lists for t in tokens)


@dataclass(frozen=True)
class CountVector:
    """Bag of atoms: non-negative integer counts over a vocabulary."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_multiset(self, vocab: Vocabulary) -> list[str]:
        """Decode back to a sorted list of atoms with multiplicity."""
        out = []
        for atom, c in zip(vocab.atoms, self.counts):
            out.extend([atom] * c)
        return sorted(out)

    @staticmethod
    def from_array(values) -> "CountVector":
        return CountVector(tuple(int(v) for v in values))

    @staticmethod
    def zeros(length: int) -> "CountVector":
        return CountVector((0,) * length)


@dataclass(frozen=True)
class Example:
    """One training pair: input bag over the source vocab, output bag over the target vocab."""

    input: CountVector
    output: CountVector


@dataclass(eq=False)
class Mapping:
    """n_s x n_t mapping matrix; integral for exact consistency, real in the relaxations."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries)
        if self.entries.ndim != 2:
            raise DimensionMismatch("mapping must be a 2-d matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def apply(self, x: CountVector) -> np.ndarray:
        """Image of a source bag: x M."""
        if len(x) != self.entries.shape[0]:
            raise DimensionMismatch("input length does not match mapping rows")
        return x.array @ self.entries


class AbstainReason(Enum):
    """Why a decider declined to answer."""

    NOT_UNANIMOUS = "NotUnanimous"
    UNSEEN_ATOM = "UnseenAtom"
    NON_INTEGRAL_OUTPUT = "NonIntegralOutput"
    INFEASIBLE_MODEL = "InfeasibleModel"


@dataclass(frozen=True)
class Prediction:
    """Either a concrete output bag or an abstention with a diagnostic reason."""

    output: CountVector | None
    reason: AbstainReason | None

    @staticmethod
    def answer(output: CountVector) -> "Prediction":
        return Prediction(output=output, reason=None)

    @staticmethod
    def abstain(reason: AbstainReason) -> "Prediction":
        return Prediction(output=None, reason=reason)

    @property
    def is_abstain(self) -> bool:
        return self.output is None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired matrices S (n x n_s) and T (n x n_t) plus their vocabularies."""

    source_vocab: Vocabulary
    target_vocab: Vocabulary
    S: np.ndarray
    T: np.ndarray

    def __post_init__(self) -> None:
        S = np.asarray(self.S, dtype=np.int64).reshape(-1, len(self.source_vocab))
        T = np.asarray(self.T, dtype=np.int64).reshape(-1, len(self.target_vocab))
        if S.shape[0] != T.shape[0]:
            raise DimensionMismatch("S and T must have the same number of rows")
        if (S < 0).any() or (T < 0).any():
            raise ValueError("dataset counts must be non-negative")
        S.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "T", T)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def n_source(self) -> int:
        return len(self.source_vocab)

    @property
    def n_target(self) -> int:
        return len(self.target_vocab)

    def example(self, i: int) -> Example:
        return Example(CountVector.from_array(self.S[i]), CountVector.from_array(self.T[i]))

    def examples(self) -> list[Example]:
        return [self.example(i) for i in range(self.n)]

    def subset(self, indices) -> "Dataset":
        """Dataset restricted to the given example rows, order preserved."""
        idx = list(indices)
        return Dataset(self.source_vocab, self.target_vocab, self.S[idx], self.T[idx])

    def drop_row(self, i: int) -> "Dataset":
        keep = [j for j in range(self.n) if j != i]
        return self.subset(keep)

    def seen_source_mask(self) -> np.ndarray:
        """True for source atoms that occur in at least one training input."""
        if self.n == 0:
            return np.zeros(self.n_source, dtype=bool)
        return self.S.sum(axis=0) > 0


def bag_from_tokens(
    tokens,
    vocab: Vocabulary,
    policy: UnseenPolicy = UnseenPolicy.REJECT,
) -> tuple[CountVector, Vocabulary]:
    """Encode a token list as a count vector.

    Returns the bag together with the vocabulary it is indexed against:
    under REJECT that is the input vocabulary unchanged, under EXTEND it
    may have new atoms appended (positions of existing atoms are stable).
    """
    tokens = list(tokens)
    if policy is UnseenPolicy.REJECT:
        for t in tokens:
            if t not in vocab:
                raise UnseenAtomError(f"token {t!r} not in vocabulary")
    else:
        vocab = vocab.extended(tokens)
    counts = [0] * len(vocab)
    for t in tokens:
        counts[vocab.position(t)] += 1
    return CountVector(tuple(counts)), vocab


def dataset_matrices(
    examples,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
) -> Dataset:
    """Stack examples into S and T in example order."""
    examples = list(examples)
    for ex in examples:
        if len(ex.input) != len(source_vocab) or len(ex.output) != len(target_vocab):
            raise DimensionMismatch("example vector length disagrees with vocabulary")
    S = np.array([ex.input.counts for ex in examples], dtype=np.int64).reshape(
        len(examples), len(source_vocab)
    )
    T = np.array([ex.output.counts for ex in examples], dtype=np.int64).reshape(
        len(examples), len(target_vocab)
    )
    return Dataset(source_vocab, target_vocab, S, T)
