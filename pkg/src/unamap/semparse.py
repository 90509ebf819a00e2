"""Semantic-parsing front end.

Sentences become bags of k-grams (one trailing null token absorbs
sentence-level constants); logical forms become bags of target atoms under
one of two schemes: predicate names only, or predicate names fused with
their argument position (loc_1 vs loc_2).  The reverse direction
reconstructs a logical form from a predicted atom bag by exhaustive tree
search restricted to parent/slot/child edges observed in training,
answering only when exactly one tree consumes the bag.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .core import CountVector, Dataset, UnseenPolicy, Vocabulary, bag_from_tokens, dataset_matrices, Example
from .errors import SearchBudgetExceeded, UnseenAtomError
from .unanimity import Decider, Mode, predict

SEARCH_BUDGET = 100_000


@dataclass(frozen=True)
class FeaturizerConfig:
    """How sentences turn into source atoms."""

    k: int = 1
    null_token: str = "<null>"
    entity_collapse: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("gram size must be at least 1")


def gram_atoms(tokens, cfg: FeaturizerConfig, pad: bool = True) -> list[str]:
    """Contiguous k-gram strings of the (optionally null-padded) sentence.

    Whole sentences are padded; sub-sentence phrases are not, so a phrase
    bag never contains the sentence-final null.  Sequences shorter than k
    have no grams.
    """
    toks = [cfg.entity_collapse.get(t, t) for t in tokens]
    if pad:
        toks = toks + [cfg.null_token]
    return [" ".join(toks[i : i + cfg.k]) for i in range(len(toks) - cfg.k + 1)]


def featurize(
    tokens,
    cfg: FeaturizerConfig,
    vocab: Vocabulary,
    policy: UnseenPolicy = UnseenPolicy.REJECT,
    pad: bool = True,
) -> tuple[CountVector, Vocabulary]:
    """Bag of k-grams over the given source vocabulary (see bag_from_tokens)."""
    return bag_from_tokens(gram_atoms(tokens, cfg, pad=pad), vocab, policy)


# ---------------------------------------------------------------------------
# logical forms


@dataclass(frozen=True)
class LogicalForm:
    """Rooted tree in variable-free functional notation, e.g. city(loc_1(Columbia))."""

    label: str
    children: tuple["LogicalForm", ...] = ()

    def render(self) -> str:
        if not self.children:
            return self.label
        return f"{self.label}({','.join(c.render() for c in self.children)})"

    def nodes(self) -> list["LogicalForm"]:
        out = [self]
        for c in self.children:
            out.extend(c.nodes())
        return out


_LABEL = re.compile(r"[^(),\s]+")


def parse_logical_form(text: str) -> LogicalForm:
    """Inverse of LogicalForm.render, tolerant of whitespace."""
    pos = 0

    def skip_ws() -> None:
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def form() -> LogicalForm:
        nonlocal pos
        skip_ws()
        m = _LABEL.match(text, pos)
        if not m:
            raise ValueError(f"expected an atom at position {pos} in {text!r}")
        pos = m.end()
        label = m.group()
        skip_ws()
        if pos < len(text) and text[pos] == "(":
            pos += 1
            children = [form()]
            skip_ws()
            while pos < len(text) and text[pos] == ",":
                pos += 1
                children.append(form())
                skip_ws()
            if pos >= len(text) or text[pos] != ")":
                raise ValueError(f"unclosed argument list at position {pos} in {text!r}")
            pos += 1
            return LogicalForm(label, tuple(children))
        return LogicalForm(label)

    result = form()
    skip_ws()
    if pos != len(text):
        raise ValueError(f"trailing input at position {pos} in {text!r}")
    return result


def relabel(lf: LogicalForm, rename: dict) -> LogicalForm:
    """Apply a node-label rename table (e.g. collapsing predicate aliases)."""
    return LogicalForm(
        rename.get(lf.label, lf.label), tuple(relabel(c, rename) for c in lf.children)
    )


class TargetScheme(Enum):
    PREDICATES_ONLY = "A"
    PREDICATE_WITH_ARG_ORDER = "B"


_ARG_SUFFIX = re.compile(r"^(.+)_\d+$")


def strip_arg_order(label: str) -> str:
    m = _ARG_SUFFIX.match(label)
    return m.group(1) if m else label


def target_atoms(lf: LogicalForm, scheme: TargetScheme) -> list[str]:
    """Multiset of target atoms for one logical form, in preorder."""
    labels = [node.label for node in lf.nodes()]
    if scheme is TargetScheme.PREDICATES_ONLY:
        return [strip_arg_order(l) for l in labels]
    return labels


def encode_targets(
    lf: LogicalForm,
    scheme: TargetScheme,
    vocab: Vocabulary,
    policy: UnseenPolicy = UnseenPolicy.REJECT,
) -> tuple[CountVector, Vocabulary]:
    """Bag of target atoms over the given vocabulary."""
    return bag_from_tokens(target_atoms(lf, scheme), vocab, policy)


# ---------------------------------------------------------------------------
# compatibility and reconstruction


@dataclass(frozen=True)
class CompatibilityTable:
    """(parent label, 1-based slot, child label) edges observed in training forms."""

    entries: frozenset

    @staticmethod
    def from_forms(forms) -> "CompatibilityTable":
        edges = set()
        for lf in forms:
            for node in lf.nodes():
                for slot, child in enumerate(node.children, start=1):
                    edges.add((node.label, slot, child.label))
        return CompatibilityTable(frozenset(edges))

    def allows(self, parent: str, slot: int, child: str) -> bool:
        return (parent, slot, child) in self.entries

    def children_for(self, parent: str, slot: int) -> list[str]:
        return sorted(c for p, s, c in self.entries if p == parent and s == slot)

    def to_json(self) -> str:
        return json.dumps(sorted([p, s, c] for p, s, c in self.entries))

    @staticmethod
    def from_json(text: str) -> "CompatibilityTable":
        return CompatibilityTable(
            frozenset((str(p), int(s), str(c)) for p, s, c in json.loads(text))
        )


def reconstruct(atoms, table: CompatibilityTable, budget: int = SEARCH_BUDGET):
    """The unique logical form consuming the atom bag, or None.

    atoms is a multiset of target-atom strings (any iterable, or a
    mapping to counts).  Every rooted tree whose edges the table allows
    and which uses each atom exactly its multiplicity is considered; the
    result is the tree when it is unique and None when there are zero or
    several.  Nodes may stop filling slots at any point, so arities are
    bounded only by the table.
    """
    bag = +Counter(atoms)
    if not bag:
        return None
    expanded = 0

    def subtrees(label: str, rest: Counter):
        # yields (form rooted at label, leftover bag) pairs
        nonlocal expanded
        expanded += 1
        if expanded > budget:
            raise SearchBudgetExceeded(f"more than {budget} partial trees")
        yield from fill(label, 1, rest, ())

    def fill(label: str, slot: int, rest: Counter, acc: tuple):
        yield LogicalForm(label, acc), rest
        for child in table.children_for(label, slot):
            if rest[child] > 0:
                smaller = rest.copy()
                smaller[child] -= 1
                for sub, leftover in subtrees(child, +smaller):
                    yield from fill(label, slot + 1, leftover, acc + (sub,))

    distinct: dict[str, LogicalForm] = {}
    for root in sorted(bag):
        rest = bag.copy()
        rest[root] -= 1
        for form, leftover in subtrees(root, +rest):
            if not leftover:
                distinct[form.render()] = form
                if len(distinct) > 1:
                    return None
    if len(distinct) == 1:
        return next(iter(distinct.values()))
    return None


# ---------------------------------------------------------------------------
# corpus assembly and safe spans


def build_dataset(
    sentences,
    forms,
    cfg: FeaturizerConfig,
    scheme: TargetScheme,
    rename: dict | None = None,
) -> Dataset:
    """Featurize sentences and encode logical forms into one dataset.

    forms may be LogicalForm objects or functional-notation strings; the
    optional rename table collapses predicate aliases before encoding.
    """
    parsed = [lf if isinstance(lf, LogicalForm) else parse_logical_form(lf) for lf in forms]
    if rename:
        parsed = [relabel(lf, rename) for lf in parsed]
    src = Vocabulary(())
    tgt = Vocabulary(())
    inputs = []
    outputs = []
    for tokens, lf in zip(sentences, parsed, strict=True):
        x, src = featurize(tokens, cfg, src, UnseenPolicy.EXTEND)
        y, tgt = encode_targets(lf, scheme, tgt, UnseenPolicy.EXTEND)
        inputs.append(x)
        outputs.append(y)
    def widen(v: CountVector, n: int) -> CountVector:
        return CountVector(v.counts + (0,) * (n - len(v)))

    examples = [
        Example(widen(x, len(src)), widen(y, len(tgt))) for x, y in zip(inputs, outputs)
    ]
    return dataset_matrices(examples, src, tgt)


@dataclass(frozen=True)
class SafeSpan:
    """Token slice [start, end) whose featurized bag has a unanimous output."""

    start: int
    end: int
    output: CountVector


def annotate_safe_spans(tokens, dec: Decider, cfg: FeaturizerConfig) -> list[SafeSpan]:
    """Every contiguous span the decider can answer, shortest spans first.

    Sub-sentence spans are featurized without the trailing null; the
    whole-sentence span is padded, so its annotation coincides with
    predicting the sentence itself.  Spans containing grams never seen in
    training are unsafe by definition and skipped.
    """
    if dec.mode is not Mode.LS:
        raise ValueError("span safety is defined against the exact linear-system decider")
    tokens = list(tokens)
    n = len(tokens)
    out: list[SafeSpan] = []
    for length in range(1, n + 1):
        for start in range(0, n - length + 1):
            grams = gram_atoms(tokens[start : start + length], cfg, pad=(length == n))
            if not grams:
                continue
            try:
                bag, _ = bag_from_tokens(grams, dec.source_vocab)
            except UnseenAtomError:
                continue
            pred = predict(dec, bag)
            if not pred.is_abstain:
                out.append(SafeSpan(start, start + length, pred.output))
    return out
