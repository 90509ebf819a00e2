"""Featurizer, logical forms, reconstruction, and span annotation."""

import numpy as np
import pytest

from conftest import bag
from unamap.core import UnseenPolicy, Vocabulary
from unamap.errors import SearchBudgetExceeded
from unamap.semparse import (
    CompatibilityTable,
    FeaturizerConfig,
    LogicalForm,
    SafeSpan,
    TargetScheme,
    annotate_safe_spans,
    build_dataset,
    encode_targets,
    featurize,
    gram_atoms,
    parse_logical_form,
    reconstruct,
    relabel,
    target_atoms,
)
from unamap.unanimity import Mode, predict, train

A = TargetScheme.PREDICATES_ONLY
B = TargetScheme.PREDICATE_WITH_ARG_ORDER


class TestFeaturizer:
    def test_unigrams_include_trailing_null(self):
        cfg = FeaturizerConfig(k=1)
        grams = gram_atoms(["area", "of", "Ohio"], cfg)
        assert grams == ["area", "of", "Ohio", "<null>"]

    def test_bigrams_split_polysemous_modifiers(self):
        cfg = FeaturizerConfig(k=2)
        river = gram_atoms(["largest", "river"], cfg)
        city = gram_atoms(["largest", "city"], cfg)
        assert "largest river" in river and "largest city" in city
        assert not set(river) & set(city)

    def test_single_token_bigram_pads(self):
        assert gram_atoms(["Ohio"], FeaturizerConfig(k=2)) == ["Ohio <null>"]

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("length", [1, 2, 5])
    def test_gram_count_matches_padded_length(self, k, length):
        tokens = [f"w{i}" for i in range(length)]
        grams = gram_atoms(tokens, FeaturizerConfig(k=k))
        assert len(grams) == max(length + 1 - k + 1, 0)

    def test_phrases_are_not_padded(self):
        cfg = FeaturizerConfig(k=1)
        assert gram_atoms(["area", "of"], cfg, pad=False) == ["area", "of"]
        assert gram_atoms(["area"], FeaturizerConfig(k=2), pad=False) == []

    def test_entity_collapse_applies_before_gramming(self):
        cfg = FeaturizerConfig(k=1, entity_collapse={"Columbia": "<city>"})
        assert gram_atoms(["in", "Columbia"], cfg) == ["in", "<city>", "<null>"]

    def test_featurize_returns_bag_over_vocab(self):
        cfg = FeaturizerConfig(k=1)
        v, vocab = featurize(["a", "b", "a"], cfg, Vocabulary(()), UnseenPolicy.EXTEND)
        assert vocab.atoms == ("a", "b", "<null>")
        assert v.counts == (2, 1, 1)

    def test_gram_size_validated(self):
        with pytest.raises(ValueError):
            FeaturizerConfig(k=0)


class TestLogicalForms:
    @pytest.mark.parametrize(
        "text",
        [
            "city(loc_1(Columbia))",
            "Texas",
            "answer(population_1(city(loc_2(Texas))))",
            "f(a,b,g(c))",
        ],
    )
    def test_parse_render_roundtrip(self, text):
        assert parse_logical_form(text).render() == text

    def test_parse_tolerates_whitespace(self):
        lf = parse_logical_form(" city( loc_1( Columbia ) ) ")
        assert lf.render() == "city(loc_1(Columbia))"

    @pytest.mark.parametrize("text", ["", "f(", "f)g", "f(a,)", "f(a))"])
    def test_parse_rejects_malformed(self, text):
        with pytest.raises(ValueError):
            parse_logical_form(text)

    def test_relabel_collapses_predicates(self):
        lf = parse_logical_form("traverse_1(Texas)")
        assert relabel(lf, {"traverse_1": "loc_1"}).render() == "loc_1(Texas)"


class TestTargetSchemes:
    def test_scheme_b_keeps_argument_order(self):
        lf = parse_logical_form("city(loc_1(Columbia))")
        assert sorted(target_atoms(lf, B)) == ["Columbia", "city", "loc_1"]
        lf2 = parse_logical_form("city(loc_2(Texas))")
        assert sorted(target_atoms(lf2, B)) == ["Texas", "city", "loc_2"]

    def test_scheme_a_strips_argument_order(self):
        lf = parse_logical_form("city(loc_1(Columbia))")
        assert sorted(target_atoms(lf, A)) == ["Columbia", "city", "loc"]

    def test_scheme_b_refines_scheme_a(self):
        # erasing the positional suffixes from the B bag must give the A bag
        for text in [
            "city(loc_1(Columbia))",
            "answer(len_1(longest(river(loc_2(Texas)))))",
            "f(g_1(c),g_2(c))",
        ]:
            lf = parse_logical_form(text)
            from_b = sorted(
                atom if "_" not in atom else atom.rsplit("_", 1)[0]
                if atom.rsplit("_", 1)[1].isdigit()
                else atom
                for atom in target_atoms(lf, B)
            )
            assert from_b == sorted(target_atoms(lf, A))

    def test_encode_targets_counts_duplicates(self):
        lf = parse_logical_form("f(g_1(c),g_1(c))")
        v, vocab = encode_targets(lf, B, Vocabulary(()), UnseenPolicy.EXTEND)
        assert dict(zip(vocab.atoms, v.counts)) == {"f": 1, "g_1": 2, "c": 2}


class TestCompatibilityTable:
    def test_edges_from_training_forms(self):
        table = CompatibilityTable.from_forms([parse_logical_form("city(loc_1(Columbia))")])
        assert table.entries == {("city", 1, "loc_1"), ("loc_1", 1, "Columbia")}
        assert table.allows("city", 1, "loc_1")
        assert not table.allows("loc_1", 1, "city")

    def test_slots_are_positional(self):
        table = CompatibilityTable.from_forms([parse_logical_form("f(a,b)")])
        assert table.children_for("f", 1) == ["a"]
        assert table.children_for("f", 2) == ["b"]

    def test_json_roundtrip(self):
        table = CompatibilityTable.from_forms(
            [parse_logical_form("city(loc_1(Columbia))"), parse_logical_form("f(a,b)")]
        )
        again = CompatibilityTable.from_json(table.to_json())
        assert again == table
        assert table.to_json() == again.to_json()  # deterministic export


TABLE1 = CompatibilityTable.from_forms(
    [parse_logical_form("city(loc_1(Columbia))"), parse_logical_form("city(loc_2(Texas))")]
)


class TestReconstruct:
    def test_unique_tree_recovered(self):
        form = reconstruct(["city", "loc_1", "Columbia"], TABLE1)
        assert form is not None and form.render() == "city(loc_1(Columbia))"

    def test_single_leaf_with_empty_table(self):
        table = CompatibilityTable(frozenset())
        form = reconstruct(["Texas"], table)
        assert form == LogicalForm("Texas")

    def test_two_compatible_trees_abstain(self):
        table = CompatibilityTable.from_forms(
            [parse_logical_form("f(g(c))"), parse_logical_form("g(f(c))")]
        )
        assert reconstruct(["f", "g", "c"], table) is None

    def test_unconsumable_bag_abstains(self):
        assert reconstruct(["city", "Columbia"], TABLE1) is None
        assert reconstruct(["city", "loc_1", "loc_1", "Columbia"], TABLE1) is None

    def test_duplicate_atoms_consumed_exactly(self):
        table = CompatibilityTable.from_forms([parse_logical_form("f(c,c)")])
        form = reconstruct({"f": 1, "c": 2}, table)
        assert form is not None and form.render() == "f(c,c)"

    def test_reconstruction_inverts_encoding(self):
        for text in ["city(loc_1(Columbia))", "f(c,c)"]:
            lf = parse_logical_form(text)
            table = CompatibilityTable.from_forms([lf])
            form = reconstruct(target_atoms(lf, B), table)
            assert form is not None
            assert sorted(target_atoms(form, B)) == sorted(target_atoms(lf, B))

    def test_empty_bag_abstains(self):
        assert reconstruct([], TABLE1) is None

    def test_search_budget_enforced(self):
        table = CompatibilityTable.from_forms(
            [parse_logical_form("f(f(f(f(f(c)))))"), parse_logical_form("f(c)")]
        )
        with pytest.raises(SearchBudgetExceeded):
            reconstruct({"f": 5, "c": 1}, table, budget=3)


class TestBuildDataset:
    def test_corpus_assembly(self):
        d = build_dataset(
            [["where", "is", "Columbia"], ["where", "is", "Texas"]],
            ["city(loc_1(Columbia))", "city(loc_2(Texas))"],
            FeaturizerConfig(k=1),
            B,
        )
        assert d.n == 2
        assert "<null>" in d.source_vocab.atoms
        assert set(d.target_vocab.atoms) == {"city", "loc_1", "Columbia", "loc_2", "Texas"}
        # shared tokens land in the same column of both rows
        w = d.source_vocab.position("where")
        assert d.S[0, w] == d.S[1, w] == 1

    def test_rename_applied_before_encoding(self):
        d = build_dataset(
            [["x"]],
            ["traverse_1(Texas)"],
            FeaturizerConfig(k=1),
            B,
            rename={"traverse_1": "loc_1"},
        )
        assert "loc_1" in d.target_vocab.atoms
        assert "traverse_1" not in d.target_vocab.atoms

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            build_dataset([["a"]], [], FeaturizerConfig(), B)


class TestSafeSpans:
    def test_running_sentence_spans(self, geo_dataset_extended):
        dec = train(geo_dataset_extended, Mode.LS)
        tokens = ["area", "of", "Iowa", "and", "cities", "in", "Iowa"]
        spans = annotate_safe_spans(tokens, dec, FeaturizerConfig(k=1))
        assert spans == [
            SafeSpan(2, 3, bag([0, 0, 0, 1])),
            SafeSpan(6, 7, bag([0, 0, 0, 1])),
            SafeSpan(0, 2, bag([1, 0, 0, 0])),
            SafeSpan(4, 6, bag([0, 1, 0, 0])),
            SafeSpan(0, 3, bag([1, 0, 0, 1])),
            SafeSpan(4, 7, bag([0, 1, 0, 1])),
        ]

    def test_spans_ordered_by_length(self, geo_dataset_extended):
        dec = train(geo_dataset_extended, Mode.LS)
        tokens = ["area", "of", "Iowa", "and", "cities", "in", "Iowa"]
        spans = annotate_safe_spans(tokens, dec, FeaturizerConfig(k=1))
        lengths = [s.end - s.start for s in spans]
        assert lengths == sorted(lengths)

    def test_unseen_sentence_has_no_spans(self, geo_dataset):
        dec = train(geo_dataset, Mode.LS)
        assert annotate_safe_spans(["quel", "dommage"], dec, FeaturizerConfig(k=1)) == []

    def test_whole_range_span_subsumes_predict(self):
        d = build_dataset(
            [["hi"], ["yo"]], ["greet", "greet"], FeaturizerConfig(k=1), B
        )
        dec = train(d, Mode.LS)
        spans = annotate_safe_spans(["hi"], dec, FeaturizerConfig(k=1))
        assert len(spans) == 1 and (spans[0].start, spans[0].end) == (0, 1)
        x, _ = featurize(["hi"], FeaturizerConfig(k=1), d.source_vocab)
        assert spans[0].output == predict(dec, x).output

    def test_requires_linear_system_mode(self, geo_dataset):
        dec = train(geo_dataset, Mode.ILP)
        with pytest.raises(ValueError):
            annotate_safe_spans(["area"], dec, FeaturizerConfig(k=1))

    def test_three_sentence_corpus_pins_only_full_sentences(self):
        # without a fourth example even the state names are entangled, so
        # the only safe span of a training sentence is the sentence itself
        cfg = FeaturizerConfig(k=1)
        d = build_dataset(
            [["area", "of", "Iowa"], ["cities", "in", "Ohio"], ["cities", "in", "Iowa"]],
            ["area(IA)", "city(OH)", "city(IA)"],
            cfg,
            B,
        )
        dec = train(d, Mode.LS)
        spans = annotate_safe_spans(["area", "of", "Iowa"], dec, cfg)
        assert [(s.start, s.end) for s in spans] == [(0, 3)]
        assert spans[0].output.to_multiset(d.target_vocab) == ["IA", "area"]
