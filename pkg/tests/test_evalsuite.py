import math

import pytest
from hypothesis import given, settings, strategies as st

from boxscribe import evalsuite as ev
from boxscribe.dataio import Record


def rec(value, entity, rtype, side="HOME"):
    return Record((value, entity, rtype, side))


def dld_recursive(a, b):
    """Plain recursion over the same edit set; deliberately memo-free."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    costs = [
        dld_recursive(a[:-1], b) + 1,
        dld_recursive(a, b[:-1]) + 1,
        dld_recursive(a[:-1], b[:-1]) + (0 if a[-1] == b[-1] else 1),
    ]
    if len(a) > 1 and len(b) > 1 and a[-1] == b[-2] and a[-2] == b[-1]:
        costs.append(dld_recursive(a[:-2], b[:-2]) + 1)
    return min(costs)


class TestExtractRelations:
    def test_entity_number_pair_typed_by_table(self):
        table = [rec("2", "C. Mullins", "H"), rec("4", "C. Mullins", "AB")]
        rels = ev.extract_relations(["C.", "Mullins", "had", "2", "hits"], table)
        assert rels == [ev.Relation("C. Mullins", "2", "H")]

    def test_empty_summary(self):
        assert ev.extract_relations([], [rec("1", "A B", "t")]) == []

    def test_event_keyword_with_dummy_value(self):
        table = [rec("3", "Ryan O'Hearn", "H")]
        rels = ev.extract_relations(["Ryan", "O'Hearn", "homered"], table)
        assert rels == [ev.Relation("Ryan O'Hearn", "-1", "home-run-batter")]

    def test_surname_mention(self):
        table = [rec("5", "Alice Abbott", "runs")]
        rels = ev.extract_relations(["Abbott", "scored", "5", "runs", "."], table)
        assert rels == [ev.Relation("Alice Abbott", "5", "runs")]

    def test_ambiguous_surname_skipped(self):
        table = [rec("5", "Alice Abbott", "runs"), rec("3", "Zoe Abbott", "runs")]
        assert ev.extract_relations(["Abbott", "scored", "5", "runs", "."], table) == []

    def test_window_is_the_sentence(self):
        table = [rec("5", "Alice Abbott", "runs")]
        rels = ev.extract_relations(
            ["Alice", "Abbott", "was", "great", ".", "There", "were", "5", "fans", "."], table)
        assert rels == []

    def test_order_independent_of_table_order(self):
        table = [rec("2", "Alice Abbott", "runs"), rec("3", "Alice Abbott", "hits")]
        tokens = ["Alice", "Abbott", "had", "3", "hits", "and", "2", "runs", "."]
        a = ev.extract_relations(tokens, table)
        b = ev.extract_relations(tokens, list(reversed(table)))
        assert a == b
        assert [r.value for r in a] == ["3", "2"]  # textual order

    def test_ambiguous_value_emits_all_matching_types(self):
        table = [rec("2", "Alice Abbott", "runs"), rec("2", "Alice Abbott", "steals")]
        rels = ev.extract_relations(["Abbott", "had", "2", "."], table)
        assert rels == [
            ev.Relation("Alice Abbott", "2", "runs"),
            ev.Relation("Alice Abbott", "2", "steals"),
        ]


class TestRgMetric:
    def test_fully_factual(self):
        table = [rec("2", "Alice Abbott", "runs")]
        rels = ev.extract_relations(["Abbott", "scored", "2", "."], table)
        assert ev.rg_metric(rels, table) == (1, 1.0)

    def test_two_of_three_supported(self):
        table = [rec("3", "Alice Abbott", "hits"), rec("2", "Alice Abbott", "runs")]
        tokens = ["Alice", "Abbott", "had", "3", "hits", "and", "2", "runs", ".",
                  "Abbott", "homered", "."]
        rels = ev.extract_relations(tokens, table)
        count, precision = ev.rg_metric(rels, table)
        assert count == 3
        assert precision == pytest.approx(2 / 3)

    def test_zero_extractions_convention(self):
        assert ev.rg_metric([], [rec("1", "A B", "t")]) == (0, 1.0)


class TestCsMetric:
    def test_identity(self):
        rels = [ev.Relation("A B", "1", "t"), ev.Relation("C D", "2", "u")]
        assert ev.cs_metric(rels, list(rels)) == (1.0, 1.0)

    def test_disjoint(self):
        a = [ev.Relation("A B", "1", "t")]
        b = [ev.Relation("C D", "2", "u")]
        assert ev.cs_metric(a, b) == (0.0, 0.0)

    def test_half_overlap(self):
        a = [ev.Relation("A B", "1", "t"), ev.Relation("C D", "2", "u")]
        b = [ev.Relation("C D", "2", "u"), ev.Relation("E F", "3", "v")]
        assert ev.cs_metric(a, b) == (0.5, 0.5)

    def test_swap_exchanges_precision_and_recall(self):
        a = [ev.Relation("A B", "1", "t"), ev.Relation("C D", "2", "u"), ev.Relation("G H", "4", "w")]
        b = [ev.Relation("C D", "2", "u"), ev.Relation("E F", "3", "v")]
        p, r = ev.cs_metric(a, b)
        p2, r2 = ev.cs_metric(b, a)
        assert (p, r) == (r2, p2)

    def test_duplicates_collapse(self):
        a = [ev.Relation("A B", "1", "t")] * 3
        b = [ev.Relation("A B", "1", "t")]
        assert ev.cs_metric(a, b) == (1.0, 1.0)


class TestDamerauLevenshtein:
    def test_identical(self):
        assert ev.damerau_levenshtein("abc", "abc") == 0

    def test_transposition(self):
        assert ev.damerau_levenshtein("ab", "ba") == 1

    def test_known_values(self):
        assert ev.damerau_levenshtein("kitten", "sitting") == 3
        assert ev.damerau_levenshtein("", "xyz") == 3
        assert ev.damerau_levenshtein("ca", "abc") == 3  # optimal string alignment variant

    def test_exhaustive_small_against_memo_free_recursion(self):
        alphabet = "abc"
        seqs = [""]
        for _ in range(3):
            seqs += [s + c for s in seqs if len(s) == len(seqs[0]) or True for c in alphabet]
        seqs = sorted(set(s for s in seqs if len(s) <= 3))
        for a in seqs:
            for b in seqs:
                assert ev.damerau_levenshtein(a, b) == dld_recursive(a, b), (a, b)

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from("abc"), max_size=6), st.lists(st.sampled_from("abc"), max_size=6))
    def test_metric_sanity(self, a, b):
        d = ev.damerau_levenshtein(a, b)
        assert d == ev.damerau_levenshtein(b, a)
        assert d <= max(len(a), len(b))
        assert ev.damerau_levenshtein(a, a) == 0


class TestCoMetric:
    def test_identity_scores_100(self):
        rels = [ev.Relation("A B", "1", "t"), ev.Relation("C D", "2", "u")]
        assert ev.co_metric(rels, list(rels)) == 100.0

    def test_single_transposition_on_length_two(self):
        a = [ev.Relation("A B", "1", "t"), ev.Relation("C D", "2", "u")]
        b = [a[1], a[0]]
        assert ev.co_metric(a, b) == 50.0

    def test_empty_pair(self):
        assert ev.co_metric([], []) == 100.0


class TestBleu:
    def test_identity_is_100(self):
        corpus = [["the", "cat", "sat", "on", "the", "mat"], ["a", "b", "c", "d", "e"]]
        assert ev.bleu(corpus, corpus) == pytest.approx(100.0)

    def test_disjoint_unigrams_is_zero(self):
        assert ev.bleu([["x", "y", "z", "w"]], [["a", "b", "c", "d"]]) == 0.0

    def test_hand_computed_fixture(self):
        # Modified precisions, worked by hand:
        #   p1 = 8/10, p2 = 5/8, p3 = 3/6, p4 = 1/4
        #   geometric mean = (.8*.625*.5*.25)^(1/4) = (1/16)^(1/4) = 0.5
        #   BP = exp(1 - 11/10) since cand 10 tokens vs ref 11
        cands = [["the", "cat", "sat", "on", "the", "mat"], ["a", "quick", "brown", "fox"]]
        refs = [["the", "cat", "sat", "on", "a", "mat"], ["the", "quick", "brown", "fox", "jumps"]]
        expected = 100.0 * math.exp(1.0 - 11.0 / 10.0) * 0.5
        assert ev.bleu(cands, refs) == pytest.approx(expected, abs=1e-9)

    def test_brevity_penalty_only_when_short(self):
        # candidate longer than reference: BP = 1; precisions by hand are
        # p1 = 4/6, p2 = 3/5, p3 = 2/4, p4 = 1/3
        long_pair = ev.bleu([["a", "b", "c", "d", "e", "f"]], [["a", "b", "c", "d"]])
        assert long_pair == pytest.approx(
            100.0 * (4 / 6 * 3 / 5 * 2 / 4 * 1 / 3) ** (1 / 4), abs=1e-9)

    def test_rejects_mismatched_corpora(self):
        with pytest.raises(ValueError):
            ev.bleu([["a"]], [])


class TestReportFormatting:
    def test_table_layout(self):
        rep = ev.EvalReport(3.0, 1.0, 0.5, 0.25, 80.0, 12.5, n_instances=4)
        text = ev.format_report_table([("edcc", rep), ("+Hier", rep)])
        lines = text.splitlines()
        assert len(lines) == 3
        assert lines[0].split() == ["system", "RG#", "RG", "P%", "CS", "P%", "CS", "R%", "CO", "BLEU"]
        assert lines[1].split()[0] == "edcc"
        assert lines[1].split()[1:] == ["3.00", "100.00", "50.00", "25.00", "80.00", "12.50"]
