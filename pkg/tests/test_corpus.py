import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from picosum.corpus import (
    RULE_CATEGORIES,
    CleaningRules,
    DataError,
    Review,
    StatsReport,
    clean_abstract,
    clean_document,
    concat_with_separators,
    dataset_stats,
    load_reviews,
    merge_stats,
)
from picosum.tokenizer import WordTokenizer


class TestCleanDocument:
    def test_trial_registration_removed(self, rules):
        assert clean_document("Outcomes improved. Trial registration: NCT01234567.", rules) == "Outcomes improved. "

    def test_plain_text_untouched(self, rules):
        text = "Magnesium sulfate reduced risk."
        assert clean_document(text, rules) == text

    def test_hyperlink_removed(self, rules):
        assert clean_document("Full text at https://example.org/trial1 here.", rules) == "Full text at  here."

    def test_empty(self, rules):
        assert clean_document("", rules) == ""

    @pytest.mark.parametrize(
        "raw, expected",
        [
            ("Results were good. This study was funded by the NIH grant 12.", "Results were good. "),
            ("Results were good. Funding: British Heart Foundation.", "Results were good. "),
            ("Results were good. Copyright © 2003 Elsevier Inc. All rights reserved.", "Results were good. "),
            ("Results were good. Published in Obstet Gynecol 2004; 103: 1-5.", "Results were good. "),
            ("Results were good. doi: 10.1000/jd.2001.55.", "Results were good. "),
            ("Registered as ISRCTN12345678 and ACTRN12610000123456.", "Registered as  and "),
            ("See www.cochrane.org, then stop.", "See , then stop."),
        ],
    )
    def test_each_category(self, rules, raw, expected):
        assert clean_document(raw, rules) == expected

    def test_supported_by_evidence_is_not_funding(self, rules):
        text = "The conclusion is supported by evidence from two trials."
        assert clean_document(text, rules) == text

    def test_fixture_corpus_idempotent(self, rules, reviews):
        for review in reviews:
            for abstract in review.abstracts:
                once = clean_document(abstract, rules)
                assert clean_document(once, rules) == once

    @given(st.text(alphabet="abcNT0123456789.:/ htpsw", max_size=80))
    def test_idempotent_random(self, text):
        rules = CleaningRules.default()
        once = clean_document(text, rules)
        assert clean_document(once, rules) == once
        assert len(once) <= len(text)

    @given(st.lists(st.sampled_from(["Pain fell. ", "NCT01234567", " https://a.org/x ", "Funding: MRC.", "ok "]), max_size=8))
    def test_conservation(self, parts):
        # kept characters form a subsequence of the input, in order
        rules = CleaningRules.default()
        raw = "".join(parts)
        out = clean_document(raw, rules)
        it = iter(raw)
        assert all(ch in it for ch in out)


class TestCleaningRules:
    def test_default_covers_all_categories(self, rules):
        assert [r.name for r in rules.rules] == list(RULE_CATEGORIES)
        assert rules.version == "1.0"

    def test_missing_category_rejected(self):
        data = {"rules": [{"name": "hyperlink", "pattern": "x"}]}
        with pytest.raises(DataError, match="missing"):
            CleaningRules.from_dict(data)

    def test_order_field_respected(self, tmp_path):
        rules = [{"name": n, "pattern": "zzz", "order": i} for i, n in enumerate(reversed(RULE_CATEGORIES))]
        path = tmp_path / "rules.json"
        path.write_text(json.dumps({"version": "t", "rules": rules}))
        loaded = CleaningRules.load(path)
        assert [r.name for r in loaded.rules] == list(reversed(RULE_CATEGORIES))

    def test_clean_abstract_collapses_whitespace(self, rules):
        assert clean_abstract("Full text at https://example.org/trial1 here.", rules) == "Full text at here."


class TestConcat:
    def test_two_docs(self):
        assert concat_with_separators(["A.", "B."], "<doc-sep>") == "A. <doc-sep> B. <doc-sep>"

    def test_single_doc(self):
        assert concat_with_separators(["A."]) == "A. <doc-sep>"

    def test_empty_is_error(self):
        with pytest.raises(DataError):
            concat_with_separators([])

    @given(st.lists(st.text(alphabet="abc .", max_size=10), min_size=1, max_size=6))
    def test_separator_count(self, docs):
        out = concat_with_separators(docs)
        assert out.count("<doc-sep>") == len(docs)


class TestLoadReviews:
    def test_fixture(self, reviews):
        assert [r.review_id for r in reviews] == ["CD000001", "CD000002", "CD000003", "CD000004"]
        assert reviews[3].target_summary is None
        assert reviews[0].objectives.startswith("To assess")

    def test_two_lines(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text(
            '{"review_id": "a", "target": "t", "abstracts": ["x"]}\n\n{"review_id": "b", "abstracts": ["y", "z"]}\n'
        )
        loaded = load_reviews(path)
        assert [r.review_id for r in loaded] == ["a", "b"]
        assert loaded[1].target_summary is None

    def test_truncated_line_reports_line_number(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text('{"review_id": "a", "abstracts": ["x"]}\n{"review_id": "b", "abstr\n')
        with pytest.raises(DataError, match=r"r\.jsonl:2"):
            load_reviews(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            load_reviews(tmp_path / "nope.jsonl")

    def test_missing_field(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text('{"review_id": "a"}\n')
        with pytest.raises(DataError, match="abstracts"):
            load_reviews(path)

    def test_empty_id_rejected(self):
        with pytest.raises(DataError):
            Review("", ("x",))


class TestDatasetStats:
    def test_hand_counted(self, rules):
        # 10 and 20 whitespace-separated words, no punctuation
        reviews = [
            Review("a", (" ".join(["w"] * 4), " ".join(["w"] * 6)), target_summary="one two three"),
            Review("b", (" ".join(["w"] * 20),), target_summary="one"),
        ]
        spans = {"a": {0: [1, 2], 1: [3], -1: [4]}, "b": {0: [1, 2, 3, 4, 5]}}
        report = dataset_stats(reviews, spans, WordTokenizer(), rules)
        assert report.sample_count == 2
        assert report.avg_input_length == 15
        assert report.avg_summary_length == 2
        assert report.avg_pico_spans_input == 4
        assert report.avg_pico_spans_summary == 0.5

    def test_no_targets(self, rules):
        report = dataset_stats([Review("a", ("x y",))], {}, WordTokenizer(), rules)
        assert report.avg_summary_length is None
        assert report.avg_pico_spans_summary is None
        assert report.rounded()["avg_summary_length"] is None
        assert "n/a" in report.to_table()

    def test_empty_is_error(self, rules):
        with pytest.raises(DataError):
            dataset_stats([], {}, WordTokenizer(), rules)

    def test_union_is_weighted_combination(self, reviews, span_index, rules):
        tok = WordTokenizer()
        left, right = reviews[:1], reviews[1:]
        whole = dataset_stats(reviews, span_index, tok, rules)
        merged = merge_stats(dataset_stats(left, span_index, tok, rules), dataset_stats(right, span_index, tok, rules))
        assert merged.sample_count == whole.sample_count
        for key in ("avg_input_length", "avg_summary_length", "avg_pico_spans_input", "avg_pico_spans_summary"):
            assert getattr(merged, key) == pytest.approx(getattr(whole, key), rel=1e-12)

    def test_rounding_and_json(self):
        report = StatsReport(3, 2416.6, 212.5, 68.4, 4.49)
        assert json.loads(report.to_json()) == {
            "sample_count": 3,
            "avg_input_length": 2417,
            "avg_summary_length": 68,
            "avg_pico_spans_input": 213,
            "avg_pico_spans_summary": 4,
        }
