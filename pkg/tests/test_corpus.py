import json

import numpy as np
import pytest

from newsbench.corpus import (
    Article,
    Dataset,
    RuleSet,
    balance_ratio,
    bootstrap_label,
    compute_stats,
    load_dataset,
    load_split_manifest,
    load_stopwords,
    split,
    tokenize_words,
    write_split_manifest,
)
from newsbench.errors import DatasetError, RuleError

from conftest import make_synthetic_dataset, write_jsonl

PHASE_PATTERN = r"(C|clinical\s)?((phases?|stages?)\s)([1-4IV/]{1,3})"


class TestLoadDataset:
    def test_three_line_file(self, tmp_path):
        p = tmp_path / "d.jsonl"
        rows = [
            {"id": "x1", "title": "One", "body": "b", "category": "A"},
            {"id": "x2", "title": "Two", "body": "", "category": "B"},
            {"id": "x3", "title": "Three", "body": "c", "category": None},
        ]
        p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        ds = load_dataset(p)
        assert len(ds) == 3
        assert ds.labels == ["A", "B"]
        assert ds.by_id["x3"].category is None

    def test_duplicate_id_named(self, tmp_path):
        p = tmp_path / "d.jsonl"
        row = {"id": "a1", "title": "T", "body": "", "category": "A"}
        p.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
        with pytest.raises(DatasetError, match="a1"):
            load_dataset(p)

    def test_empty_file_gives_empty_dataset(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text("")
        ds = load_dataset(p)
        assert len(ds) == 0
        with pytest.raises(DatasetError):
            compute_stats(ds, frozenset())

    def test_malformed_line_reports_line_number(self, tmp_path):
        p = tmp_path / "d.jsonl"
        good = json.dumps({"id": "a", "title": "T", "body": "", "category": "A"})
        p.write_text(good + "\n{not json\n")
        with pytest.raises(DatasetError, match=":2"):
            load_dataset(p)

    def test_missing_title_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text(json.dumps({"id": "a", "title": "", "body": "x", "category": "A"}) + "\n")
        with pytest.raises(DatasetError, match=":1"):
            load_dataset(p)


class TestComputeStats:
    def test_hand_counted_stop_split(self):
        ds = Dataset([Article(id="a", title="The cat sat", body="", category="X"),
                      Article(id="b", title="filler", body="", category="Y")])
        rows = compute_stats(ds, frozenset({"the"}))
        x = next(r for r in rows if r.category == "X")
        assert x.nonstop_mean == 2.0
        assert x.stop_mean == 1.0

    def test_single_article_degenerate(self):
        ds = Dataset([Article(id="a", title="word", body="", category="X")])
        rows = compute_stats(ds, frozenset())
        x = rows[0]
        assert x.nonstop_min == x.nonstop_max == 1
        assert x.nonstop_median == 1.0
        assert x.nonstop_std == 0.0
        assert x.char_min == x.char_max == len("word")

    def test_total_row_layout(self):
        ds = make_synthetic_dataset(docs_per_class=5, seed=3)
        rows = compute_stats(ds, load_stopwords())
        assert rows[-1].category == "Total"
        assert rows[-1].items == len(ds)

    def test_totals_match_brute_force_recount(self):
        ds = make_synthetic_dataset(docs_per_class=30, seed=5)
        stop = load_stopwords()
        rows = compute_stats(ds, stop)
        total = rows[-1]
        assert total.items == sum(r.items for r in rows[:-1])
        # brute force over every article
        per_article = []
        for art in ds.articles:
            words = tokenize_words(art.text())
            per_article.append(sum(1 for w in words if w not in stop))
        assert total.nonstop_min == min(per_article)
        assert total.nonstop_max == max(per_article)
        assert total.nonstop_mean == pytest.approx(np.mean(per_article))

    def test_unlabeled_article_rejected(self):
        ds = Dataset([Article(id="a", title="t", body="", category=None)])
        with pytest.raises(DatasetError):
            compute_stats(ds, frozenset())


class TestBalanceRatio:
    @staticmethod
    def _counts_dataset(counts: dict[str, int]) -> Dataset:
        arts = []
        for cat, n in counts.items():
            for i in range(n):
                arts.append(Article(id=f"{cat}{i}", title="t", body="", category=cat))
        return Dataset(arts)

    def test_reproduces_published_ratio(self):
        ds = self._counts_dataset({"JobBizLaw": 665, "PV-Reg": 182})
        rep = balance_ratio(ds)
        assert round(rep.ratio, 2) == 3.65
        assert rep.max_category == "JobBizLaw"
        assert rep.min_category == "PV-Reg"
        assert rep.within_bound

    def test_equal_sizes(self):
        ds = self._counts_dataset({"A": 7, "B": 7, "C": 7})
        assert balance_ratio(ds).ratio == 1.0

    def test_bound_violation_flagged(self):
        ds = self._counts_dataset({"A": 801, "B": 200})
        rep = balance_ratio(ds)
        assert rep.ratio == pytest.approx(4.005)
        assert not rep.within_bound

    def test_invariant_under_reordering(self):
        ds = make_synthetic_dataset(docs_per_class=10, seed=2)
        rev = Dataset(list(reversed(ds.articles)))
        assert balance_ratio(ds).ratio == balance_ratio(rev).ratio

    def test_single_category_rejected(self):
        ds = self._counts_dataset({"A": 3})
        with pytest.raises(DatasetError):
            balance_ratio(ds)


class TestBootstrapLabel:
    def setup_method(self):
        self.rules = RuleSet({"C3": [PHASE_PATTERN]})

    def test_clinical_phase_matches(self):
        art = Article(id="a", title="clinical phase 3 trial begins", body="")
        hits = bootstrap_label(self.rules, art)
        assert len(hits) == 1
        assert hits[0].category == "C3"
        assert hits[0].text == "clinical phase 3"

    def test_documented_false_positive(self):
        art = Article(id="a", title="disease stage 2 melanoma", body="")
        hits = bootstrap_label(self.rules, art)
        assert len(hits) == 1
        assert hits[0].text == "stage 2"

    def test_documented_false_negative(self):
        art = Article(id="a", title="early phase trial announced", body="")
        assert bootstrap_label(self.rules, art) == []

    def test_no_match_empty_list(self):
        art = Article(id="a", title="nothing relevant here", body="")
        assert bootstrap_label(self.rules, art) == []

    def test_rule_order_within_category_irrelevant(self):
        art = Article(id="a", title="phase 2 and stage 3 news", body="")
        fwd = RuleSet({"C": [r"phases?\s[1-4]", r"stages?\s[1-4]"]})
        rev = RuleSet({"C": [r"stages?\s[1-4]", r"phases?\s[1-4]"]})
        assert bootstrap_label(fwd, art) == bootstrap_label(rev, art)

    def test_bad_pattern_rejected(self):
        with pytest.raises(RuleError, match="C3"):
            RuleSet({"C3": ["("]})

    def test_multi_category_candidates(self):
        rules = RuleSet({"A": ["cat"], "B": ["dog"]})
        art = Article(id="a", title="cat meets dog", body="")
        cats = {h.category for h in bootstrap_label(rules, art)}
        assert cats == {"A", "B"}


class TestSplit:
    def test_reference_corpus_sizes(self):
        arts = [Article(id=f"a{i}", title="t", body="", category="X") for i in range(7686)]
        s = split(Dataset(arts), seed=1)
        assert (len(s.train), len(s.validation), len(s.test)) == (3843, 1921, 1922)

    def test_same_seed_identical(self, synthetic_small):
        a = split(synthetic_small, seed=17)
        b = split(synthetic_small, seed=17)
        assert a == b

    def test_n4_floor_arithmetic(self):
        arts = [Article(id=f"a{i}", title="t", body="") for i in range(4)]
        s = split(Dataset(arts), seed=0)
        assert (len(s.train), len(s.validation), len(s.test)) == (2, 1, 1)

    def test_disjoint_and_exhaustive(self, synthetic_small):
        for seed in (0, 1, 99):
            s = split(synthetic_small, seed=seed)
            parts = set(s.train) | set(s.validation) | set(s.test)
            assert len(s.train) + len(s.validation) + len(s.test) == len(synthetic_small)
            assert parts == set(synthetic_small.by_id)

    def test_stratified_respects_per_category_rule(self, synthetic_small):
        s = split(synthetic_small, seed=3, stratify=True)
        by_cat_train = {}
        for art_id in s.train:
            cat = synthetic_small.by_id[art_id].category
            by_cat_train[cat] = by_cat_train.get(cat, 0) + 1
        for cat in synthetic_small.labels:
            assert by_cat_train[cat] == 10  # floor(0.5 * 20)

    def test_too_small_rejected(self):
        arts = [Article(id="a", title="t", body=""), Article(id="b", title="t", body="")]
        with pytest.raises(DatasetError):
            split(Dataset(arts), seed=0)

    def test_bad_ratios_rejected(self, synthetic_small):
        with pytest.raises(DatasetError):
            split(synthetic_small, seed=0, ratios=(0.5, 0.5, 0.5))
        with pytest.raises(DatasetError):
            split(synthetic_small, seed=0, ratios=(0.6, 0.4, 0.0))

    def test_manifest_roundtrip_byte_identical(self, tmp_path, synthetic_small):
        s = split(synthetic_small, seed=17)
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        write_split_manifest(s, p1)
        write_split_manifest(split(synthetic_small, seed=17), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert load_split_manifest(p1) == s


class TestStopwords:
    def test_shipped_list_loads(self):
        stop = load_stopwords()
        assert "the" in stop
        assert len(stop) > 100

    def test_jsonl_roundtrip(self, tmp_path, tiny_dataset):
        p = write_jsonl(tiny_dataset, tmp_path / "d.jsonl")
        ds = load_dataset(p)
        assert [a.id for a in ds.articles] == [a.id for a in tiny_dataset.articles]


class TestTokenizeWords:
    def test_examples(self):
        assert tokenize_words("The cat sat") == ["the", "cat", "sat"]
        assert tokenize_words("Phase-3 trial (2024)!") == ["phase", "3", "trial", "2024"]
        assert tokenize_words("") == []
