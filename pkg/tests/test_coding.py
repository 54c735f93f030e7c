import pytest

from cgtkit.annotation import ExcludedTopic, FinalTopic, FinalTopicSet
from cgtkit.base import ValidationError
from cgtkit.coding import (
    coding_load_report,
    export_coding_sheets,
    load_sheet,
    posts_from_tree,
    record_coding,
    save_sheets,
    sheet_from_dict,
    sheet_to_dict,
)
from cgtkit.corpus import Corpus, Document


def corpus_with_lengths(lengths):
    docs = tuple(
        Document(id=f"d{i:04d}", source="s", text=" ".join(["w"] * n))
        for i, n in enumerate(lengths)
    )
    return Corpus(documents=docs)


def final_set_of(topic_ids, parents=None):
    parents = parents or {}
    return FinalTopicSet(
        retained=tuple(
            FinalTopic(topic_id=t, parent_id=parents.get(t), label=t,
                       label_candidates=(t,))
            for t in topic_ids
        ),
        excluded=(),
    )


class TestLoadReport:
    def test_totals_and_stats(self):
        corpus = corpus_with_lengths([7])
        report = coding_load_report({"T1": ["d0000"]}, corpus, 1)
        assert report.total_posts == 1
        assert report.token_min == report.token_max == 7
        assert report.token_mean == 7

    def test_fifty_five_topics_times_ten(self):
        lengths = [20] * 550
        corpus = corpus_with_lengths(lengths)
        posts = {
            f"T{t:02d}": [f"d{t * 10 + i:04d}" for i in range(10)]
            for t in range(55)
        }
        report = coding_load_report(posts, corpus, 10)
        assert report.topic_count == 55
        assert report.total_posts == 550

    def test_engineered_fixture_matches_target_statistics(self):
        """550 posts with min 11, mean 165 and exactly 13 over 512 tokens."""
        lengths = [600] * 13 + [11]
        remaining = 550 - len(lengths)
        budget = 550 * 165 - sum(lengths)
        base = budget // remaining
        extra = budget - base * remaining
        lengths += [base + 1] * extra + [base] * (remaining - extra)
        assert sum(lengths) == 550 * 165 and len(lengths) == 550
        corpus = corpus_with_lengths(lengths)
        posts = {
            f"T{t:02d}": [f"d{t * 10 + i:04d}" for i in range(10)]
            for t in range(55)
        }
        report = coding_load_report(posts, corpus, 10, token_ceiling=512)
        assert report.total_posts == 550
        assert report.token_min == 11
        assert report.token_mean == pytest.approx(165.0)
        assert report.over_ceiling == 13

    def test_clamped_by_availability(self):
        corpus = corpus_with_lengths([5, 5])
        report = coding_load_report({"T1": ["d0000", "d0001"]}, corpus, 10)
        assert report.total_posts == 2

    def test_empty_selection_rejected(self):
        corpus = corpus_with_lengths([5])
        with pytest.raises(ValidationError, match="no posts"):
            coding_load_report({}, corpus, 10)

    def test_preprocessed_corpus_uses_token_lists(self):
        from cgtkit.corpus import PreprocessConfig, preprocess
        raw = Corpus(documents=(
            Document(id="d0", source="s", text="The booked classes!!"),
        ))
        corpus = preprocess(raw, PreprocessConfig(stopwords=frozenset({"the"})))
        report = coding_load_report({"T1": ["d0"]}, corpus, 1)
        assert report.token_min == 2  # "book", "class"


class TestPostsFromTree:
    def test_uses_tree_rankings(self):
        from cgtkit.qdtm.model import MainTopic, Subtopic, TopicTree, _rebuild
        sub = Subtopic(id="M01.S01", prevalence=0.0, token_count=6,
                       term_counts={0: 6}, doc_counts={0: 4, 1: 2})
        main = MainTopic(id="M01", label="x", prevalence=0.0, token_count=0)
        skeleton = TopicTree(mains=(), total_tokens=0, terms=("t",),
                             doc_ids=("a", "b"))
        tree = _rebuild(skeleton, [(main, [sub])], pruned=True, deduped=True)
        final = final_set_of(["M01", "M01.S01"], {"M01.S01": "M01"})
        posts = posts_from_tree(tree, final, 2)
        assert posts["M01.S01"] == ["a", "b"]

    def test_unknown_topic_rejected(self):
        from cgtkit.qdtm.model import TopicTree
        tree = TopicTree(mains=(), total_tokens=0, terms=(), doc_ids=())
        with pytest.raises(ValidationError, match="absent from tree"):
            posts_from_tree(tree, final_set_of(["T9"]), 5)


class TestSheets:
    def build(self):
        corpus = corpus_with_lengths([4, 4, 4])
        final = final_set_of(
            ["M01", "M01.S01", "M01.S02"],
            {"M01.S01": "M01", "M01.S02": "M01"},
        )
        posts = {
            "M01": ["d0000"], "M01.S01": ["d0001"], "M01.S02": ["d0002"],
        }
        return export_coding_sheets(final, posts, corpus, {"M01": "payments"})

    def test_group_header_shared(self):
        sheets = self.build()
        assert len(sheets) == 3
        assert {s.group for s in sheets} == {"M01"}
        assert {s.group_label for s in sheets} == {"payments"}

    def test_record_appends_with_timestamp(self):
        sheet = self.build()[0]
        updated = record_coding(
            sheet,
            [{"post_id": "d0000", "focused_code": "persisting",
              "sub_codes": ["redditting"], "memo": "note"}],
            timestamp="2024-05-01T10:00:00Z",
        )
        assert len(updated.entries) == 1
        assert updated.entries[0].timestamp == "2024-05-01T10:00:00Z"
        assert updated.status == "in_progress"
        again = record_coding(updated, [{"post_id": "d0000"}], "2024-05-01T11:00:00Z")
        assert len(again.entries) == 2    # append-only

    def test_unknown_post_rejected(self):
        sheet = self.build()[0]
        with pytest.raises(ValidationError, match="unknown post"):
            record_coding(sheet, [{"post_id": "ghost"}], "t")

    def test_export_deterministic(self, tmp_path):
        sheets = self.build()
        first = save_sheets(sheets, tmp_path / "a")
        second = save_sheets(sheets, tmp_path / "b")
        for p1, p2 in zip(first, second):
            assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip(self, tmp_path):
        sheet = record_coding(
            self.build()[0], [{"post_id": "d0000", "memo": "m"}], "t0"
        )
        assert sheet_from_dict(sheet_to_dict(sheet)) == sheet
        paths = save_sheets([sheet], tmp_path)
        assert load_sheet(paths[0]) == sheet
