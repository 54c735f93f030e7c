import itertools
import math
import random

import numpy as np
import pytest

from cgtkit.base import ValidationError
from cgtkit.corpus import Corpus, Document, PreprocessConfig, preprocess
from cgtkit.qdtm import (
    ConceptTermSet,
    EmbeddingTable,
    QueryDrivenTopicModel,
    SkipGramEmbedder,
    build_concept_set,
    bundle_from_dict,
    bundle_to_dict,
    dedupe,
    expand_embedding,
    expand_frequency,
    expand_kld,
    export_annotation_bundle,
    export_bundle_csv,
    prune_tree,
    save_tree,
    load_tree,
    tree_from_dict,
    tree_to_dict,
)
from cgtkit.qdtm.model import MainTopic, Subtopic, TopicTree


def build_corpus(token_lists, texts=None):
    docs = tuple(
        Document(
            id=f"d{i}",
            source="s",
            text=texts[i] if texts else " ".join(toks),
        )
        for i, toks in enumerate(token_lists)
    )
    return preprocess(Corpus(documents=docs), PreprocessConfig(lemmatize=False))


# ---------------------------------------------------------------------------
# Expansion oracles

def brute_frequency(seeds, corpus):
    matching = [
        set(corpus.doc_terms(doc))
        for doc in corpus.documents
        if set(seeds) & set(corpus.doc_terms(doc))
    ]
    counts = {}
    for terms in matching:
        for t in terms - set(seeds):
            counts[t] = counts.get(t, 0) + 1
    return sorted(
        counts, key=lambda t: (-counts[t], corpus.vocabulary.id_of(t))
    )


def brute_kld(seeds, corpus):
    V = len(corpus.vocabulary)
    r_tokens, c_tokens = [], []
    for doc in corpus.documents:
        terms = corpus.doc_terms(doc)
        c_tokens.extend(terms)
        if set(seeds) & set(terms):
            r_tokens.extend(terms)
    scores = {}
    for term in corpus.vocabulary.terms:
        if term in seeds:
            continue
        p_r = (r_tokens.count(term) + 1) / (len(r_tokens) + V)
        p_c = (c_tokens.count(term) + 1) / (len(c_tokens) + V)
        s = p_r * math.log(p_r / p_c)
        if s > 0:
            scores[term] = s
    return sorted(
        scores.items(),
        key=lambda kv: (-kv[1], corpus.vocabulary.id_of(kv[0])),
    )


class TestExpandFrequency:
    def test_max_cooccurrence_ranks_first(self):
        corpus = build_corpus([
            ["seed", "always"], ["seed", "always"], ["seed", "always", "rare"],
            ["other"],
        ])
        ranked = expand_frequency(["seed"], corpus, 10)
        assert ranked[0][0] == "always"
        assert ranked[0][1] == 3

    def test_never_cooccurring_excluded(self):
        corpus = build_corpus([["seed", "with"], ["alone"]])
        terms = [t for t, _ in expand_frequency(["seed"], corpus, 10)]
        assert "alone" not in terms

    def test_matches_brute_force(self):
        rng = random.Random(0)
        vocab = [f"w{i}" for i in range(30)]
        token_lists = [
            [rng.choice(vocab) for _ in range(rng.randint(2, 10))] for _ in range(5)
        ]
        corpus = build_corpus(token_lists)
        seeds = ["w0", "w1"]
        got = [t for t, _ in expand_frequency(seeds, corpus, 100)]
        assert got == brute_frequency(seeds, corpus)

    def test_no_seed_in_corpus(self):
        corpus = build_corpus([["a"]])
        with pytest.raises(ValidationError, match="no seed"):
            expand_frequency(["zz"], corpus, 5)


class TestExpandKld:
    def test_r_equals_corpus_gives_empty(self):
        corpus = build_corpus([["seed", "x"], ["seed", "y"]])
        assert expand_kld(["seed"], corpus, 10) == []

    def test_term_only_inside_r_positive(self):
        corpus = build_corpus([["seed", "inside"], ["outside"], ["outside"]])
        ranked = dict(expand_kld(["seed"], corpus, 10))
        assert ranked.get("inside", 0) > 0
        assert "outside" not in ranked

    def test_matches_brute_force_six_docs(self):
        rng = random.Random(7)
        vocab = [f"w{i}" for i in range(25)]
        token_lists = [
            [rng.choice(vocab) for _ in range(rng.randint(3, 12))] for _ in range(6)
        ]
        corpus = build_corpus(token_lists)
        seeds = ["w3"]
        if corpus.vocabulary.id_of("w3") is None:
            pytest.skip("seed absent in sampled fixture")
        got = expand_kld(seeds, corpus, 100)
        expected = brute_kld(seeds, corpus)
        assert [t for t, _ in got] == [t for t, _ in expected]
        for (_, a), (_, b) in zip(got, expected):
            assert abs(a - b) < 1e-15


class TestEmbeddings:
    def test_deterministic(self):
        corpus = build_corpus([["a", "b", "c", "d"]] * 4)
        t1 = SkipGramEmbedder(dim=8, epochs=2, seed=3).fit(corpus).table_
        t2 = SkipGramEmbedder(dim=8, epochs=2, seed=3).fit(corpus).table_
        assert (t1.vectors == t2.vectors).all()

    def test_self_cosine_is_one(self):
        corpus = build_corpus([["a", "b", "c"]] * 3)
        table = SkipGramEmbedder(dim=6, epochs=2, seed=0).fit(corpus).table_
        for term in table.terms:
            assert abs(table.cosine(term, term) - 1.0) < 1e-9

    def test_finite_vectors(self):
        corpus = build_corpus([["a", "b"], ["b", "c"]])
        table = SkipGramEmbedder(dim=4, epochs=3, seed=1).fit(corpus).table_
        assert np.isfinite(table.vectors).all()

    def test_dim_too_small(self):
        corpus = build_corpus([["a", "b"]])
        with pytest.raises(ValidationError, match="dim"):
            SkipGramEmbedder(dim=1).fit(corpus)

    def test_sublanguage_separation(self):
        rng = random.Random(5)
        lang_a = [f"a{i}" for i in range(8)]
        lang_b = [f"b{i}" for i in range(8)]
        token_lists = []
        for i in range(60):
            lang = lang_a if i % 2 == 0 else lang_b
            token_lists.append([rng.choice(lang) for _ in range(12)])
        corpus = build_corpus(token_lists)
        table = SkipGramEmbedder(dim=16, window=4, epochs=8, seed=2).fit(corpus).table_
        within, across = [], []
        for x, y in itertools.combinations(lang_a + lang_b, 2):
            sim = table.cosine(x, y)
            if (x in lang_a) == (y in lang_a):
                within.append(sim)
            else:
                across.append(sim)
        assert np.mean(within) > np.mean(across)


class TestExpandEmbedding:
    def make_table(self, vectors):
        terms = tuple(sorted(vectors))
        mat = np.array([vectors[t] for t in terms], dtype=float)
        return EmbeddingTable(dim=mat.shape[1], terms=terms, vectors=mat, params={})

    def test_single_seed_ranking(self):
        table = self.make_table({
            "seed": [1.0, 0.0],
            "near": [0.9, 0.1],
            "far": [-1.0, 0.0],
            "mid": [0.0, 1.0],
        })
        ranked = [t for t, _ in expand_embedding(["seed"], table, 3)]
        assert ranked == ["near", "mid", "far"]

    def test_seed_never_in_output(self):
        table = self.make_table({"s1": [1, 0], "s2": [0, 1], "w": [1, 1]})
        out = [t for t, _ in expand_embedding(["s1", "s2"], table, 5)]
        assert "s1" not in out and "s2" not in out

    def test_matches_brute_force_ten_terms(self):
        rng = np.random.default_rng(4)
        vectors = {f"t{i}": rng.normal(size=5).tolist() for i in range(10)}
        table = self.make_table(vectors)
        seeds = ["t0", "t4"]
        got = expand_embedding(seeds, table, 20)
        centroid = np.mean([vectors["t0"], vectors["t4"]], axis=0)

        def cos(a, b):
            return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))

        brute = sorted(
            ((t, cos(v, centroid)) for t, v in vectors.items() if t not in seeds),
            key=lambda kv: (-kv[1], table.terms.index(kv[0])),
        )
        assert [t for t, _ in got] == [t for t, _ in brute]
        for (_, a), (_, b) in zip(got, brute):
            assert abs(a - b) < 1e-12

    def test_missing_seed_skipped_with_warning(self):
        table = self.make_table({"s": [1, 0], "w": [0, 1]})
        with pytest.warns(UserWarning, match="missing"):
            out = expand_embedding(["s", "ghost"], table, 5)
        assert out

    def test_all_seeds_missing(self):
        table = self.make_table({"w": [1, 0], "v": [0, 1]})
        with pytest.raises(ValidationError, match="none of the seed"):
            expand_embedding(["ghost"], table, 5)


class TestBuildConceptSet:
    def test_seeds_only(self):
        cs = build_concept_set("T01", "Payments", ["pay", "rate"], {})
        assert set(cs.terms) == {"pay", "rate"}
        assert all(w > 0 for w in cs.weights.values())

    def test_union_semantics(self):
        cs = build_concept_set(
            "T01", "x", ["s"],
            {
                "frequency": [("w", 4.0)],
                "kld": [("w", 0.2)],
                "embedding": [("w", 0.9)],
            },
        )
        assert list(cs.weights) .count("w") == 1
        sources = {src for term, src, _ in cs.expanded if term == "w"}
        assert sources == {"frequency", "kld", "embedding"}

    def test_caps_respected(self):
        expansions = {
            "frequency": [(f"f{i}", 10.0 - i) for i in range(10)],
            "kld": [(f"k{i}", 1.0 - i / 10) for i in range(10)],
            "embedding": [(f"e{i}", 0.9 - i / 100) for i in range(10)],
        }
        cs = build_concept_set(
            "T01", "x", ["s"], expansions, caps={"frequency": 3, "kld": 3, "embedding": 3}
        )
        expanded_terms = set(cs.terms) - {"s"}
        assert len(expanded_terms) <= 9
        recount = {t for src in expansions for t, _ in expansions[src][:3]}
        assert expanded_terms == recount

    def test_seed_gets_max_weight(self):
        cs = build_concept_set(
            "T01", "x", ["s"],
            {"frequency": [("w", 5.0), ("v", 1.0)]},
        )
        assert cs.weights["s"] >= max(w for t, w in cs.weights.items() if t != "s")

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError, match="negative"):
            build_concept_set("T", "x", ["s"], {}, source_weights={"kld": -1})


# ---------------------------------------------------------------------------
# The seeded sampler

SEED_SETS = {
    "pay": [f"pay{i}" for i in range(6)],
    "class": [f"class{i}" for i in range(6)],
    "tech": [f"tech{i}" for i in range(6)],
}


def seeded_corpus(n_docs=120, doc_len=30, rng_seed=11, sub_themes=1):
    """Each doc draws 80% of tokens from one seed set; optional sub-themes
    split each main topic's noise vocabulary into disjoint clusters."""
    rng = random.Random(rng_seed)
    names = list(SEED_SETS)
    noise = {
        name: [
            [f"{name}x{s}_{i}" for i in range(8)] for s in range(sub_themes)
        ]
        for name in names
    }
    token_lists = []
    for d in range(n_docs):
        name = names[d % len(names)]
        theme = noise[name][(d // len(names)) % sub_themes]
        toks = []
        for _ in range(doc_len):
            if rng.random() < 0.8:
                toks.append(rng.choice(SEED_SETS[name]))
            else:
                toks.append(rng.choice(theme))
        token_lists.append(toks)
    return build_corpus(token_lists)


def concept_sets():
    return [
        build_concept_set(f"T{i + 1:02d}", name, SEED_SETS[name], {})
        for i, name in enumerate(SEED_SETS)
    ]


@pytest.fixture(scope="module")
def fitted_tree():
    corpus = seeded_corpus()
    model = QueryDrivenTopicModel(iterations=80, seed=21).fit(corpus, concept_sets())
    return corpus, model.tree_


class TestQdtmFit:
    def test_seed_terms_dominate_top_terms(self, fitted_tree):
        _, tree = fitted_tree
        for main, name in zip(tree.mains, SEED_SETS):
            top10 = {t for t, _ in main.top_terms[:10]}
            assert len(top10 & set(SEED_SETS[name])) >= 5

    def test_documents_majority_assign_to_their_main(self, fitted_tree):
        corpus, tree = fitted_tree
        names = list(SEED_SETS)
        hits = 0
        for d in range(len(corpus)):
            expected_main = tree.mains[d % 3]
            counts = {
                m.id: m.doc_counts.get(d, 0) for m in tree.mains
            }
            best = max(counts, key=lambda k: (counts[k], k))
            hits += best == expected_main.id
        assert hits / len(corpus) >= 0.8
        assert names  # fixture sanity

    def test_prevalence_accounting(self, fitted_tree):
        _, tree = fitted_tree
        assert abs(sum(m.prevalence for m in tree.mains) - 1.0) < 1e-9
        for main in tree.mains:
            assert abs(
                sum(s.prevalence for s in main.subtopics) - main.prevalence
            ) < 1e-9

    def test_deterministic(self):
        corpus = seeded_corpus(n_docs=30, doc_len=12)
        t1 = QueryDrivenTopicModel(iterations=15, seed=9).fit(corpus, concept_sets()).tree_
        t2 = QueryDrivenTopicModel(iterations=15, seed=9).fit(corpus, concept_sets()).tree_
        assert tree_to_dict(t1) == tree_to_dict(t2)

    def test_subtheme_fixture_grows_more_subtopics(self):
        flat = seeded_corpus(n_docs=90, doc_len=24, sub_themes=1)
        themed = seeded_corpus(n_docs=90, doc_len=24, sub_themes=4)
        params = dict(iterations=60, seed=13)
        tree_flat = QueryDrivenTopicModel(**params).fit(flat, concept_sets()).tree_
        tree_themed = QueryDrivenTopicModel(**params).fit(themed, concept_sets()).tree_
        pruned_flat = prune_tree(tree_flat, 0.01)
        pruned_themed = prune_tree(tree_themed, 0.01)
        assert pruned_themed.n_subtopics > pruned_flat.n_subtopics

    def test_empty_concept_set_rejected(self):
        corpus = seeded_corpus(n_docs=6)
        bad = ConceptTermSet(topic_id="T", label="x", seeds=(), weights={})
        with pytest.raises(ValidationError, match="empty"):
            QueryDrivenTopicModel(iterations=2).fit(corpus, [bad])

    def test_out_of_vocabulary_concept_set_rejected(self):
        corpus = seeded_corpus(n_docs=6)
        bad = ConceptTermSet(
            topic_id="T", label="x", seeds=("zz",), weights={"zz": 1.0}
        )
        with pytest.raises(ValidationError, match="no in-vocabulary"):
            QueryDrivenTopicModel(iterations=2).fit(corpus, [bad])

    def test_partial_oov_warns_and_drops(self):
        corpus = seeded_corpus(n_docs=6)
        cs = ConceptTermSet(
            topic_id="T", label="x", seeds=("pay0", "lockdown"),
            weights={"pay0": 1.0, "lockdown": 1.0},
        )
        with pytest.warns(UserWarning, match="out-of-vocabulary"):
            QueryDrivenTopicModel(iterations=2, seed=0).fit(corpus, [cs])


# ---------------------------------------------------------------------------
# Pruning, dedup and bundle export on constructed trees

def make_tree(sub_specs, terms=("t0", "t1", "t2", "t3"), doc_texts=None):
    """Construct a one-main tree from (token_count, term_counts, doc_counts)."""
    doc_texts = doc_texts or [f"text {i}" for i in range(8)]
    subs = []
    for i, (count, term_counts, doc_counts) in enumerate(sub_specs, start=1):
        subs.append(Subtopic(
            id=f"M01.S{i:02d}", prevalence=0.0, token_count=count,
            term_counts=term_counts, doc_counts=doc_counts,
        ))
    main = MainTopic(id="M01", label="only", prevalence=0.0, token_count=0)
    skeleton = TopicTree(
        mains=(), total_tokens=0, terms=tuple(terms),
        doc_ids=tuple(f"d{i}" for i in range(len(doc_texts))),
    )
    from cgtkit.qdtm.model import _rebuild
    return _rebuild(skeleton, [(main, subs)], pruned=False, deduped=False)


def tree_corpus(doc_texts):
    docs = tuple(
        Document(id=f"d{i}", source="s", text=text, tokens=())
        for i, text in enumerate(doc_texts)
    )
    return Corpus(documents=docs)


class TestPrune:
    def test_low_prevalence_subtopic_removed(self):
        # 1000 tokens total; sub2 holds 1.5 of them per mille
        tree = make_tree([
            (985, {0: 985}, {0: 985}),
            (15, {1: 15}, {1: 15}),
        ])
        # prevalences: 0.985 and 0.015 -> prune at 0.02 removes the second
        pruned = prune_tree(tree, 0.02)
        assert [s.id for s in pruned.mains[0].subtopics] == ["M01.S01"]
        assert pruned.total_tokens == 985
        assert abs(pruned.mains[0].prevalence - 1.0) < 1e-12

    def test_paper_constant(self):
        tree = make_tree([
            (9985, {0: 9985}, {0: 9985}),
            (15, {1: 15}, {1: 15}),   # prevalence 0.0015 < 0.002
        ])
        pruned = prune_tree(tree)
        assert len(pruned.mains[0].subtopics) == 1

    def test_zero_threshold_is_identity(self):
        tree = make_tree([(10, {0: 10}, {0: 10}), (5, {1: 5}, {1: 5})])
        pruned = prune_tree(tree, 0.0)
        assert pruned.n_subtopics == 2
        assert pruned.total_tokens == tree.total_tokens

    def test_all_subs_pruned_warns(self):
        tree = make_tree([(1, {0: 1}, {0: 1}), (1, {1: 1}, {1: 1})])
        with pytest.warns(UserWarning, match="zero subtopics"):
            pruned = prune_tree(tree, 0.9)
        assert pruned.mains[0].subtopics == ()

    def test_invalid_threshold(self):
        tree = make_tree([(1, {0: 1}, {0: 1})])
        with pytest.raises(ValidationError, match="min_prevalence"):
            prune_tree(tree, 1.0)

    def test_accounting_restored(self, fitted_tree):
        _, tree = fitted_tree
        pruned = prune_tree(tree, 0.05)
        assert abs(sum(m.prevalence for m in pruned.mains) - 1.0) < 1e-9
        for main in pruned.mains:
            assert abs(
                sum(s.prevalence for s in main.subtopics) - main.prevalence
            ) < 1e-9


class TestDedupe:
    def test_duplicate_post_backfilled(self):
        texts = ["same text", "unique a", "same text", "unique b", "unique c"]
        tree = make_tree(
            [(15, {0: 15}, {0: 5, 1: 4, 2: 3, 3: 2, 4: 1})],
            doc_texts=texts,
        )
        pruned = prune_tree(tree, 0.0)
        deduped = dedupe(pruned, tree_corpus(texts), n_posts=3)
        ids = [d for d, _ in deduped.mains[0].subtopics[0].top_docs]
        # d2 duplicates d0's text; d3 backfills
        assert ids == ["d0", "d1", "d3"]

    def test_identical_term_sets_merge_keeping_higher_prevalence(self):
        tree = make_tree([
            (40, {0: 30, 1: 10}, {0: 40}),
            (10, {0: 6, 1: 4}, {1: 10}),    # same top-term set {t0, t1}
            (50, {2: 50}, {2: 50}),
        ])
        pruned = prune_tree(tree, 0.0)
        deduped = dedupe(pruned, tree_corpus(["a", "b", "c"]))
        main = deduped.mains[0]
        assert len(main.subtopics) == 2
        merged = main.subtopics[0]
        assert merged.id == "M01.S01"       # higher-prevalence member kept
        assert merged.token_count == 50
        assert abs(sum(s.prevalence for s in main.subtopics) - main.prevalence) < 1e-9

    def test_no_duplicates_is_identity(self):
        tree = make_tree([
            (40, {0: 40}, {0: 40}),
            (60, {1: 60}, {1: 60}),
        ])
        pruned = prune_tree(tree, 0.0)
        deduped = dedupe(pruned, tree_corpus(["a", "b"]))
        assert [s.id for s in deduped.mains[0].subtopics] == ["M01.S01", "M01.S02"]
        assert deduped.total_tokens == pruned.total_tokens

    def test_requires_pruned_tree(self):
        tree = make_tree([(10, {0: 10}, {0: 10})])
        with pytest.raises(ValidationError, match="pruned"):
            dedupe(tree, tree_corpus(["a"]))


class TestBundle:
    def build_bundle(self, n_posts=2, n_terms=2):
        texts = [f"post number {i}" for i in range(6)]
        tree = make_tree(
            [
                (30, {0: 20, 1: 10}, {0: 10, 1: 8, 2: 6, 3: 6}),
                (20, {2: 12, 3: 8}, {4: 12, 5: 8}),
            ],
            doc_texts=texts,
        )
        tree = dedupe(prune_tree(tree, 0.0), tree_corpus(texts))
        return tree, export_annotation_bundle(
            tree, tree_corpus(texts), n_posts=n_posts, n_terms=n_terms
        )

    def test_entry_per_topic_with_parents(self):
        tree, bundle = self.build_bundle()
        assert len(bundle.entries) == 3
        main = bundle.entries[0]
        assert main.parent_id is None
        assert all(e.parent_id == main.topic_id for e in bundle.entries[1:])

    def test_posts_carry_full_text(self):
        _, bundle = self.build_bundle()
        # main topic aggregates both subs; d4 (count 12) ranks first
        doc_id, text = bundle.entries[0].posts[0]
        assert doc_id == "d4" and text == "post number 4"

    def test_counts_clamped_with_warning(self):
        texts = ["a", "b"]
        tree = make_tree([(10, {0: 10}, {0: 6, 1: 4})], doc_texts=texts)
        tree = dedupe(prune_tree(tree, 0.0), tree_corpus(texts))
        with pytest.warns(UserWarning, match="only"):
            bundle = export_annotation_bundle(
                tree, tree_corpus(texts), n_posts=5, n_terms=10
            )
        assert len(bundle.entries[1].posts) == 2

    def test_requires_deduped(self):
        tree = make_tree([(10, {0: 10}, {0: 10})])
        with pytest.raises(ValidationError, match="dedup"):
            export_annotation_bundle(prune_tree(tree, 0.0), tree_corpus(["a"]))

    def test_bad_counts_rejected(self):
        tree, _ = self.build_bundle()
        with pytest.raises(ValidationError):
            export_annotation_bundle(tree, tree_corpus(["a"]), n_posts=0)

    def test_json_round_trip(self):
        _, bundle = self.build_bundle()
        assert bundle_from_dict(bundle_to_dict(bundle)) == bundle

    def test_csv_export_grouped(self, tmp_path):
        _, bundle = self.build_bundle()
        files = export_bundle_csv(bundle, tmp_path)
        assert [f.name for f in files] == ["bundle_M01.csv"]
        content = files[0].read_text()
        assert "M01.S01" in content and "M01.S02" in content


class TestTreePersistence:
    def test_round_trip(self, tmp_path, fitted_tree):
        _, tree = fitted_tree
        path = tmp_path / "tree.json"
        save_tree(tree, path)
        assert tree_to_dict(load_tree(path)) == tree_to_dict(tree)

    def test_dict_round_trip(self, fitted_tree):
        _, tree = fitted_tree
        assert tree_from_dict(tree_to_dict(tree)) == tree_from_dict(
            tree_to_dict(tree_from_dict(tree_to_dict(tree)))
        )
