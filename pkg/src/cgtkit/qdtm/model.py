"""Seeded two-level topic model with automatically inferred subtopic counts.

Main topics are fixed, one per concept term set, and receive an asymmetric
topic-term prior boosted on their concept terms. Inside every main topic a
Chinese-restaurant-process layer instantiates and retires subtopics during
collapsed Gibbs sampling, so the number of subtopics follows the data.
Prevalence is the fraction of corpus tokens assigned to a topic; subtopic
prevalences under a main always account exactly for the main's own.
"""

from __future__ import annotations

import csv
import random
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..base import ParamsMixin, ValidationError, check_is_fitted
from ..corpus import Corpus
from ..jsonio import read_json, write_json
from .expand import ConceptTermSet

DEFAULT_MIN_PREVALENCE = 0.002  # prune subtopics below 0.2% of tokens
TOP_TERMS_VIEW = 10
TOP_DOCS_VIEW = 10


@dataclass(frozen=True)
class Subtopic:
    id: str
    prevalence: float
    token_count: int
    top_terms: tuple = ()        # (term, weight)
    top_docs: tuple = ()         # (doc id, weight)
    term_counts: dict = field(default_factory=dict, hash=False)   # term id -> count
    doc_counts: dict = field(default_factory=dict, hash=False)    # doc index -> count


@dataclass(frozen=True)
class MainTopic:
    id: str
    label: str
    prevalence: float
    token_count: int
    top_terms: tuple = ()
    top_docs: tuple = ()
    term_counts: dict = field(default_factory=dict, hash=False)
    doc_counts: dict = field(default_factory=dict, hash=False)
    subtopics: tuple[Subtopic, ...] = ()
    seed_terms: tuple[str, ...] = ()


@dataclass(frozen=True)
class TopicTree:
    mains: tuple[MainTopic, ...]
    total_tokens: int
    terms: tuple[str, ...]
    doc_ids: tuple[str, ...]
    params: dict = field(default_factory=dict, hash=False)
    pruned: bool = False
    deduped: bool = False

    @property
    def n_subtopics(self) -> int:
        return sum(len(m.subtopics) for m in self.mains)


class QueryDrivenTopicModel(ParamsMixin):
    """Two-level seeded sampler.

    alpha is the document concentration over main topics, gamma the CRP
    concentration governing subtopic creation, and boost scales how strongly
    a concept term's merged weight inflates its prior inside its own main
    topic (prior beta * (1 + boost * weight)).
    """

    def __init__(self, alpha: float = 1.0, beta: float = 0.01, gamma: float = 1.0,
                 boost: float = 10.0, iterations: int = 200, seed: int = 0):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.boost = boost
        self.iterations = iterations
        self.seed = seed

    def fit(self, corpus: Corpus, concept_sets: list[ConceptTermSet]) -> "QueryDrivenTopicModel":
        if not concept_sets:
            raise ValidationError("at least one concept set is required")
        if not corpus.is_preprocessed or len(corpus.vocabulary) == 0:
            raise ValidationError("corpus must be preprocessed before training")
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1", field="iterations")
        vocab = corpus.vocabulary
        V = len(vocab)
        T = len(concept_sets)

        boosts: list[dict[int, float]] = []
        for cs in concept_sets:
            if not cs.terms:
                raise ValidationError(
                    f"concept set {cs.topic_id} is empty", field="concept_sets"
                )
            in_vocab = {
                vocab.id_of(t): w for t, w in cs.weights.items() if t in vocab
            }
            dropped = [t for t in cs.weights if t not in vocab]
            if not in_vocab:
                raise ValidationError(
                    f"concept set {cs.topic_id} has no in-vocabulary term",
                    field="concept_sets",
                )
            if dropped:
                warnings.warn(
                    f"concept set {cs.topic_id}: dropping out-of-vocabulary "
                    f"terms {sorted(dropped)}"
                )
            boosts.append(in_vocab)

        beta = self.beta
        beta_rows = []          # per main: term id -> prior (only boosted entries)
        beta_sums = []
        for boost_map in boosts:
            row = {w: beta * (1.0 + self.boost * weight)
                   for w, weight in boost_map.items()}
            beta_rows.append(row)
            beta_sums.append(V * beta + sum(v - beta for v in row.values()))

        docs = [list(doc.tokens) for doc in corpus.documents]
        state = _gibbs_tree(
            docs, V, T, beta, beta_rows, beta_sums,
            self.alpha, self.gamma, boosts, self.iterations, self.seed,
        )
        self.tree_ = _state_to_tree(state, corpus, concept_sets, self.get_params(),
                                    min_df=corpus.min_df)
        return self


def _gibbs_tree(docs, V, T, beta, beta_rows, beta_sums, alpha, gamma, boosts,
                iterations, seed):
    rng = random.Random(seed)
    D = len(docs)

    # documents start in the main topic with highest concept-term overlap
    init_main = []
    for toks in docs:
        best, best_overlap = 0, -1
        for t in range(T):
            overlap = sum(1 for w in toks if w in boosts[t])
            if overlap > best_overlap:
                best, best_overlap = t, overlap
        init_main.append(best)

    # per-main live subtopics: key -> [n_ts, term count list]
    subs: list[dict[int, list]] = [dict() for _ in range(T)]
    next_key = [0] * T
    n_t = [0] * T
    n_dt = [[0] * T for _ in range(D)]
    z_main = [[0] * len(toks) for toks in docs]
    z_sub = [[0] * len(toks) for toks in docs]

    def new_sub(t):
        key = next_key[t]
        next_key[t] += 1
        subs[t][key] = [0, [0] * V]
        return key

    for d, toks in enumerate(docs):
        if not toks:
            continue
        t = init_main[d]
        if not subs[t]:
            new_sub(t)
        key = next(iter(subs[t]))
        entry = subs[t][key]
        for i, w in enumerate(toks):
            z_main[d][i] = t
            z_sub[d][i] = key
            entry[0] += 1
            entry[1][w] += 1
            n_t[t] += 1
            n_dt[d][t] += 1

    trange = range(T)
    for _ in range(iterations):
        for d, toks in enumerate(docs):
            drow = n_dt[d]
            zm, zs = z_main[d], z_sub[d]
            for i, w in enumerate(toks):
                t_old, s_old = zm[i], zs[i]
                entry = subs[t_old][s_old]
                entry[0] -= 1
                entry[1][w] -= 1
                n_t[t_old] -= 1
                drow[t_old] -= 1

                options = []
                total = 0.0
                for t in trange:
                    doc_factor = drow[t] + alpha
                    bv = beta_rows[t].get(w, beta)
                    bsum = beta_sums[t]
                    crp_denom = n_t[t] + gamma
                    for key, (count, term_counts) in subs[t].items():
                        if count == 0:
                            continue
                        p = (doc_factor * (count / crp_denom)
                             * (term_counts[w] + bv) / (count + bsum))
                        total += p
                        options.append((total, t, key))
                    p_new = doc_factor * (gamma / crp_denom) * (bv / bsum)
                    total += p_new
                    options.append((total, t, -1))

                u = rng.random() * total
                for cum, t, key in options:
                    if u < cum:
                        break
                if key == -1:
                    key = new_sub(t)
                entry = subs[t][key]
                entry[0] += 1
                entry[1][w] += 1
                n_t[t] += 1
                drow[t] += 1
                zm[i], zs[i] = t, key
        # retire empty subtopics at the end of every sweep
        for t in trange:
            dead = [key for key, entry in subs[t].items() if entry[0] == 0]
            for key in dead:
                del subs[t][key]

    return {
        "subs": subs,
        "z_main": z_main,
        "z_sub": z_sub,
        "docs": docs,
    }


def _state_to_tree(state, corpus, concept_sets, params, min_df) -> TopicTree:
    docs = state["docs"]
    total = sum(len(t) for t in docs)
    # single pass over assignments for per-(main, sub) document counts
    doc_count_map: dict[tuple[int, int], dict[int, int]] = {}
    for d, toks in enumerate(docs):
        zm, zs = state["z_main"][d], state["z_sub"][d]
        for i in range(len(toks)):
            cell = doc_count_map.setdefault((zm[i], zs[i]), {})
            cell[d] = cell.get(d, 0) + 1

    skeleton_mains = []
    for t, cs in enumerate(concept_sets):
        main_id = f"M{t + 1:02d}"
        subs = []
        for order, (key, (count, term_counts)) in enumerate(
            sorted(state["subs"][t].items()), start=1
        ):
            subs.append(Subtopic(
                id=f"{main_id}.S{order:02d}",
                prevalence=0.0,
                token_count=count,
                term_counts={w: c for w, c in enumerate(term_counts) if c > 0},
                doc_counts=doc_count_map.get((t, key), {}),
            ))
        skeleton_mains.append((
            MainTopic(id=main_id, label=cs.label, prevalence=0.0, token_count=0,
                      seed_terms=tuple(cs.seeds)),
            subs,
        ))
    tree = TopicTree(
        mains=(),
        total_tokens=total,
        terms=corpus.vocabulary.terms,
        doc_ids=tuple(doc.id for doc in corpus.documents),
        params={**params, "min_df": min_df},
    )
    return _rebuild(tree, skeleton_mains, pruned=False, deduped=False)


def _rebuild(tree: TopicTree, mains_subs: list[tuple[MainTopic, list[Subtopic]]],
             pruned: bool, deduped: bool) -> TopicTree:
    """Recompute all counts, prevalences and ranked views from subtopic counts."""
    total = sum(sub.token_count for _, entries in mains_subs for sub in entries)
    rebuilt = []
    for main, entries in mains_subs:
        term_counts: dict[int, int] = {}
        doc_counts: dict[int, int] = {}
        count = 0
        new_subs = []
        for sub in entries:
            count += sub.token_count
            for w, c in sub.term_counts.items():
                term_counts[w] = term_counts.get(w, 0) + c
            for d, c in sub.doc_counts.items():
                doc_counts[d] = doc_counts.get(d, 0) + c
            top_terms, top_docs = _views_from_tree(tree, sub.term_counts,
                                                   sub.doc_counts, sub.token_count)
            new_subs.append(replace(
                sub,
                prevalence=(sub.token_count / total) if total else 0.0,
                top_terms=top_terms,
                top_docs=top_docs,
            ))
        top_terms, top_docs = _views_from_tree(tree, term_counts, doc_counts, count)
        rebuilt.append(replace(
            main,
            prevalence=(count / total) if total else 0.0,
            token_count=count,
            top_terms=top_terms,
            top_docs=top_docs,
            term_counts=term_counts,
            doc_counts=doc_counts,
            subtopics=tuple(new_subs),
        ))
    return replace(tree, mains=tuple(rebuilt), total_tokens=total,
                   pruned=pruned, deduped=deduped)


def _views_from_tree(tree: TopicTree, term_counts, doc_counts, token_count,
                     n_terms: int = TOP_TERMS_VIEW, n_docs: int = TOP_DOCS_VIEW):
    if not token_count:
        return (), ()
    top_terms = tuple(
        (tree.terms[w], term_counts[w] / token_count)
        for w in sorted(term_counts, key=lambda w: (-term_counts[w], w))[:n_terms]
    )
    top_docs = tuple(
        (tree.doc_ids[d], doc_counts[d] / token_count)
        for d in sorted(doc_counts, key=lambda d: (-doc_counts[d], d))[:n_docs]
    )
    return top_terms, top_docs


def prune_tree(tree: TopicTree, min_prevalence: float = DEFAULT_MIN_PREVALENCE) -> TopicTree:
    """Drop subtopics below the prevalence threshold and re-account the tree.

    Main topics are never pruned; prevalences are recomputed over the
    retained token assignments so the accounting invariants hold again.
    """
    if not 0 <= min_prevalence < 1:
        raise ValidationError("min_prevalence must lie in [0, 1)",
                              field="min_prevalence")
    mains_subs = []
    for main in tree.mains:
        kept = [s for s in main.subtopics if s.prevalence >= min_prevalence]
        if not kept and main.subtopics:
            warnings.warn(
                f"every subtopic of {main.id} fell below the prevalence "
                "threshold; the main topic is retained with zero subtopics"
            )
        mains_subs.append((main, kept))
    return _rebuild(tree, mains_subs, pruned=True, deduped=tree.deduped)


def dedupe(tree: TopicTree, corpus: Corpus, n_posts: int = TOP_DOCS_VIEW) -> TopicTree:
    """Merge identical subtopics, then de-duplicate every top-post list.

    Subtopics of one main whose top-10 term lists are set-equal merge into
    the higher-prevalence one (ties by id). Duplicate posts - documents with
    identical text - are collapsed within each topic's top-``n_posts`` list
    and the list is backfilled from the ranking.
    """
    if not tree.pruned:
        raise ValidationError("dedupe expects a pruned tree; run prune_tree first")
    texts = {i: doc.text for i, doc in enumerate(corpus.documents)}

    mains_subs = []
    for main in tree.mains:
        groups: dict[frozenset, list[Subtopic]] = {}
        for sub in main.subtopics:
            signature = frozenset(term for term, _ in sub.top_terms)
            groups.setdefault(signature, []).append(sub)
        kept: list[Subtopic] = []
        for signature, members in groups.items():
            if len(members) == 1:
                kept.append(members[0])
                continue
            members.sort(key=lambda s: (-s.token_count, s.id))
            keeper = members[0]
            term_counts = dict(keeper.term_counts)
            doc_counts = dict(keeper.doc_counts)
            count = keeper.token_count
            for other in members[1:]:
                count += other.token_count
                for w, c in other.term_counts.items():
                    term_counts[w] = term_counts.get(w, 0) + c
                for d, c in other.doc_counts.items():
                    doc_counts[d] = doc_counts.get(d, 0) + c
            kept.append(replace(keeper, token_count=count,
                                term_counts=term_counts, doc_counts=doc_counts))
        kept.sort(key=lambda s: s.id)
        mains_subs.append((main, kept))
    rebuilt = _rebuild(tree, mains_subs, pruned=True, deduped=True)

    # collapse duplicate posts in every topic's ranked list, backfilling
    def dedupe_docs(doc_counts: dict, token_count: int) -> tuple:
        ranking = sorted(doc_counts, key=lambda d: (-doc_counts[d], d))
        seen_texts = set()
        out = []
        for d in ranking:
            text = texts[d]
            if text in seen_texts:
                continue
            seen_texts.add(text)
            out.append((tree.doc_ids[d], doc_counts[d] / token_count))
            if len(out) == n_posts:
                break
        return tuple(out)

    mains = []
    for main in rebuilt.mains:
        subs = tuple(
            replace(sub, top_docs=dedupe_docs(sub.doc_counts, sub.token_count))
            if sub.token_count else sub
            for sub in main.subtopics
        )
        mains.append(replace(
            main,
            top_docs=dedupe_docs(main.doc_counts, main.token_count)
            if main.token_count else main.top_docs,
            subtopics=subs,
        ))
    return replace(rebuilt, mains=tuple(mains))


# ---------------------------------------------------------------------------
# Annotation bundle

@dataclass(frozen=True)
class BundleEntry:
    topic_id: str
    parent_id: str | None
    label: str
    posts: tuple = ()            # (doc id, full text)
    terms: tuple[str, ...] = ()


@dataclass(frozen=True)
class AnnotationBundle:
    entries: tuple[BundleEntry, ...]
    n_posts: int
    n_terms: int

    def entry(self, topic_id: str) -> BundleEntry:
        for e in self.entries:
            if e.topic_id == topic_id:
                return e
        raise KeyError(topic_id)

    @property
    def mains(self) -> tuple[BundleEntry, ...]:
        return tuple(e for e in self.entries if e.parent_id is None)

    @property
    def subtopics(self) -> tuple[BundleEntry, ...]:
        return tuple(e for e in self.entries if e.parent_id is not None)


def export_annotation_bundle(tree: TopicTree, corpus: Corpus,
                             n_posts: int = 5, n_terms: int = 10) -> AnnotationBundle:
    """One entry per topic (mains and subtopics) with full post texts."""
    if n_posts < 1 or n_terms < 1:
        raise ValidationError("n_posts and n_terms must be >= 1")
    if not tree.deduped:
        raise ValidationError(
            "bundle export expects a deduplicated tree; run dedupe first"
        )
    text_by_id = {doc.id: doc.text for doc in corpus.documents}

    def posts_of(topic) -> tuple:
        picked = topic.top_docs[:n_posts]
        if len(picked) < n_posts:
            warnings.warn(
                f"topic {topic.id} has only {len(picked)} posts "
                f"(requested {n_posts})"
            )
        return tuple((doc_id, text_by_id[doc_id]) for doc_id, _ in picked)

    entries = []
    for main in tree.mains:
        entries.append(BundleEntry(
            topic_id=main.id,
            parent_id=None,
            label=main.label,
            posts=posts_of(main),
            terms=tuple(t for t, _ in main.top_terms[:n_terms]),
        ))
        for sub in main.subtopics:
            entries.append(BundleEntry(
                topic_id=sub.id,
                parent_id=main.id,
                label="",
                posts=posts_of(sub),
                terms=tuple(t for t, _ in sub.top_terms[:n_terms]),
            ))
    return AnnotationBundle(entries=tuple(entries), n_posts=n_posts, n_terms=n_terms)


# ---------------------------------------------------------------------------
# Persistence

def tree_to_dict(tree: TopicTree) -> dict:
    def sub_dict(s: Subtopic) -> dict:
        return {
            "id": s.id,
            "prevalence": s.prevalence,
            "token_count": s.token_count,
            "top_terms": [[t, w] for t, w in s.top_terms],
            "top_docs": [[d, w] for d, w in s.top_docs],
            "term_counts": {str(k): v for k, v in s.term_counts.items()},
            "doc_counts": {str(k): v for k, v in s.doc_counts.items()},
        }

    return {
        "schema": "cgtkit/topic-tree@1",
        "total_tokens": tree.total_tokens,
        "terms": list(tree.terms),
        "doc_ids": list(tree.doc_ids),
        "params": tree.params,
        "pruned": tree.pruned,
        "deduped": tree.deduped,
        "mains": [
            {
                "id": m.id,
                "label": m.label,
                "prevalence": m.prevalence,
                "token_count": m.token_count,
                "top_terms": [[t, w] for t, w in m.top_terms],
                "top_docs": [[d, w] for d, w in m.top_docs],
                "term_counts": {str(k): v for k, v in m.term_counts.items()},
                "doc_counts": {str(k): v for k, v in m.doc_counts.items()},
                "seed_terms": list(m.seed_terms),
                "subtopics": [sub_dict(s) for s in m.subtopics],
            }
            for m in tree.mains
        ],
    }


def tree_from_dict(d: dict) -> TopicTree:
    def sub_from(s: dict) -> Subtopic:
        return Subtopic(
            id=s["id"],
            prevalence=s["prevalence"],
            token_count=s["token_count"],
            top_terms=tuple((t, w) for t, w in s["top_terms"]),
            top_docs=tuple((i, w) for i, w in s["top_docs"]),
            term_counts={int(k): v for k, v in s["term_counts"].items()},
            doc_counts={int(k): v for k, v in s["doc_counts"].items()},
        )

    mains = tuple(
        MainTopic(
            id=m["id"],
            label=m["label"],
            prevalence=m["prevalence"],
            token_count=m["token_count"],
            top_terms=tuple((t, w) for t, w in m["top_terms"]),
            top_docs=tuple((i, w) for i, w in m["top_docs"]),
            term_counts={int(k): v for k, v in m["term_counts"].items()},
            doc_counts={int(k): v for k, v in m["doc_counts"].items()},
            seed_terms=tuple(m["seed_terms"]),
            subtopics=tuple(sub_from(s) for s in m["subtopics"]),
        )
        for m in d["mains"]
    )
    return TopicTree(
        mains=mains,
        total_tokens=d["total_tokens"],
        terms=tuple(d["terms"]),
        doc_ids=tuple(d["doc_ids"]),
        params=d["params"],
        pruned=d["pruned"],
        deduped=d["deduped"],
    )


def save_tree(tree: TopicTree, path: str | Path) -> None:
    write_json(path, tree_to_dict(tree))


def load_tree(path: str | Path) -> TopicTree:
    return tree_from_dict(read_json(path))


def bundle_to_dict(bundle: AnnotationBundle) -> dict:
    return {
        "schema": "cgtkit/bundle@1",
        "n_posts": bundle.n_posts,
        "n_terms": bundle.n_terms,
        "entries": [
            {
                "topic_id": e.topic_id,
                "parent_id": e.parent_id,
                "label": e.label,
                "posts": [[i, t] for i, t in e.posts],
                "terms": list(e.terms),
            }
            for e in bundle.entries
        ],
    }


def bundle_from_dict(d: dict) -> AnnotationBundle:
    return AnnotationBundle(
        entries=tuple(
            BundleEntry(
                topic_id=e["topic_id"],
                parent_id=e["parent_id"],
                label=e.get("label", ""),
                posts=tuple((i, t) for i, t in e["posts"]),
                terms=tuple(e["terms"]),
            )
            for e in d["entries"]
        ),
        n_posts=d["n_posts"],
        n_terms=d["n_terms"],
    )


def save_bundle(bundle: AnnotationBundle, path: str | Path) -> None:
    write_json(path, bundle_to_dict(bundle))


def load_bundle(path: str | Path) -> AnnotationBundle:
    return bundle_from_dict(read_json(path))


def export_bundle_csv(bundle: AnnotationBundle, directory: str | Path) -> list[Path]:
    """One CSV per main-topic group, one row per (topic, post)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for main in bundle.mains:
        group = [main] + [e for e in bundle.subtopics if e.parent_id == main.topic_id]
        path = directory / f"bundle_{main.topic_id}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["topic", "parent", "rank", "post_id", "post_text",
                             "top_terms"])
            for entry in group:
                for rank, (doc_id, text) in enumerate(entry.posts, start=1):
                    writer.writerow([
                        entry.topic_id,
                        entry.parent_id or "",
                        rank,
                        doc_id,
                        text,
                        "; ".join(entry.terms) if rank == 1 else "",
                    ])
        written.append(path)
    return written
