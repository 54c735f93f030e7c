"""Query term expansion over the full corpus.

Three retrieval-style extractors grow a curated seed list into a concept
term set: document co-occurrence counts, a KL-divergence contrast between
the seed-matching subcorpus and the whole corpus, and cosine relevance in
an embedding space. Sources are capped, normalized and merged into one
weighted term list per topic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..base import ValidationError
from ..corpus import Corpus
from .embeddings import EmbeddingTable

DEFAULT_SOURCE_CAP = 30
_MIN_WEIGHT = 1e-9


def _seed_doc_ids(seeds: list[str], corpus: Corpus) -> tuple[set[int], list[int]]:
    seed_ids = [corpus.vocabulary.id_of(s) for s in seeds]
    seed_ids = [s for s in seed_ids if s is not None]
    if not seed_ids:
        raise ValidationError("no seed term is present in the corpus", field="seeds")
    seed_set = set(seed_ids)
    matching = [
        d for d, doc in enumerate(corpus.documents)
        if seed_set & set(doc.tokens)
    ]
    return seed_set, matching


def expand_frequency(seeds: list[str], corpus: Corpus, m: int) -> list[tuple[str, float]]:
    """Rank terms by the number of documents where they co-occur with a seed.

    Seeds themselves and terms that never co-occur are excluded; ties break
    by ascending term id.
    """
    if m < 1:
        raise ValidationError("m must be >= 1", field="m")
    seed_set, matching = _seed_doc_ids(seeds, corpus)
    counts: dict[int, int] = {}
    for d in matching:
        for w in set(corpus.documents[d].tokens):
            if w not in seed_set:
                counts[w] = counts.get(w, 0) + 1
    ranked = sorted(counts, key=lambda w: (-counts[w], w))[:m]
    terms = corpus.vocabulary.terms
    return [(terms[w], float(counts[w])) for w in ranked]


def expand_kld(seeds: list[str], corpus: Corpus, m: int) -> list[tuple[str, float]]:
    """Score terms by p(w|R) * log(p(w|R) / p(w|corpus)) with add-one smoothing,
    where R is the set of documents containing at least one seed. Only
    strictly positive scores are returned, capped at m, ties by term id.
    """
    if m < 1:
        raise ValidationError("m must be >= 1", field="m")
    seed_set, matching = _seed_doc_ids(seeds, corpus)
    if not matching:
        raise ValidationError("no document matches any seed", field="seeds")
    V = len(corpus.vocabulary)
    r_counts: dict[int, int] = {}
    r_total = 0
    for d in matching:
        for w in corpus.documents[d].tokens:
            r_counts[w] = r_counts.get(w, 0) + 1
            r_total += 1
    c_counts: dict[int, int] = {}
    c_total = 0
    for doc in corpus.documents:
        for w in doc.tokens:
            c_counts[w] = c_counts.get(w, 0) + 1
            c_total += 1
    scores: dict[int, float] = {}
    for w in range(V):
        if w in seed_set:
            continue
        p_r = (r_counts.get(w, 0) + 1) / (r_total + V)
        p_c = (c_counts.get(w, 0) + 1) / (c_total + V)
        score = p_r * math.log(p_r / p_c)
        if score > 0:
            scores[w] = score
    ranked = sorted(scores, key=lambda w: (-scores[w], w))[:m]
    terms = corpus.vocabulary.terms
    return [(terms[w], scores[w]) for w in ranked]


def expand_embedding(seeds: list[str], table: EmbeddingTable,
                     m: int) -> list[tuple[str, float]]:
    """Rank non-seed terms by cosine similarity to the seed centroid."""
    if m < 1:
        raise ValidationError("m must be >= 1", field="m")
    import warnings

    import numpy as np

    present = [s for s in seeds if s in table]
    missing = [s for s in seeds if s not in table]
    if not present:
        raise ValidationError(
            "none of the seed terms has an embedding", field="seeds"
        )
    if missing:
        warnings.warn(f"seeds missing from the embedding table, skipped: {missing}")
    centroid = np.mean([table.vector(s) for s in present], axis=0)
    cnorm = float(np.linalg.norm(centroid))
    if cnorm == 0.0:
        raise ValidationError("seed centroid is the zero vector", field="seeds")
    seed_set = set(seeds)
    sims = []
    for i, term in enumerate(table.terms):
        if term in seed_set:
            continue
        vec = table.vectors[i]
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            continue
        sims.append((term, float(vec @ centroid / (norm * cnorm)), i))
    sims.sort(key=lambda item: (-item[1], item[2]))
    return [(term, score) for term, score, _ in sims[:m]]


@dataclass(frozen=True)
class ConceptTermSet:
    """Seeds plus expansion results, merged into per-term weights."""

    topic_id: str
    label: str
    seeds: tuple[str, ...]
    expanded: tuple = ()    # (term, source, raw score)
    weights: dict = field(default_factory=dict, hash=False)  # term -> merged weight

    @property
    def terms(self) -> tuple[str, ...]:
        return tuple(self.weights)

    def to_dict(self) -> dict:
        return {
            "topic_id": self.topic_id,
            "label": self.label,
            "seeds": list(self.seeds),
            "expanded": [list(e) for e in self.expanded],
            "weights": dict(self.weights),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConceptTermSet":
        return cls(
            topic_id=d["topic_id"],
            label=d["label"],
            seeds=tuple(d["seeds"]),
            expanded=tuple((t, s, sc) for t, s, sc in d["expanded"]),
            weights=dict(d["weights"]),
        )


def build_concept_set(topic_id: str, label: str, seeds: list[str],
                      expansions: dict[str, list[tuple[str, float]]],
                      caps: dict[str, int] | None = None,
                      source_weights: dict[str, float] | None = None) -> ConceptTermSet:
    """Merge capped expansion lists with the seeds.

    Each source's scores are normalized to (0, 1] (cosines are first mapped
    from [-1, 1] onto [0, 1]); a term's merged weight is the weighted sum of
    its per-source normalized scores. Seeds always carry the maximum weight.
    """
    if not seeds:
        raise ValidationError("seeds must be non-empty", field="seeds")
    caps = caps or {}
    source_weights = source_weights or {}
    for source, w in source_weights.items():
        if w < 0:
            raise ValidationError(
                f"negative weight for source {source}", field="source_weights"
            )

    seed_set = set(seeds)
    merged: dict[str, float] = {}
    records = []
    total_source_weight = 0.0
    for source in sorted(expansions):
        ranked = list(expansions[source])
        cap = caps.get(source, DEFAULT_SOURCE_CAP)
        ranked = ranked[:cap]
        weight = source_weights.get(source, 1.0)
        total_source_weight += weight
        if not ranked:
            continue
        scores = [score for _, score in ranked]
        if source == "embedding":
            scores = [(s + 1.0) / 2.0 for s in scores]
        top = max(scores)
        if top <= 0:
            continue
        for (term, raw), score in zip(ranked, scores):
            records.append((term, source, float(raw)))
            if term in seed_set:
                continue
            norm = max(score / top, _MIN_WEIGHT)
            merged[term] = merged.get(term, 0.0) + weight * norm

    seed_weight = total_source_weight if total_source_weight > 0 else 1.0
    weights = {s: seed_weight for s in seeds}
    weights.update({t: w for t, w in sorted(merged.items())})
    return ConceptTermSet(
        topic_id=topic_id,
        label=label,
        seeds=tuple(seeds),
        expanded=tuple(records),
        weights=weights,
    )
