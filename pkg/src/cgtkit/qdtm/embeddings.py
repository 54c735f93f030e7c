"""Skip-gram word embeddings with negative sampling, trained from scratch.

Small, dependency-free and deterministic per seed; meant for desk-scale
corpora where the expansion step needs a relevance signal, not for
large-scale representation learning.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..base import ParamsMixin, ValidationError, check_is_fitted
from ..corpus import Corpus
from ..jsonio import read_json, write_json

NEGATIVE_TABLE_POWER = 0.75


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    dim: int
    terms: tuple[str, ...]
    vectors: np.ndarray          # (len(terms), dim)
    params: dict

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {t: i for i, t in enumerate(self.terms)}
        )

    def __contains__(self, term: str) -> bool:
        return term in self._index

    def vector(self, term: str) -> np.ndarray:
        return self.vectors[self._index[term]]

    def cosine(self, a: str, b: str) -> float:
        va, vb = self.vector(a), self.vector(b)
        return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))


class SkipGramEmbedder(ParamsMixin):
    def __init__(self, dim: int = 100, window: int = 5, negatives: int = 5,
                 epochs: int = 5, learning_rate: float = 0.025, seed: int = 0):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, corpus: Corpus) -> "SkipGramEmbedder":
        if self.dim < 2:
            raise ValidationError("dim must be >= 2", field="dim")
        V = len(corpus.vocabulary)
        if V < 2:
            raise ValidationError("vocabulary must have at least 2 terms")
        rng = np.random.default_rng(self.seed)
        counts = np.zeros(V, dtype=np.int64)
        docs = []
        for doc in corpus.documents:
            toks = list(doc.tokens)
            docs.append(toks)
            for w in toks:
                counts[w] += 1
        noise = counts.astype(float) ** NEGATIVE_TABLE_POWER
        noise_cdf = np.cumsum(noise / noise.sum())

        w_in = rng.uniform(-0.5 / self.dim, 0.5 / self.dim, size=(V, self.dim))
        w_out = np.zeros((V, self.dim))
        lr = self.learning_rate
        window = self.window
        negs = self.negatives
        for _ in range(self.epochs):
            for toks in docs:
                n = len(toks)
                for i, center in enumerate(toks):
                    lo = max(0, i - window)
                    hi = min(n, i + window + 1)
                    for j in range(lo, hi):
                        if j == i:
                            continue
                        context = toks[j]
                        h = w_in[center]
                        grad_h = np.zeros(self.dim)
                        sampled = np.searchsorted(noise_cdf, rng.random(negs))
                        for target, label in [(context, 1.0)] + [
                            (int(t), 0.0) for t in sampled
                        ]:
                            v = w_out[target]
                            f = 1.0 / (1.0 + np.exp(-(h @ v)))
                            g = lr * (label - f)
                            grad_h += g * v
                            w_out[target] = v + g * h
                        w_in[center] = h + grad_h

        self.embedding_table_ = EmbeddingTable(
            dim=self.dim,
            terms=corpus.vocabulary.terms,
            vectors=w_in,
            params=self.get_params(),
        )
        if not np.isfinite(w_in).all():
            raise ValidationError(
                "embedding training diverged; lower the learning rate"
            )
        return self

    @property
    def table_(self) -> EmbeddingTable:
        check_is_fitted(self, "embedding_table_")
        return self.embedding_table_


def embeddings_to_dict(table: EmbeddingTable) -> dict:
    return {
        "schema": "cgtkit/embeddings@1",
        "dim": table.dim,
        "terms": list(table.terms),
        "vectors": table.vectors.tolist(),
        "params": table.params,
    }


def embeddings_from_dict(d: dict) -> EmbeddingTable:
    return EmbeddingTable(
        dim=d["dim"],
        terms=tuple(d["terms"]),
        vectors=np.array(d["vectors"], dtype=float),
        params=d["params"],
    )


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    write_json(path, embeddings_to_dict(table))


def load_embeddings(path: str | Path) -> EmbeddingTable:
    return embeddings_from_dict(read_json(path))
