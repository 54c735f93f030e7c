"""Latent Dirichlet Allocation by collapsed Gibbs sampling.

The sampler is deliberately single-threaded and seeded: the same corpus,
hyperparameters and seed always reproduce the same chain, so trained models
are bitwise-comparable. Candidate topic counts are explored with ``sweep``,
which may fan models out to worker processes; per-model results are
identical either way.
"""

from __future__ import annotations

import csv
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .base import ParamsMixin, ValidationError, check_is_fitted
from .corpus import Corpus
from .jsonio import read_json, write_json

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TopicSummary:
    topic: int
    top_terms: tuple[tuple[str, float], ...]
    top_docs: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class ModelReport:
    n_topics: int
    per_topic_coherence: tuple[float, ...] | None
    mean_coherence: float | None
    heldout_perplexity: float | None
    runtime_seconds: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "n_topics": self.n_topics,
            "per_topic_coherence": list(self.per_topic_coherence or ()) or None,
            "mean_coherence": self.mean_coherence,
            "heldout_perplexity": self.heldout_perplexity,
            "runtime_seconds": self.runtime_seconds,
            "error": self.error,
        }


class LdaGibbs(ParamsMixin):
    """Collapsed Gibbs LDA with symmetric priors.

    alpha defaults to 50 / n_topics when left as None. Final distributions
    come from the last sample's counts (no averaging), smoothed by the
    priors. Empty documents are kept but contribute nothing to training;
    their doc-topic rows are the uniform prior.
    """

    def __init__(self, n_topics: int, alpha: float | None = None, beta: float = 0.01,
                 iterations: int = 1000, seed: int = 0, debug_checks: bool = False):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta = beta
        self.iterations = iterations
        self.seed = seed
        self.debug_checks = debug_checks

    def fit(self, corpus: Corpus) -> "LdaGibbs":
        K = self.n_topics
        if K < 2:
            raise ValidationError("n_topics must be >= 2", field="n_topics")
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1", field="iterations")
        if len(corpus) == 0 or len(corpus.vocabulary) == 0:
            raise ValidationError("corpus must be preprocessed and non-empty")
        V = len(corpus.vocabulary)
        if K > V:
            raise ValidationError(
                f"n_topics={K} exceeds vocabulary size {V}", field="n_topics"
            )
        alpha = (50.0 / K) if self.alpha is None else self.alpha
        docs = [list(doc.tokens) for doc in corpus.documents]
        n_vk, n_dk, n_k, z = _gibbs(
            docs, V, K, alpha, self.beta, self.iterations,
            self.seed, self.debug_checks,
        )

        beta = self.beta
        topic_term_counts = np.array(n_vk, dtype=np.int64).T  # (K, V)
        doc_topic_counts = np.array(n_dk, dtype=np.int64)     # (D, K)
        topic_counts = np.array(n_k, dtype=np.int64)
        phi = (topic_term_counts + beta) / (topic_counts[:, None] + V * beta)
        doc_totals = doc_topic_counts.sum(axis=1)
        theta = (doc_topic_counts + alpha) / (doc_totals[:, None] + K * alpha)

        self.alpha_ = alpha
        self.topic_term_ = phi
        self.doc_topic_ = theta
        self.topic_term_counts_ = topic_term_counts
        self.doc_topic_counts_ = doc_topic_counts
        self.topic_counts_ = topic_counts
        self.assignments_ = tuple(tuple(row) for row in z)
        self.terms_ = corpus.vocabulary.terms
        self.doc_ids_ = tuple(doc.id for doc in corpus.documents)
        return self

    # -- summaries ---------------------------------------------------------

    def top_terms(self, topic: int, n: int = 20) -> list[tuple[str, float]]:
        """Highest-probability terms; ties broken by ascending term id."""
        check_is_fitted(self, "topic_term_")
        self._check_topic(topic)
        row = self.topic_term_[topic]
        order = sorted(range(len(row)), key=lambda v: (-row[v], v))[:n]
        return [(self.terms_[v], float(row[v])) for v in order]

    def top_docs(self, topic: int, n: int) -> list[tuple[str, float]]:
        """Documents ranked by their share of the topic.

        Ranking follows the doc-topic distribution; reported weights are
        normalized over documents so they form a distribution per topic
        (a single-document corpus reports weight 1). Ties break by
        document position.
        """
        check_is_fitted(self, "doc_topic_")
        self._check_topic(topic)
        col = self.doc_topic_[:, topic]
        weights = col / col.sum()
        order = sorted(range(len(col)), key=lambda d: (-col[d], d))[:n]
        return [(self.doc_ids_[d], float(weights[d])) for d in order]

    def summary(self, topic: int, n_terms: int = 20, n_docs: int = 5) -> TopicSummary:
        return TopicSummary(
            topic=topic,
            top_terms=tuple(self.top_terms(topic, n_terms)),
            top_docs=tuple(self.top_docs(topic, n_docs)),
        )

    def _check_topic(self, topic: int) -> None:
        if not 0 <= topic < self.n_topics:
            raise ValidationError(
                f"topic {topic} out of range [0, {self.n_topics})", field="topic"
            )


def _gibbs(docs, V, K, alpha, beta, iterations, seed, debug_checks):
    rng = random.Random(seed)
    n_vk = [[0] * K for _ in range(V)]  # term-major for cache-friendly access
    n_dk = [[0] * K for _ in range(len(docs))]
    n_k = [0] * K
    z = [[0] * len(toks) for toks in docs]

    for d, toks in enumerate(docs):
        drow = n_dk[d]
        zrow = z[d]
        for i, w in enumerate(toks):
            k = rng.randrange(K)
            zrow[i] = k
            drow[k] += 1
            n_vk[w][k] += 1
            n_k[k] += 1

    vbeta = V * beta
    cumulative = [0.0] * K
    krange = range(K)
    for _ in range(iterations):
        for d, toks in enumerate(docs):
            drow = n_dk[d]
            zrow = z[d]
            for i, w in enumerate(toks):
                k = zrow[i]
                drow[k] -= 1
                n_k[k] -= 1
                wrow = n_vk[w]
                wrow[k] -= 1
                total = 0.0
                for kk in krange:
                    total += (wrow[kk] + beta) * (drow[kk] + alpha) / (n_k[kk] + vbeta)
                    cumulative[kk] = total
                u = rng.random() * total
                for kk in krange:
                    if u < cumulative[kk]:
                        break
                zrow[i] = kk
                drow[kk] += 1
                n_k[kk] += 1
                wrow[kk] += 1
        if debug_checks:
            _check_counts(docs, n_vk, n_dk, n_k, z)
    return n_vk, n_dk, n_k, z


def _check_counts(docs, n_vk, n_dk, n_k, z) -> None:
    total = sum(len(t) for t in docs)
    if sum(n_k) != total:
        raise AssertionError("topic totals out of sync with token count")
    for k, count in enumerate(n_k):
        if sum(row[k] for row in n_vk) != count:
            raise AssertionError(f"term counts for topic {k} out of sync")
    for d, toks in enumerate(docs):
        if sum(n_dk[d]) != len(toks):
            raise AssertionError(f"doc-topic counts for document {d} out of sync")
        for i, w in enumerate(toks):
            if not 0 <= z[d][i] < len(n_k):
                raise AssertionError("assignment out of range")


# ---------------------------------------------------------------------------
# Coherence: document co-occurrence statistic over the top-n terms. For the
# ranked list (w1..wn) each pair i < j contributes
# log((D(wi, wj) + 1) / D(wj)); higher is better.

def coherence(model: LdaGibbs, corpus: Corpus, n_terms: int = 20) -> list[float]:
    check_is_fitted(model, "topic_term_")
    if n_terms < 2:
        raise ValidationError("n_terms must be >= 2", field="n_terms")
    doc_sets: dict[int, set[int]] = {}
    for d, doc in enumerate(corpus.documents):
        for w in set(doc.tokens):
            doc_sets.setdefault(w, set()).add(d)
    scores = []
    for topic in range(model.n_topics):
        ranked = [corpus.vocabulary.id_of(term)
                  for term, _ in model.top_terms(topic, n_terms)]
        score = 0.0
        for j in range(1, len(ranked)):
            wj = ranked[j]
            dj = doc_sets.get(wj, set())
            for i in range(j):
                co = len(doc_sets.get(ranked[i], set()) & dj)
                score += math.log((co + 1) / len(dj))
        scores.append(score)
    return scores


# ---------------------------------------------------------------------------
# Sweeps

def evaluate(model: LdaGibbs, train: Corpus, heldout: Corpus | None,
             n_coherence_terms: int = 20, seed: int = 0,
             foldin_sweeps: int = 20) -> tuple[list[float], float | None]:
    """Coherence on the training corpus + fold-in perplexity on held-out docs."""
    per_topic = coherence(model, train, n_coherence_terms)
    perplexity = None
    if heldout is not None and len(heldout) > 0:
        perplexity = _foldin_perplexity(model, train, heldout, seed, foldin_sweeps)
    return per_topic, perplexity


def _foldin_perplexity(model, train, heldout, seed, sweeps):
    phi = model.topic_term_
    K = model.n_topics
    alpha = model.alpha_
    vocab = train.vocabulary
    rng = random.Random(seed)
    total_logp = 0.0
    total_tokens = 0
    for doc in heldout.documents:
        tokens = [vocab.id_of(t) for t in heldout.doc_terms(doc)]
        tokens = [t for t in tokens if t is not None]
        if not tokens:
            continue
        counts = [0] * K
        assign = []
        for w in tokens:
            k = rng.randrange(K)
            assign.append(k)
            counts[k] += 1
        for _ in range(sweeps):
            for i, w in enumerate(tokens):
                counts[assign[i]] -= 1
                weights = [phi[k][w] * (counts[k] + alpha) for k in range(K)]
                total = sum(weights)
                u = rng.random() * total
                acc = 0.0
                for k in range(K):
                    acc += weights[k]
                    if u < acc:
                        break
                assign[i] = k
                counts[k] += 1
        n = len(tokens)
        theta = [(counts[k] + alpha) / (n + K * alpha) for k in range(K)]
        for w in tokens:
            total_logp += math.log(sum(theta[k] * phi[k][w] for k in range(K)))
        total_tokens += n
    if total_tokens == 0:
        return None
    return math.exp(-total_logp / total_tokens)


def split_heldout(corpus: Corpus, fraction: float, seed: int) -> tuple[Corpus, Corpus | None]:
    """Deterministically split a corpus for sweep evaluation."""
    n_heldout = int(len(corpus) * fraction)
    if n_heldout == 0:
        return corpus, None
    rng = random.Random(seed)
    order = list(range(len(corpus)))
    rng.shuffle(order)
    heldout_idx = sorted(order[:n_heldout])
    train_idx = sorted(order[n_heldout:])
    from .corpus import _subset
    return _subset(corpus, train_idx), _subset(corpus, heldout_idx)


def _sweep_one(args) -> ModelReport:
    corpus, k, alpha, beta, iterations, seed, n_terms, heldout_fraction = args
    started = time.perf_counter()
    try:
        train, heldout = split_heldout(corpus, heldout_fraction, seed)
        model = LdaGibbs(n_topics=k, alpha=alpha, beta=beta,
                         iterations=iterations, seed=seed).fit(train)
        per_topic, perplexity = evaluate(model, train, heldout, n_terms, seed)
        return ModelReport(
            n_topics=k,
            per_topic_coherence=tuple(per_topic),
            mean_coherence=sum(per_topic) / len(per_topic),
            heldout_perplexity=perplexity,
            runtime_seconds=time.perf_counter() - started,
        )
    except ValidationError as exc:
        return ModelReport(
            n_topics=k, per_topic_coherence=None, mean_coherence=None,
            heldout_perplexity=None,
            runtime_seconds=time.perf_counter() - started, error=str(exc),
        )


def sweep(corpus: Corpus, ks: list[int], alpha: float | None = None,
          beta: float = 0.01, iterations: int = 1000, seed: int = 0,
          n_coherence_terms: int = 20, heldout_fraction: float = 0.1,
          workers: int = 1) -> list[ModelReport]:
    """Train and evaluate one model per candidate K.

    A failing K (for example K larger than the vocabulary) yields a report
    carrying its error; the other candidates still complete. Reports do not
    depend on execution order or on ``workers``.
    """
    if not ks:
        raise ValidationError("K list must be non-empty", field="ks")
    jobs = [
        (corpus, k, alpha, beta, iterations, seed, n_coherence_terms, heldout_fraction)
        for k in ks
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_sweep_one, jobs))
    else:
        reports = [_sweep_one(job) for job in jobs]
    # runtime varies run to run; everything else is deterministic
    return reports


# ---------------------------------------------------------------------------
# Persistence

def model_to_dict(model: LdaGibbs) -> dict:
    check_is_fitted(model, "topic_term_")
    return {
        "schema": "cgtkit/lda-model@1",
        "params": {
            "n_topics": model.n_topics,
            "alpha": model.alpha_,
            "beta": model.beta,
            "iterations": model.iterations,
            "seed": model.seed,
        },
        "terms": list(model.terms_),
        "doc_ids": list(model.doc_ids_),
        "topic_term": model.topic_term_.tolist(),
        "doc_topic": model.doc_topic_.tolist(),
        "assignments": [list(row) for row in model.assignments_],
    }


def model_from_dict(d: dict) -> LdaGibbs:
    params = d["params"]
    model = LdaGibbs(
        n_topics=params["n_topics"], alpha=params["alpha"], beta=params["beta"],
        iterations=params["iterations"], seed=params["seed"],
    )
    model.alpha_ = params["alpha"]
    model.topic_term_ = np.array(d["topic_term"], dtype=float)
    model.doc_topic_ = np.array(d["doc_topic"], dtype=float)
    model.terms_ = tuple(d["terms"])
    model.doc_ids_ = tuple(d["doc_ids"])
    model.assignments_ = tuple(tuple(row) for row in d["assignments"])
    return model


def save_model(model: LdaGibbs, path: str | Path) -> None:
    write_json(path, model_to_dict(model))


def load_model(path: str | Path) -> LdaGibbs:
    return model_from_dict(read_json(path))


def export_summaries_csv(model: LdaGibbs, path: str | Path, n_terms: int = 20) -> None:
    """CSV rows of (topic, rank, term, weight) for every topic."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["topic", "rank", "term", "weight"])
        for topic in range(model.n_topics):
            for rank, (term, weight) in enumerate(model.top_terms(topic, n_terms), 1):
                writer.writerow([topic, rank, term, f"{weight:.10g}"])
