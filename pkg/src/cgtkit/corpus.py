"""Corpus ingestion, text normalization, vocabulary building and subsetting.

Documents arrive as JSONL (one object per line with ``id``, ``source`` and
``text``). Preprocessing is a pure per-document function, so it can run
data-parallel and always merges deterministically; term ids are assigned in
sorted term order, independent of worker count and document order.
"""

from __future__ import annotations

import json
import random
import unicodedata
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .base import ValidationError
from .jsonio import read_json, write_json

DEFAULT_MIN_DF = 5

URL_PREFIXES = ("http://", "https://", "www.")

# Codepoint ranges treated as emoji, removed when strip_emoji is set.
# Documented bit-exactly in docs/formats.md; keep the two in sync.
EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),  # mahjong/dominoes/cards through symbols ext-A
    (0x2600, 0x27BF),    # miscellaneous symbols and dingbats
    (0x2B00, 0x2BFF),    # miscellaneous symbols and arrows
    (0xFE00, 0xFE0F),    # variation selectors
    (0x200D, 0x200D),    # zero-width joiner
    (0x20E3, 0x20E3),    # combining enclosing keycap
)


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in EMOJI_RANGES)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class Document:
    id: str
    source: str
    text: str
    tokens: tuple[int, ...] = ()


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str] = frozenset()
    strip_punctuation: bool = True
    strip_emoji: bool = True
    strip_urls: bool = True
    lowercase: bool = True
    lemmatize: bool = True
    min_token_length: int = 1
    lemma_overrides: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.lowercase:
            object.__setattr__(
                self, "stopwords", frozenset(w.lower() for w in self.stopwords)
            )

    def to_dict(self) -> dict:
        return {
            "stopwords": sorted(self.stopwords),
            "strip_punctuation": self.strip_punctuation,
            "strip_emoji": self.strip_emoji,
            "strip_urls": self.strip_urls,
            "lowercase": self.lowercase,
            "lemmatize": self.lemmatize,
            "min_token_length": self.min_token_length,
            "lemma_overrides": [list(pair) for pair in self.lemma_overrides],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        return cls(
            stopwords=frozenset(d.get("stopwords", ())),
            strip_punctuation=d.get("strip_punctuation", True),
            strip_emoji=d.get("strip_emoji", True),
            strip_urls=d.get("strip_urls", True),
            lowercase=d.get("lowercase", True),
            lemmatize=d.get("lemmatize", True),
            min_token_length=d.get("min_token_length", 1),
            lemma_overrides=tuple(
                (str(a), str(b)) for a, b in d.get("lemma_overrides", ())
            ),
        )


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between terms and dense integer ids, plus corpus counts."""

    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    total_tokens: int
    _index: dict = field(repr=False, hash=False, compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {term: i for i, term in enumerate(self.terms)}
        )

    def __len__(self) -> int:
        return len(self.terms)

    def id_of(self, term: str) -> int | None:
        return self._index.get(term)

    def term_of(self, term_id: int) -> str:
        return self.terms[term_id]

    def df_of(self, term: str) -> int:
        i = self.id_of(term)
        return 0 if i is None else self.doc_freq[i]

    def __contains__(self, term: str) -> bool:
        return term in self._index


EMPTY_VOCABULARY = Vocabulary(terms=(), doc_freq=(), total_tokens=0)


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    vocabulary: Vocabulary = EMPTY_VOCABULARY
    config: PreprocessConfig | None = None
    min_df: int = 1

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def is_preprocessed(self) -> bool:
        return self.config is not None

    def document(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)

    def doc_terms(self, doc: Document) -> list[str]:
        terms = self.vocabulary.terms
        return [terms[t] for t in doc.tokens]


# ---------------------------------------------------------------------------
# Ingestion

def ingest_corpus(path: str | Path) -> Corpus:
    """Read a JSONL file of ``{"id", "source", "text"}`` objects, in order."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(
                    f"malformed JSON at line {lineno}: {exc.msg}", field="line"
                ) from exc
            for key in ("id", "source", "text"):
                if key not in obj or not isinstance(obj[key], str):
                    raise ValidationError(
                        f"missing field: {key} at line {lineno}", field=key
                    )
            if obj["id"] in seen:
                raise ValidationError(f"duplicate id {obj['id']}", field="id")
            seen.add(obj["id"])
            docs.append(Document(id=obj["id"], source=obj["source"], text=obj["text"]))
    return Corpus(documents=tuple(docs))


# ---------------------------------------------------------------------------
# Lemmatization: a fixed, documented suffix-rule table. Rules are tried in
# order, first match wins, and a rule only fires when the stem it would
# leave has at least MIN_STEM characters.

MIN_STEM = 3
_VOWELS = set("aeiou")


def _undouble(stem: str) -> str:
    if (
        len(stem) >= MIN_STEM + 1
        and stem[-1] == stem[-2]
        and stem[-1] not in _VOWELS
    ):
        return stem[:-1]
    return stem


def lemmatize_token(token: str, overrides: dict[str, str] | None = None) -> str:
    if overrides and token in overrides:
        return overrides[token]
    if token.endswith("ing") and len(token) - 3 >= MIN_STEM:
        return _undouble(token[:-3])
    if token.endswith("ed") and len(token) - 2 >= MIN_STEM:
        return _undouble(token[:-2])
    if token.endswith("ies") and len(token) - 3 + 1 >= MIN_STEM:
        return token[:-3] + "y"
    if token.endswith("es") and len(token) - 2 >= MIN_STEM:
        stem = token[:-2]
        if stem.endswith(("s", "x", "z", "ch", "sh")):
            return stem
    if (
        token.endswith("s")
        and not token.endswith(("ss", "us", "is"))
        and len(token) - 1 >= MIN_STEM
    ):
        return token[:-1]
    return token


# ---------------------------------------------------------------------------
# Tokenization

def tokenize(text: str, config: PreprocessConfig) -> list[str]:
    """Normalize one text into tokens; pure and order-preserving."""
    overrides = dict(config.lemma_overrides) if config.lemma_overrides else None
    out: list[str] = []
    for chunk in text.split():
        if config.strip_urls:
            i = 0
            while i < len(chunk) and _is_punct(chunk[i]):
                i += 1
            if chunk[i:].lower().startswith(URL_PREFIXES):
                continue
        if config.strip_emoji:
            chunk = "".join(c for c in chunk if not _is_emoji(c))
        if config.lowercase:
            chunk = chunk.lower()
        if config.strip_punctuation:
            start, end = 0, len(chunk)
            while start < end and _is_punct(chunk[start]):
                start += 1
            while end > start and _is_punct(chunk[end - 1]):
                end -= 1
            chunk = chunk[start:end]
        if not chunk:
            continue
        if chunk in config.stopwords:
            continue
        if config.lemmatize:
            chunk = lemmatize_token(chunk, overrides)
        if len(chunk) < config.min_token_length:
            continue
        out.append(chunk)
    return out


def _tokenize_doc(args: tuple[str, PreprocessConfig]) -> list[str]:
    text, config = args
    return tokenize(text, config)


def _build(documents: tuple[Document, ...], term_lists: list[list[str]],
           config: PreprocessConfig | None, min_df: int = 1) -> Corpus:
    """Deterministic merge: sorted term ids, recomputed df and totals."""
    vocab_terms = sorted({t for terms in term_lists for t in terms})
    index = {t: i for i, t in enumerate(vocab_terms)}
    df = [0] * len(vocab_terms)
    total = 0
    docs = []
    for doc, terms in zip(documents, term_lists):
        ids = tuple(index[t] for t in terms)
        for tid in set(ids):
            df[tid] += 1
        total += len(ids)
        docs.append(replace(doc, tokens=ids))
    vocab = Vocabulary(terms=tuple(vocab_terms), doc_freq=tuple(df), total_tokens=total)
    return Corpus(documents=tuple(docs), vocabulary=vocab, config=config, min_df=min_df)


def preprocess(corpus: Corpus, config: PreprocessConfig, workers: int = 1) -> Corpus:
    """Tokenize every document and build the vocabulary.

    ``workers > 1`` fans the per-document work out to processes; the merge
    is deterministic so results never depend on the worker count.
    """
    jobs = [(doc.text, config) for doc in corpus.documents]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            term_lists = list(pool.map(_tokenize_doc, jobs, chunksize=64))
    else:
        term_lists = [_tokenize_doc(job) for job in jobs]
    return _build(corpus.documents, term_lists, config)


def apply_min_df(corpus: Corpus, min_df: int) -> Corpus:
    """Drop vocabulary terms present in fewer than ``min_df`` documents."""
    if min_df < 1:
        raise ValidationError("min_df must be >= 1", field="min_df")
    if not corpus.is_preprocessed:
        raise ValidationError("corpus must be preprocessed before apply_min_df")
    vocab = corpus.vocabulary
    keep = [i for i, df in enumerate(vocab.doc_freq) if df >= min_df]
    if not keep:
        warnings.warn("apply_min_df removed every term; vocabulary is empty")
    keep_set = set(keep)
    term_lists = [
        [vocab.terms[t] for t in doc.tokens if t in keep_set]
        for doc in corpus.documents
    ]
    return _build(corpus.documents, term_lists, corpus.config, min_df=min_df)


# ---------------------------------------------------------------------------
# Subset selection

def sample_random(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Reproducible uniform subset of ``n`` documents (without replacement)."""
    if n > len(corpus):
        raise ValidationError(
            f"cannot sample {n} documents from a corpus of {len(corpus)}", field="n"
        )
    rng = random.Random(seed)
    picked = rng.sample(range(len(corpus)), n)
    return _subset(corpus, picked)


def sample_by_source(corpus: Corpus, sources: list[str]) -> Corpus:
    known = {doc.source for doc in corpus.documents}
    for name in sources:
        if name not in known:
            raise ValidationError(f"unknown source name: {name}", field="sources")
    wanted = set(sources)
    picked = [i for i, doc in enumerate(corpus.documents) if doc.source in wanted]
    return _subset(corpus, picked)


def _subset(corpus: Corpus, indices: list[int]) -> Corpus:
    docs = tuple(corpus.documents[i] for i in indices)
    if not corpus.is_preprocessed:
        return Corpus(documents=tuple(replace(d, tokens=()) for d in docs))
    term_lists = [[corpus.vocabulary.terms[t] for t in d.tokens] for d in docs]
    return _build(docs, term_lists, corpus.config, min_df=corpus.min_df)


# ---------------------------------------------------------------------------
# Persistence (schema documented in docs/formats.md)

def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "schema": "cgtkit/corpus@1",
        "min_df": corpus.min_df,
        "preprocess": corpus.config.to_dict() if corpus.config else None,
        "vocabulary": {
            "terms": list(corpus.vocabulary.terms),
            "doc_freq": list(corpus.vocabulary.doc_freq),
            "total_tokens": corpus.vocabulary.total_tokens,
        },
        "documents": [
            {"id": d.id, "source": d.source, "text": d.text, "tokens": list(d.tokens)}
            for d in corpus.documents
        ],
    }


def corpus_from_dict(d: dict) -> Corpus:
    config = PreprocessConfig.from_dict(d["preprocess"]) if d.get("preprocess") else None
    vocab = Vocabulary(
        terms=tuple(d["vocabulary"]["terms"]),
        doc_freq=tuple(d["vocabulary"]["doc_freq"]),
        total_tokens=d["vocabulary"]["total_tokens"],
    )
    docs = tuple(
        Document(
            id=item["id"],
            source=item["source"],
            text=item["text"],
            tokens=tuple(item["tokens"]),
        )
        for item in d["documents"]
    )
    return Corpus(documents=docs, vocabulary=vocab, config=config,
                  min_df=d.get("min_df", 1))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    write_json(path, corpus_to_dict(corpus))


def load_corpus(path: str | Path) -> Corpus:
    return corpus_from_dict(read_json(path))


def load_wordlist(path: str | Path) -> list[str]:
    """One entry per line; blank lines and surrounding whitespace ignored."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def load_lemma_overrides(path: str | Path) -> tuple[tuple[str, str], ...]:
    """Lines of ``form<TAB>lemma`` (or whitespace-separated pairs)."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise ValidationError(
                    f"lemma dictionary line {lineno} is not a pair", field="line"
                )
            pairs.append((parts[0].strip(), parts[1].strip()))
    return tuple(pairs)
