"""Classifier-driven theoretical sampling over the full corpus.

A classifier plugin labels every document; the engine tabulates label
frequencies and draws reproducible random samples per label for hand
coding. Plugins are opaque: anything exposing the small contract below
(or the JSONL subprocess protocol) can slot in. The reference plugin is a
lexicon scorer; documents with no lexicon hit get the reserved label
"neutral" so histogram totals stay auditable.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .base import CgtError, ValidationError
from .corpus import Corpus, PreprocessConfig, tokenize
from .jsonio import read_json, write_json

NEUTRAL_LABEL = "neutral"

_LEXICON_TOKEN_CONFIG = PreprocessConfig(
    lowercase=True, strip_punctuation=True, strip_emoji=True, strip_urls=True,
    lemmatize=False,
)


class LexiconClassifier:
    """Term-to-label lexicon scorer.

    The label is the one with the most token hits (ties broken by
    lexicographic label order); the score is hits / tokens. Documents with
    no hits are labelled "neutral" with score 0.
    """

    name = "lexicon"
    version = "1"

    def __init__(self, lexicon: dict[str, str]):
        if not lexicon:
            raise ValidationError("lexicon is empty", field="lexicon")
        self.lexicon = {term.lower(): label for term, label in lexicon.items()}
        self.labels = tuple(sorted(set(self.lexicon.values()) | {NEUTRAL_LABEL}))

    @classmethod
    def from_file(cls, path: str | Path) -> "LexiconClassifier":
        """Load ``term<TAB>label`` lines."""
        lexicon = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                    raise ValidationError(
                        f"lexicon line {lineno} is not 'term<TAB>label'",
                        field="lexicon",
                    )
                lexicon[parts[0].strip()] = parts[1].strip()
        return cls(lexicon)

    def classify(self, text: str) -> tuple[str, float]:
        tokens = tokenize(text, _LEXICON_TOKEN_CONFIG)
        if not tokens:
            return NEUTRAL_LABEL, 0.0
        hits: dict[str, int] = {}
        for token in tokens:
            label = self.lexicon.get(token)
            if label is not None:
                hits[label] = hits.get(label, 0) + 1
        if not hits:
            return NEUTRAL_LABEL, 0.0
        best = max(hits.values())
        label = min(l for l, c in hits.items() if c == best)
        return label, best / len(tokens)


class SubprocessClassifier:
    """External classifier spoken to over the JSONL protocol.

    The command receives one ``{"id", "text"}`` object per line on stdin
    and must answer with one ``{"id", "label", "score"}`` object per line.
    Documents missing from the answer are marked unclassified.
    """

    def __init__(self, command: list[str], name: str | None = None,
                 version: str = "0"):
        self.command = list(command)
        self.name = name or Path(command[0]).name
        self.version = version

    def classify_batch(self, docs: list[tuple[str, str]]) -> dict:
        payload = "".join(
            json.dumps({"id": doc_id, "text": text}) + "\n" for doc_id, text in docs
        )
        try:
            proc = subprocess.run(
                self.command, input=payload, capture_output=True, text=True,
                check=True,
            )
        except (OSError, subprocess.CalledProcessError) as exc:
            raise CgtError(f"classifier subprocess failed: {exc}") from exc
        out: dict[str, tuple[str, float] | str] = {}
        for lineno, line in enumerate(proc.stdout.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[obj["id"]] = (str(obj["label"]), float(obj["score"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                out[f"__parse_error_{lineno}"] = f"bad output line {lineno}"
        return out


@dataclass(frozen=True)
class ClassificationRow:
    doc_id: str
    label: str
    score: float


@dataclass(frozen=True)
class ClassificationTable:
    plugin_name: str
    plugin_version: str
    rows: tuple[ClassificationRow, ...]
    failures: tuple = ()            # (doc id, error message)

    def label_of(self, doc_id: str) -> str:
        for row in self.rows:
            if row.doc_id == doc_id:
                return row.label
        raise KeyError(doc_id)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted({row.label for row in self.rows}))


def classify_corpus(corpus: Corpus, plugin) -> ClassificationTable:
    """Label every document; rows come back sorted by document id.

    A per-document plugin failure marks that document unclassified and the
    run continues.
    """
    docs = [(doc.id, doc.text) for doc in corpus.documents]
    rows = []
    failures = []
    if hasattr(plugin, "classify_batch"):
        answers = plugin.classify_batch(docs)
        for doc_id, _ in docs:
            answer = answers.get(doc_id)
            if isinstance(answer, tuple):
                label, score = answer
                rows.append(ClassificationRow(doc_id=doc_id, label=label,
                                              score=score))
            else:
                failures.append((doc_id, answer or "no output for document"))
    else:
        for doc_id, text in docs:
            try:
                label, score = plugin.classify(text)
            except Exception as exc:  # plugin boundary: isolate failures
                failures.append((doc_id, str(exc)))
                continue
            rows.append(ClassificationRow(doc_id=doc_id, label=label, score=score))
    rows.sort(key=lambda r: r.doc_id)
    failures.sort()
    return ClassificationTable(
        plugin_name=getattr(plugin, "name", "unknown"),
        plugin_version=getattr(plugin, "version", "0"),
        rows=tuple(rows),
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class FrequencyHistogram:
    entries: tuple = ()             # (label, count, fraction), sorted desc
    total: int = 0

    def fraction_of(self, label: str) -> float:
        for l, _, fraction in self.entries:
            if l == label:
                return fraction
        raise KeyError(label)

    def count_of(self, label: str) -> int:
        for l, count, _ in self.entries:
            if l == label:
                return count
        raise KeyError(label)


def label_frequencies(table: ClassificationTable) -> FrequencyHistogram:
    if not table.rows:
        raise ValidationError("classification table is empty", field="table")
    counts: dict[str, int] = {}
    for row in table.rows:
        counts[row.label] = counts.get(row.label, 0) + 1
    total = len(table.rows)
    entries = tuple(
        (label, count, count / total)
        for label, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return FrequencyHistogram(entries=entries, total=total)


def export_histogram_csv(histogram: FrequencyHistogram, path: str | Path) -> None:
    """Bar-chart data: label, count, fraction per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["label,count,fraction"]
    lines += [
        f"{label},{count},{fraction:.10g}"
        for label, count, fraction in histogram.entries
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def draw_sample(table: ClassificationTable, label: str, n: int,
                seed: int) -> list[str]:
    """Uniform sample of document ids without replacement, stable per seed."""
    import random

    matching = sorted(row.doc_id for row in table.rows if row.label == label)
    if not matching:
        raise ValidationError(f"no documents carry label {label!r}", field="label")
    if n > len(matching):
        raise ValidationError(
            f"requested {n} documents but only {len(matching)} carry "
            f"label {label!r}",
            field="n",
        )
    rng = random.Random(seed)
    return rng.sample(matching, n)


def export_sample_jsonl(doc_ids: list[str], corpus: Corpus, label: str,
                        path: str | Path) -> None:
    """Write the sampled documents with full text for hand coding."""
    by_id = {doc.id: doc for doc in corpus.documents}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id in doc_ids:
            doc = by_id[doc_id]
            fh.write(json.dumps({
                "id": doc.id, "source": doc.source, "text": doc.text,
                "label": label,
            }, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Persistence

def table_to_dict(table: ClassificationTable) -> dict:
    return {
        "schema": "cgtkit/classification@1",
        "plugin": {"name": table.plugin_name, "version": table.plugin_version},
        "rows": [
            {"doc_id": r.doc_id, "label": r.label, "score": r.score}
            for r in table.rows
        ],
        "failures": [list(f) for f in table.failures],
    }


def table_from_dict(d: dict) -> ClassificationTable:
    return ClassificationTable(
        plugin_name=d["plugin"]["name"],
        plugin_version=d["plugin"]["version"],
        rows=tuple(
            ClassificationRow(doc_id=r["doc_id"], label=r["label"],
                              score=r["score"])
            for r in d["rows"]
        ),
        failures=tuple((i, m) for i, m in d.get("failures", [])),
    )


def save_table(table: ClassificationTable, path: str | Path) -> None:
    write_json(path, table_to_dict(table))


def load_table(path: str | Path) -> ClassificationTable:
    return table_from_dict(read_json(path))
