"""GT codebook registry, code-vs-topic alignment, and query term curation.

Match decisions are always human judgments recorded through the CLI or the
console; nothing here auto-matches. The derived query term sets follow the
common / unique-per-model / proposed column structure and feed the seeded
topic model.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .base import ValidationError
from .corpus import Vocabulary
from .jsonio import read_json, write_json

MAX_RETAINED_TERMS = 20


@dataclass(frozen=True)
class GtCode:
    id: str
    label: str
    description: str
    excluded: bool = False
    exclusion_reason: str = ""


@dataclass(frozen=True)
class GtCodebook:
    codes: tuple[GtCode, ...]

    @property
    def comparable(self) -> tuple[GtCode, ...]:
        return tuple(c for c in self.codes if not c.excluded)

    def by_label(self, label: str) -> GtCode:
        for code in self.codes:
            if code.label == label:
                return code
        raise KeyError(label)


def register_gt_codes(codes: list[tuple[str, str]],
                      exclusions: dict[str, str] | None = None) -> GtCodebook:
    """Build a codebook from (label, description) pairs.

    ``exclusions`` maps a label to the researcher's reason for leaving it
    out of the topic comparison; excluded codes stay in the book.
    """
    if not codes:
        raise ValidationError("codebook empty", field="codes")
    exclusions = exclusions or {}
    labels = [label for label, _ in codes]
    seen = set()
    for label in labels:
        if label in seen:
            raise ValidationError(f"duplicate label: {label}", field="label")
        seen.add(label)
    for label, reason in exclusions.items():
        if label not in seen:
            raise ValidationError(
                f"exclusion references unknown label: {label}", field="exclusions"
            )
        if not reason.strip():
            raise ValidationError(
                f"exclusion for {label} needs a reason", field="exclusions"
            )
    entries = tuple(
        GtCode(
            id=f"C{i + 1:02d}",
            label=label,
            description=description,
            excluded=label in exclusions,
            exclusion_reason=exclusions.get(label, ""),
        )
        for i, (label, description) in enumerate(codes)
    )
    return GtCodebook(codes=entries)


@dataclass(frozen=True)
class AlignmentMatrix:
    codebook: GtCodebook
    model_topics: dict = field(hash=False)           # model id -> tuple of topic ids
    matches: tuple = ()                              # (code id, model id, topic id)
    new_topics: tuple = ()                           # (model id, topic id, label)


def record_alignment(codebook: GtCodebook, model_topics: dict[str, list[int]],
                     matches: list[tuple[str, str, int]],
                     new_topics: list[tuple[str, int, str]] = ()) -> AlignmentMatrix:
    """Record the researcher's match decisions against labelled models.

    ``matches`` holds (code label, model id, topic id) triples; ``new_topics``
    labels LDA topics with no GT counterpart. Replaces any prior matrix.
    """
    topics = {m: tuple(ts) for m, ts in model_topics.items()}
    resolved = []
    for code_label, model_id, topic_id in matches:
        try:
            code = codebook.by_label(code_label)
        except KeyError:
            raise ValidationError(f"unknown GT code: {code_label}", field="matches")
        if code.excluded:
            raise ValidationError(
                f"code {code_label!r} is excluded from comparison", field="matches"
            )
        if model_id not in topics:
            raise ValidationError(f"unknown model: {model_id}", field="matches")
        if topic_id not in topics[model_id]:
            raise ValidationError(
                f"unknown topic {topic_id} in model {model_id}", field="matches"
            )
        resolved.append((code.id, model_id, topic_id))
    matched_cells = {(m, t) for _, m, t in resolved}
    news = []
    for model_id, topic_id, label in new_topics:
        if model_id not in topics or topic_id not in topics[model_id]:
            raise ValidationError(
                f"unknown topic {topic_id} in model {model_id}", field="new_topics"
            )
        if (model_id, topic_id) in matched_cells:
            raise ValidationError(
                f"new topic ({model_id}, {topic_id}) is already matched to a GT code",
                field="new_topics",
            )
        if not label.strip():
            raise ValidationError("new topic needs a researcher label",
                                  field="new_topics")
        news.append((model_id, topic_id, label))
    return AlignmentMatrix(
        codebook=codebook,
        model_topics=topics,
        matches=tuple(resolved),
        new_topics=tuple(news),
    )


@dataclass(frozen=True)
class RosterTopic:
    id: str
    label: str
    kind: str                       # matched | gt_only | lda_only
    matched_topics: tuple = ()      # (model id, topic id) pairs


@dataclass(frozen=True)
class AlignmentReport:
    comparable_codes: int
    matched_codes: int
    gt_only: tuple[str, ...]
    lda_only: tuple[str, ...]
    many_to_one: tuple = ()         # (model id, topic id, tuple of code ids)
    roster: tuple[RosterTopic, ...] = ()


def alignment_report(matrix: AlignmentMatrix) -> AlignmentReport:
    """Coverage statistics plus the final topic roster.

    The roster carries every matched code, every comparable-but-unmatched
    code (GT-only) and every labelled LDA-only topic.
    """
    by_code: dict[str, list[tuple[str, int]]] = {}
    for code_id, model_id, topic_id in matrix.matches:
        by_code.setdefault(code_id, []).append((model_id, topic_id))

    cell_codes: dict[tuple[str, int], list[str]] = {}
    for code_id, model_id, topic_id in matrix.matches:
        cell_codes.setdefault((model_id, topic_id), []).append(code_id)
    many = tuple(
        (m, t, tuple(codes))
        for (m, t), codes in sorted(cell_codes.items())
        if len(codes) > 1
    )

    roster: list[RosterTopic] = []
    gt_only: list[str] = []
    counter = 0
    for code in matrix.codebook.comparable:
        counter += 1
        tid = f"T{counter:02d}"
        if code.id in by_code:
            roster.append(RosterTopic(
                id=tid, label=code.label, kind="matched",
                matched_topics=tuple(sorted(by_code[code.id])),
            ))
        else:
            gt_only.append(code.label)
            roster.append(RosterTopic(id=tid, label=code.label, kind="gt_only"))
    lda_only = []
    for model_id, topic_id, label in matrix.new_topics:
        counter += 1
        roster.append(RosterTopic(
            id=f"T{counter:02d}", label=label, kind="lda_only",
            matched_topics=((model_id, topic_id),),
        ))
        lda_only.append(label)

    if not roster:
        warnings.warn("alignment matrix is empty; roster has no topics")
    return AlignmentReport(
        comparable_codes=len(matrix.codebook.comparable),
        matched_codes=len(by_code),
        gt_only=tuple(gt_only),
        lda_only=tuple(lda_only),
        many_to_one=many,
        roster=tuple(roster),
    )


# ---------------------------------------------------------------------------
# Query term sets

@dataclass(frozen=True)
class CurationEdits:
    removals: tuple = ()            # (roster topic id, term)
    proposed: dict = field(default_factory=dict, hash=False)  # topic id -> [terms]


@dataclass(frozen=True)
class QueryTermSet:
    topic_id: str
    label: str
    common: tuple[str, ...] = ()
    unique: dict = field(default_factory=dict, hash=False)  # model id -> tuple of terms
    proposed: tuple[str, ...] = ()
    removed: tuple = ()             # (term, origin) pairs, flagged as removed
    out_of_vocabulary: tuple[str, ...] = ()

    @property
    def retained(self) -> tuple[str, ...]:
        uniques = tuple(t for m in sorted(self.unique) for t in self.unique[m])
        return self.common + uniques + self.proposed


def derive_query_sets(matrix: AlignmentMatrix,
                      model_top_terms: dict[str, dict[int, list[str]]],
                      curation: CurationEdits | None = None,
                      vocabulary: Vocabulary | None = None) -> list[QueryTermSet]:
    """Build one curated term set per roster topic.

    For matched topics the candidate pool is the union of the matched
    models' top-20 lists: terms shared by every matched model are "common",
    the remainders are "unique" to their model. Researcher removals are
    applied and kept on the record; GT-only topics carry researcher-proposed
    terms instead. At most 20 terms may remain per topic.
    """
    report = alignment_report(matrix)
    if not report.roster:
        raise ValidationError("roster is empty; record an alignment first")
    curation = curation or CurationEdits()
    removals_by_topic: dict[str, set[str]] = {}
    for topic_id, term in curation.removals:
        removals_by_topic.setdefault(topic_id, set()).add(term)

    out = []
    for entry in report.roster:
        removals = set(removals_by_topic.get(entry.id, ()))
        proposed = tuple(curation.proposed.get(entry.id, ()))
        if entry.kind == "gt_only":
            if not proposed:
                raise ValidationError(
                    f"GT-only topic {entry.id} ({entry.label}) needs at least "
                    "one proposed term",
                    field="proposed",
                )
            unknown = removals - set(proposed)
            if unknown:
                raise ValidationError(
                    f"cannot remove non-member terms from {entry.id}: "
                    f"{sorted(unknown)}",
                    field="removals",
                )
            kept = tuple(t for t in proposed if t not in removals)
            removed = tuple((t, "proposed") for t in proposed if t in removals)
            if not kept:
                raise ValidationError(
                    f"GT-only topic {entry.id} would retain no proposed terms",
                    field="removals",
                )
            oov = tuple(
                t for t in kept
                if vocabulary is not None and t not in vocabulary
            )
            if oov:
                warnings.warn(
                    f"proposed terms not in vocabulary for {entry.id}: {oov}; "
                    "they will be dropped from modelling"
                )
            qts = QueryTermSet(
                topic_id=entry.id, label=entry.label, proposed=kept,
                removed=removed, out_of_vocabulary=oov,
            )
        else:
            if proposed:
                raise ValidationError(
                    f"topic {entry.id} is not GT-only; proposed terms are only "
                    "for GT-only topics",
                    field="proposed",
                )
            lists: dict[str, list[str]] = {}
            for model_id, topic_id in entry.matched_topics:
                try:
                    lists[model_id] = list(model_top_terms[model_id][topic_id])
                except KeyError:
                    raise ValidationError(
                        f"no top terms for model {model_id} topic {topic_id}",
                        field="model_top_terms",
                    )
            common_set = set.intersection(*(set(v) for v in lists.values()))
            if len(lists) < 2:
                common_set = set()
            first = lists[sorted(lists)[0]]
            common_order = [t for t in first if t in common_set]
            unique = {
                m: [t for t in terms if t not in common_set]
                for m, terms in lists.items()
            }
            candidates = set(common_order) | {t for v in unique.values() for t in v}
            unknown = removals - candidates
            if unknown:
                raise ValidationError(
                    f"cannot remove non-member terms from {entry.id}: "
                    f"{sorted(unknown)}",
                    field="removals",
                )
            removed = []
            kept_common = []
            for t in common_order:
                if t in removals:
                    removed.append((t, "common"))
                else:
                    kept_common.append(t)
            kept_unique = {}
            for m in sorted(unique):
                kept_m = []
                for t in unique[m]:
                    if t in removals:
                        removed.append((t, f"unique:{m}"))
                    else:
                        kept_m.append(t)
                kept_unique[m] = tuple(kept_m)
            qts = QueryTermSet(
                topic_id=entry.id, label=entry.label,
                common=tuple(kept_common), unique=kept_unique,
                removed=tuple(removed),
            )
        if len(qts.retained) > MAX_RETAINED_TERMS:
            raise ValidationError(
                f"topic {entry.id} retains {len(qts.retained)} terms; remove "
                f"at least {len(qts.retained) - MAX_RETAINED_TERMS} more "
                f"(limit {MAX_RETAINED_TERMS})",
                field="removals",
            )
        out.append(qts)
    return out


# ---------------------------------------------------------------------------
# Persistence

def codebook_to_dict(codebook: GtCodebook) -> dict:
    return {
        "schema": "cgtkit/codebook@1",
        "codes": [
            {
                "id": c.id, "label": c.label, "description": c.description,
                "excluded": c.excluded, "exclusion_reason": c.exclusion_reason,
            }
            for c in codebook.codes
        ],
    }


def codebook_from_dict(d: dict) -> GtCodebook:
    return GtCodebook(codes=tuple(
        GtCode(
            id=c["id"], label=c["label"], description=c["description"],
            excluded=c["excluded"], exclusion_reason=c.get("exclusion_reason", ""),
        )
        for c in d["codes"]
    ))


def matrix_to_dict(matrix: AlignmentMatrix) -> dict:
    return {
        "schema": "cgtkit/alignment@1",
        "codebook": codebook_to_dict(matrix.codebook),
        "model_topics": {m: list(ts) for m, ts in matrix.model_topics.items()},
        "matches": [list(m) for m in matrix.matches],
        "new_topics": [list(n) for n in matrix.new_topics],
    }


def matrix_from_dict(d: dict) -> AlignmentMatrix:
    return AlignmentMatrix(
        codebook=codebook_from_dict(d["codebook"]),
        model_topics={m: tuple(ts) for m, ts in d["model_topics"].items()},
        matches=tuple((c, m, t) for c, m, t in d["matches"]),
        new_topics=tuple((m, t, l) for m, t, l in d["new_topics"]),
    )


def query_sets_to_dict(sets: list[QueryTermSet]) -> dict:
    return {
        "schema": "cgtkit/query-sets@1",
        "topics": [
            {
                "topic_id": q.topic_id,
                "label": q.label,
                "common": list(q.common),
                "unique": {m: list(ts) for m, ts in q.unique.items()},
                "proposed": list(q.proposed),
                "removed": [{"term": t, "origin": o, "removed": True}
                            for t, o in q.removed],
                "out_of_vocabulary": list(q.out_of_vocabulary),
            }
            for q in sets
        ],
    }


def query_sets_from_dict(d: dict) -> list[QueryTermSet]:
    return [
        QueryTermSet(
            topic_id=q["topic_id"],
            label=q["label"],
            common=tuple(q["common"]),
            unique={m: tuple(ts) for m, ts in q["unique"].items()},
            proposed=tuple(q["proposed"]),
            removed=tuple((r["term"], r["origin"]) for r in q["removed"]),
            out_of_vocabulary=tuple(q.get("out_of_vocabulary", ())),
        )
        for q in d["topics"]
    ]


def save_query_sets(sets: list[QueryTermSet], path: str | Path) -> None:
    write_json(path, query_sets_to_dict(sets))


def load_query_sets(path: str | Path) -> list[QueryTermSet]:
    return query_sets_from_dict(read_json(path))


def export_query_sets_csv(sets: list[QueryTermSet], path: str | Path) -> None:
    """One row per topic: label, common, unique per model, proposed."""
    models = sorted({m for q in sets for m in q.unique})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["topic", "label", "common"]
            + [f"unique:{m}" for m in models]
            + ["proposed", "removed"]
        )
        for q in sets:
            writer.writerow(
                [q.topic_id, q.label, "; ".join(q.common)]
                + ["; ".join(q.unique.get(m, ())) for m in models]
                + ["; ".join(q.proposed),
                   "; ".join(f"{t} [{o}]" for t, o in q.removed)]
            )


def import_query_sets_csv(path: str | Path) -> list[QueryTermSet]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        model_cols = [
            (i, name.split(":", 1)[1])
            for i, name in enumerate(header)
            if name.startswith("unique:")
        ]
        out = []
        for row in reader:
            def split(cell: str) -> tuple[str, ...]:
                return tuple(t for t in (s.strip() for s in cell.split(";")) if t)

            removed = []
            for item in split(row[header.index("removed")]):
                term, _, origin = item.partition(" [")
                removed.append((term.strip(), origin.rstrip("]")))
            unique = {m: split(row[i]) for i, m in model_cols}
            out.append(QueryTermSet(
                topic_id=row[0],
                label=row[1],
                common=split(row[2]),
                unique={m: ts for m, ts in unique.items() if ts},
                proposed=split(row[header.index("proposed")]),
                removed=tuple(removed),
            ))
    return out
