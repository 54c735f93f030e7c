"""Phase-three coding support: load estimates and per-topic coding sheets.

Before hand-coding starts the researcher sizes the job: how many posts the
final topic set implies and how long they run in tokens. Coding sheets are
then exported one per retained topic, grouped by main topic, and researcher
entries (focused code, sub-codes, memo) accumulate append-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .annotation import FinalTopicSet
from .base import ValidationError
from .corpus import Corpus
from .jsonio import read_json, write_json
from .qdtm.model import TopicTree

DEFAULT_TOKEN_CEILING = 512


@dataclass(frozen=True)
class CodingLoadReport:
    topic_count: int
    posts_per_topic: int
    total_posts: int
    token_min: int
    token_mean: float
    token_max: int
    over_ceiling: int
    token_ceiling: int

    def to_dict(self) -> dict:
        return {
            "topic_count": self.topic_count,
            "posts_per_topic": self.posts_per_topic,
            "total_posts": self.total_posts,
            "token_min": self.token_min,
            "token_mean": self.token_mean,
            "token_max": self.token_max,
            "over_ceiling": self.over_ceiling,
            "token_ceiling": self.token_ceiling,
        }


def posts_from_tree(tree: TopicTree, final_set: FinalTopicSet,
                    posts_per_topic: int) -> dict[str, list[str]]:
    """Top-ranked post ids per retained topic, clamped by availability."""
    by_id = {}
    for main in tree.mains:
        by_id[main.id] = main
        for sub in main.subtopics:
            by_id[sub.id] = sub
    out = {}
    for topic in final_set.retained:
        node = by_id.get(topic.topic_id)
        if node is None:
            raise ValidationError(
                f"final set references topic {topic.topic_id} absent from tree"
            )
        out[topic.topic_id] = [d for d, _ in node.top_docs[:posts_per_topic]]
    return out


def _token_length(corpus: Corpus, doc_id: str) -> int:
    doc = corpus.document(doc_id)
    if corpus.is_preprocessed:
        return len(doc.tokens)
    return len(doc.text.split())


def coding_load_report(posts_by_topic: dict[str, list[str]], corpus: Corpus,
                       posts_per_topic: int,
                       token_ceiling: int = DEFAULT_TOKEN_CEILING) -> CodingLoadReport:
    """Token-length statistics over the posts selected for hand coding."""
    lengths = []
    for topic_id, doc_ids in posts_by_topic.items():
        for doc_id in doc_ids[:posts_per_topic]:
            lengths.append(_token_length(corpus, doc_id))
    if not lengths:
        raise ValidationError("no posts selected for coding")
    return CodingLoadReport(
        topic_count=len(posts_by_topic),
        posts_per_topic=posts_per_topic,
        total_posts=len(lengths),
        token_min=min(lengths),
        token_mean=sum(lengths) / len(lengths),
        token_max=max(lengths),
        over_ceiling=sum(1 for n in lengths if n > token_ceiling),
        token_ceiling=token_ceiling,
    )


# ---------------------------------------------------------------------------
# Coding sheets

@dataclass(frozen=True)
class CodingEntry:
    post_id: str
    focused_code: str
    sub_codes: tuple[str, ...]
    memo: str
    timestamp: str


@dataclass(frozen=True)
class CodingSheet:
    topic_id: str
    group: str                     # main-topic id shared by the whole group
    group_label: str
    posts: tuple = ()              # (doc id, full text)
    entries: tuple[CodingEntry, ...] = ()
    status: str = "pending"

    def post_ids(self) -> set[str]:
        return {doc_id for doc_id, _ in self.posts}


def export_coding_sheets(final_set: FinalTopicSet,
                         posts_by_topic: dict[str, list[str]],
                         corpus: Corpus,
                         group_labels: dict[str, str] | None = None) -> list[CodingSheet]:
    """One sheet per retained topic; subtopics share their main's group header."""
    text_by_id = {doc.id: doc.text for doc in corpus.documents}
    group_labels = group_labels or {}
    sheets = []
    for topic in final_set.retained:
        group = topic.parent_id or topic.topic_id
        doc_ids = posts_by_topic.get(topic.topic_id, [])
        sheets.append(CodingSheet(
            topic_id=topic.topic_id,
            group=group,
            group_label=group_labels.get(group, group),
            posts=tuple((d, text_by_id[d]) for d in doc_ids),
        ))
    return sheets


def record_coding(sheet: CodingSheet, entries: list[dict],
                  timestamp: str) -> CodingSheet:
    """Append researcher entries; every entry must reference a sheet post."""
    known = sheet.post_ids()
    new_entries = []
    for entry in entries:
        post_id = entry.get("post_id")
        if post_id not in known:
            raise ValidationError(
                f"entry references unknown post {post_id!r}", field="post_id"
            )
        new_entries.append(CodingEntry(
            post_id=post_id,
            focused_code=entry.get("focused_code", ""),
            sub_codes=tuple(entry.get("sub_codes", ())),
            memo=entry.get("memo", ""),
            timestamp=timestamp,
        ))
    return replace(
        sheet,
        entries=sheet.entries + tuple(new_entries),
        status="in_progress",
    )


def sheet_to_dict(sheet: CodingSheet) -> dict:
    return {
        "schema": "cgtkit/coding-sheet@1",
        "topic_id": sheet.topic_id,
        "group": sheet.group,
        "group_label": sheet.group_label,
        "posts": [[i, t] for i, t in sheet.posts],
        "entries": [
            {
                "post_id": e.post_id,
                "focused_code": e.focused_code,
                "sub_codes": list(e.sub_codes),
                "memo": e.memo,
                "timestamp": e.timestamp,
            }
            for e in sheet.entries
        ],
        "status": sheet.status,
    }


def sheet_from_dict(d: dict) -> CodingSheet:
    return CodingSheet(
        topic_id=d["topic_id"],
        group=d["group"],
        group_label=d["group_label"],
        posts=tuple((i, t) for i, t in d["posts"]),
        entries=tuple(
            CodingEntry(
                post_id=e["post_id"],
                focused_code=e["focused_code"],
                sub_codes=tuple(e["sub_codes"]),
                memo=e["memo"],
                timestamp=e["timestamp"],
            )
            for e in d["entries"]
        ),
        status=d["status"],
    )


def save_sheets(sheets: list[CodingSheet], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    written = []
    for sheet in sheets:
        path = directory / f"{sheet.topic_id}.json"
        write_json(path, sheet_to_dict(sheet))
        written.append(path)
    return written


def load_sheet(path: str | Path) -> CodingSheet:
    return sheet_from_dict(read_json(path))
