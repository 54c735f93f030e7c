"""Multi-annotator topic evaluation: guideline enforcement, inter-annotator
agreement, majority adjudication and the final exclusion rules.

Annotators rate each topic on up to four tasks: coherence (3 Coherent /
2 Average / 1 Incoherent), issue identification (intruded / chained /
random, with the implicated post numbers), free-text labels, and - for
subtopics only - relatedness to the main topic (3 Strongly / 2 Partially /
1 Not related / 0 Identical). The combination rules between those tasks are
validated exactly; each violation has its own error message and field.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

from .base import CgtError, ValidationError
from .jsonio import read_json, write_json
from .qdtm.model import AnnotationBundle

COHERENT, AVERAGE, INCOHERENT = 3, 2, 1
COHERENCE_VALUES = (COHERENT, AVERAGE, INCOHERENT)

ISSUE_NONE = "none"
ISSUE_INTRUDED = "intruded"
ISSUE_CHAINED = "chained"
ISSUE_RANDOM = "random"
ISSUE_VALUES = (ISSUE_NONE, ISSUE_INTRUDED, ISSUE_CHAINED, ISSUE_RANDOM)

STRONGLY, PARTIALLY, NOT_RELATED, IDENTICAL = 3, 2, 1, 0
RELATEDNESS_VALUES = (STRONGLY, PARTIALLY, NOT_RELATED, IDENTICAL)

TASK_COHERENCE = "coherence"
TASK_ISSUE = "issue"
TASK_RELATEDNESS = "relatedness"
TASKS = (TASK_COHERENCE, TASK_ISSUE, TASK_RELATEDNESS)

EXCLUDE_DISAGREEMENT = "complete-disagreement"
EXCLUDE_INCOHERENT = "incoherent"
EXCLUDE_UNRELATED = "unrelated-subtopic"
EXCLUDE_IDENTICAL = "identical-subtopic"


class UndefinedKappaError(CgtError):
    """Fleiss' kappa is undefined: expected agreement equals 1."""


@dataclass(frozen=True)
class TopicAnnotation:
    annotator_id: str
    topic_id: str
    coherence: int
    issue: str = ISSUE_NONE
    implicated_posts: tuple[int, ...] = ()
    labels: tuple[str, ...] = ()
    relatedness: int | None = None


def validate_annotation(ann: TopicAnnotation, is_subtopic: bool,
                        n_posts: int = 5) -> None:
    """Enforce every combination rule of the four annotation tasks."""
    if ann.coherence not in COHERENCE_VALUES:
        raise ValidationError(
            f"coherence must be one of {COHERENCE_VALUES}", field="coherence"
        )
    if ann.issue not in ISSUE_VALUES:
        raise ValidationError(
            f"issue must be one of {ISSUE_VALUES}", field="issue"
        )
    posts = ann.implicated_posts
    if len(set(posts)) != len(posts):
        raise ValidationError("implicated posts contain duplicates",
                              field="implicated_posts")
    for p in posts:
        if not 1 <= p <= n_posts:
            raise ValidationError(
                f"implicated post number {p} outside 1..{n_posts}",
                field="implicated_posts",
            )

    if ann.coherence == COHERENT:
        if ann.issue != ISSUE_NONE:
            raise ValidationError(
                "coherent topics take no issue (N/A)", field="issue"
            )
        if len(ann.labels) != 1:
            raise ValidationError(
                "coherent topics take exactly one label", field="labels"
            )
    elif ann.coherence == AVERAGE:
        if ann.issue == ISSUE_NONE:
            raise ValidationError(
                "average topics need an issue (intruded or chained)", field="issue"
            )
        if ann.issue == ISSUE_RANDOM:
            raise ValidationError(
                "random issue requires incoherent rating", field="issue"
            )
        if not 1 <= len(ann.labels) <= 2:
            raise ValidationError(
                "average topics take one or two labels", field="labels"
            )
    else:  # incoherent
        if ann.labels:
            raise ValidationError(
                "incoherent topics take no labels", field="labels"
            )
        if ann.issue == ISSUE_NONE:
            raise ValidationError(
                "incoherent topics need an issue", field="issue"
            )

    if ann.issue in (ISSUE_INTRUDED, ISSUE_CHAINED) and not posts:
        raise ValidationError(
            f"issue {ann.issue!r} requires the implicated post numbers",
            field="implicated_posts",
        )
    if ann.issue == ISSUE_NONE and posts:
        raise ValidationError(
            "implicated posts are only recorded with an issue",
            field="implicated_posts",
        )

    if is_subtopic:
        if ann.relatedness is None:
            raise ValidationError(
                "subtopics require a relatedness rating", field="relatedness"
            )
        if ann.relatedness not in RELATEDNESS_VALUES:
            raise ValidationError(
                f"relatedness must be one of {RELATEDNESS_VALUES}",
                field="relatedness",
            )
        if ann.coherence == INCOHERENT and ann.relatedness != NOT_RELATED:
            raise ValidationError(
                "incoherent subtopics must be rated Not related",
                field="relatedness",
            )
    elif ann.relatedness is not None:
        raise ValidationError(
            "relatedness applies only to subtopics", field="relatedness"
        )


# ---------------------------------------------------------------------------
# Sessions

@dataclass
class AnnotationSession:
    annotators: tuple[str, ...]
    topics: dict                      # topic id -> parent id (None for mains)
    stages: tuple[tuple[str, ...], ...]
    n_posts: int = 5
    records: dict = field(default_factory=dict)   # (annotator, topic) -> TopicAnnotation
    audit: list = field(default_factory=list)

    def is_subtopic(self, topic_id: str) -> bool:
        return self.topics[topic_id] is not None

    @property
    def topic_ids(self) -> tuple[str, ...]:
        return tuple(self.topics)

    def stage_of(self, topic_id: str) -> int:
        for i, stage in enumerate(self.stages):
            if topic_id in stage:
                return i
        raise KeyError(topic_id)

    def missing(self) -> list[tuple[str, str]]:
        return [
            (a, t)
            for a in self.annotators
            for t in self.topics
            if (a, t) not in self.records
        ]

    @property
    def complete(self) -> bool:
        return not self.missing()

    def remaining_for(self, annotator: str) -> list[str]:
        """Topics the annotator has not submitted yet, stage order first."""
        return [
            t for stage in self.stages for t in stage
            if (annotator, t) not in self.records
        ]


def create_session(bundle: AnnotationBundle, annotators: list[str],
                   stages: list[list[str]], n_posts: int = 5) -> AnnotationSession:
    """Open an empty session whose stages partition the bundle's topics."""
    if len(annotators) < 2:
        raise ValidationError(
            "at least two annotators are required for agreement analysis",
            field="annotators",
        )
    if len(set(annotators)) != len(annotators):
        raise ValidationError("duplicate annotator ids", field="annotators")
    bundle_ids = [e.topic_id for e in bundle.entries]
    seen: set[str] = set()
    for stage in stages:
        for topic_id in stage:
            if topic_id not in set(bundle_ids):
                raise ValidationError(
                    f"stage references unknown topic {topic_id}", field="stages"
                )
            if topic_id in seen:
                raise ValidationError(
                    f"stages overlap on topic {topic_id}", field="stages"
                )
            seen.add(topic_id)
    if seen != set(bundle_ids):
        raise ValidationError(
            f"partition incomplete: stages cover {len(seen)} of "
            f"{len(bundle_ids)} topics",
            field="stages",
        )
    return AnnotationSession(
        annotators=tuple(annotators),
        topics={e.topic_id: e.parent_id for e in bundle.entries},
        stages=tuple(tuple(stage) for stage in stages),
        n_posts=bundle.n_posts,
    )


def submit(session: AnnotationSession, ann: TopicAnnotation) -> AnnotationSession:
    """Validate and store one annotation; resubmission replaces with audit."""
    if ann.annotator_id not in session.annotators:
        raise ValidationError(
            f"unknown annotator {ann.annotator_id}", field="annotator_id"
        )
    if ann.topic_id not in session.topics:
        raise ValidationError(f"unknown topic {ann.topic_id}", field="topic_id")
    validate_annotation(ann, session.is_subtopic(ann.topic_id), session.n_posts)
    key = (ann.annotator_id, ann.topic_id)
    if session.records.get(key) == ann:
        return session  # identical resubmission (e.g. double-click) is a no-op
    if key in session.records:
        session.audit.append({
            "event": "resubmission",
            "annotator": ann.annotator_id,
            "topic": ann.topic_id,
            "replaced": _annotation_to_dict(session.records[key]),
        })
    session.records[key] = ann
    return session


# ---------------------------------------------------------------------------
# Fleiss' kappa

_TASK_CATEGORIES = {
    TASK_COHERENCE: list(COHERENCE_VALUES),
    TASK_ISSUE: list(ISSUE_VALUES),
    TASK_RELATEDNESS: list(RELATEDNESS_VALUES),
}


def _task_value(ann: TopicAnnotation, task: str):
    if task == TASK_COHERENCE:
        return ann.coherence
    if task == TASK_ISSUE:
        return ann.issue
    if task == TASK_RELATEDNESS:
        return ann.relatedness
    raise ValidationError(f"unknown task {task!r}", field="task")


def applicable_topics(session: AnnotationSession, task: str) -> list[str]:
    if task == TASK_RELATEDNESS:
        return [t for t in session.topics if session.is_subtopic(t)]
    return list(session.topics)


def fleiss_kappa(session: AnnotationSession, task: str,
                 subset: list[str] | None = None) -> float:
    """Chance-corrected agreement over the given topics for one task.

    kappa = (P_mean - Pe) / (1 - Pe) with the usual Fleiss definitions;
    raises UndefinedKappaError when every rating falls in one category
    (Pe = 1). Every topic in the subset must be rated by every annotator.
    """
    if task not in TASKS:
        raise ValidationError(f"unknown task {task!r}", field="task")
    topics = applicable_topics(session, task) if subset is None else list(subset)
    if not topics:
        raise ValidationError("no topics to score", field="subset")
    categories = _TASK_CATEGORIES[task]
    cat_index = {c: j for j, c in enumerate(categories)}
    n = len(session.annotators)
    table = []
    for topic_id in topics:
        if task == TASK_RELATEDNESS and not session.is_subtopic(topic_id):
            raise ValidationError(
                f"topic {topic_id} has no relatedness task", field="subset"
            )
        row = [0] * len(categories)
        for a in session.annotators:
            ann = session.records.get((a, topic_id))
            if ann is None:
                raise ValidationError(
                    f"incomplete annotations: {a} has not rated {topic_id}",
                    field="subset",
                )
            row[cat_index[_task_value(ann, task)]] += 1
        table.append(row)
    return fleiss_kappa_from_table(table, n)


def fleiss_kappa_from_table(table: list[list[int]], n_raters: int) -> float:
    """Kappa from an items-by-categories count table (n ratings per item)."""
    N = len(table)
    n = n_raters
    p_i = [(sum(c * c for c in row) - n) / (n * (n - 1)) for row in table]
    p_mean = sum(p_i) / N
    totals = [sum(row[j] for row in table) for j in range(len(table[0]))]
    p_j = [t / (N * n) for t in totals]
    pe = sum(p * p for p in p_j)
    if abs(1.0 - pe) < 1e-15:
        raise UndefinedKappaError(
            "undefined-kappa: all ratings fall in a single category"
        )
    return (p_mean - pe) / (1.0 - pe)


# ---------------------------------------------------------------------------
# Adjudication

@dataclass(frozen=True)
class TopicDecision:
    topic_id: str
    parent_id: str | None
    coherence: int | None             # None = complete disagreement
    issue: str | None
    relatedness: int | None           # None for mains or disagreement
    no_agreement: tuple[str, ...]     # tasks with no majority
    label: str | None
    label_candidates: tuple[str, ...]

    @property
    def is_subtopic(self) -> bool:
        return self.parent_id is not None


@dataclass(frozen=True)
class AdjudicationResult:
    decisions: tuple[TopicDecision, ...]

    def decision(self, topic_id: str) -> TopicDecision:
        for d in self.decisions:
            if d.topic_id == topic_id:
                return d
        raise KeyError(topic_id)


@dataclass(frozen=True)
class TaskAgreement:
    task: str
    kappa: float | None               # None when undefined
    all_agree: int
    two_agree: int
    no_agreement: int
    total: int


@dataclass(frozen=True)
class AgreementReport:
    stages: tuple[tuple[TaskAgreement, ...], ...]
    pooled: tuple[TaskAgreement, ...]

    @property
    def two_or_more_rate(self) -> float:
        """Fraction of pooled (topic, task) ratings where a majority agreed."""
        agreed = sum(t.all_agree + t.two_agree for t in self.pooled)
        total = sum(t.total for t in self.pooled)
        return agreed / total if total else 0.0


def _majority(values: list, n: int):
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    if best * 2 > n:
        winners = [v for v, c in counts.items() if c == best]
        return winners[0]
    return None


def adjudicate(session: AnnotationSession) -> tuple[AdjudicationResult, AgreementReport]:
    """Simple majority voting per topic and task, plus agreement statistics.

    A category wins when more than half the annotators chose it; otherwise
    the topic carries a no-agreement flag for that task. Free-text labels
    are not voted: all candidates are kept and a label is only filled in
    when a strict majority typed the identical string.
    """
    missing = session.missing()
    if missing:
        a, t = missing[0]
        raise ValidationError(
            f"session incomplete: {len(missing)} annotations outstanding "
            f"(first missing: {a} on {t})"
        )
    n = len(session.annotators)
    decisions = []
    for topic_id, parent in session.topics.items():
        anns = [session.records[(a, topic_id)] for a in session.annotators]
        flags = []
        coherence = _majority([a.coherence for a in anns], n)
        if coherence is None:
            flags.append(TASK_COHERENCE)
        issue = _majority([a.issue for a in anns], n)
        if issue is None:
            flags.append(TASK_ISSUE)
        relatedness = None
        if parent is not None:
            relatedness = _majority([a.relatedness for a in anns], n)
            if relatedness is None:
                flags.append(TASK_RELATEDNESS)
        candidates = tuple(
            label for a in anns for label in a.labels
        )
        # each annotator's distinct labels count once toward a label majority
        label_votes = [label for a in anns for label in dict.fromkeys(a.labels)]
        label = _majority(label_votes, n) if label_votes else None
        decisions.append(TopicDecision(
            topic_id=topic_id,
            parent_id=parent,
            coherence=coherence,
            issue=issue,
            relatedness=relatedness,
            no_agreement=tuple(flags),
            label=label,
            label_candidates=candidates,
        ))
    report = _agreement_report(session)
    return AdjudicationResult(decisions=tuple(decisions)), report


def _task_agreement(session: AnnotationSession, task: str,
                    topics: list[str]) -> TaskAgreement:
    n = len(session.annotators)
    all_agree = two_agree = none_agree = 0
    for topic_id in topics:
        values = [
            _task_value(session.records[(a, topic_id)], task)
            for a in session.annotators
        ]
        distinct = len(set(values))
        if distinct == 1:
            all_agree += 1
        elif _majority(values, n) is not None:
            two_agree += 1
        else:
            none_agree += 1
    try:
        kappa = fleiss_kappa(session, task, topics)
    except UndefinedKappaError:
        kappa = None
    return TaskAgreement(
        task=task, kappa=kappa, all_agree=all_agree, two_agree=two_agree,
        no_agreement=none_agree, total=len(topics),
    )


def _agreement_report(session: AnnotationSession) -> AgreementReport:
    stage_rows = []
    for stage in session.stages:
        rows = []
        for task in TASKS:
            topics = [
                t for t in stage
                if task != TASK_RELATEDNESS or session.is_subtopic(t)
            ]
            if topics:
                rows.append(_task_agreement(session, task, topics))
        stage_rows.append(tuple(rows))
    pooled = tuple(
        _task_agreement(session, task, applicable_topics(session, task))
        for task in TASKS
        if applicable_topics(session, task)
    )
    return AgreementReport(stages=tuple(stage_rows), pooled=pooled)


# ---------------------------------------------------------------------------
# Exclusions

@dataclass(frozen=True)
class FinalTopic:
    topic_id: str
    parent_id: str | None
    label: str | None
    label_candidates: tuple[str, ...]
    orphan_risk: bool = False


@dataclass(frozen=True)
class ExcludedTopic:
    topic_id: str
    parent_id: str | None
    reason: str


@dataclass(frozen=True)
class FinalTopicSet:
    retained: tuple[FinalTopic, ...]
    excluded: tuple[ExcludedTopic, ...]
    category_counts: dict = field(hash=False, default_factory=dict)

    @property
    def exclusion_rate(self) -> float:
        total = len(self.retained) + len(self.excluded)
        return len(self.excluded) / total if total else 0.0

    def counts(self) -> dict:
        return {
            "retained": len(self.retained),
            "retained_mains": sum(1 for t in self.retained if t.parent_id is None),
            "retained_subtopics": sum(
                1 for t in self.retained if t.parent_id is not None
            ),
            "excluded": len(self.excluded),
            "total": len(self.retained) + len(self.excluded),
        }


def _exclusion_reason(decision: TopicDecision) -> str | None:
    """First matching rule wins: disagreement, incoherent, unrelated, identical."""
    if decision.no_agreement:
        return EXCLUDE_DISAGREEMENT
    if decision.coherence == INCOHERENT:
        return EXCLUDE_INCOHERENT
    if decision.is_subtopic and decision.relatedness == NOT_RELATED:
        return EXCLUDE_UNRELATED
    if decision.is_subtopic and decision.relatedness == IDENTICAL:
        return EXCLUDE_IDENTICAL
    return None


def apply_exclusions(adjudication: AdjudicationResult) -> FinalTopicSet:
    """Apply the exclusion criteria and tabulate final category counts.

    Topics are excluded when found incoherent, when a subtopic is not
    related (or identical) to its main topic, or when the annotators
    completely disagreed on any task the topic has. Subtopics of an
    excluded main are retained but flagged as orphan risks.
    """
    retained = []
    excluded = []
    excluded_mains = set()
    for decision in adjudication.decisions:
        reason = _exclusion_reason(decision)
        if reason is not None:
            excluded.append(ExcludedTopic(
                topic_id=decision.topic_id,
                parent_id=decision.parent_id,
                reason=reason,
            ))
            if decision.parent_id is None:
                excluded_mains.add(decision.topic_id)
        else:
            retained.append(decision)

    final = tuple(
        FinalTopic(
            topic_id=d.topic_id,
            parent_id=d.parent_id,
            label=d.label,
            label_candidates=d.label_candidates,
            orphan_risk=d.parent_id in excluded_mains,
        )
        for d in retained
    )

    def count_coherence(value):
        return sum(
            1 for d in adjudication.decisions
            if d.coherence == value and TASK_COHERENCE not in d.no_agreement
        )

    def count_issue(value):
        return sum(
            1 for d in adjudication.decisions
            if d.issue == value and TASK_ISSUE not in d.no_agreement
        )

    subs = [d for d in adjudication.decisions if d.is_subtopic]

    def count_rel(value):
        return sum(
            1 for d in subs
            if d.relatedness == value and TASK_RELATEDNESS not in d.no_agreement
        )

    category_counts = {
        "coherence": {
            "coherent": count_coherence(COHERENT),
            "average": count_coherence(AVERAGE),
            "incoherent": count_coherence(INCOHERENT),
            "no_agreement": sum(
                1 for d in adjudication.decisions
                if TASK_COHERENCE in d.no_agreement
            ),
            "total": len(adjudication.decisions),
        },
        "issue": {
            "intruded": count_issue(ISSUE_INTRUDED),
            "chained": count_issue(ISSUE_CHAINED),
            "random": count_issue(ISSUE_RANDOM),
            "no_issue": count_issue(ISSUE_NONE),
            "no_agreement": sum(
                1 for d in adjudication.decisions if TASK_ISSUE in d.no_agreement
            ),
            "total": len(adjudication.decisions),
        },
        "relatedness": {
            "strongly_related": count_rel(STRONGLY),
            "partially_related": count_rel(PARTIALLY),
            "not_related": count_rel(NOT_RELATED),
            "identical": count_rel(IDENTICAL),
            "no_agreement": sum(
                1 for d in subs if TASK_RELATEDNESS in d.no_agreement
            ),
            "total": len(subs),
        },
    }
    return FinalTopicSet(
        retained=final,
        excluded=tuple(excluded),
        category_counts=category_counts,
    )


# ---------------------------------------------------------------------------
# Import/export

def _annotation_to_dict(ann: TopicAnnotation) -> dict:
    return {
        "annotator": ann.annotator_id,
        "topic": ann.topic_id,
        "coherence": ann.coherence,
        "issue": ann.issue,
        "implicated_posts": list(ann.implicated_posts),
        "labels": list(ann.labels),
        "relatedness": ann.relatedness,
    }


def _annotation_from_dict(d: dict) -> TopicAnnotation:
    return TopicAnnotation(
        annotator_id=d["annotator"],
        topic_id=d["topic"],
        coherence=d["coherence"],
        issue=d["issue"],
        implicated_posts=tuple(d.get("implicated_posts", ())),
        labels=tuple(d.get("labels", ())),
        relatedness=d.get("relatedness"),
    )


def session_to_dict(session: AnnotationSession) -> dict:
    return {
        "schema": "cgtkit/annotation-session@1",
        "annotators": list(session.annotators),
        "topics": dict(session.topics),
        "stages": [list(s) for s in session.stages],
        "n_posts": session.n_posts,
        "records": [_annotation_to_dict(a) for a in session.records.values()],
        "audit": list(session.audit),
    }


def session_from_dict(d: dict) -> AnnotationSession:
    session = AnnotationSession(
        annotators=tuple(d["annotators"]),
        topics=dict(d["topics"]),
        stages=tuple(tuple(s) for s in d["stages"]),
        n_posts=d.get("n_posts", 5),
        audit=list(d.get("audit", [])),
    )
    for item in d.get("records", []):
        ann = _annotation_from_dict(item)
        session.records[(ann.annotator_id, ann.topic_id)] = ann
    return session


def save_session(session: AnnotationSession, path: str | Path) -> None:
    write_json(path, session_to_dict(session))


def load_session(path: str | Path) -> AnnotationSession:
    return session_from_dict(read_json(path))


CSV_HEADER = ["annotator", "topic", "coherence", "issue", "implicated_posts",
              "labels", "relatedness"]


def export_annotations_csv(session: AnnotationSession, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for (annotator, topic), ann in sorted(session.records.items()):
            writer.writerow([
                annotator, topic, ann.coherence, ann.issue,
                ";".join(str(p) for p in ann.implicated_posts),
                ";".join(ann.labels),
                "" if ann.relatedness is None else ann.relatedness,
            ])


def import_annotations_csv(session: AnnotationSession,
                           path: str | Path) -> AnnotationSession:
    """Submit every row through the normal validation path."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            ann = TopicAnnotation(
                annotator_id=row["annotator"],
                topic_id=row["topic"],
                coherence=int(row["coherence"]),
                issue=row["issue"] or ISSUE_NONE,
                implicated_posts=tuple(
                    int(p) for p in row["implicated_posts"].split(";") if p
                ),
                labels=tuple(l for l in row["labels"].split(";") if l),
                relatedness=int(row["relatedness"]) if row["relatedness"] else None,
            )
            submit(session, ann)
    return session


# ---------------------------------------------------------------------------
# Report rendering

def render_agreement_table(report: AgreementReport) -> str:
    """Stage-by-task agreement table in the shape of the IAA summary."""
    lines = []
    header = (
        f"{'Stage':<8}{'Task':<16}{'All agree':>10}{'Two agree':>10}"
        f"{'No agreement':>14}{'Total':>7}{'Fleiss kappa':>14}"
    )
    lines.append(header)
    lines.append("-" * len(header))

    def fmt(stage_name: str, rows) -> None:
        for row in rows:
            kappa = "undef." if row.kappa is None else f"{row.kappa:.2f}"
            lines.append(
                f"{stage_name:<8}{row.task:<16}{row.all_agree:>10}"
                f"{row.two_agree:>10}{row.no_agreement:>14}{row.total:>7}"
                f"{kappa:>14}"
            )

    for i, rows in enumerate(report.stages, start=1):
        fmt(str(i), rows)
    fmt("pooled", report.pooled)
    lines.append(
        f"two-or-more agreement rate: {report.two_or_more_rate:.1%}"
    )
    return "\n".join(lines)


def render_category_table(final: FinalTopicSet) -> str:
    """Final category counts after resolving disagreements."""
    counts = final.category_counts
    lines = []
    for task, labels in (
        ("coherence", ["coherent", "average", "incoherent", "no_agreement"]),
        ("issue", ["intruded", "chained", "random", "no_issue", "no_agreement"]),
        ("relatedness", ["strongly_related", "partially_related", "not_related",
                         "identical", "no_agreement"]),
    ):
        row = counts[task]
        lines.append(f"{task}:")
        for label in labels:
            lines.append(f"  {label.replace('_', ' '):<20}{row[label]:>5}")
        lines.append(f"  {'total':<20}{row['total']:>5}")
    summary = final.counts()
    lines.append(
        f"retained {summary['retained']} "
        f"({summary['retained_mains']} mains + "
        f"{summary['retained_subtopics']} subtopics); "
        f"excluded {summary['excluded']} of {summary['total']} "
        f"({final.exclusion_rate:.1%})"
    )
    return "\n".join(lines)


def final_set_to_dict(final: FinalTopicSet) -> dict:
    return {
        "schema": "cgtkit/final-topics@1",
        "retained": [
            {
                "topic_id": t.topic_id,
                "parent_id": t.parent_id,
                "label": t.label,
                "label_candidates": list(t.label_candidates),
                "orphan_risk": t.orphan_risk,
            }
            for t in final.retained
        ],
        "excluded": [
            {"topic_id": t.topic_id, "parent_id": t.parent_id, "reason": t.reason}
            for t in final.excluded
        ],
        "category_counts": final.category_counts,
    }


def final_set_from_dict(d: dict) -> FinalTopicSet:
    return FinalTopicSet(
        retained=tuple(
            FinalTopic(
                topic_id=t["topic_id"],
                parent_id=t["parent_id"],
                label=t["label"],
                label_candidates=tuple(t["label_candidates"]),
                orphan_risk=t["orphan_risk"],
            )
            for t in d["retained"]
        ),
        excluded=tuple(
            ExcludedTopic(
                topic_id=t["topic_id"], parent_id=t["parent_id"], reason=t["reason"]
            )
            for t in d["excluded"]
        ),
        category_counts=d["category_counts"],
    )
