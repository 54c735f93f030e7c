"""Constructed 76-topic annotation fixture with known adjudication arithmetic.

Three annotators rate 14 main topics and 62 subtopics in two stages
(12 + 64 topics). The vote profiles are arranged so that the majority and
agreement tallies land on known values:

  coherence majorities  42 coherent / 24 average / 9 incoherent / 1 none
  issue majorities      23 intruded / 4 chained / 4 random / 42 no-issue / 3 none
  relatedness (62 subs) 34 strongly / 7 partially / 18 not / 0 identical / 3 none
  agreement (pooled)    coherence 32-43-1, issue 24-49-3, relatedness 18-41-3
  agreement (stage 1)   coherence 6-6-0, issue 5-7-0, relatedness 4-6-0
  exclusions            21 of 76 (9 incoherent, 6 unrelated, 6 disagreement)
  retained              55 = 14 mains + 41 subtopics

Profiles are triples over annotators (A1, A2, A3): coherence digits,
issue letters (n=none, i=intruded, c=chained, r=random) and relatedness
digits (subtopics only; "-" marks a main topic). Every triple respects the
per-annotator validity rules, e.g. a coherence-1 vote always pairs with a
relatedness-1 vote.
"""

from cgtkit.annotation import (
    AnnotationSession,
    TopicAnnotation,
    create_session,
    submit,
)
from cgtkit.qdtm.model import AnnotationBundle, BundleEntry

# per-topic profiles: (coherence, issue, relatedness) vote strings
MAIN_ALL_AGREE = ("333", "nnn", "-")      # m1
MAIN_TWO_AGREE = ("332", "nni", "-")      # m2

STAGE1 = [
    ("M01", MAIN_ALL_AGREE, [
        ("333", "nnn", "333"),
        ("333", "nnn", "333"),
        ("333", "nnn", "333"),
        ("333", "nnn", "222"),
        ("222", "iic", "332"),
    ]),
    ("M02", MAIN_TWO_AGREE, [
        ("332", "nni", "332"),
        ("332", "nnc", "332"),
        ("332", "nni", "332"),
        ("221", "iir", "331"),
        ("221", "iir", "331"),
    ]),
]

# 52 stage-two subtopics drawn from the remaining profile pools
_S333 = [("333", "nnn", "333")] * 7 + [("333", "nnn", "332")] * 5
_S33X = (
    [("332", "nni", "321")] * 3            # relatedness disagreement (Z)
    + [("332", "nni", "332")] * 4
    + [("332", "nnc", "223")] * 2
)
_S222 = (
    [("222", "ccc", "333")]
    + [("222", "iic", "333")]
    + [("222", "iic", "332")]
    + [("222", "iic", "223")] * 2
)
_S22X = (
    [("221", "icr", "131")] * 2            # issue disagreement (Y)
    + [("221", "iir", "121")] * 6          # not related
    + [("221", "iir", "331")] * 6
    + [("221", "cci", "221")] * 2
)
_S111 = [
    ("111", "rrr", "111"),
    ("111", "rri", "111"),
    ("111", "iic", "111"),
    ("111", "iir", "111"),
]
_S11X = [
    ("112", "rri", "111"),
    ("112", "rrc", "112"),
    ("112", "iic", "112"),
    ("112", "iic", "112"),
    ("112", "cci", "112"),
]
_SNA = [("321", "nic", "121")]             # coherence disagreement (X)

STAGE2_SUB_PROFILES = _S333 + _S33X + _S222 + _S22X + _S111 + _S11X + _SNA
STAGE2_MAIN_PROFILES = [MAIN_ALL_AGREE] * 5 + [MAIN_TWO_AGREE] * 7
# subtopic counts per stage-two main: 52 subs over 12 mains
STAGE2_SUB_COUNTS = [5, 5, 5, 5, 5, 4, 4, 4, 4, 4, 4, 3]

ANNOTATORS = ("A1", "A2", "A3")


def _entry(topic_id, parent=None):
    posts = tuple((f"{topic_id}-p{i}", f"post {i} of {topic_id}") for i in range(1, 6))
    terms = tuple(f"{topic_id}-t{i}" for i in range(10))
    return BundleEntry(topic_id=topic_id, parent_id=parent,
                       label="" if parent else topic_id.lower(), posts=posts,
                       terms=terms)


def _annotation(annotator, topic_id, coherence, issue, relatedness):
    coherence = int(coherence)
    issue_name = {"n": "none", "i": "intruded", "c": "chained", "r": "random"}[issue]
    if coherence == 3:
        labels = (f"label {topic_id}",)
    elif coherence == 2:
        labels = (f"label {topic_id}",)
    else:
        labels = ()
    implicated = ()
    if issue_name in ("intruded", "chained"):
        implicated = (1,)
    return TopicAnnotation(
        annotator_id=annotator,
        topic_id=topic_id,
        coherence=coherence,
        issue=issue_name,
        implicated_posts=implicated,
        labels=labels,
        relatedness=None if relatedness == "-" else int(relatedness),
    )


def build_paper_shaped_session() -> tuple[AnnotationBundle, AnnotationSession]:
    entries = []
    plan = []            # (topic_id, (coherence, issue, relatedness))
    stage1_ids = []
    stage2_ids = []

    for main_id, main_profile, sub_profiles in STAGE1:
        entries.append(_entry(main_id))
        plan.append((main_id, main_profile))
        stage1_ids.append(main_id)
        for i, profile in enumerate(sub_profiles, start=1):
            sub_id = f"{main_id}.S{i:02d}"
            entries.append(_entry(sub_id, parent=main_id))
            plan.append((sub_id, profile))
            stage1_ids.append(sub_id)

    sub_iter = iter(STAGE2_SUB_PROFILES)
    for idx, (main_profile, n_subs) in enumerate(
        zip(STAGE2_MAIN_PROFILES, STAGE2_SUB_COUNTS), start=3
    ):
        main_id = f"M{idx:02d}"
        entries.append(_entry(main_id))
        plan.append((main_id, main_profile))
        stage2_ids.append(main_id)
        for i in range(1, n_subs + 1):
            sub_id = f"{main_id}.S{i:02d}"
            entries.append(_entry(sub_id, parent=main_id))
            plan.append((sub_id, next(sub_iter)))
            stage2_ids.append(sub_id)
    leftover = list(sub_iter)
    assert not leftover, f"unplaced sub profiles: {len(leftover)}"

    bundle = AnnotationBundle(entries=tuple(entries), n_posts=5, n_terms=10)
    session = create_session(bundle, list(ANNOTATORS), [stage1_ids, stage2_ids])
    for topic_id, (coherence, issue, relatedness) in plan:
        for pos, annotator in enumerate(ANNOTATORS):
            rel = relatedness if relatedness == "-" else relatedness[pos]
            submit(session, _annotation(
                annotator, topic_id, coherence[pos], issue[pos], rel,
            ))
    return bundle, session
