"""HTTP+JSON API over a loaded project, consumed by the browser console.

Every mutation flows through ``WorkbenchStore.apply``: validate, persist
the touched artifact, append to the event log. Replaying a project's event
log against a fresh project with the same inputs reproduces the same
artifact state, because the handlers are deterministic given the event
payload and timestamp. Reads are pure functions of the project files.
"""

from __future__ import annotations

import threading

from .alignment import (
    CurationEdits,
    alignment_report,
    codebook_from_dict,
    derive_query_sets,
    matrix_from_dict,
    matrix_to_dict,
    query_sets_to_dict,
    record_alignment,
)
from .annotation import (
    AnnotationSession,
    TopicAnnotation,
    adjudicate,
    apply_exclusions,
    final_set_from_dict,
    final_set_to_dict,
    session_from_dict,
    session_to_dict,
)
from .base import CgtError, ValidationError
from .coding import record_coding, sheet_from_dict, sheet_to_dict
from .corpus import corpus_from_dict
from .project import Project
from .qdtm.model import bundle_from_dict
from .sampling import draw_sample, label_frequencies, table_from_dict


class ConflictError(CgtError):
    """Request is valid but the project is not in the required state."""


class WorkbenchStore:
    """Read views and serialized mutations over one project."""

    def __init__(self, project: Project):
        self.project = project
        self._lock = threading.Lock()

    # ------------------------------------------------------------------ reads

    def status(self) -> dict:
        session = self._session(optional=True)
        progress = None
        if session is not None:
            total = len(session.annotators) * len(session.topics)
            progress = {
                "annotators": list(session.annotators),
                "topics": len(session.topics),
                "submitted": len(session.records),
                "outstanding": total - len(session.records),
                "complete": session.complete,
            }
        return {
            "artifacts": sorted(self.project.manifest["artifacts"]),
            "session": progress,
            "events": len(self.project.events()),
        }

    def _session(self, optional: bool = False) -> AnnotationSession | None:
        if not self.project.has_artifact("session"):
            if optional:
                return None
            raise ConflictError("no annotation session; create one first")
        return session_from_dict(self.project.load_artifact("session"))

    def _bundle(self):
        if not self.project.has_artifact("bundle"):
            raise ConflictError("no annotation bundle; export one first")
        return bundle_from_dict(self.project.load_artifact("bundle"))

    def task_feed(self, annotator: str) -> list[dict]:
        session = self._session()
        if annotator not in session.annotators:
            raise ValidationError(f"unknown annotator {annotator}",
                                  field="annotator")
        bundle = self._bundle()
        feed = []
        for topic_id in session.remaining_for(annotator):
            entry = bundle.entry(topic_id)
            parent = None
            if entry.parent_id is not None:
                parent_entry = bundle.entry(entry.parent_id)
                parent = {
                    "topic_id": parent_entry.topic_id,
                    "posts": [
                        {"n": i, "id": p, "text": t}
                        for i, (p, t) in enumerate(parent_entry.posts, start=1)
                    ],
                    "terms": list(parent_entry.terms),
                }
            feed.append({
                "topic_id": topic_id,
                "parent_id": entry.parent_id,
                "stage": session.stage_of(topic_id),
                "posts": [
                    {"n": i, "id": p, "text": t}
                    for i, (p, t) in enumerate(entry.posts, start=1)
                ],
                "terms": list(entry.terms),
                "parent_context": parent,
            })
        return feed

    def agreement_view(self) -> dict:
        session = self._session()
        if not session.complete:
            raise ConflictError("session incomplete")
        _, report = adjudicate(session)
        return {
            "stages": [
                [_task_agreement_dict(t) for t in stage] for stage in report.stages
            ],
            "pooled": [_task_agreement_dict(t) for t in report.pooled],
            "two_or_more_rate": report.two_or_more_rate,
        }

    def adjudication_view(self) -> dict:
        session = self._session()
        if not session.complete:
            raise ConflictError("session incomplete")
        result, report = adjudicate(session)
        final = apply_exclusions(result)
        payload = final_set_to_dict(final)
        payload["two_or_more_rate"] = report.two_or_more_rate
        self.project.save_artifact("final_topics", payload)
        return payload

    def final_topics(self):
        return final_set_from_dict(self.project.require(
            "final_topics", "annotate adjudicate"
        ))

    def tree_view(self) -> dict:
        return self.project.require("tree", "qdtm train")

    def bundle_view(self) -> dict:
        return self.project.require("bundle", "qdtm export")

    def alignment_view(self) -> dict:
        matrix = matrix_from_dict(self.project.require("alignment", "align"))
        report = alignment_report(matrix)
        return {
            "matrix": matrix_to_dict(matrix),
            "report": {
                "comparable_codes": report.comparable_codes,
                "matched_codes": report.matched_codes,
                "gt_only": list(report.gt_only),
                "lda_only": list(report.lda_only),
                "many_to_one": [list(m) for m in report.many_to_one],
                "roster": [
                    {
                        "id": r.id,
                        "label": r.label,
                        "kind": r.kind,
                        "matched_topics": [list(t) for t in r.matched_topics],
                    }
                    for r in report.roster
                ],
            },
        }

    def query_sets_view(self) -> dict:
        return self.project.require("query_sets", "terms")

    def histogram_view(self) -> dict:
        table = table_from_dict(self.project.require(
            "classification", "sample classify"
        ))
        hist = label_frequencies(table)
        return {
            "total": hist.total,
            "entries": [
                {"label": l, "count": c, "fraction": f}
                for l, c, f in hist.entries
            ],
            "failures": len(table.failures),
        }

    def sheets_view(self) -> list[dict]:
        names = sorted(
            n for n in self.project.manifest["artifacts"] if n.startswith("coding/")
        )
        return [self.project.load_artifact(n) for n in names]

    def sheet_view(self, topic_id: str) -> dict:
        return self.project.require(f"coding/{topic_id}", "coding export")

    # -------------------------------------------------------------- mutations

    def apply(self, action: str, payload: dict,
              timestamp: str | None = None) -> dict:
        with self._lock:
            handler = getattr(self, f"_apply_{action}", None)
            if handler is None:
                raise ValidationError(f"unknown action {action!r}", field="action")
            event = self.project.log_event(action, payload, timestamp)
            return handler(payload, event["timestamp"])

    def _apply_submit_annotation(self, payload: dict, timestamp: str) -> dict:
        session = self._session()
        ann = TopicAnnotation(
            annotator_id=payload["annotator"],
            topic_id=payload["topic"],
            coherence=payload["coherence"],
            issue=payload.get("issue", "none"),
            implicated_posts=tuple(payload.get("implicated_posts", ())),
            labels=tuple(payload.get("labels", ())),
            relatedness=payload.get("relatedness"),
        )
        from .annotation import submit as submit_annotation

        submit_annotation(session, ann)
        self.project.save_artifact("session", session_to_dict(session))
        return {"accepted": True, "topic": ann.topic_id,
                "remaining": len(session.remaining_for(ann.annotator_id))}

    def _apply_record_alignment(self, payload: dict, timestamp: str) -> dict:
        codebook = codebook_from_dict(self.project.require("codebook", "explore"))
        matrix = record_alignment(
            codebook,
            {m: list(ts) for m, ts in payload["model_topics"].items()},
            [tuple(m) for m in payload.get("matches", ())],
            [tuple(n) for n in payload.get("new_topics", ())],
        )
        self.project.save_artifact("alignment", matrix_to_dict(matrix))
        report = alignment_report(matrix)
        return {"roster_size": len(report.roster),
                "matched_codes": report.matched_codes}

    def _apply_record_curation(self, payload: dict, timestamp: str) -> dict:
        matrix = matrix_from_dict(self.project.require("alignment", "align"))
        top_terms = self.project.require("model_top_terms", "lda summaries")
        vocabulary = None
        if self.project.has_artifact("corpus"):
            vocabulary = corpus_from_dict(
                self.project.load_artifact("corpus")
            ).vocabulary
        curation = CurationEdits(
            removals=tuple(
                (t, term) for t, term in payload.get("removals", ())
            ),
            proposed={
                t: list(terms) for t, terms in payload.get("proposed", {}).items()
            },
        )
        sets = derive_query_sets(
            matrix,
            {m: {int(k): v for k, v in topics.items()}
             for m, topics in top_terms.items()},
            curation,
            vocabulary=vocabulary,
        )
        self.project.save_artifact("query_sets", query_sets_to_dict(sets))
        return {"topics": len(sets)}

    def _apply_record_draw(self, payload: dict, timestamp: str) -> dict:
        table = table_from_dict(self.project.require(
            "classification", "sample classify"
        ))
        doc_ids = draw_sample(
            table, payload["label"], payload["n"], payload["seed"]
        )
        draws = (self.project.load_artifact("samples")
                 if self.project.has_artifact("samples") else {"draws": []})
        draws["draws"].append({
            "label": payload["label"],
            "n": payload["n"],
            "seed": payload["seed"],
            "doc_ids": doc_ids,
            "timestamp": timestamp,
        })
        self.project.save_artifact("samples", draws)
        return {"label": payload["label"], "doc_ids": doc_ids}

    def _apply_record_coding(self, payload: dict, timestamp: str) -> dict:
        name = f"coding/{payload['topic_id']}"
        sheet = sheet_from_dict(self.project.require(name, "coding export"))
        sheet = record_coding(sheet, payload["entries"], timestamp)
        self.project.save_artifact(name, sheet_to_dict(sheet))
        return {"topic_id": sheet.topic_id, "entries": len(sheet.entries)}


def _task_agreement_dict(t) -> dict:
    return {
        "task": t.task,
        "kappa": t.kappa,
        "all_agree": t.all_agree,
        "two_agree": t.two_agree,
        "no_agreement": t.no_agreement,
        "total": t.total,
    }


def replay_events(events: list[dict], store: WorkbenchStore) -> int:
    """Re-apply logged mutations in order; returns the number applied."""
    for event in sorted(events, key=lambda e: e["seq"]):
        store.apply(event["action"], event["payload"], event["timestamp"])
    return len(events)


# ---------------------------------------------------------------------------
# FastAPI app

def create_app(project: Project, assets_dir: str | None = None):
    from fastapi import Depends, FastAPI, Header, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="cgtkit workbench", version="1")
    store = WorkbenchStore(project)
    app.state.store = store

    def error_body(code: str, message: str, field: str | None = None) -> dict:
        return {"code": code, "message": message, "field": field}

    @app.exception_handler(ValidationError)
    async def _validation_handler(request: Request, exc: ValidationError):
        return JSONResponse(
            status_code=422,
            content=error_body("validation_error", str(exc), exc.field),
        )

    @app.exception_handler(ConflictError)
    async def _conflict_handler(request: Request, exc: ConflictError):
        return JSONResponse(status_code=409,
                            content=error_body("conflict", str(exc)))

    @app.exception_handler(CgtError)
    async def _cgt_handler(request: Request, exc: CgtError):
        return JSONResponse(status_code=500,
                            content=error_body("internal_error", str(exc)))

    def _token(authorization: str | None) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise PermissionError("missing bearer token")
        return authorization.removeprefix("Bearer ")

    def researcher(authorization: str | None = Header(default=None)) -> str:
        token = _token(authorization)
        if token != project.tokens()["researcher"]:
            raise PermissionError("researcher token required")
        return "researcher"

    def annotator(authorization: str | None = Header(default=None)) -> str:
        token = _token(authorization)
        for name, value in project.tokens()["annotators"].items():
            if value == token:
                return name
        raise PermissionError("unknown annotator token")

    @app.exception_handler(PermissionError)
    async def _perm_handler(request: Request, exc: PermissionError):
        status = 401 if "missing" in str(exc) else 403
        return JSONResponse(status_code=status,
                            content=error_body("forbidden", str(exc)))

    api = "/api/v1"

    @app.get(f"{api}/status")
    def status():
        return store.status()

    @app.get(f"{api}/tasks")
    def tasks(name: str = Depends(annotator)):
        return {"annotator": name, "tasks": store.task_feed(name)}

    @app.post(f"{api}/annotations")
    def post_annotation(payload: dict, name: str = Depends(annotator)):
        payload = dict(payload)
        payload["annotator"] = name
        return store.apply("submit_annotation", payload)

    @app.get(f"{api}/agreement")
    def agreement(_: str = Depends(researcher)):
        return store.agreement_view()

    @app.get(f"{api}/adjudication")
    def adjudication(_: str = Depends(researcher)):
        return store.adjudication_view()

    @app.get(f"{api}/tree")
    def tree(_: str = Depends(researcher)):
        return store.tree_view()

    @app.get(f"{api}/bundle")
    def bundle(_: str = Depends(researcher)):
        return store.bundle_view()

    @app.get(f"{api}/alignment")
    def alignment(_: str = Depends(researcher)):
        return store.alignment_view()

    @app.put(f"{api}/alignment")
    def put_alignment(payload: dict, _: str = Depends(researcher)):
        return store.apply("record_alignment", payload)

    @app.get(f"{api}/query-sets")
    def query_sets(_: str = Depends(researcher)):
        return store.query_sets_view()

    @app.put(f"{api}/query-sets")
    def put_query_sets(payload: dict, _: str = Depends(researcher)):
        return store.apply("record_curation", payload)

    @app.get(f"{api}/sampling/histogram")
    def histogram(_: str = Depends(researcher)):
        return store.histogram_view()

    @app.post(f"{api}/sampling/draws")
    def draws(payload: dict, _: str = Depends(researcher)):
        return store.apply("record_draw", payload)

    @app.get(f"{api}/coding/sheets")
    def sheets(_: str = Depends(researcher)):
        return {"sheets": store.sheets_view()}

    @app.get(f"{api}/coding/sheets/{{topic_id}}")
    def sheet(topic_id: str, _: str = Depends(researcher)):
        return store.sheet_view(topic_id)

    @app.post(f"{api}/coding/sheets/{{topic_id}}/entries")
    def post_entries(topic_id: str, payload: dict, _: str = Depends(researcher)):
        return store.apply(
            "record_coding",
            {"topic_id": topic_id, "entries": payload.get("entries", [])},
        )

    if assets_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=assets_dir, html=True),
                  name="console")

    return app


def serve(project: Project, host: str = "127.0.0.1", port: int = 8787,
          assets_dir: str | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(project, assets_dir), host=host, port=port,
                log_level="warning")
