"""Project persistence: a directory of plain-file artifacts under a
content-hashed manifest, plus an append-only event log of researcher and
annotator actions.

Everything is inspectable JSON; the manifest pins a sha256 per artifact so
a stale or hand-edited file is caught at load time. Replaying the event
log against an empty project reproduces the same artifact state.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import time
from pathlib import Path

from .base import CgtError, ValidationError
from .jsonio import atomic_write_text, canonical_dumps, read_json

MANIFEST_NAME = "manifest.json"
EVENTS_NAME = "events.jsonl"
TOKENS_NAME = "tokens.json"
CONFIG_NAME = "config.json"
ARTIFACT_DIR = "artifacts"

DEFAULT_CONFIG = {
    "preprocess": {
        "stopwords_file": None,
        "lemma_dictionary": None,
        "strip_punctuation": True,
        "strip_emoji": True,
        "strip_urls": True,
        "lowercase": True,
        "lemmatize": True,
        "min_token_length": 1,
        "min_df": 5,
    },
    "lda": {
        "alpha": None,          # null = 50 / K
        "beta": 0.01,
        "iterations": 1000,
        "n_top_terms": 20,
        "n_top_docs": 5,
        "heldout_fraction": 0.1,
        "sweep_workers": 1,
    },
    "expansion": {
        "frequency_cap": 30,
        "kld_cap": 30,
        "embedding_cap": 30,
        "source_weights": {"frequency": 1.0, "kld": 1.0, "embedding": 1.0},
    },
    "embeddings": {
        "dim": 100,
        "window": 5,
        "negatives": 5,
        "epochs": 5,
        "learning_rate": 0.025,
    },
    "qdtm": {
        "alpha": 1.0,
        "beta": 0.01,
        "gamma": 1.0,
        "boost": 10.0,
        "iterations": 200,
        "min_prevalence": 0.002,
        "bundle_posts": 5,
        "bundle_terms": 10,
    },
    "annotation": {
        "annotators": [],
        "stages": [],
    },
    "sampling": {
        "lexicon_file": None,
        "draw_size": 50,
    },
    "coding": {
        "posts_per_topic": 10,
        "token_ceiling": 512,
    },
    "seed": 0,
}


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def merge_config(overrides: dict | None) -> dict:
    """Defaults overlaid with a (possibly partial) user config."""
    def deep(base, extra):
        out = dict(base)
        for key, value in (extra or {}).items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                out[key] = deep(base[key], value)
            else:
                out[key] = value
        return out

    return deep(DEFAULT_CONFIG, overrides or {})


class Project:
    def __init__(self, root: Path, manifest: dict):
        self.root = Path(root)
        self.manifest = manifest

    # -- lifecycle ----------------------------------------------------------

    @classmethod
    def init(cls, path: str | Path, config: dict | None = None) -> "Project":
        root = Path(path)
        if root.exists() and any(root.iterdir()):
            raise ValidationError(f"project exists: {root} is not empty",
                                  field="path")
        (root / ARTIFACT_DIR).mkdir(parents=True, exist_ok=True)
        manifest = {
            "schema": "cgtkit/project@1",
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "artifacts": {},
        }
        project = cls(root, manifest)
        project._write_manifest()
        atomic_write_text(root / EVENTS_NAME, "")
        atomic_write_text(root / TOKENS_NAME, canonical_dumps({
            "researcher": secrets.token_urlsafe(16),
            "annotators": {},
        }))
        atomic_write_text(root / CONFIG_NAME,
                          canonical_dumps(merge_config(config)))
        return project

    @classmethod
    def load(cls, path: str | Path) -> "Project":
        root = Path(path)
        manifest_path = root / MANIFEST_NAME
        if not manifest_path.exists():
            raise ValidationError(f"no project manifest at {manifest_path}",
                                  field="path")
        try:
            manifest = read_json(manifest_path)
        except json.JSONDecodeError as exc:
            raise CgtError(f"corrupt manifest: {exc}") from exc
        if manifest.get("schema") != "cgtkit/project@1":
            raise CgtError("corrupt manifest: unknown schema")
        project = cls(root, manifest)
        for name, entry in manifest["artifacts"].items():
            file_path = root / entry["path"]
            if not file_path.exists():
                raise CgtError(f"hash mismatch: artifact {name} is missing "
                               f"({entry['path']})")
            actual = _sha256(file_path)
            if actual != entry["sha256"]:
                raise CgtError(
                    f"hash mismatch: artifact {name} is stale ({entry['path']})"
                )
        return project

    def _write_manifest(self) -> None:
        atomic_write_text(self.root / MANIFEST_NAME,
                          canonical_dumps(self.manifest))

    # -- artifacts ----------------------------------------------------------

    def artifact_path(self, name: str) -> Path:
        return self.root / ARTIFACT_DIR / f"{name}.json"

    def has_artifact(self, name: str) -> bool:
        return name in self.manifest["artifacts"]

    def save_artifact(self, name: str, payload: dict) -> Path:
        path = self.artifact_path(name)
        atomic_write_text(path, canonical_dumps(payload))
        self.manifest["artifacts"][name] = {
            "path": str(path.relative_to(self.root)),
            "sha256": _sha256(path),
        }
        self._write_manifest()
        return path

    def load_artifact(self, name: str) -> dict:
        if not self.has_artifact(name):
            raise ValidationError(f"artifact not found: {name}", field="name")
        return read_json(self.root / self.manifest["artifacts"][name]["path"])

    def require(self, name: str, hint: str) -> dict:
        if not self.has_artifact(name):
            raise ValidationError(f"artifact {name!r} missing; run {hint} first",
                                  field="name")
        return self.load_artifact(name)

    # -- config and tokens --------------------------------------------------

    @property
    def config(self) -> dict:
        return merge_config(read_json(self.root / CONFIG_NAME))

    def write_config(self, config: dict) -> None:
        atomic_write_text(self.root / CONFIG_NAME,
                          canonical_dumps(merge_config(config)))

    def tokens(self) -> dict:
        return read_json(self.root / TOKENS_NAME)

    def issue_annotator_tokens(self, annotators: list[str]) -> dict[str, str]:
        tokens = self.tokens()
        tokens["annotators"] = {a: secrets.token_urlsafe(16) for a in annotators}
        atomic_write_text(self.root / TOKENS_NAME, canonical_dumps(tokens))
        return tokens["annotators"]

    # -- events -------------------------------------------------------------

    def log_event(self, action: str, payload: dict,
                  timestamp: str | None = None) -> dict:
        events_path = self.root / EVENTS_NAME
        seq = sum(1 for _ in open(events_path, encoding="utf-8")) \
            if events_path.exists() else 0
        event = {
            "seq": seq,
            "timestamp": timestamp
            or time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "action": action,
            "payload": payload,
        }
        with open(events_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
        return event

    def events(self) -> list[dict]:
        events_path = self.root / EVENTS_NAME
        if not events_path.exists():
            return []
        out = []
        with open(events_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    out.append(json.loads(line))
        return out
