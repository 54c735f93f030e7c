import csv
import json
import random

import pytest
from click.testing import CliRunner

from cgtkit.cli import main
from cgtkit.jsonio import read_json, write_json

TERM_POOLS = {
    "Payments": [f"pay{i}" for i in range(6)],
    "Classes": [f"class{i}" for i in range(6)],
    "Tech": [f"tech{i}" for i in range(6)],
}


def write_fixture_corpus(path, n_docs=48, seed=4):
    rng = random.Random(seed)
    names = list(TERM_POOLS)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n_docs):
            theme = names[i % 3]
            tokens = [rng.choice(TERM_POOLS[theme]) for _ in range(12)]
            if i % 3 == 0:
                tokens.append("thanks")
            if i in (0, 3, 6, 9):
                tokens += ["covid", "lockdown"]
            source = ["GoGoKidTeach", "Palfish", "Vipkid"][i % 3]
            fh.write(json.dumps({
                "id": f"p{i:03d}", "source": source, "text": " ".join(tokens),
            }) + "\n")


CONFIG = {
    "preprocess": {"min_df": 2, "lemmatize": False},
    "lda": {"iterations": 40, "heldout_fraction": 0.0, "n_top_terms": 8},
    "embeddings": {"dim": 8, "epochs": 2, "window": 3},
    "expansion": {"frequency_cap": 5, "kld_cap": 5, "embedding_cap": 5},
    "qdtm": {"iterations": 40, "bundle_posts": 3, "bundle_terms": 5,
             "min_prevalence": 0.002},
    "sampling": {"draw_size": 2},
    "coding": {"posts_per_topic": 3},
    "seed": 11,
}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the whole CLI workflow once; tests inspect the outcome."""
    root = tmp_path_factory.mktemp("work")
    project = root / "proj"
    runner = CliRunner()

    def invoke(*args, expect=0):
        result = runner.invoke(main, ["--project", str(project), *args],
                               catch_exceptions=False)
        assert result.exit_code == expect, result.output
        return result

    config_path = root / "config.json"
    write_json(config_path, CONFIG)
    posts = root / "posts.jsonl"
    write_fixture_corpus(posts)

    runner.invoke(main, ["--config", str(config_path), "init", str(project)],
                  catch_exceptions=False)
    invoke("ingest", str(posts))
    invoke("preprocess")
    invoke("explore", "subset", "--sources", "GoGoKidTeach,Palfish")

    codes_file = root / "codes.json"
    write_json(codes_file, [
        {"label": "Payments", "description": "pay talk"},
        {"label": "Classes", "description": "class talk"},
        {"label": "Tech", "description": "tech talk"},
        {"label": "Covid", "description": "pandemic talk"},
        {"label": "Sharing feelings", "description": "abstract",
         "exclude_reason": "contextual"},
    ])
    invoke("explore", "codes", "--file", str(codes_file))

    invoke("lda", "train", "--k", "2")
    invoke("lda", "train", "--k", "3")
    invoke("lda", "sweep", "--ks", "2,3")
    invoke("lda", "summaries", "--k", "2")
    invoke("lda", "summaries", "--k", "3")

    decisions = root / "decisions.json"
    write_json(decisions, {
        "model_topics": {"2": [0, 1], "3": [0, 1, 2]},
        "matches": [
            ["Payments", "2", 0], ["Payments", "3", 0],
            ["Classes", "2", 1], ["Classes", "3", 1],
            ["Tech", "3", 2],
        ],
        "new_topics": [],
    })
    invoke("align", "--decisions", str(decisions))

    curation = root / "curation.json"
    write_json(curation, {"proposed": {"T04": ["covid", "lockdown"]}})
    invoke("terms", "--curation", str(curation), "--csv",
           str(root / "terms.csv"))

    invoke("qdtm", "train")
    invoke("qdtm", "prune")
    invoke("qdtm", "export", "--csv-dir", str(root / "bundle_csv"))

    invoke("annotate", "create", "--annotators", "A1,A2,A3")

    session = read_json(project / "artifacts" / "session.json")
    annotations = root / "annotations.csv"
    with open(annotations, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["annotator", "topic", "coherence", "issue",
                         "implicated_posts", "labels", "relatedness"])
        for annotator in session["annotators"]:
            for topic, parent in session["topics"].items():
                writer.writerow([
                    annotator, topic, 3, "none", "", f"label {topic}",
                    "" if parent is None else 3,
                ])
    invoke("annotate", "import", "--csv", str(annotations))
    invoke("annotate", "adjudicate")

    lexicon = root / "lexicon.tsv"
    lexicon.write_text("pay0\tpaytalk\nclass0\tclasstalk\nthanks\tgratitude\n")
    invoke("sample", "classify", "--lexicon", str(lexicon))
    invoke("sample", "hist", "--csv", str(root / "hist.csv"))
    invoke("sample", "draw", "--label", "gratitude", "--n", "2",
           "--out", str(root / "sample.jsonl"))

    invoke("coding", "report")
    invoke("coding", "export")
    return root, project, invoke


class TestPipeline:
    def test_artifacts_present(self, pipeline):
        _, project, _ = pipeline
        manifest = read_json(project / "manifest.json")
        for name in ("corpus_raw", "corpus", "corpus_subset", "codebook",
                     "lda_2", "lda_3", "sweep", "model_top_terms", "alignment",
                     "query_sets", "embeddings", "concept_sets", "tree",
                     "bundle", "session", "final_topics", "classification",
                     "samples", "coding_report"):
            assert name in manifest["artifacts"], name

    def test_min_df_applied_to_modelling_corpus(self, pipeline):
        _, project, _ = pipeline
        corpus = read_json(project / "artifacts" / "corpus.json")
        assert corpus["min_df"] == 2
        assert min(corpus["vocabulary"]["doc_freq"]) >= 2

    def test_subset_only_requested_sources(self, pipeline):
        _, project, _ = pipeline
        subset = read_json(project / "artifacts" / "corpus_subset.json")
        assert {d["source"] for d in subset["documents"]} == {
            "GoGoKidTeach", "Palfish",
        }

    def test_roster_and_query_sets(self, pipeline):
        root, project, _ = pipeline
        query_sets = read_json(project / "artifacts" / "query_sets.json")
        assert len(query_sets["topics"]) == 4
        covid = query_sets["topics"][3]
        assert covid["proposed"] == ["covid", "lockdown"]
        assert covid["out_of_vocabulary"] == []
        header = (root / "terms.csv").read_text().splitlines()[0]
        assert header.startswith("topic,label,common,unique:")

    def test_tree_and_bundle_shape(self, pipeline):
        _, project, _ = pipeline
        tree = read_json(project / "artifacts" / "tree.json")
        assert len(tree["mains"]) == 4
        assert tree["pruned"] and tree["deduped"]
        total = sum(m["prevalence"] for m in tree["mains"])
        assert abs(total - 1.0) < 1e-9
        bundle = read_json(project / "artifacts" / "bundle.json")
        mains = [e for e in bundle["entries"] if e["parent_id"] is None]
        assert len(mains) == 4
        assert len(bundle["entries"]) == len(mains) + tree_subtopics(tree)

    def test_adjudication_all_retained(self, pipeline):
        _, project, _ = pipeline
        final = read_json(project / "artifacts" / "final_topics.json")
        bundle = read_json(project / "artifacts" / "bundle.json")
        assert len(final["retained"]) == len(bundle["entries"])
        assert final["excluded"] == []
        assert final["two_or_more_rate"] == 1.0

    def test_sampling_outputs(self, pipeline):
        root, project, _ = pipeline
        hist_lines = (root / "hist.csv").read_text().strip().splitlines()
        assert hist_lines[0] == "label,count,fraction"
        sample_lines = (root / "sample.jsonl").read_text().strip().splitlines()
        assert len(sample_lines) == 2
        assert all(json.loads(l)["label"] == "gratitude" for l in sample_lines)
        samples = read_json(project / "artifacts" / "samples.json")
        assert samples["draws"][0]["n"] == 2

    def test_coding_outputs(self, pipeline):
        _, project, _ = pipeline
        report = read_json(project / "artifacts" / "coding_report.json")
        final = read_json(project / "artifacts" / "final_topics.json")
        assert report["topic_count"] == len(final["retained"])
        assert report["posts_per_topic"] == 3
        assert report["token_min"] >= 1
        sheets = [
            name for name in read_json(project / "manifest.json")["artifacts"]
            if name.startswith("coding/")
        ]
        assert len(sheets) == len(final["retained"])

    def test_reexport_is_deterministic(self, pipeline):
        _, project, invoke = pipeline
        manifest_before = read_json(project / "manifest.json")["artifacts"]
        sheet_names = [n for n in manifest_before if n.startswith("coding/")]
        before = {n: manifest_before[n]["sha256"] for n in sheet_names}
        invoke("coding", "export")
        manifest_after = read_json(project / "manifest.json")["artifacts"]
        assert {n: manifest_after[n]["sha256"] for n in sheet_names} == before


def tree_subtopics(tree_dict):
    return sum(len(m["subtopics"]) for m in tree_dict["mains"])


class TestExitCodes:
    def test_validation_error_exits_2(self, tmp_path):
        runner = CliRunner()
        (tmp_path / "junk").write_text("x")
        result = runner.invoke(main, ["init", str(tmp_path)])
        assert result.exit_code == 2
        assert "project exists" in result.output

    def test_io_error_exits_3(self, tmp_path):
        runner = CliRunner()
        runner.invoke(main, ["init", str(tmp_path / "p")])
        # tamper with a saved artifact so the manifest check fails
        result = runner.invoke(
            main, ["--project", str(tmp_path / "p"), "preprocess"]
        )
        assert result.exit_code == 2  # missing corpus_raw is a validation error
        manifest = read_json(tmp_path / "p" / "manifest.json")
        manifest["schema"] = "wrong"
        write_json(tmp_path / "p" / "manifest.json", manifest)
        result = runner.invoke(
            main, ["--project", str(tmp_path / "p"), "preprocess"]
        )
        assert result.exit_code == 3
        assert "corrupt manifest" in result.output

    def test_unknown_project_exits_2(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            main, ["--project", str(tmp_path / "nope"), "preprocess"]
        )
        assert result.exit_code == 2
