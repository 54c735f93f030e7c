"""Command-line entry points, one verb per workflow step.

Exit codes: 0 success, 2 validation error, 3 I/O or project-integrity
error. Every hyperparameter comes from the project config (overridable
with --config) so runs are reproducible from plain files.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import alignment as al
from . import annotation as an
from . import coding as cd
from . import corpus as cp
from . import lda as ld
from . import sampling as sp
from .base import CgtError, ValidationError
from .jsonio import read_json
from .project import Project, merge_config
from .qdtm import (
    QueryDrivenTopicModel,
    SkipGramEmbedder,
    build_concept_set,
    bundle_from_dict,
    bundle_to_dict,
    dedupe,
    expand_embedding,
    expand_frequency,
    expand_kld,
    export_annotation_bundle,
    export_bundle_csv,
    prune_tree,
    tree_from_dict,
    tree_to_dict,
)
from .qdtm.embeddings import embeddings_from_dict, embeddings_to_dict


class Context:
    def __init__(self, project_path: str, seed: int | None, config_path: str | None):
        self.project_path = Path(project_path)
        self.seed_override = seed
        self.config_path = config_path
        self._project = None

    @property
    def project(self) -> Project:
        if self._project is None:
            self._project = Project.load(self.project_path)
        return self._project

    @property
    def config(self) -> dict:
        config = self.project.config
        if self.config_path:
            config = merge_config({**config, **read_json(self.config_path)})
        return config

    @property
    def seed(self) -> int:
        if self.seed_override is not None:
            return self.seed_override
        return self.config["seed"]

    def corpus(self) -> cp.Corpus:
        return cp.corpus_from_dict(self.project.require("corpus", "preprocess"))


pass_context = click.make_pass_decorator(Context)


@click.group()
@click.option("--project", "project_path", default=".",
              help="Project directory (created with `cgtkit init`).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--config", "config_path", default=None,
              help="JSON file overriding the project config.")
@click.pass_context
def main(ctx, project_path, seed, config_path):
    """Human-in-the-loop computational grounded theory workbench."""
    ctx.obj = Context(project_path, seed, config_path)


def run(func):
    """Map workbench errors onto the documented exit codes."""
    try:
        func()
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except (CgtError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)


@main.command()
@click.argument("path")
@pass_context
def init(ctx, path):
    """Create an empty project directory."""
    def go():
        overrides = read_json(ctx.config_path) if ctx.config_path else None
        Project.init(path, overrides)
        click.echo(f"initialized project at {path}")

    run(go)


@main.command()
@click.argument("jsonl", type=click.Path(exists=True))
@pass_context
def ingest(ctx, jsonl):
    """Read raw posts from a JSONL file into the project."""
    def go():
        corpus = cp.ingest_corpus(jsonl)
        ctx.project.save_artifact("corpus_raw", cp.corpus_to_dict(corpus))
        click.echo(f"ingested {len(corpus)} documents")

    run(go)


@main.command()
@pass_context
def preprocess(ctx):
    """Tokenize, normalize and build the vocabulary (config-driven)."""
    def go():
        raw = cp.corpus_from_dict(ctx.project.require("corpus_raw", "ingest"))
        pc = ctx.config["preprocess"]
        stopwords = frozenset(
            cp.load_wordlist(pc["stopwords_file"]) if pc["stopwords_file"] else ()
        )
        overrides = (cp.load_lemma_overrides(pc["lemma_dictionary"])
                     if pc["lemma_dictionary"] else ())
        config = cp.PreprocessConfig(
            stopwords=stopwords,
            strip_punctuation=pc["strip_punctuation"],
            strip_emoji=pc["strip_emoji"],
            strip_urls=pc["strip_urls"],
            lowercase=pc["lowercase"],
            lemmatize=pc["lemmatize"],
            min_token_length=pc["min_token_length"],
            lemma_overrides=overrides,
        )
        corpus = cp.preprocess(raw, config)
        corpus = cp.apply_min_df(corpus, pc["min_df"])
        ctx.project.save_artifact("corpus", cp.corpus_to_dict(corpus))
        click.echo(
            f"preprocessed {len(corpus)} documents; vocabulary "
            f"{len(corpus.vocabulary)} terms (min_df={pc['min_df']})"
        )

    run(go)


@main.group()
def explore():
    """Phase one: subset selection and GT code registry."""


@explore.command()
@click.option("--sources", default=None, help="Comma-separated source names.")
@click.option("--random", "n_random", type=int, default=None,
              help="Random subset size.")
@click.option("--out", default=None, help="Also export the subset as JSONL.")
@pass_context
def subset(ctx, sources, n_random, out):
    """Select the exploration subset (by source or at random)."""
    def go():
        corpus = ctx.corpus()
        if sources:
            picked = cp.sample_by_source(corpus, sources.split(","))
        elif n_random:
            picked = cp.sample_random(corpus, n_random, ctx.seed)
        else:
            raise ValidationError("pass --sources or --random", field="selector")
        ctx.project.save_artifact("corpus_subset", cp.corpus_to_dict(picked))
        if out:
            with open(out, "w", encoding="utf-8") as fh:
                for doc in picked.documents:
                    fh.write(json.dumps(
                        {"id": doc.id, "source": doc.source, "text": doc.text},
                        ensure_ascii=False,
                    ) + "\n")
        click.echo(f"subset of {len(picked)} documents saved")

    run(go)


@explore.command()
@click.option("--file", "codes_file", required=True, type=click.Path(exists=True),
              help="JSON list of {label, description, exclude_reason?}.")
@pass_context
def codes(ctx, codes_file):
    """Register the GT codes produced by hand-coding the subset."""
    def go():
        spec = read_json(codes_file)
        pairs = [(c["label"], c.get("description", "")) for c in spec]
        exclusions = {
            c["label"]: c["exclude_reason"]
            for c in spec if c.get("exclude_reason")
        }
        codebook = al.register_gt_codes(pairs, exclusions)
        ctx.project.save_artifact("codebook", al.codebook_to_dict(codebook))
        click.echo(
            f"registered {len(codebook.codes)} codes "
            f"({len(codebook.comparable)} comparable)"
        )

    run(go)


@main.group()
def lda():
    """Exploratory topic models over the full corpus."""


@lda.command()
@click.option("--k", type=int, required=True)
@pass_context
def train(ctx, k):
    """Train one LDA model by collapsed Gibbs sampling."""
    def go():
        corpus = ctx.corpus()
        lc = ctx.config["lda"]
        model = ld.LdaGibbs(
            n_topics=k, alpha=lc["alpha"], beta=lc["beta"],
            iterations=lc["iterations"], seed=ctx.seed,
        ).fit(corpus)
        ctx.project.save_artifact(f"lda_{k}", ld.model_to_dict(model))
        click.echo(f"trained LDA with K={k}")

    run(go)


@lda.command()
@click.option("--ks", required=True, help="Comma-separated candidate K values.")
@click.option("--workers", type=int, default=None)
@pass_context
def sweep(ctx, ks, workers):
    """Train and evaluate several candidate topic counts in parallel."""
    def go():
        corpus = ctx.corpus()
        lc = ctx.config["lda"]
        reports = ld.sweep(
            corpus, [int(k) for k in ks.split(",")],
            alpha=lc["alpha"], beta=lc["beta"], iterations=lc["iterations"],
            seed=ctx.seed, heldout_fraction=lc["heldout_fraction"],
            workers=workers or lc["sweep_workers"],
        )
        ctx.project.save_artifact(
            "sweep", {"reports": [r.to_dict() for r in reports]}
        )
        for r in reports:
            if r.error:
                click.echo(f"K={r.n_topics}: error: {r.error}")
            else:
                perplexity = ("-" if r.heldout_perplexity is None
                              else f"{r.heldout_perplexity:.1f}")
                click.echo(
                    f"K={r.n_topics}: coherence {r.mean_coherence:.3f}, "
                    f"held-out perplexity {perplexity}"
                )

    run(go)


@lda.command()
@click.option("--k", type=int, required=True)
@click.option("--csv", "csv_out", default=None)
@pass_context
def summaries(ctx, k, csv_out):
    """Print top terms per topic and record them for the alignment step."""
    def go():
        model = ld.model_from_dict(ctx.project.require(f"lda_{k}", "lda train"))
        lc = ctx.config["lda"]
        top_terms = {}
        for topic in range(model.n_topics):
            terms = [t for t, _ in model.top_terms(topic, lc["n_top_terms"])]
            top_terms[str(topic)] = terms
            click.echo(f"topic {topic}: {', '.join(terms[:10])}")
        stored = (ctx.project.load_artifact("model_top_terms")
                  if ctx.project.has_artifact("model_top_terms") else {})
        stored[str(k)] = top_terms
        ctx.project.save_artifact("model_top_terms", stored)
        if csv_out:
            ld.export_summaries_csv(model, csv_out, lc["n_top_terms"])

    run(go)


@main.command()
@click.option("--decisions", "decisions_file", required=True,
              type=click.Path(exists=True),
              help="JSON {model_topics, matches, new_topics}.")
@pass_context
def align(ctx, decisions_file):
    """Record the concurrent-validation match decisions."""
    def go():
        payload = read_json(decisions_file)
        codebook = al.codebook_from_dict(
            ctx.project.require("codebook", "explore codes")
        )
        matrix = al.record_alignment(
            codebook,
            payload["model_topics"],
            [tuple(m) for m in payload.get("matches", ())],
            [tuple(n) for n in payload.get("new_topics", ())],
        )
        ctx.project.save_artifact("alignment", al.matrix_to_dict(matrix))
        report = al.alignment_report(matrix)
        click.echo(
            f"matched {report.matched_codes}/{report.comparable_codes} codes; "
            f"{len(report.gt_only)} GT-only, {len(report.lda_only)} LDA-only; "
            f"roster {len(report.roster)} topics"
        )

    run(go)


@main.command()
@click.option("--curation", "curation_file", default=None,
              type=click.Path(exists=True),
              help="JSON {removals: [[topic, term]], proposed: {topic: [terms]}}.")
@click.option("--csv", "csv_out", default=None)
@pass_context
def terms(ctx, curation_file, csv_out):
    """Derive the curated query term sets from the alignment."""
    def go():
        matrix = al.matrix_from_dict(ctx.project.require("alignment", "align"))
        stored = ctx.project.require("model_top_terms", "lda summaries")
        model_top_terms = {
            m: {int(topic): terms for topic, terms in topics.items()}
            for m, topics in stored.items()
        }
        curation = al.CurationEdits()
        if curation_file:
            payload = read_json(curation_file)
            curation = al.CurationEdits(
                removals=tuple((t, term) for t, term in payload.get("removals", ())),
                proposed=payload.get("proposed", {}),
            )
        vocabulary = None
        if ctx.project.has_artifact("corpus"):
            vocabulary = ctx.corpus().vocabulary
        sets = al.derive_query_sets(matrix, model_top_terms, curation, vocabulary)
        ctx.project.save_artifact("query_sets", al.query_sets_to_dict(sets))
        if csv_out:
            al.export_query_sets_csv(sets, csv_out)
        click.echo(f"derived {len(sets)} query term sets")

    run(go)


@main.group()
def qdtm():
    """Phase two: the query-driven two-level topic model."""


@qdtm.command("train")
@pass_context
def qdtm_train(ctx):
    """Expand query terms into concept sets and train the topic tree."""
    def go():
        corpus = ctx.corpus()
        sets = al.query_sets_from_dict(ctx.project.require("query_sets", "terms"))
        ec = ctx.config["embeddings"]
        xc = ctx.config["expansion"]
        qc = ctx.config["qdtm"]
        if ctx.project.has_artifact("embeddings"):
            table = embeddings_from_dict(ctx.project.load_artifact("embeddings"))
        else:
            table = SkipGramEmbedder(
                dim=ec["dim"], window=ec["window"], negatives=ec["negatives"],
                epochs=ec["epochs"], learning_rate=ec["learning_rate"],
                seed=ctx.seed,
            ).fit(corpus).table_
            ctx.project.save_artifact("embeddings", embeddings_to_dict(table))
        concept_sets = []
        for qts in sets:
            seeds = [t for t in qts.retained if t in corpus.vocabulary]
            if not seeds:
                raise ValidationError(
                    f"query set {qts.topic_id} has no in-vocabulary term"
                )
            expansions = {
                "frequency": expand_frequency(seeds, corpus, xc["frequency_cap"]),
                "kld": expand_kld(seeds, corpus, xc["kld_cap"]),
                "embedding": expand_embedding(seeds, table, xc["embedding_cap"]),
            }
            concept_sets.append(build_concept_set(
                qts.topic_id, qts.label, seeds, expansions,
                caps={
                    "frequency": xc["frequency_cap"],
                    "kld": xc["kld_cap"],
                    "embedding": xc["embedding_cap"],
                },
                source_weights=xc["source_weights"],
            ))
        ctx.project.save_artifact(
            "concept_sets",
            {"topics": [cs.to_dict() for cs in concept_sets]},
        )
        model = QueryDrivenTopicModel(
            alpha=qc["alpha"], beta=qc["beta"], gamma=qc["gamma"],
            boost=qc["boost"], iterations=qc["iterations"], seed=ctx.seed,
        ).fit(corpus, concept_sets)
        ctx.project.save_artifact("tree", tree_to_dict(model.tree_))
        click.echo(
            f"trained tree: {len(model.tree_.mains)} main topics, "
            f"{model.tree_.n_subtopics} subtopics"
        )

    run(go)


@qdtm.command("prune")
@click.option("--min-prevalence", type=float, default=None)
@pass_context
def qdtm_prune(ctx, min_prevalence):
    """Drop subtopics below the prevalence threshold."""
    def go():
        tree = tree_from_dict(ctx.project.require("tree", "qdtm train"))
        threshold = (ctx.config["qdtm"]["min_prevalence"]
                     if min_prevalence is None else min_prevalence)
        pruned = prune_tree(tree, threshold)
        ctx.project.save_artifact("tree", tree_to_dict(pruned))
        click.echo(
            f"pruned to {pruned.n_subtopics} subtopics "
            f"(threshold {threshold})"
        )

    run(go)


@qdtm.command("export")
@click.option("--csv-dir", default=None)
@pass_context
def qdtm_export(ctx, csv_dir):
    """Deduplicate the tree and export the annotation bundle."""
    def go():
        tree = tree_from_dict(ctx.project.require("tree", "qdtm train"))
        corpus = ctx.corpus()
        qc = ctx.config["qdtm"]
        tree = dedupe(tree, corpus)
        ctx.project.save_artifact("tree", tree_to_dict(tree))
        bundle = export_annotation_bundle(
            tree, corpus, n_posts=qc["bundle_posts"], n_terms=qc["bundle_terms"]
        )
        ctx.project.save_artifact("bundle", bundle_to_dict(bundle))
        if csv_dir:
            export_bundle_csv(bundle, csv_dir)
        click.echo(f"bundle of {len(bundle.entries)} topics exported")

    run(go)


@main.group()
def annotate():
    """Human evaluation of the topic tree."""


@annotate.command("create")
@click.option("--annotators", required=True, help="Comma-separated annotator ids.")
@click.option("--stage-mains", default=None,
              help="Comma-separated main-topic ids for stage one "
                   "(defaults to the first two).")
@pass_context
def annotate_create(ctx, annotators, stage_mains):
    """Create the annotation session and issue bearer tokens."""
    def go():
        bundle = bundle_from_dict(ctx.project.require("bundle", "qdtm export"))
        roster = annotators.split(",")
        mains = [e.topic_id for e in bundle.mains]
        first = stage_mains.split(",") if stage_mains else mains[:2]
        stage1 = [
            e.topic_id for e in bundle.entries
            if e.topic_id in first or e.parent_id in first
        ]
        stage2 = [e.topic_id for e in bundle.entries if e.topic_id not in stage1]
        session = an.create_session(bundle, roster, [stage1, stage2])
        ctx.project.save_artifact("session", an.session_to_dict(session))
        tokens = ctx.project.issue_annotator_tokens(roster)
        click.echo(f"session created: stages of {len(stage1)} and {len(stage2)} topics")
        for name, token in tokens.items():
            click.echo(f"token {name}: {token}")

    run(go)


@annotate.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8787)
@click.option("--assets", default=None, help="Static console bundle directory.")
@pass_context
def annotate_serve(ctx, host, port, assets):
    """Serve the HTTP API (and the console, if assets are given)."""
    def go():
        from .service import serve as serve_app

        serve_app(ctx.project, host=host, port=port, assets_dir=assets)

    run(go)


@annotate.command("import")
@click.option("--csv", "csv_file", required=True, type=click.Path(exists=True))
@pass_context
def annotate_import(ctx, csv_file):
    """Import annotations from CSV through the normal validation."""
    def go():
        session = an.session_from_dict(
            ctx.project.require("session", "annotate create")
        )
        an.import_annotations_csv(session, csv_file)
        ctx.project.save_artifact("session", an.session_to_dict(session))
        click.echo(f"imported; {len(session.records)} records stored")

    run(go)


@annotate.command("adjudicate")
@pass_context
def annotate_adjudicate(ctx):
    """Majority-vote adjudication, agreement report and exclusions."""
    def go():
        session = an.session_from_dict(
            ctx.project.require("session", "annotate create")
        )
        result, report = an.adjudicate(session)
        final = an.apply_exclusions(result)
        payload = an.final_set_to_dict(final)
        payload["two_or_more_rate"] = report.two_or_more_rate
        ctx.project.save_artifact("final_topics", payload)
        click.echo(an.render_agreement_table(report))
        click.echo("")
        click.echo(an.render_category_table(final))

    run(go)


@main.group()
def sample():
    """Phase three support: classifier-driven theoretical sampling."""


@sample.command("classify")
@click.option("--lexicon", default=None, type=click.Path(exists=True),
              help="term<TAB>label lexicon for the reference plugin.")
@click.option("--command", "command_line", default=None,
              help="External classifier command (JSONL protocol).")
@pass_context
def sample_classify(ctx, lexicon, command_line):
    """Label every document with the selected classifier plugin."""
    def go():
        corpus = ctx.corpus()
        lexicon_path = lexicon or ctx.config["sampling"]["lexicon_file"]
        if command_line:
            plugin = sp.SubprocessClassifier(command_line.split())
        elif lexicon_path:
            plugin = sp.LexiconClassifier.from_file(lexicon_path)
        else:
            raise ValidationError("pass --lexicon or --command", field="plugin")
        table = sp.classify_corpus(corpus, plugin)
        ctx.project.save_artifact("classification", sp.table_to_dict(table))
        click.echo(
            f"classified {len(table.rows)} documents "
            f"({len(table.failures)} failures) with {table.plugin_name}"
        )

    run(go)


@sample.command("hist")
@click.option("--csv", "csv_out", default=None)
@pass_context
def sample_hist(ctx, csv_out):
    """Label frequency histogram (and bar-chart data export)."""
    def go():
        table = sp.table_from_dict(
            ctx.project.require("classification", "sample classify")
        )
        hist = sp.label_frequencies(table)
        for label, count, fraction in hist.entries:
            click.echo(f"{label:<20}{count:>7}  {fraction:.2%}")
        if csv_out:
            sp.export_histogram_csv(hist, csv_out)

    run(go)


@sample.command("draw")
@click.option("--label", required=True)
@click.option("--n", type=int, default=None)
@click.option("--out", default=None, help="JSONL export path.")
@pass_context
def sample_draw(ctx, label, n, out):
    """Draw a reproducible random sample of posts for one label."""
    def go():
        table = sp.table_from_dict(
            ctx.project.require("classification", "sample classify")
        )
        size = n or ctx.config["sampling"]["draw_size"]
        doc_ids = sp.draw_sample(table, label, size, ctx.seed)
        draws = (ctx.project.load_artifact("samples")
                 if ctx.project.has_artifact("samples") else {"draws": []})
        draws["draws"].append({
            "label": label, "n": size, "seed": ctx.seed, "doc_ids": doc_ids,
        })
        ctx.project.save_artifact("samples", draws)
        if out:
            sp.export_sample_jsonl(doc_ids, ctx.corpus(), label, out)
        click.echo(f"drew {len(doc_ids)} documents for label {label}")

    run(go)


@main.group()
def coding():
    """Phase three: coding load report and coding sheets."""


def _final_and_posts(ctx):
    final = an.final_set_from_dict(
        ctx.project.require("final_topics", "annotate adjudicate")
    )
    tree = tree_from_dict(ctx.project.require("tree", "qdtm train"))
    cc = ctx.config["coding"]
    posts = cd.posts_from_tree(tree, final, cc["posts_per_topic"])
    return final, tree, posts, cc


@coding.command("report")
@pass_context
def coding_report(ctx):
    """Token-length statistics for the planned hand-coding workload."""
    def go():
        _, _, posts, cc = _final_and_posts(ctx)
        report = cd.coding_load_report(
            posts, ctx.corpus(), cc["posts_per_topic"], cc["token_ceiling"]
        )
        ctx.project.save_artifact("coding_report", report.to_dict())
        click.echo(
            f"{report.topic_count} topics x {report.posts_per_topic} posts = "
            f"{report.total_posts} posts; tokens min {report.token_min} / "
            f"mean {report.token_mean:.0f} / max {report.token_max}; "
            f"{report.over_ceiling} posts over {report.token_ceiling} tokens"
        )

    run(go)


@coding.command("export")
@pass_context
def coding_export(ctx):
    """Write one coding sheet per retained topic, grouped by main topic."""
    def go():
        final, tree, posts, _ = _final_and_posts(ctx)
        labels = {m.id: m.label for m in tree.mains}
        sheets = cd.export_coding_sheets(final, posts, ctx.corpus(), labels)
        for sheet in sheets:
            ctx.project.save_artifact(
                f"coding/{sheet.topic_id}", cd.sheet_to_dict(sheet)
            )
        click.echo(f"exported {len(sheets)} coding sheets")

    run(go)


if __name__ == "__main__":
    main()
