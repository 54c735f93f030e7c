"""Query-driven two-level topic modelling: term expansion, embeddings and
the seeded sampler with automatically inferred subtopic counts."""

from .expand import (
    ConceptTermSet,
    build_concept_set,
    expand_embedding,
    expand_frequency,
    expand_kld,
)
from .embeddings import EmbeddingTable, SkipGramEmbedder
from .model import (
    AnnotationBundle,
    BundleEntry,
    MainTopic,
    QueryDrivenTopicModel,
    Subtopic,
    TopicTree,
    bundle_from_dict,
    bundle_to_dict,
    dedupe,
    export_annotation_bundle,
    export_bundle_csv,
    load_bundle,
    load_tree,
    prune_tree,
    save_bundle,
    save_tree,
    tree_from_dict,
    tree_to_dict,
)

__all__ = [
    "AnnotationBundle",
    "BundleEntry",
    "ConceptTermSet",
    "EmbeddingTable",
    "MainTopic",
    "QueryDrivenTopicModel",
    "SkipGramEmbedder",
    "Subtopic",
    "TopicTree",
    "build_concept_set",
    "bundle_from_dict",
    "bundle_to_dict",
    "dedupe",
    "expand_embedding",
    "expand_frequency",
    "expand_kld",
    "export_annotation_bundle",
    "export_bundle_csv",
    "load_bundle",
    "load_tree",
    "prune_tree",
    "save_bundle",
    "save_tree",
    "tree_from_dict",
    "tree_to_dict",
]
