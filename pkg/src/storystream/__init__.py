"""Streaming multilingual news clustering.

Articles flow in time batches; each batch is clustered per language into
local topics with Louvain community detection over learned pairwise
similarities, topics are chained into stories by replaying recent story
members into the batch, and stories are linked across languages through an
English pivot by optimal assignment over averaged dense embeddings.
"""

from .assignment import FORBIDDEN, hungarian
from .config import RunConfig, merge_config
from .corpus import (
    Batch,
    DfTable,
    Document,
    FeatureSet,
    Section,
    featurize,
    load_corpus,
    make_batches,
    parse_corpus,
    update_df,
)
from .crosslink import (
    CrosslinkConfig,
    EmbeddingStore,
    MultilingualRegistry,
    MultilingualStory,
    StoryEmbedding,
    link_stories,
    story_embedding,
)
from .metrics import bcubed_scores, pairwise_scores, report
from .pipeline import grid_search, run_pipeline, run_stream
from .similarity import (
    LabeledPair,
    WeightVector,
    build_training_pairs,
    cosine,
    fit_beta,
    pair_similarity,
)
from .stories import ReplayConfig, StoryRecord, StoryRegistry, advance, select_replays
from .synthetic import SyntheticSpec, generate_synthetic, write_synthetic
from .topics import SimilarityGraph, Topic, build_graph, detect_topics, louvain, modularity

__version__ = "0.1.0"
