"""Episodic few-shot classification engine built on class prototypes."""

__version__ = "0.1.0"

from .core import (
    PrototypeSet,
    classify_queries,
    classify_query,
    compute_prototypes,
    episode_loss,
    posterior_over_classes,
    squared_euclidean_distance,
)
from .data import (
    AugmentSpec,
    GrayImage,
    LabeledDataset,
    augment_image,
    generate_blobs,
    load_embeddings,
    preprocess_image,
    save_embeddings,
    split_train_val,
)
from .embed import (
    EmbeddingNetwork,
    FeatureMap,
    embed_forward,
    flatten_feature_map,
    init_network,
    load_network,
    loss_gradients,
    save_network,
)
from .episodes import Episode, EpisodeConfig, eligible_classes, sample_episode
from .evaluate import ConfusionMatrix, EvalReport, evaluate, summarize, weighted_accuracy
from .rng import Rng, derive_seed
from .train import TrainConfig, meta_train, optimizer_step
