from .adapter import ProjectionAdapter
from .contrastive import (
    DISLIKE_CONS,
    LIKE_PROS,
    ContrastiveSample,
    ContrastiveSet,
    FeatureStore,
    build_contrastive_set,
    normalize_text,
    window_bounds,
)
from .embedding import HashingEmbedder
from .index import CONS, PROS, FeatureIndex, build_feature_index, encode_user, retrieve_topk
from .loss import cosine, group_scores, infonce_from_scores, infonce_grad, infonce_loss, infonce_loss_and_grad
from .training import embed_samples, hit_at_1, train_adapter

__all__ = [
    "CONS",
    "DISLIKE_CONS",
    "LIKE_PROS",
    "PROS",
    "ContrastiveSample",
    "ContrastiveSet",
    "FeatureIndex",
    "FeatureStore",
    "HashingEmbedder",
    "ProjectionAdapter",
    "build_contrastive_set",
    "build_feature_index",
    "cosine",
    "embed_samples",
    "encode_user",
    "group_scores",
    "hit_at_1",
    "infonce_from_scores",
    "infonce_grad",
    "infonce_loss",
    "infonce_loss_and_grad",
    "normalize_text",
    "retrieve_topk",
    "train_adapter",
    "window_bounds",
]
