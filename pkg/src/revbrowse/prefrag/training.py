from __future__ import annotations

import numpy as np

from ..errors import DomainError
from .adapter import ProjectionAdapter
from .loss import group_scores


class _EmbeddingTable:
    """Embeds each distinct text once."""

    def __init__(self, embedder, texts):
        unique = sorted(set(texts))
        vectors = embedder.embed(unique) if unique else np.zeros((0, 0))
        self.rows = dict(zip(unique, vectors))

    def __getitem__(self, text):
        return self.rows[text]


def embed_samples(samples, embedder):
    """Turn contrastive samples into ``(q, a_pos, A_neg)`` groups.

    Samples with any zero embedding are left out because cosine is undefined
    for them.
    """
    texts = []
    for s in samples:
        texts.append(s.query_text)
        texts.append(s.positive_text)
        texts.extend(s.negative_texts)
    table = _EmbeddingTable(embedder, texts)
    groups = []
    for s in samples:
        q = table[s.query_text]
        pos = table[s.positive_text]
        neg = np.array([table[t] for t in s.negative_texts])
        norms = np.linalg.norm(np.vstack([q, pos, neg]), axis=1)
        if np.all(norms > 0):
            groups.append((q, pos, neg))
    return groups


def train_adapter(samples, embedder, validation_samples=None, **params):
    """Fit a :class:`ProjectionAdapter` on contrastive samples.

    Returns ``(adapter, loss_trace)``. ``params`` go to the adapter
    constructor (``epochs``, ``batch_size``, ``step_size``, ``random_state``, ...).
    """
    groups = embed_samples(samples, embedder)
    if not groups:
        raise DomainError("no usable contrastive samples")
    val = embed_samples(validation_samples, embedder) if validation_samples else None
    adapter = ProjectionAdapter(**params).fit(groups, validation=val)
    return adapter, adapter.loss_trace_


def hit_at_1(groups, adapter_or_w) -> float:
    """Fraction of groups whose positive strictly outscores every negative."""
    if not groups:
        raise DomainError("no groups")
    hits = 0
    for q, pos, neg in groups:
        s = group_scores(adapter_or_w, q, pos, neg)
        hits += bool(s[0] > s[1:].max())
    return hits / len(groups)
