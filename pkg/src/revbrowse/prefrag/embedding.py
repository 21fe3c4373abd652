"""Text embedders.

:class:`HashingEmbedder` is the offline default. Each lowercase
alphanumeric token is hashed with BLAKE2b (8-byte digest, read as a
little-endian unsigned integer ``h``); the token adds ``+1`` to bucket
``h % n_features`` when bit 63 of ``h`` is clear and ``-1`` otherwise. Rows
are then L2-normalized. The scheme uses only integer arithmetic before the
final normalization, so it is bit-exact across platforms. Text without tokens
maps to the zero vector.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

_TOKEN = re.compile(r"[a-z0-9]+")


def _hash_token(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


class HashingEmbedder(TransformerMixin, BaseEstimator):
    """Signed token hashing into ``n_features`` buckets, L2-normalized. Stateless."""

    def __init__(self, n_features: int = 384):
        self.n_features = n_features

    @property
    def dim(self) -> int:
        return self.n_features

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        if isinstance(X, str):
            raise TypeError("expected an iterable of strings, got a single string")
        texts = list(X)
        out = np.zeros((len(texts), self.n_features), dtype=np.float64)
        for row, text in enumerate(texts):
            for tok in _TOKEN.findall(text.lower()):
                h = _hash_token(tok)
                out[row, h % self.n_features] += -1.0 if h >> 63 else 1.0
        norms = np.linalg.norm(out, axis=1)
        nz = norms > 0
        out[nz] /= norms[nz, None]
        return out

    def embed(self, texts) -> np.ndarray:
        return self.transform(texts)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        tags.input_tags.string = True
        tags.input_tags.two_d_array = False
        return tags
