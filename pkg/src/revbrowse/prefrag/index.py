"""Exact-scan feature index and top-K retrieval."""

from __future__ import annotations

import json
import logging
from collections import OrderedDict

import numpy as np

from ..errors import DomainError
from . import binfmt
from .contrastive import join_phrases, normalize_text

logger = logging.getLogger(__name__)

MAGIC = b"PRAG"
PROS = "pros"
CONS = "cons"


def topk_indices(e, E, K: int = 2):
    """Row indices and cosines of the top-``K`` rows of ``E`` for query ``e``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    E = np.asarray(E, dtype=np.float64)
    if E.shape[0] == 0:
        return np.zeros(0, dtype=int), np.zeros(0)
    e = np.asarray(e, dtype=np.float64)
    ne = np.linalg.norm(e)
    if ne == 0:
        raise DomainError("query vector is zero")
    norms = np.linalg.norm(E, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    scores = (E @ e) / (safe * ne)
    order = np.argsort(-scores, kind="stable")[:K]
    return order, scores[order]


def retrieve_topk(e, E, texts, K: int = 2) -> list[tuple[str, float]]:
    """Top-``K`` ``(text, cosine)`` pairs from the rows of ``E``.

    Ties keep row order. Zero rows score 0. ``K`` beyond the row count
    returns every row.
    """
    order, scores = topk_indices(e, E, K)
    return [(texts[i], float(s)) for i, s in zip(order, scores)]


class FeatureIndex:
    """Projected, unit-norm feature rows grouped by ``(item_id, polarity)``.

    Immutable once built; rows of a group keep insertion order.
    """

    def __init__(self, matrix, item_ids, polarities, texts, meta=None):
        self.matrix = np.asarray(matrix, dtype=np.float32)
        self.item_ids = list(item_ids)
        self.polarities = list(polarities)
        self.texts = list(texts)
        self.meta = dict(meta or {})
        if not (len(self.item_ids) == len(self.polarities) == len(self.texts) == self.matrix.shape[0]):
            raise ValueError("row count does not match text table")
        self._groups: dict[tuple[str, str], list[int]] = OrderedDict()
        for i, key in enumerate(zip(self.item_ids, self.polarities)):
            self._groups.setdefault(key, []).append(i)
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]

    def group(self, item_id: str, polarity: str):
        """``(E, texts)`` for one item side; ``E`` has 0 rows if absent."""
        rows = self._groups.get((item_id, polarity), [])
        return self.matrix[rows], [self.texts[i] for i in rows]

    def retrieve(self, e, item_id: str, polarity: str, K: int = 2):
        E, texts = self.group(item_id, polarity)
        return retrieve_topk(e, E, texts, K)

    def retrieve_with_vectors(self, e, item_id: str, polarity: str, K: int = 2):
        """Like :meth:`retrieve` but also returns the matching rows."""
        E, texts = self.group(item_id, polarity)
        order, scores = topk_indices(e, E, K)
        return [(texts[i], float(s)) for i, s in zip(order, scores)], E[order]

    def item_count(self) -> int:
        return len({i for i, _ in self._groups})

    def to_bytes(self) -> bytes:
        strings = [json.dumps(self.meta, sort_keys=True)]
        for item, pol, text in zip(self.item_ids, self.polarities, self.texts):
            strings.extend((item, pol, text))
        return binfmt.pack(MAGIC, self.matrix, strings)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FeatureIndex":
        matrix, strings = binfmt.unpack(data, MAGIC)
        meta = json.loads(strings[0])
        rest = strings[1:]
        if len(rest) != 3 * matrix.shape[0]:
            raise ValueError("text table does not match row count")
        return cls(matrix, rest[0::3], rest[1::3], rest[2::3], meta)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "FeatureIndex":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def build_feature_index(item_features, embedder, adapter, dedupe: bool = True, meta=None) -> FeatureIndex:
    """Embed, project and normalize every pros/cons phrase.

    Groups are ordered by first appearance of the item in ``item_features``.
    With ``dedupe`` a phrase whose normalized text already appears in the same
    group is not added again. Phrases that embed to the zero vector are
    skipped and counted in ``meta["skipped_phrases"]``.
    """
    groups: dict[tuple[str, str], list[str]] = OrderedDict()
    seen: dict[tuple[str, str], set] = {}
    for f in item_features:
        if f is None:
            continue
        for pol, phrases in ((PROS, f.pros), (CONS, f.cons)):
            key = (f.item_id, pol)
            bucket = groups.setdefault(key, [])
            norm_seen = seen.setdefault(key, set())
            for phrase in phrases:
                norm = normalize_text(phrase)
                if dedupe and norm in norm_seen:
                    continue
                norm_seen.add(norm)
                bucket.append(phrase)
    item_ids, pols, texts = [], [], []
    for (item, pol), phrases in groups.items():
        for phrase in phrases:
            item_ids.append(item)
            pols.append(pol)
            texts.append(phrase)
    raw = embedder.embed(texts) if texts else np.zeros((0, adapter.n_features_in_))
    keep = np.linalg.norm(raw, axis=1) > 0 if len(raw) else np.zeros(0, dtype=bool)
    projected = adapter.transform(raw[keep]) if keep.any() else np.zeros((0, adapter.components_.shape[0]))
    pkeep = np.linalg.norm(projected, axis=1) > 0
    idx = np.flatnonzero(keep)[pkeep]
    skipped = len(texts) - len(idx)
    if skipped:
        logger.warning("%d phrases could not be embedded and were skipped", skipped)
    info = dict(meta or {})
    info["skipped_phrases"] = int(skipped)
    return FeatureIndex(
        projected[pkeep].astype(np.float32),
        [item_ids[i] for i in idx],
        [pols[i] for i in idx],
        [texts[i] for i in idx],
        info,
    )


def encode_user(prefs, embedder, adapter):
    """``(e_like, e_dislike)``; a side with no phrases is ``None``."""
    if not prefs.like and not prefs.dislike:
        raise DomainError("preferences have neither likes nor dislikes")
    out = []
    for phrases in (prefs.like, prefs.dislike):
        if not phrases:
            out.append(None)
            continue
        raw = embedder.embed([join_phrases(phrases)])
        vec = adapter.transform(raw)[0]
        out.append(vec if np.linalg.norm(vec) > 0 else None)
    return tuple(out)
