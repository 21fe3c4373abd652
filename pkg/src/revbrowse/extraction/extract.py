from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

from ..errors import EmptyRecordError, ExtractionFailedError, RepairableParseError, SchemaError
from .cache import ExtractionCache, cache_key
from .parsing import parse_feature_response, parse_preference_response
from .prompts import render_item_feature_prompt, render_user_pref_prompt, review_tuples
from .records import ItemFeatures, UserPreferences

logger = logging.getLogger(__name__)

USER_PREF = "USER_PREF"
ITEM_FEATURE = "ITEM_FEATURE"


def _call_with_retries(client, prompt, parse, max_retries):
    raw = None
    for attempt in range(1, max_retries + 1):
        raw = client.complete([{"role": "user", "content": prompt}])
        try:
            return parse(raw)
        except RepairableParseError:
            logger.info("unparseable response on attempt %d/%d", attempt, max_retries)
        except SchemaError as exc:
            raise ExtractionFailedError(f"response violates schema: {exc}", last_response=raw) from exc
    raise ExtractionFailedError(f"no parseable response after {max_retries} attempts", last_response=raw)


def extract_user_preferences(client, reviews, titles=None, user_id="", cache=None, max_retries=3):
    """Extract Like/Dislike lists from a user's reviews (chronological).

    Returns ``None`` when the model produces two empty lists.
    """
    titles = titles or {}
    tuples = review_tuples(reviews, titles)
    source_ids = tuple(r.review_id for r in reviews)
    key = cache_key(USER_PREF, [list(t) for t in tuples], getattr(client, "model", ""))
    if cache is not None and key in cache:
        rec = cache.get(key)
        if rec is None:
            return None
        return UserPreferences(user_id, tuple(rec["like"]), tuple(rec["dislike"]), source_ids)

    def parse(raw):
        try:
            return parse_preference_response(raw, user_id, source_ids)
        except EmptyRecordError:
            return None

    prefs = _call_with_retries(client, render_user_pref_prompt(tuples), parse, max_retries)
    if prefs is None:
        logger.info("empty preferences for user %s; dropped", user_id)
    if cache is not None:
        cache.put(key, None if prefs is None else {"like": list(prefs.like), "dislike": list(prefs.dislike)})
    return prefs


def extract_item_features(client, review, title="", cache=None, max_retries=3):
    """Extract Pros/Cons from one review. Returns ``None`` for empty records."""
    tup = (title, review.text, review.rating, review.item_id)
    key = cache_key(ITEM_FEATURE, list(tup), getattr(client, "model", ""))
    if cache is not None and key in cache:
        rec = cache.get(key)
        if rec is None:
            return None
        return ItemFeatures(review.item_id, review.review_id, tuple(rec["pros"]), tuple(rec["cons"]))

    def parse(raw):
        try:
            return parse_feature_response(raw, review.item_id, review.review_id)
        except EmptyRecordError:
            return None

    feats = _call_with_retries(client, render_item_feature_prompt(tup), parse, max_retries)
    if feats is None:
        logger.info("review %s yielded no pros or cons; dropped", review.review_id)
    if cache is not None:
        cache.put(key, None if feats is None else {"pros": list(feats.pros), "cons": list(feats.cons)})
    return feats


class Extractor:
    """Binds a chat client, a cache and retry/concurrency settings."""

    def __init__(self, client, cache: ExtractionCache | None = None, titles=None, max_retries=3, concurrency=4):
        self.client = client
        self.cache = cache if cache is not None else ExtractionCache()
        self.titles = titles or {}
        self.max_retries = max_retries
        self.concurrency = concurrency

    def preferences(self, reviews, user_id="") -> UserPreferences | None:
        return extract_user_preferences(self.client, reviews, self.titles, user_id, self.cache, self.max_retries)

    def features(self, review) -> ItemFeatures | None:
        return extract_item_features(
            self.client, review, self.titles.get(review.item_id, ""), self.cache, self.max_retries
        )

    def features_many(self, reviews) -> list[ItemFeatures | None]:
        """Extract features for many reviews with bounded concurrency; order is preserved."""
        reviews = list(reviews)
        if self.concurrency <= 1:
            return [self.features(r) for r in reviews]
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            return list(pool.map(self.features, reviews))

    def preferences_many(self, jobs) -> list[UserPreferences | None]:
        """``jobs`` is a list of ``(user_id, reviews)`` pairs."""
        jobs = list(jobs)
        if self.concurrency <= 1:
            return [self.preferences(revs, uid) for uid, revs in jobs]
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            return list(pool.map(lambda job: self.preferences(job[1], job[0]), jobs))
