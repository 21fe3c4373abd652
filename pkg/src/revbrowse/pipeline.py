"""End-to-end estimator chaining extraction, retriever training, indexing and ranking."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus import InteractionSequence, build_sequences, leave_one_out_split
from .errors import DomainError
from .extraction import ExtractionCache, Extractor, MockChatClient
from .prefrag import (
    FeatureStore,
    HashingEmbedder,
    ProjectionAdapter,
    build_contrastive_set,
    build_feature_index,
    encode_user,
    train_adapter,
)
from .ranker import (
    POPULARITY,
    CandidateProvider,
    MissingUserError,
    assemble_slate,
    inject_ground_truth,
    mock_score,
    render_recommendation_prompt,
    score_with_verbalizer,
)
from .ranker.prompt import HISTORY_LENGTH

logger = logging.getLogger(__name__)

FULL = "FULL"
NO_PREF = "NO_PREF"
NO_REVIEWS = "NO_REVIEWS"
NO_PREF_NO_REVIEWS = "NO_PREF_NO_REVIEWS"
VARIANTS = (FULL, NO_PREF, NO_REVIEWS, NO_PREF_NO_REVIEWS)


def variant_flags(variant: str) -> tuple[bool, bool]:
    """``(include_preferences, include_features)`` for an ablation variant."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown ablation variant {variant!r}")
    return variant in (FULL, NO_REVIEWS), variant in (FULL, NO_PREF)


def split_corpus(reviews):
    """Leave-one-out splits for every user with at least three events."""
    splits = {}
    for seq in build_sequences(reviews):
        if len(seq) >= 3:
            splits[seq.user_id] = leave_one_out_split(seq)
    return splits


def training_sequences(splits):
    return [InteractionSequence(s.user_id, s.train) for s in splits.values()]


def validation_sequences(splits):
    return [InteractionSequence(s.user_id, s.train + (s.validation,)) for s in splits.values()]


def recent_history(split, reviews_by_id, length=HISTORY_LENGTH):
    return [reviews_by_id[e.review_id] for e in split.train[-length:]]


@dataclass
class Recommendation:
    user_id: str
    slate: object
    result: object
    prompt: str
    injected: bool = False
    missed: bool = False


class RevBrowseRecommender(BaseEstimator):
    """Review-driven reranker.

    ``fit(reviews, items)`` splits the corpus leave-one-out, extracts item
    features from train and validation reviews, builds sliding-window
    contrastive samples (validation samples end at each user's validation
    event), trains the projection adapter, indexes train-review features and
    extracts each user's preferences from their last 20 train reviews.

    ``recommend(user_id)`` builds a candidate slate from the train history,
    retrieves pros/cons, renders the prompt and scores the slate with the
    verbalizer client, or with :func:`~revbrowse.ranker.mock_score` when
    ``scorer`` is ``None``.
    """

    def __init__(
        self,
        window=20,
        n_negatives=40,
        stride=1,
        top_k=2,
        slate_size=20,
        strategy=POPULARITY,
        inject=True,
        ablation=FULL,
        temperature=1.0,
        epochs=5,
        batch_size=8,
        step_size=0.05,
        random_state=0,
        train=True,
        embedder=None,
        chat_client=None,
        scorer=None,
        allow_fallback=False,
        cache=None,
        max_retries=3,
        concurrency=4,
        candidate_provider=None,
        dedupe=True,
    ):
        self.window = window
        self.n_negatives = n_negatives
        self.stride = stride
        self.top_k = top_k
        self.slate_size = slate_size
        self.strategy = strategy
        self.inject = inject
        self.ablation = ablation
        self.temperature = temperature
        self.epochs = epochs
        self.batch_size = batch_size
        self.step_size = step_size
        self.random_state = random_state
        self.train = train
        self.embedder = embedder
        self.chat_client = chat_client
        self.scorer = scorer
        self.allow_fallback = allow_fallback
        self.cache = cache
        self.max_retries = max_retries
        self.concurrency = concurrency
        self.candidate_provider = candidate_provider
        self.dedupe = dedupe

    def _adapter_params(self):
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "step_size": self.step_size,
            "temperature": self.temperature,
            "random_state": self.random_state,
        }

    def _bind_corpus(self, reviews, items):
        reviews = list(reviews)
        if not reviews:
            raise DomainError("no reviews")
        self.titles_ = {m.item_id: m.title for m in items}
        self.reviews_by_id_ = {r.review_id: r for r in reviews}
        self.splits_ = split_corpus(reviews)
        self.embedder_ = self.embedder if self.embedder is not None else HashingEmbedder()
        self.extractor_ = Extractor(
            self.chat_client if self.chat_client is not None else MockChatClient(),
            self.cache if self.cache is not None else ExtractionCache(),
            self.titles_,
            self.max_retries,
            self.concurrency,
        )

    def _train_ids(self):
        return [e.review_id for s in self.splits_.values() for e in s.train]

    def extract_features(self):
        """Features of every train and validation review (``None`` entries dropped)."""
        val_ids = [s.validation.review_id for s in self.splits_.values()]
        reviews = [self.reviews_by_id_[i] for i in self._train_ids() + val_ids]
        return [f for f in self.extractor_.features_many(reviews) if f is not None]

    def build_trainsets(self, features):
        """``(train_samples, validation_samples)`` from extracted features."""
        val_ids = [s.validation.review_id for s in self.splits_.values()]
        store = FeatureStore(features, [self.reviews_by_id_[i] for i in self._train_ids() + val_ids])
        train = build_contrastive_set(
            training_sequences(self.splits_), store, self.extractor_.preferences,
            self.window, self.n_negatives, self.stride, seed=self.random_state,
        )
        val = build_contrastive_set(
            validation_sequences(self.splits_), store, self.extractor_.preferences,
            self.window, self.n_negatives, self.stride, seed=self.random_state, last_window_only=True,
        )
        return train, val

    def train_adapter(self, samples, validation_samples=()):
        if self.train and samples:
            adapter, _ = train_adapter(samples, self.embedder_, validation_samples or None, **self._adapter_params())
            return adapter
        return ProjectionAdapter.identity(self.embedder_.dim, **self._adapter_params())

    def build_index(self, features, adapter, meta=None):
        """Index built from train-review features only."""
        train_set = set(self._train_ids())
        train_feats = [f for f in features if f.review_id in train_set]
        return build_feature_index(train_feats, self.embedder_, adapter, dedupe=self.dedupe, meta=meta)

    def history_preferences(self):
        """Preferences extracted from each user's latest train reviews."""
        return self._history_preferences()

    def assemble(self, reviews, items, adapter, index, user_prefs, bound=False):
        """Mark the estimator fitted from precomputed stage outputs."""
        if not bound:
            self._bind_corpus(reviews, items)
        self.adapter_ = adapter
        self.index_ = index
        self.user_prefs_ = dict(user_prefs)
        self.provider_ = self.candidate_provider or CandidateProvider(
            self.strategy, [self.reviews_by_id_[i] for i in self._train_ids()]
        )
        self._vectors = {}
        return self

    def fit(self, reviews, items=()):
        self._bind_corpus(reviews, items)
        features = self.extract_features()
        self.samples_, self.validation_samples_ = self.build_trainsets(features)
        adapter = self.train_adapter(self.samples_, self.validation_samples_)
        index = self.build_index(features, adapter)
        return self.assemble(None, None, adapter, index, self._history_preferences(), bound=True)

    def _history_preferences(self):
        jobs = [(uid, recent_history(s, self.reviews_by_id_)) for uid, s in self.splits_.items()]
        prefs = self.extractor_.preferences_many(jobs)
        return {uid: p for (uid, _), p in zip(jobs, prefs)}

    def user_vectors(self, user_id):
        if user_id not in self._vectors:
            prefs = self.user_prefs_.get(user_id)
            self._vectors[user_id] = (None, None) if prefs is None else encode_user(prefs, self.embedder_, self.adapter_)
        return self._vectors[user_id]

    def recommend(self, user_id, ablation=None, top_k=None, candidates=None, target=None) -> Recommendation:
        """Rank a slate for ``user_id``.

        ``target`` (defaults to the user's test item) is injected into the
        slate when ``inject`` is on; with injection off a slate lacking it is
        flagged ``missed``.
        """
        check_is_fitted(self, "index_")
        ablation = ablation or self.ablation
        top_k = top_k or self.top_k
        include_prefs, include_features = variant_flags(ablation)
        split = self.splits_[user_id]
        history = [e.item_id for e in split.train]
        target = split.test.item_id if target is None else target
        if candidates is None:
            candidates = self.provider_.provide(user_id, history, self.slate_size)
        candidates = list(candidates)
        injected = False
        if self.inject and target:
            candidates, injected = inject_ground_truth(
                candidates, target, self.slate_size, self.random_state, user_id
            )
        if len(candidates) < 2:
            raise DomainError(f"fewer than two candidates for user {user_id}")
        missed = target not in candidates
        prefs = self.user_prefs_.get(user_id)
        e_like, e_dislike = self.user_vectors(user_id)
        slate = assemble_slate(
            candidates,
            self.index_,
            e_like if include_features else None,
            e_dislike if include_features else None,
            self.titles_,
            top_k,
            ground_truth=None if missed else target,
            injected=injected,
        )
        titles = [self.titles_.get(i, i) for i in history]
        prompt = render_recommendation_prompt(titles, prefs, slate, include_prefs, include_features)
        if self.scorer is None:
            seen = (e_like, e_dislike) if include_prefs else (None, None)
            result = mock_score(slate, *seen)
        else:
            result = score_with_verbalizer(self.scorer, prompt, slate, self.allow_fallback)
        return Recommendation(user_id, slate, result, prompt, injected, missed)

    def predict(self, user_ids):
        """Ranked item ids for each user."""
        out = []
        for user_id in user_ids:
            rec = self.recommend(user_id)
            out.append(rec.result.ranked_item_ids(rec.slate))
        return out


__all__ = [
    "FULL",
    "NO_PREF",
    "NO_PREF_NO_REVIEWS",
    "NO_REVIEWS",
    "VARIANTS",
    "MissingUserError",
    "Recommendation",
    "RevBrowseRecommender",
    "split_corpus",
    "variant_flags",
]
