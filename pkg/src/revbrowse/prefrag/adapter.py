"""Trainable linear projection shared by the query and answer towers."""

from __future__ import annotations

import json
import logging

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..errors import DomainError, TrainingError
from . import binfmt
from .loss import infonce_from_scores, infonce_loss_and_grad, group_scores

logger = logging.getLogger(__name__)

MAGIC = b"PRAD"


class ProjectionAdapter(TransformerMixin, BaseEstimator):
    """Projection ``W`` (``n_components x d``) trained with InfoNCE.

    ``fit`` takes a list of ``(q, a_pos, A_neg)`` embedding groups and runs
    plain mini-batch gradient descent. After every epoch the mean loss on the
    training groups and on ``validation`` groups (if given) is recorded; the
    weights with the lowest validation loss, including the initial ones, are
    kept. Training stops early once validation loss has not improved for
    ``n_iter_no_change`` epochs.

    ``transform`` projects rows and L2-normalizes them; rows that project to
    zero stay zero.
    """

    def __init__(
        self,
        n_components=None,
        step_size=0.05,
        epochs=5,
        batch_size=8,
        temperature=1.0,
        init_noise=0.01,
        n_iter_no_change=2,
        random_state=0,
    ):
        self.n_components = n_components
        self.step_size = step_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.temperature = temperature
        self.init_noise = init_noise
        self.n_iter_no_change = n_iter_no_change
        self.random_state = random_state

    def _validate_params(self):
        if not 0 <= self.epochs <= 5:
            raise ValueError("epochs must be in 0..5")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    def initial_weights(self, n_features: int) -> np.ndarray:
        rows = self.n_components or n_features
        rng = np.random.default_rng(self.random_state)
        W = np.eye(rows, n_features) + self.init_noise * rng.standard_normal((rows, n_features))
        return W.astype(np.float32)

    def _mean_loss(self, W, groups):
        return infonce_from_scores([group_scores(W, *g) for g in groups], self.temperature)

    def fit(self, X, y=None, validation=None):
        self._validate_params()
        groups = list(X)
        if not groups:
            raise DomainError("no training groups")
        d = np.asarray(groups[0][0]).shape[0]
        W = self.initial_weights(d).astype(np.float64)
        rng = np.random.default_rng(self.random_state)
        rng.standard_normal(W.shape)  # keep the shuffle stream distinct from the init draw
        val = list(validation) if validation else None

        def evaluate(epoch):
            rec = {"epoch": epoch, "train_loss": float(self._mean_loss(W, groups))}
            if val:
                rec["validation_loss"] = float(self._mean_loss(W, val))
            for k, v in rec.items():
                if k != "epoch" and not np.isfinite(v):
                    raise TrainingError(f"non-finite {k} at epoch {epoch}", diagnostics={"trace": trace + [rec]})
            return rec

        trace = []
        trace.append(evaluate(0))
        key = "validation_loss" if val else "train_loss"
        best_W, best_loss, best_epoch, stale = W.copy(), trace[0][key], 0, 0
        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(len(groups))
            for start in range(0, len(groups), self.batch_size):
                batch = [groups[i] for i in order[start : start + self.batch_size]]
                loss, grad = infonce_loss_and_grad(batch, W, self.temperature)
                if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                    raise TrainingError(
                        f"non-finite loss or gradient in epoch {epoch}",
                        diagnostics={"trace": trace, "batch_start": start, "loss": float(loss)},
                    )
                W -= self.step_size * grad
            rec = evaluate(epoch)
            trace.append(rec)
            logger.info("epoch %d %s", epoch, rec)
            if rec[key] < best_loss:
                best_W, best_loss, best_epoch, stale = W.copy(), rec[key], epoch, 0
            else:
                stale += 1
                if stale >= self.n_iter_no_change:
                    break
        self.components_ = best_W.astype(np.float32)
        self.n_features_in_ = d
        self.loss_trace_ = trace
        self.best_epoch_ = best_epoch
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        Y = X @ self.components_.astype(np.float64).T
        norms = np.linalg.norm(Y, axis=1)
        nz = norms > 0
        Y[nz] /= norms[nz, None]
        return Y

    @classmethod
    def identity(cls, n_features: int, **params) -> "ProjectionAdapter":
        """A fitted adapter whose projection is the seeded initialization."""
        adapter = cls(**params)
        adapter.components_ = adapter.initial_weights(n_features)
        adapter.n_features_in_ = n_features
        adapter.loss_trace_ = []
        adapter.best_epoch_ = 0
        return adapter

    # serialization

    def to_bytes(self, fingerprint: str = "") -> bytes:
        check_is_fitted(self, "components_")
        meta = {
            "params": self.get_params(),
            "n_features_in": int(self.n_features_in_),
            "loss_trace": self.loss_trace_,
            "best_epoch": int(self.best_epoch_),
            "fingerprint": fingerprint,
        }
        return binfmt.pack(MAGIC, self.components_, [json.dumps(meta, sort_keys=True)])

    @classmethod
    def from_bytes(cls, data: bytes) -> tuple["ProjectionAdapter", dict]:
        W, strings = binfmt.unpack(data, MAGIC)
        meta = json.loads(strings[0])
        adapter = cls(**meta["params"])
        adapter.components_ = W
        adapter.n_features_in_ = meta["n_features_in"]
        adapter.loss_trace_ = meta["loss_trace"]
        adapter.best_epoch_ = meta["best_epoch"]
        return adapter, meta

    def save(self, path, fingerprint: str = "") -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes(fingerprint))

    @classmethod
    def load(cls, path) -> tuple["ProjectionAdapter", dict]:
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
