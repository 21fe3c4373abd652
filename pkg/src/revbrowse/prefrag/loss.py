"""Cosine similarity, InfoNCE loss over projected embeddings, and its gradient.

A batch is a sequence of groups ``(q, a_pos, A_neg)`` with ``q`` and ``a_pos``
of shape ``(d,)`` and ``A_neg`` of shape ``(m, d)``; ``m`` may vary across
groups. Scores are cosines between ``W @ q`` and ``W @ a``, so the
similarity is scale-free in the raw embeddings.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError


def cosine(q, a) -> float:
    q = np.asarray(q, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    nq = np.linalg.norm(q)
    na = np.linalg.norm(a)
    if nq == 0 or na == 0:
        raise DomainError("cosine is undefined for a zero vector")
    return float(np.clip(q @ a / (nq * na), -1.0, 1.0))


def _weights(adapter_or_w) -> np.ndarray:
    W = getattr(adapter_or_w, "components_", adapter_or_w)
    return np.asarray(W, dtype=np.float64)


def _normalize(Y):
    norms = np.linalg.norm(Y, axis=-1)
    if np.any(norms == 0):
        raise DomainError("projection maps an embedding to the zero vector")
    return Y / norms[..., None], norms


def _check_batch(batch):
    if len(batch) == 0:
        raise DomainError("InfoNCE needs a non-empty batch")


def _group(W, q, pos, neg):
    X_a = np.vstack([np.asarray(pos, dtype=np.float64)[None, :], np.asarray(neg, dtype=np.float64).reshape(-1, W.shape[1])])
    if X_a.shape[0] < 2:
        raise DomainError("every query needs at least one negative")
    x_q = np.asarray(q, dtype=np.float64)
    u_q, n_q = _normalize(W @ x_q)
    U_a, n_a = _normalize(X_a @ W.T)
    return x_q, X_a, u_q, n_q, U_a, n_a, U_a @ u_q


def _log_softmax0(z):
    zmax = z.max()
    return z[0] - zmax - np.log(np.exp(z - zmax).sum())


def group_scores(adapter_or_w, q, pos, neg) -> np.ndarray:
    """Cosine scores ``[s(q, a+), s(q, a-_1), ...]`` for one group."""
    return _group(_weights(adapter_or_w), q, pos, neg)[-1]


def infonce_from_scores(scores, temperature: float = 1.0) -> float:
    """Mean InfoNCE loss from per-group score vectors (positive first)."""
    if len(scores) == 0:
        raise DomainError("InfoNCE needs a non-empty batch")
    total = 0.0
    for s in scores:
        s = np.asarray(s, dtype=np.float64)
        if s.shape[0] < 2:
            raise DomainError("every query needs at least one negative")
        total -= _log_softmax0(s / temperature)
    return total / len(scores)


def infonce_loss(batch, adapter_or_w, temperature: float = 1.0) -> float:
    _check_batch(batch)
    W = _weights(adapter_or_w)
    return infonce_from_scores([_group(W, *g)[-1] for g in batch], temperature)


def infonce_loss_and_grad(batch, adapter_or_w, temperature: float = 1.0):
    """Return ``(loss, dL/dW)``.

    With ``u = Wx/|Wx|`` the score derivative is
    ``ds/dW = (u_a - s u_q)/|Wx_q| x_q^T + (u_q - s u_a)/|Wx_a| x_a^T``,
    and ``dL/ds_j = (softmax(s/t)_j - [j == 0]) / t``.
    """
    _check_batch(batch)
    W = _weights(adapter_or_w)
    grad = np.zeros_like(W)
    loss = 0.0
    for q, pos, neg in batch:
        x_q, X_a, u_q, n_q, U_a, n_a, s = _group(W, q, pos, neg)
        z = s / temperature
        z = z - z.max()
        p = np.exp(z)
        p /= p.sum()
        loss -= np.log(p[0])
        g = p.copy()
        g[0] -= 1.0
        g /= temperature
        grad += np.outer(g @ (U_a - s[:, None] * u_q[None, :]) / n_q, x_q)
        C = (g / n_a)[:, None] * (u_q[None, :] - s[:, None] * U_a)
        grad += C.T @ X_a
    B = len(batch)
    return loss / B, grad / B


def infonce_grad(batch, adapter_or_w, temperature: float = 1.0) -> np.ndarray:
    return infonce_loss_and_grad(batch, adapter_or_w, temperature)[1]
