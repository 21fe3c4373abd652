from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from ..errors import CapabilityError
from .slate import LETTERS


@dataclass(frozen=True)
class RankedResult:
    """Per-candidate scores (slate order) and the ranking derived from them."""

    scores: tuple[float, ...]
    permutation: tuple[int, ...]
    rank_of_ground_truth: int | None = None
    degraded: bool = False

    def ranked_item_ids(self, slate) -> list[str]:
        return [slate.candidates[i].item_id for i in self.permutation]


def rank_scores(scores, slate, degraded=False) -> RankedResult:
    """Sort descending; ties and ``-inf`` scores keep slate order."""
    scores = tuple(float(s) for s in scores)
    perm = tuple(sorted(range(len(scores)), key=lambda i: (-scores[i], i)))
    gt_rank = None
    if slate.ground_truth is not None and slate.ground_truth in slate.item_ids:
        gt_rank = perm.index(slate.item_ids.index(slate.ground_truth)) + 1
    return RankedResult(scores, perm, gt_rank, degraded)


def _letter_of(token: str) -> str | None:
    tok = token.strip().strip("()[].:")
    return tok if len(tok) == 1 and tok in LETTERS else None


def letter_logprobs(top: dict[str, float], letters: str) -> list[float]:
    """Map a token->logprob dict onto slate letters; missing letters get -inf.

    Tokens such as ``" A"`` or ``"(A"`` count for ``A``; when several tokens map
    to one letter the largest logprob is used.
    """
    best = {}
    for token, lp in top.items():
        letter = _letter_of(token)
        if letter is not None and letter in letters:
            best[letter] = max(best.get(letter, -math.inf), float(lp))
    return [best.get(letter, -math.inf) for letter in letters]


def score_with_verbalizer(client, prompt: str, slate, allow_fallback: bool = False) -> RankedResult:
    """Rank a slate by the next-token logprob of each candidate letter.

    Clients without logprob support raise :class:`CapabilityError` unless
    ``allow_fallback``; the fallback reads the first slate letter in the
    generated text, ranks it first and leaves the rest in slate order, and
    marks the result degraded.
    """
    letters = slate.letters
    if getattr(client, "supports_logprobs", False):
        return rank_scores(letter_logprobs(client.next_token_logprobs(prompt), letters), slate)
    if not allow_fallback:
        raise CapabilityError(
            "scoring client has no logprob support; use the mock scorer or enable the generation fallback"
        )
    text = client.generate(prompt)
    chosen = next((ch for ch in text if ch in letters), None)
    scores = [0.0 if letter == chosen else -math.inf for letter in letters]
    return rank_scores(scores, slate, degraded=True)


def _mean_cos(e, V) -> float:
    if e is None or V is None or len(V) == 0:
        return 0.0
    V = np.asarray(V, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    norms = np.linalg.norm(V, axis=1) * np.linalg.norm(e)
    safe = np.where(norms > 0, norms, 1.0)
    return float(np.mean((V @ e) / safe))


def mock_score(slate, e_like, e_dislike) -> RankedResult:
    """Mean cosine of likes with retrieved pros minus that of dislikes with retrieved cons."""
    scores = [
        _mean_cos(e_like, c.pros_vectors) - _mean_cos(e_dislike, c.cons_vectors) for c in slate.candidates
    ]
    return rank_scores(scores, slate)


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ReplayScoringClient:
    """Serves recorded ``{prompt_hash, logprobs}`` lines instead of a live model."""

    supports_logprobs = True
    model = "replay"

    def __init__(self, path):
        self.transcript = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    self.transcript[rec["prompt_hash"]] = rec["logprobs"]

    def next_token_logprobs(self, prompt: str) -> dict[str, float]:
        key = prompt_hash(prompt)
        if key not in self.transcript:
            raise KeyError(f"no recorded response for prompt {key[:12]}")
        return dict(self.transcript[key])


def record_transcript(client, prompts, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for prompt in prompts:
            rec = {"prompt_hash": prompt_hash(prompt), "logprobs": client.next_token_logprobs(prompt)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
