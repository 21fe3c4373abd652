from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from ..prefrag.index import CONS, PROS

LETTERS = string.ascii_uppercase
MAX_SLATE = len(LETTERS)


@dataclass(frozen=True)
class Candidate:
    item_id: str
    title: str
    retrieved_pros: tuple[str, ...] = ()
    retrieved_cons: tuple[str, ...] = ()
    pros_vectors: np.ndarray = field(default=None, repr=False, compare=False)
    cons_vectors: np.ndarray = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class CandidateSlate:
    candidates: tuple[Candidate, ...]
    ground_truth: str | None = None
    injected: bool = False

    def __post_init__(self):
        n = len(self.candidates)
        if not 2 <= n <= MAX_SLATE:
            raise ValueError(f"slate size must be in 2..{MAX_SLATE}, got {n}")
        if self.ground_truth is not None:
            if sum(c.item_id == self.ground_truth for c in self.candidates) > 1:
                raise ValueError("ground truth appears more than once")

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    @property
    def letters(self) -> str:
        return LETTERS[: len(self.candidates)]

    @property
    def item_ids(self) -> list[str]:
        return [c.item_id for c in self.candidates]


def assemble_slate(item_ids, index, e_like, e_dislike, titles, K=2, ground_truth=None, injected=False) -> CandidateSlate:
    """Attach the top-``K`` pros (by ``e_like``) and cons (by ``e_dislike``) to each item.

    A missing preference vector or an empty feature group yields an empty list
    for that side.
    """
    cands = []
    for item_id in item_ids:
        pros, pvec = ((), None)
        cons, cvec = ((), None)
        if e_like is not None:
            hits, pvec = index.retrieve_with_vectors(e_like, item_id, PROS, K)
            pros = tuple(t for t, _ in hits)
        if e_dislike is not None:
            hits, cvec = index.retrieve_with_vectors(e_dislike, item_id, CONS, K)
            cons = tuple(t for t, _ in hits)
        cands.append(Candidate(item_id, titles.get(item_id, item_id), pros, cons, pvec, cvec))
    return CandidateSlate(tuple(cands), ground_truth, injected)
