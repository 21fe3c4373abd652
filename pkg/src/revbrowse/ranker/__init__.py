from .candidates import (
    FILE,
    POPULARITY,
    RECENCY,
    CandidateProvider,
    MissingUserError,
    inject_ground_truth,
    provide_candidates,
)
from .prompt import render_recommendation_prompt, training_pair
from .scoring import (
    RankedResult,
    ReplayScoringClient,
    letter_logprobs,
    mock_score,
    prompt_hash,
    rank_scores,
    record_transcript,
    score_with_verbalizer,
)
from .slate import LETTERS, Candidate, CandidateSlate, assemble_slate

__all__ = [
    "FILE",
    "LETTERS",
    "POPULARITY",
    "RECENCY",
    "Candidate",
    "CandidateProvider",
    "CandidateSlate",
    "MissingUserError",
    "RankedResult",
    "ReplayScoringClient",
    "assemble_slate",
    "inject_ground_truth",
    "letter_logprobs",
    "mock_score",
    "prompt_hash",
    "provide_candidates",
    "rank_scores",
    "record_transcript",
    "render_recommendation_prompt",
    "score_with_verbalizer",
    "training_pair",
]
