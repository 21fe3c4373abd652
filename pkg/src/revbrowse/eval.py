"""Leave-one-out evaluation over ranked slates.

Each user has a single held-out relevant item, so recall@k is a hit rate,
NDCG@k reduces to ``1/log2(rank+1)`` and MRR@k to ``1/rank`` (zero past k).
Users whose held-out item never reaches the slate score zero and are
counted in ``skipped_count``.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import DomainError
from .pipeline import NO_PREF_NO_REVIEWS, VARIANTS, variant_flags
from .ranker import MissingUserError

DEFAULT_KS = (5, 10)
METRICS = ("recall", "ndcg", "mrr")


def _check_k(k):
    if k < 1:
        raise ValueError("k must be >= 1")


def recall_at_k(rank, k) -> int:
    _check_k(k)
    return int(rank is not None and rank <= k)


def ndcg_at_k(rank, k) -> float:
    _check_k(k)
    if rank is None or rank > k:
        return 0.0
    return 1.0 / math.log2(rank + 1)


def mrr_at_k(rank, k) -> float:
    _check_k(k)
    if rank is None or rank > k:
        return 0.0
    return 1.0 / rank


METRIC_FUNCS = {"recall": recall_at_k, "ndcg": ndcg_at_k, "mrr": mrr_at_k}


def mean_metrics(ranks, ks=DEFAULT_KS) -> dict[str, float]:
    """Means of every metric at every k over a sequence of (optional) ranks."""
    ranks = list(ranks)
    if not ranks:
        raise DomainError("no ranks to average")
    out = {}
    for k in ks:
        for name in METRICS:
            fn = METRIC_FUNCS[name]
            out[f"{name}@{k}"] = math.fsum(fn(r, k) for r in ranks) / len(ranks)
    return out


@dataclass(frozen=True)
class UserRank:
    user_id: str
    rank: int | None
    injected: bool = False
    skipped: bool = False
    reason: str = ""

    def to_record(self) -> dict:
        return {
            "user_id": self.user_id,
            "rank": self.rank,
            "injected": self.injected,
            "skipped": self.skipped,
            "reason": self.reason,
        }


@dataclass
class MetricsReport:
    metrics: dict
    user_count: int
    skipped_count: int
    fingerprint: dict
    degraded: bool = False
    injected_count: int = 0
    ranks: list = field(default_factory=list)

    @property
    def fingerprint_hash(self) -> str:
        blob = json.dumps(self.fingerprint, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def skipped_fraction(self) -> float:
        return self.skipped_count / self.user_count if self.user_count else 0.0

    def to_records(self) -> list[dict]:
        """Line-delimited machine records: one per metric, then a summary line."""
        base = {"fingerprint": self.fingerprint_hash, "ablation": self.fingerprint.get("ablation")}
        rows = []
        for key, value in self.metrics.items():
            name, k = key.split("@")
            rows.append({**base, "metric": name, "k": int(k), "value": value})
        rows.append(
            {
                **base,
                "metric": "summary",
                "user_count": self.user_count,
                "skipped_count": self.skipped_count,
                "injected_count": self.injected_count,
                "degraded": self.degraded,
                "config": self.fingerprint,
            }
        )
        return rows

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.to_records())

    def to_table(self) -> str:
        ks = sorted({int(key.split("@")[1]) for key in self.metrics})
        header = ["k"] + [m.upper() if m != "ndcg" else "NDCG" for m in METRICS]
        lines = [
            f"variant {self.fingerprint.get('ablation')}  K={self.fingerprint.get('top_k')}  "
            f"strategy={self.fingerprint.get('strategy')}  fingerprint={self.fingerprint_hash}",
            "  ".join(f"{h:>8}" for h in header),
        ]
        for k in ks:
            vals = [f"{self.metrics[f'{m}@{k}']:8.4f}" for m in METRICS]
            lines.append("  ".join([f"{k:>8}"] + vals))
        lines.append(
            f"users {self.user_count}  skipped {self.skipped_count}  injected {self.injected_count}"
            + ("  (degraded scoring)" if self.degraded else "")
        )
        return "\n".join(lines)

    def write_rank_dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.ranks:
                fh.write(json.dumps(r.to_record(), sort_keys=True) + "\n")


def read_rank_dump(path) -> list[UserRank]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(UserRank(**json.loads(line)))
    return out


def _fingerprint(pipeline, ablation, top_k) -> dict:
    include_prefs, include_features = variant_flags(ablation)
    return {
        "strategy": pipeline.strategy,
        "top_k": top_k,
        "ablation": ablation,
        "include_preferences": include_prefs,
        "include_features": include_features,
        "inject": bool(pipeline.inject),
        "slate_size": pipeline.slate_size,
        "seed": pipeline.random_state,
        "scorer": "mock" if pipeline.scorer is None else getattr(pipeline.scorer, "model", type(pipeline.scorer).__name__),
    }


def _rank_user(pipeline, user_id, ablation, top_k) -> tuple[UserRank, bool]:
    try:
        rec = pipeline.recommend(user_id, ablation=ablation, top_k=top_k)
    except MissingUserError:
        return UserRank(user_id, None, skipped=True, reason="no candidates"), False
    except DomainError as exc:
        return UserRank(user_id, None, skipped=True, reason=str(exc)), False
    if rec.missed:
        return UserRank(user_id, None, skipped=True, reason="ground truth not in slate"), rec.result.degraded
    return UserRank(user_id, rec.result.rank_of_ground_truth, injected=rec.injected), rec.result.degraded


def evaluate(pipeline, test_users=None, ks=DEFAULT_KS, ablation=None, top_k=None, n_jobs=1) -> MetricsReport:
    """Rank every test user's slate and average the single-item metrics.

    ``pipeline`` is a fitted :class:`~revbrowse.pipeline.RevBrowseRecommender`;
    ``test_users`` defaults to every split user. Results are reduced in
    sorted user order, so the report does not depend on iteration order or
    ``n_jobs``.
    """
    ablation = ablation or pipeline.ablation
    top_k = top_k or pipeline.top_k
    users = sorted(set(pipeline.splits_ if test_users is None else test_users))
    if not users:
        raise DomainError("empty test set")
    unknown = [u for u in users if u not in pipeline.splits_]
    if unknown:
        raise DomainError(f"{len(unknown)} test users have no leave-one-out split, e.g. {unknown[0]!r}")
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda u: _rank_user(pipeline, u, ablation, top_k), users))
    else:
        results = [_rank_user(pipeline, u, ablation, top_k) for u in users]
    ranks = [r for r, _ in results]
    return MetricsReport(
        metrics=mean_metrics((r.rank for r in ranks), ks),
        user_count=len(ranks),
        skipped_count=sum(r.skipped for r in ranks),
        fingerprint=_fingerprint(pipeline, ablation, top_k),
        degraded=any(d for _, d in results),
        injected_count=sum(r.injected for r in ranks),
        ranks=ranks,
    )


def run_ablation(pipeline, variant, test_users=None, ks=DEFAULT_KS, **kwargs) -> MetricsReport:
    """Evaluate with the prompt and scorer inputs switched per ablation variant.

    With the mock scorer, ``NO_PREF_NO_REVIEWS`` scores every candidate zero
    and so ranks the slate in provider order.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown ablation variant {variant!r}")
    return evaluate(pipeline, test_users, ks, ablation=variant, **kwargs)


def run_topk_sweep(pipeline, Ks=(1, 2, 3), test_users=None, ks=DEFAULT_KS, **kwargs) -> list[MetricsReport]:
    """One evaluation per retrieval depth K, all with the same seeds."""
    return [evaluate(pipeline, test_users, ks, top_k=K, **kwargs) for K in Ks]


__all__ = [
    "DEFAULT_KS",
    "NO_PREF_NO_REVIEWS",
    "MetricsReport",
    "UserRank",
    "evaluate",
    "mean_metrics",
    "mrr_at_k",
    "ndcg_at_k",
    "read_rank_dump",
    "recall_at_k",
    "run_ablation",
    "run_topk_sweep",
]
