import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from revbrowse.corpus import Review
from revbrowse.errors import DomainError
from revbrowse.eval import (
    MetricsReport,
    UserRank,
    evaluate,
    mean_metrics,
    mrr_at_k,
    ndcg_at_k,
    read_rank_dump,
    recall_at_k,
    run_ablation,
    run_topk_sweep,
)
from revbrowse.pipeline import FULL, NO_PREF_NO_REVIEWS, NO_REVIEWS, RevBrowseRecommender

ranks_or_miss = st.one_of(st.none(), st.integers(1, 60))


class TestMetrics:
    def test_worked_examples(self):
        assert recall_at_k(3, 5) == 1 and recall_at_k(6, 5) == 0
        assert ndcg_at_k(1, 5) == 1.0
        assert ndcg_at_k(3, 5) == pytest.approx(0.5)
        assert mrr_at_k(4, 5) == 0.25 and mrr_at_k(None, 5) == 0.0

    def test_two_users(self):
        m = mean_metrics([1, 3], ks=[5])
        assert m["ndcg@5"] == pytest.approx(0.75)
        assert m["recall@5"] == 1.0 and m["mrr@5"] == pytest.approx(2 / 3)

    def test_bad_k_and_empty(self):
        with pytest.raises(ValueError):
            recall_at_k(1, 0)
        with pytest.raises(DomainError):
            mean_metrics([])

    @given(ranks_or_miss, st.sampled_from([1, 5, 10, 20]))
    def test_match_oracles(self, r, k):
        assert recall_at_k(r, k) == oracles.recall(r, k)
        assert ndcg_at_k(r, k) == pytest.approx(oracles.ndcg(r, k), abs=1e-15)
        assert mrr_at_k(r, k) == oracles.mrr(r, k)

    @given(ranks_or_miss)
    def test_identities(self, r):
        for k in (5, 10):
            assert mrr_at_k(r, k) <= ndcg_at_k(r, k) <= recall_at_k(r, k)
        for fn in (recall_at_k, ndcg_at_k, mrr_at_k):
            assert fn(r, 5) <= fn(r, 10)

    @settings(max_examples=50)
    @given(st.lists(ranks_or_miss, min_size=1, max_size=40), st.randoms(use_true_random=False))
    def test_mean_is_order_free(self, ranks, rnd):
        shuffled = list(ranks)
        rnd.shuffle(shuffled)
        assert mean_metrics(ranks) == mean_metrics(shuffled)


class TestReport:
    def test_records_and_dump_round_trip(self, tmp_path):
        ranks = [UserRank("a", 1, injected=True), UserRank("b", None, skipped=True, reason="x")]
        report = MetricsReport(mean_metrics([1, None], [5]), 2, 1, {"ablation": FULL, "top_k": 2}, ranks=ranks)
        recs = report.to_records()
        assert [r["metric"] for r in recs] == ["recall", "ndcg", "mrr", "summary"]
        assert recs[-1]["skipped_count"] == 1 and report.skipped_fraction == 0.5
        report.write_rank_dump(tmp_path / "ranks.jsonl")
        assert read_rank_dump(tmp_path / "ranks.jsonl") == ranks
        assert "NDCG" in report.to_table()


class TestEvaluate:
    def test_report_matches_rank_dump_oracle(self, fitted_200, tmp_path):
        report = evaluate(fitted_200)
        report.write_rank_dump(tmp_path / "ranks.jsonl")
        dumped = read_rank_dump(tmp_path / "ranks.jsonl")
        assert len(dumped) == report.user_count == len(fitted_200.splits_)
        for k in (5, 10):
            for name, fn in (("recall", oracles.recall), ("ndcg", oracles.ndcg), ("mrr", oracles.mrr)):
                brute = sum(fn(r.rank, k) for r in dumped) / len(dumped)
                assert abs(report.metrics[f"{name}@{k}"] - brute) <= 1e-12
        assert report.skipped_count == sum(r.skipped for r in dumped)

    def test_independent_of_user_order_and_jobs(self, fitted_200):
        users = sorted(fitted_200.splits_)[:40]
        a = evaluate(fitted_200, users)
        b = evaluate(fitted_200, users[::-1], n_jobs=4)
        assert a.metrics == b.metrics and a.ranks == b.ranks

    def test_empty_test_set(self, fitted_200):
        with pytest.raises(DomainError):
            evaluate(fitted_200, [])

    def test_unknown_user_rejected(self, fitted_200):
        users = sorted(fitted_200.splits_)[:3]
        with pytest.raises(DomainError, match="nobody"):
            evaluate(fitted_200, users + ["nobody"])

    def test_ablation_fingerprints(self, fitted_200):
        users = sorted(fitted_200.splits_)[:20]
        full = run_ablation(fitted_200, FULL, users)
        bare = run_ablation(fitted_200, NO_PREF_NO_REVIEWS, users)
        assert full.fingerprint["include_features"] and not bare.fingerprint["include_features"]
        assert full.fingerprint_hash != bare.fingerprint_hash
        with pytest.raises(ValueError):
            run_ablation(fitted_200, "NOTHING", users)

    def test_full_beats_no_reviews(self, fitted_200):
        full = run_ablation(fitted_200, FULL)
        no_reviews = run_ablation(fitted_200, NO_REVIEWS)
        assert full.metrics["ndcg@5"] >= no_reviews.metrics["ndcg@5"]

    def test_single_depth_sweep(self, fitted_200):
        users = sorted(fitted_200.splits_)[:10]
        reports = run_topk_sweep(fitted_200, [1], users)
        assert len(reports) == 1 and reports[0].fingerprint["top_k"] == 1


def featureless_pipeline():
    reviews = []
    for u in range(6):
        for t in range(5):
            reviews.append(Review(f"r{u}-{t}", f"u{u}", f"i{(u + t) % 7}", 3, "It arrived on time.", t))
    return RevBrowseRecommender(concurrency=1, slate_size=5).fit(reviews)


def test_featureless_sweep_is_flat():
    pipe = featureless_pipeline()
    assert len(pipe.index_) == 0
    reports = run_topk_sweep(pipe, [1, 2, 3])
    assert reports[0].metrics == reports[1].metrics == reports[2].metrics
    assert len({r.fingerprint_hash for r in reports}) == 3
    for r in reports:
        assert all(math.isfinite(v) for v in r.metrics.values())
