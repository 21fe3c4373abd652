import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import goldens
from revbrowse.corpus import Review
from revbrowse.errors import CapabilityError
from revbrowse.extraction import ItemFeatures, UserPreferences
from revbrowse.prefrag import HashingEmbedder, ProjectionAdapter, build_feature_index
from revbrowse.ranker import (
    FILE,
    POPULARITY,
    RECENCY,
    Candidate,
    CandidateProvider,
    CandidateSlate,
    MissingUserError,
    ReplayScoringClient,
    assemble_slate,
    inject_ground_truth,
    letter_logprobs,
    mock_score,
    prompt_hash,
    rank_scores,
    record_transcript,
    render_recommendation_prompt,
    score_with_verbalizer,
    training_pair,
)


def slate_of(n, gt=None):
    return CandidateSlate(tuple(Candidate(f"i{k}", f"T{k}") for k in range(n)), gt)


def rev(rid, user, item, ts):
    return Review(rid, user, item, 5, "", ts)


class TestProviders:
    interactions = [rev("a", "u1", "x", 1), rev("b", "u2", "x", 2), rev("c", "u1", "y", 9), rev("d", "u3", "z", 3)]

    def test_popularity_matches_counts(self):
        provider = CandidateProvider(POPULARITY, self.interactions)
        counts = Counter(r.item_id for r in self.interactions)
        expected = sorted(counts, key=lambda i: (-counts[i], i))
        assert provider.provide("u9", (), 3) == expected
        assert provider.provide("u1", ["x"], 3) == ["y", "z"]

    def test_recency(self):
        assert CandidateProvider(RECENCY, self.interactions).provide("u", (), 2) == ["y", "z"]

    def test_file_passthrough_and_missing_user(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"user_id": "u1", "item_ids": ["b", "a", "c"]}\n')
        provider = CandidateProvider.from_file(path)
        assert provider.strategy == FILE and provider.provide("u1") == ["b", "a", "c"]
        with pytest.raises(MissingUserError):
            provider.provide("u2")

    def test_slate_size_bounds(self):
        provider = CandidateProvider(POPULARITY, self.interactions)
        for bad in (1, 27):
            with pytest.raises(ValueError):
                provider.provide("u", (), bad)
        with pytest.raises(ValueError):
            CandidateProvider("BEST")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 30), unique=True, max_size=26), st.integers(2, 26), st.integers(0, 5))
    def test_injection(self, ids, size, seed):
        items = [f"i{k}" for k in ids][:size]
        out, injected = inject_ground_truth(items, "gt", size, seed, "u")
        assert out.count("gt") == 1 and len(out) <= size and injected
        assert [i for i in out if i != "gt"] == items[: len(out) - 1]
        again, injected_again = inject_ground_truth(out, "gt", size, seed, "u")
        assert again == out and not injected_again
        assert inject_ground_truth(items, "gt", size, seed, "u") == (out, True)


class TestSlate:
    def test_size_and_duplicate_checks(self):
        with pytest.raises(ValueError):
            slate_of(1)
        with pytest.raises(ValueError):
            slate_of(27)
        with pytest.raises(ValueError):
            CandidateSlate((Candidate("a", "A"), Candidate("a", "A")), "a")
        assert slate_of(26).letters[-1] == "Z"

    def test_assemble_retrieves_per_side(self):
        emb = HashingEmbedder(64)
        adapter = ProjectionAdapter.identity(64, init_noise=0.0)
        feats = [ItemFeatures("a", "r", ("sweet flavor", "crunchy texture", "fresh taste"), ("spicy kick",))]
        index = build_feature_index(feats, emb, adapter)
        e_like = adapter.transform(emb.embed(["sweet flavor"]))[0]
        slate = assemble_slate(["a", "b"], index, e_like, None, {"a": "Alpha"}, K=2)
        first, second = slate.candidates
        assert first.title == "Alpha" and first.retrieved_pros[0] == "sweet flavor"
        assert len(first.retrieved_pros) == 2 and first.retrieved_cons == ()
        assert second.title == "b" and second.retrieved_pros == ()


class TestScoring:
    def test_letter_mapping(self):
        top = {" A": -1.0, "(B": -0.5, "A": -0.2, "hello": 0.0, " Z": -0.1}
        assert letter_logprobs(top, "ABC") == [-0.2, -0.5, -math.inf]

    def test_ties_and_neg_inf_keep_slate_order(self):
        slate = slate_of(4, gt="i3")
        res = rank_scores([-math.inf, 0.5, 0.5, -math.inf], slate)
        assert res.permutation == (1, 2, 0, 3) and res.rank_of_ground_truth == 4

    def test_replay_fixture_orders_b_then_a(self, data_dir):
        prompt = goldens.golden("rec_prompt_1.txt")
        assert prompt_hash(prompt).startswith("b17b9c0b")
        client = ReplayScoringClient(data_dir / "replay_rec_prompt_1.jsonl")
        res = score_with_verbalizer(client, prompt, goldens.SLATE)
        assert res.ranked_item_ids(goldens.SLATE) == ["B2", "B1"]
        assert res.scores == (-1.9, -0.2) and not res.degraded

    def test_record_then_replay(self, tmp_path, data_dir):
        client = ReplayScoringClient(data_dir / "replay_rec_prompt_1.jsonl")
        prompt = goldens.golden("rec_prompt_1.txt")
        record_transcript(client, [prompt], tmp_path / "t.jsonl")
        assert ReplayScoringClient(tmp_path / "t.jsonl").next_token_logprobs(prompt) == client.next_token_logprobs(prompt)
        with pytest.raises(KeyError):
            client.next_token_logprobs("other prompt")

    def test_no_logprobs_raises_without_fallback(self):
        class Generator:
            def generate(self, prompt):
                return "The answer is (C)."

        with pytest.raises(CapabilityError):
            score_with_verbalizer(Generator(), "p", slate_of(3))
        res = score_with_verbalizer(Generator(), "p", slate_of(3), allow_fallback=True)
        assert res.degraded and res.permutation == (2, 0, 1)

    def test_mock_score_prefers_matching_pros(self):
        like = np.array([1.0, 0.0])
        slate = CandidateSlate(
            (
                Candidate("a", "A", ("x",), (), np.array([[0.0, 1.0]])),
                Candidate("b", "B", ("y",), (), np.array([[1.0, 0.0]])),
            )
        )
        assert mock_score(slate, like, None).permutation == (1, 0)

    def test_mock_score_penalizes_cons_and_is_scale_free(self):
        dislike = np.array([0.0, 1.0])
        slate = CandidateSlate(
            (
                Candidate("a", "A", (), ("x",), None, np.array([[0.0, 3.0]])),
                Candidate("b", "B", (), ("y",), None, np.array([[2.0, 0.0]])),
            )
        )
        res = mock_score(slate, None, dislike)
        assert res.permutation == (1, 0)
        assert mock_score(slate, None, 7 * dislike).scores == pytest.approx(res.scores)

    def test_featureless_slate_keeps_order(self):
        res = mock_score(slate_of(5), np.ones(3), np.ones(3))
        assert res.permutation == tuple(range(5))


class TestPrompt:
    def test_goldens(self):
        for name, text in goldens.rendered().items():
            assert text == goldens.golden(name), name

    def test_history_truncated_to_twenty(self):
        titles = [f"Item {n}" for n in range(25)]
        out = render_recommendation_prompt(titles, None, slate_of(2))
        assert '"Item 5"' in out and '"Item 4"' not in out

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            render_recommendation_prompt([], None, slate_of(2))

    def test_training_pair_label(self):
        slate = CandidateSlate(goldens.SLATE.candidates, "B2")
        pair = training_pair(goldens.HISTORY, goldens.PREFS, slate)
        assert pair["label"] == "B" and pair["prompt"] == goldens.golden("rec_prompt_1.txt")
        with pytest.raises(ValueError):
            training_pair(goldens.HISTORY, goldens.PREFS, goldens.SLATE)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=3), st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=3))
    def test_distinct_preferences_give_distinct_prompts(self, a, b):
        pa = UserPreferences("u", tuple(a), ())
        pb = UserPreferences("u", tuple(b), ())
        if pa.like == pb.like:
            return
        ra = render_recommendation_prompt(goldens.HISTORY, pa, goldens.SLATE)
        rb = render_recommendation_prompt(goldens.HISTORY, pb, goldens.SLATE)
        assert ra != rb
