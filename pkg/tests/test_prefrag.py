import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from oracles import central_difference, full_sort_topk, infonce_reference
from revbrowse.corpus import Event, InteractionSequence, Review
from revbrowse.errors import ArtifactFormatError, DomainError
from revbrowse.extraction import ItemFeatures, UserPreferences
from revbrowse.prefrag import (
    DISLIKE_CONS,
    LIKE_PROS,
    ContrastiveSample,
    FeatureIndex,
    FeatureStore,
    HashingEmbedder,
    ProjectionAdapter,
    build_contrastive_set,
    build_feature_index,
    cosine,
    embed_samples,
    encode_user,
    hit_at_1,
    infonce_from_scores,
    infonce_loss,
    infonce_loss_and_grad,
    normalize_text,
    retrieve_topk,
    train_adapter,
    window_bounds,
)
from revbrowse.prefrag import binfmt


def random_batch(rng, d, B, m):
    return [
        (rng.standard_normal(d), rng.standard_normal(d), rng.standard_normal((int(rng.integers(1, m + 1)), d)))
        for _ in range(B)
    ]


class TestEmbedder:
    def test_unit_norm_and_deterministic(self):
        emb = HashingEmbedder(64)
        X = emb.transform(["crisp bites", "Crisp, BITES!", "fiery heat"])
        np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0)
        np.testing.assert_array_equal(X[0], X[1])
        np.testing.assert_array_equal(X, HashingEmbedder(64).transform(["crisp bites", "crisp bites", "fiery heat"])[[0, 0, 2]])

    def test_empty_text_is_zero(self):
        assert not HashingEmbedder(16).transform(["", "!!"]).any()

    def test_single_string_rejected(self):
        with pytest.raises(TypeError):
            HashingEmbedder().transform("text")

    def test_single_token_is_signed_basis_vector(self):
        row = HashingEmbedder(32).transform(["granola"])[0]
        assert np.count_nonzero(row) == 1 and abs(row.sum()) == 1.0

    def test_sklearn_params(self):
        emb = clone(HashingEmbedder(n_features=12))
        assert emb.get_params() == {"n_features": 12} and emb.dim == 12


class TestLoss:
    def test_cosine_scale_free(self):
        assert cosine([1, 2], [2, 4]) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            cosine([0, 0], [1, 0])

    @pytest.mark.parametrize("m", [1, 40])
    def test_equal_scores_give_log_one_plus_m(self, m):
        q = np.array([1.0, 2.0, 3.0])
        batch = [(q, q, np.tile(q, (m, 1)))]
        assert abs(infonce_loss(batch, np.eye(3)) - math.log(1 + m)) < 1e-9

    def test_opposed_pair_anchor(self):
        q = np.array([0.5, -1.0])
        assert abs(infonce_loss([(q, q, -q[None, :])], np.eye(2)) - math.log(1 + math.exp(-2))) < 1e-9

    def test_matches_reference(self):
        rng = np.random.default_rng(3)
        W = rng.standard_normal((5, 6))
        batch = random_batch(rng, 6, 4, 5)
        assert infonce_loss(batch, W, 0.7) == pytest.approx(infonce_reference(W, batch, 0.7), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=2, max_size=8), st.floats(-5, 5))
    def test_shift_invariant(self, scores, shift):
        s = np.array(scores)
        assert infonce_from_scores([s + shift]) == pytest.approx(infonce_from_scores([s]), abs=1e-9)

    def test_needs_negatives_and_nonempty_batch(self):
        with pytest.raises(DomainError):
            infonce_from_scores([[0.5]])
        with pytest.raises(DomainError):
            infonce_loss([], np.eye(2))

    def test_zero_projection_rejected(self):
        q = np.array([1.0, 0.0])
        with pytest.raises(DomainError):
            infonce_loss([(q, q, q[None, :])], np.zeros((2, 2)))

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_central_difference(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 9))
        W = rng.standard_normal((d, d))
        batch = random_batch(rng, d, 3, 4)
        _, G = infonce_loss_and_grad(batch, W, 0.5)
        G_fd = central_difference(lambda V: infonce_reference(V, batch, 0.5), W)
        np.testing.assert_allclose(G, G_fd, rtol=1e-5, atol=1e-7)


class TestAdapter:
    def test_sklearn_contract(self):
        adapter = ProjectionAdapter(epochs=3, batch_size=4)
        twin = clone(adapter)
        assert twin.get_params() == adapter.get_params()
        with pytest.raises(ValueError):
            ProjectionAdapter(epochs=6).fit([(np.ones(2), np.ones(2), np.ones((1, 2)))])

    def test_transform_normalizes(self):
        adapter = ProjectionAdapter.identity(4, init_noise=0.0)
        Y = adapter.transform([[3.0, 0, 0, 4.0], [0, 0, 0, 0]])
        np.testing.assert_allclose(Y[0], [0.6, 0, 0, 0.8])
        assert not Y[1].any()

    def test_fit_keeps_best_and_records_trace(self):
        rng = np.random.default_rng(0)
        batch = random_batch(rng, 6, 16, 3)
        adapter = ProjectionAdapter(epochs=4, random_state=1).fit(batch)
        trace = adapter.loss_trace_
        assert trace[0]["epoch"] == 0 and len(trace) <= 5
        best = min(r["train_loss"] for r in trace)
        assert trace[adapter.best_epoch_]["train_loss"] == best

    def test_seeded_fit_is_reproducible(self):
        rng = np.random.default_rng(0)
        batch = random_batch(rng, 5, 12, 3)
        a = ProjectionAdapter(epochs=2).fit(batch).components_
        b = ProjectionAdapter(epochs=2).fit(batch).components_
        np.testing.assert_array_equal(a, b)

    def test_byte_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        adapter = ProjectionAdapter(epochs=1).fit(random_batch(rng, 4, 8, 2))
        path = tmp_path / "adapter.bin"
        adapter.save(path, fingerprint="abc")
        loaded, meta = ProjectionAdapter.load(path)
        np.testing.assert_array_equal(loaded.components_, adapter.components_)
        assert loaded.get_params() == adapter.get_params() and meta["fingerprint"] == "abc"
        assert path.read_bytes()[:4] == b"PRAD"

    def test_learns_a_permuted_vocabulary(self):
        # queries and answers use disjoint tokens, so identity cannot separate them
        emb = HashingEmbedder(64)
        words = [f"q{i}" for i in range(12)]
        answers = [f"a{i}" for i in range(12)]
        samples = []
        for i in range(12):
            negs = tuple(answers[j] for j in range(12) if j != i)[:5]
            samples.append(ContrastiveSample(LIKE_PROS, words[i], answers[i], negs))
        adapter, trace = train_adapter(samples * 4, emb, samples, epochs=5, step_size=2.0, batch_size=4)
        assert trace[-1]["train_loss"] < trace[0]["train_loss"]


class TestBinfmt:
    def test_round_trip_with_unicode(self):
        M = np.arange(6, dtype=np.float32).reshape(2, 3)
        data = binfmt.pack(b"TEST", M, ["a", "ümlaut", ""])
        out, strings = binfmt.unpack(data, b"TEST")
        np.testing.assert_array_equal(out, M)
        assert strings == ["a", "ümlaut", ""]

    @pytest.mark.parametrize("mutate", [lambda d: b"XXXX" + d[4:], lambda d: d[:10], lambda d: d[:-1], lambda d: d[:4] + b"\x09" + d[5:]])
    def test_corruption_detected(self, mutate):
        data = binfmt.pack(b"TEST", np.ones((2, 2), dtype=np.float32), ["x"])
        with pytest.raises(ArtifactFormatError):
            binfmt.unpack(mutate(data), b"TEST")


class TestRetrieval:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 6), st.booleans())
    def test_matches_full_sort(self, seed, n, K, integer):
        rng = np.random.default_rng(seed)
        if integer:
            E = rng.integers(-2, 3, size=(n, 3)).astype(float)
            e = rng.integers(-2, 3, size=3).astype(float)
            if not e.any():
                e[0] = 1.0
        else:
            E = rng.standard_normal((n, 4))
            e = rng.standard_normal(4)
        texts = [f"t{i}" for i in range(n)]
        got = [t for t, _ in retrieve_topk(e, E, texts, K)]
        assert got == [texts[i] for i in full_sort_topk(e, E, K)]

    def test_ties_keep_row_order(self):
        E = np.array([[1.0, 0], [2.0, 0], [0, 1.0]])
        assert [t for t, _ in retrieve_topk([1.0, 0], E, ["a", "b", "c"], 2)] == ["a", "b"]

    def test_short_group_and_bad_inputs(self):
        assert len(retrieve_topk([1.0], np.ones((1, 1)), ["a"], 5)) == 1
        assert retrieve_topk([1.0], np.zeros((0, 1)), [], 2) == []
        with pytest.raises(ValueError):
            retrieve_topk([1.0], np.ones((1, 1)), ["a"], 0)
        with pytest.raises(DomainError):
            retrieve_topk([0.0], np.ones((1, 1)), ["a"], 1)


class TestIndex:
    feats = [
        ItemFeatures("i1", "r1", ("crunchy texture", "sweet flavor"), ("spicy kick",)),
        ItemFeatures("i1", "r2", ("Crunchy texture!",), ()),
        ItemFeatures("i2", "r3", ("fresh taste",), ()),
    ]

    def test_dedupe_and_grouping(self):
        adapter = ProjectionAdapter.identity(64)
        index = build_feature_index(self.feats, HashingEmbedder(64), adapter)
        assert index.group("i1", "pros")[1] == ["crunchy texture", "sweet flavor"]
        assert index.group("i1", "cons")[1] == ["spicy kick"]
        assert index.group("i9", "pros")[0].shape == (0, 64)
        assert index.item_count() == 2
        full = build_feature_index(self.feats, HashingEmbedder(64), adapter, dedupe=False)
        assert len(full) == len(index) + 1

    def test_round_trip_is_byte_stable(self, tmp_path):
        index = build_feature_index(self.feats, HashingEmbedder(64), ProjectionAdapter.identity(64), meta={"k": 1})
        index.save(tmp_path / "a.bin")
        again = FeatureIndex.load(tmp_path / "a.bin")
        assert again.to_bytes() == index.to_bytes()
        assert again.texts == index.texts and again.meta["k"] == 1

    def test_retrieve_and_encode_user(self):
        emb = HashingEmbedder(64)
        adapter = ProjectionAdapter.identity(64, init_noise=0.0)
        index = build_feature_index(self.feats, emb, adapter)
        e_like, e_dislike = encode_user(UserPreferences("u", ("sweet flavor",), ()), emb, adapter)
        assert e_dislike is None
        assert index.retrieve(e_like, "i1", "pros", 1)[0][0] == "sweet flavor"
        with pytest.raises(DomainError):
            encode_user(UserPreferences("u", (), ()), emb, adapter)


def seq_and_store(n, n_others=2):
    reviews, events, feats = [], [], []
    for t in range(n):
        r = Review(f"u{t}", "u", f"i{t}", 5, "crunchy", t)
        reviews.append(r)
        events.append(Event(r.item_id, r.review_id, t))
        feats.append(ItemFeatures(r.item_id, r.review_id, ("crunchy texture",), ("spicy kick",)))
        for o in range(n_others):
            other = Review(f"o{o}-{t}", f"o{o}", f"i{t}", 5, "x", t)
            reviews.append(other)
            feats.append(ItemFeatures(other.item_id, other.review_id, (f"pro {o}",), (f"con {o}",)))
    feats.append(ItemFeatures("i0", "dup", ("Crunchy texture.",), ()))
    reviews.append(Review("dup", "o9", "i0", 5, "x", 0))
    return InteractionSequence("u", tuple(events)), FeatureStore(feats, reviews)


def always_prefs(reviews, user_id):
    return UserPreferences(user_id, ("crisp bites",), ("fiery heat",))


class TestContrastive:
    @pytest.mark.parametrize("n", [20, 25, 40])
    def test_window_counts(self, n):
        assert len(window_bounds(n, 20)) == n - 20 + 1
        seq, store = seq_and_store(n)
        built = build_contrastive_set([seq], store, always_prefs, w=20)
        assert built.stats["windows"] == n - 19
        assert len(built) == 2 * (n - 19)

    def test_short_sequences(self):
        assert window_bounds(5, 20) == [(0, 5)]
        assert window_bounds(2, 20) == []
        assert window_bounds(30, 20, stride=5) == [(0, 20), (5, 25), (10, 30)]

    def test_negatives_are_other_users_same_item(self):
        seq, store = seq_and_store(20)
        built = build_contrastive_set([seq], store, always_prefs, w=20, m=40)
        like = [s for s in built if s.branch == LIKE_PROS][0]
        assert like.negative_texts == ("pro 0", "pro 1")
        assert like.query_text == "crisp bites" and like.positive_text == "crunchy texture"
        dislike = [s for s in built if s.branch == DISLIKE_CONS][0]
        assert dislike.positive_text == "spicy kick"

    def test_duplicate_of_positive_is_skipped(self):
        seq, store = seq_and_store(3)
        built = build_contrastive_set([seq], store, always_prefs, w=20)
        first = [s for s in built if s.branch == LIKE_PROS and s.positive_review_id == "u2"]
        assert len(first) == 1
        seq0, store0 = seq_and_store(20)
        assert build_contrastive_set([seq0], store0, always_prefs, w=20).stats.get("negatives_deduplicated", 0) == 0

    def test_m_caps_negatives(self):
        seq, store = seq_and_store(20, n_others=5)
        built = build_contrastive_set([seq], store, always_prefs, w=20, m=3)
        assert all(len(s.negative_texts) == 3 for s in built)

    def test_sample_rejects_positive_among_negatives(self):
        with pytest.raises(ValueError):
            ContrastiveSample(LIKE_PROS, "q", "Sweet flavor", ("sweet flavor!",))

    def test_record_round_trip(self):
        s = ContrastiveSample(LIKE_PROS, "q", "p", ("n1", "n2"), "u", "r", ("a", "b"), 3)
        assert ContrastiveSample.from_record(s.to_record()) == s

    def test_synthetic_positives_never_negatives(self, fitted_200):
        for s in list(fitted_200.samples_) + list(fitted_200.validation_samples_):
            key = normalize_text(s.positive_text)
            assert all(normalize_text(n) != key for n in s.negative_texts)


def test_trained_adapter_separates(fitted_200):
    groups = embed_samples(fitted_200.samples_, fitted_200.embedder_)
    untrained = ProjectionAdapter.identity(fitted_200.embedder_.dim)
    assert hit_at_1(groups, fitted_200.adapter_) > 0.9
    assert hit_at_1(groups, untrained) <= 0.6
