import math

import numpy as np
import pytest

from pbsearch.model import ImageBoW
from pbsearch.profiles import build_all_profiles
from pbsearch.search import (
    bow_histogram,
    bow_search,
    build_index,
    load_index,
    query_best_pair,
    query_topk_images,
    tfidf_weights,
)
from pbsearch.similarity import SimilarityConfig, profile_similarity, sim_max


def random_image(rng, image_id, n, codebook_size=30, extent=100.0):
    return ImageBoW(
        image_id,
        rng.uniform(0, extent, size=(n, 2)),
        rng.integers(0, codebook_size, size=n),
        codebook_size=codebook_size,
    )


def random_corpus(rng, n_images, n_low=5, n_high=25, codebook_size=30):
    return [
        random_image(rng, f"img_{i:03d}", int(rng.integers(n_low, n_high)), codebook_size)
        for i in range(n_images)
    ]


def oracle_topk(query_img, corpus_images, n0, cfg, k):
    """Independent exhaustive double loop through the dict-based profile API."""
    qprofiles = build_all_profiles(query_img, n0)
    best = {}
    for img in corpus_images:
        for c, p in enumerate(build_all_profiles(img, n0)):
            for j, q in enumerate(qprofiles):
                s = profile_similarity(q, p, cfg)
                cur = best.get(img.image_id)
                if cur is None or s > cur[0] or (s == cur[0] and (c, j) < (cur[1], cur[2])):
                    best[img.image_id] = (s, c, j)
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[0]))
    return [(iid, s, c, j) for iid, (s, c, j) in ranked[:k]]


def as_tuples(results):
    return [(r.image_id, r.score, r.db_center_index, r.query_center_index) for r in results]


class TestBuildIndex:
    def test_entry_count(self):
        rng = np.random.default_rng(0)
        corpus = [random_image(rng, "a", 10), random_image(rng, "b", 10)]
        index = build_index(corpus, n0=3)
        assert index.n_profiles == 20
        assert sum(1 for _ in index.entries()) == 20

    def test_rebuild_is_identical(self):
        rng = np.random.default_rng(1)
        corpus = random_corpus(rng, 5)
        a = build_index(corpus, n0=3).dump()
        b = build_index(corpus, n0=3).dump()
        assert a == b

    def test_undersized_image_named(self):
        rng = np.random.default_rng(2)
        tiny = ImageBoW("tiny", np.array([[0.0, 0.0]]), np.array([1]), codebook_size=30)
        with pytest.raises(ValueError, match="tiny"):
            build_index([random_image(rng, "ok", 8), tiny], n0=3)

    def test_pidx_roundtrip_lossless(self, tmp_path):
        rng = np.random.default_rng(3)
        index = build_index(random_corpus(rng, 6), n0=3)
        p = tmp_path / "corpus.pidx"
        index.save(p)
        back = load_index(p)
        assert back.dump() == index.dump()
        assert back.n0 == index.n0 and back.codebook_size == index.codebook_size
        # sidecar restored the keypoint snapshot
        for i in range(index.n_images):
            np.testing.assert_array_equal(back.coords[i], index.coords[i])
            np.testing.assert_array_equal(back.words[i], index.words[i])

    def test_entries_match_object_api(self):
        rng = np.random.default_rng(4)
        corpus = random_corpus(rng, 3)
        index = build_index(corpus, n0=3)
        by_image = {img.image_id: build_all_profiles(img, 3) for img in corpus}
        for iid, c, prof in index.entries():
            assert prof == by_image[iid][c]


class TestQueryBestPair:
    def test_self_match(self):
        rng = np.random.default_rng(5)
        corpus = random_corpus(rng, 8)
        index = build_index(corpus, n0=3)
        for img in corpus:
            r = query_best_pair(img, index)
            assert r.image_id == img.image_id
            m = len(index.data[index.image_index(img.image_id)].ring_plan)
            assert r.score == sim_max(m, m, index.similarity.lam)
            assert r.query_center_index == r.db_center_index

    def test_single_image_index(self):
        rng = np.random.default_rng(6)
        corpus = [random_image(rng, "only", 9)]
        index = build_index(corpus, n0=3)
        assert query_best_pair(random_image(rng, "q", 7), index).image_id == "only"

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        cfg = SimilarityConfig()
        corpus = random_corpus(rng, 6)
        index = build_index(corpus, n0=3, similarity=cfg)
        for _ in range(5):
            q = random_image(rng, "q", int(rng.integers(4, 15)))
            want = oracle_topk(q, corpus, 3, cfg, 1)[0]
            got = query_best_pair(q, index)
            assert (got.image_id, got.score, got.db_center_index, got.query_center_index) == want

    def test_empty_index(self):
        rng = np.random.default_rng(8)
        index = build_index([], codebook_size=30)
        with pytest.raises(ValueError, match="empty index"):
            query_best_pair(random_image(rng, "q", 5), index)

    def test_incompatible_codebook(self):
        rng = np.random.default_rng(9)
        index = build_index([random_image(rng, "a", 6)], n0=3)
        q = random_image(rng, "q", 6, codebook_size=31)
        with pytest.raises(ValueError, match="codebook"):
            query_best_pair(q, index)


class TestQueryTopK:
    def test_k1_matches_best_pair(self):
        rng = np.random.default_rng(10)
        corpus = random_corpus(rng, 10)
        index = build_index(corpus, n0=3)
        q = random_image(rng, "q", 12)
        assert query_topk_images(q, index, k=1)[0] == query_best_pair(q, index)

    def test_k_beyond_corpus_returns_all_once(self):
        rng = np.random.default_rng(11)
        corpus = random_corpus(rng, 7)
        index = build_index(corpus, n0=3)
        q = random_image(rng, "q", 10)
        results = query_topk_images(q, index, k=50)
        assert len(results) == 7
        assert len({r.image_id for r in results}) == 7

    @pytest.mark.parametrize("method", ["vectorized", "early_abandon", "naive"])
    def test_oracle_equivalence_all_methods(self, method):
        rng = np.random.default_rng(12)
        cfg = SimilarityConfig()
        corpus = random_corpus(rng, 50)
        index = build_index(corpus, n0=3, similarity=cfg)
        for _ in range(3):
            q = random_image(rng, "q", int(rng.integers(5, 20)))
            want = oracle_topk(q, corpus, 3, cfg, 10)
            got = as_tuples(query_topk_images(q, index, k=10, method=method))
            assert got == want  # ids, order, scores, pairs: exact

    def test_methods_exactly_agree_with_duplicates_and_ties(self):
        rng = np.random.default_rng(13)
        corpus = random_corpus(rng, 12)
        # clone one image under two ids to force exact cross-image ties
        clone_src = corpus[3]
        corpus.append(ImageBoW("zz_clone", clone_src.coords.copy(), clone_src.words.copy(), 30))
        index = build_index(corpus, n0=3)
        q = random_image(rng, "q", 14)
        a = as_tuples(query_topk_images(q, index, k=13, method="vectorized"))
        b = as_tuples(query_topk_images(q, index, k=13, method="early_abandon"))
        c = as_tuples(query_topk_images(q, index, k=13, method="naive"))
        assert a == b == c

    def test_tied_images_rank_by_id(self):
        rng = np.random.default_rng(14)
        base = random_image(rng, "b_img", 9)
        twin = ImageBoW("a_img", base.coords.copy(), base.words.copy(), 30)
        index = build_index([base, twin], n0=3)
        q = random_image(rng, "q", 8)
        results = query_topk_images(q, index, k=2)
        assert results[0].score == results[1].score
        assert results[0].image_id == "a_img"

    def test_query_too_small(self):
        rng = np.random.default_rng(15)
        index = build_index([random_image(rng, "a", 6)], n0=3)
        q = ImageBoW("q", np.array([[0.0, 0.0]]), np.array([1]), codebook_size=30)
        with pytest.raises(ValueError, match="at least 2"):
            query_topk_images(q, index, k=1)

    def test_multi_config_batch_equals_individual_calls(self):
        from pbsearch.search import query_topk_multi

        rng = np.random.default_rng(23)
        corpus = random_corpus(rng, 15)
        index = build_index(corpus, n0=3)
        q = random_image(rng, "q", 13)
        cfgs = [SimilarityConfig(lam=lam) for lam in (0.1, 1 / 3, 0.5, 1.0)]
        batched = query_topk_multi(q, index, cfgs, k=8)
        for cfg, got in zip(cfgs, batched):
            assert got == query_topk_images(q, index, k=8, cfg=cfg)

    def test_reload_then_query_equals_build_then_query(self, tmp_path):
        rng = np.random.default_rng(16)
        corpus = random_corpus(rng, 10)
        index = build_index(corpus, n0=3)
        p = tmp_path / "c.pidx"
        index.save(p)
        back = load_index(p)
        q = random_image(rng, "q", 11)
        assert as_tuples(query_topk_images(q, back, k=5)) == as_tuples(
            query_topk_images(q, index, k=5)
        )


class TestQueryInvariance:
    def _rank(self, q, index, k=10):
        return as_tuples(query_topk_images(q, index, k=k))

    def test_translation(self):
        rng = np.random.default_rng(17)
        corpus = random_corpus(rng, 12)
        index = build_index(corpus, n0=3)
        q = random_image(rng, "q", 12)
        moved = ImageBoW("q", q.coords + np.array([500.0, -250.0]), q.words, 30)
        assert self._rank(q, index) == self._rank(moved, index)

    def test_rotation_and_scale(self):
        rng = np.random.default_rng(18)
        corpus = random_corpus(rng, 12)
        index = build_index(corpus, n0=3)
        q = random_image(rng, "q", 12)
        theta = 0.7
        c, s = math.cos(theta), math.sin(theta)
        rotated = ImageBoW("q", q.coords @ np.array([[c, s], [-s, c]]), q.words, 30)
        scaled = ImageBoW("q", q.coords * 5.25, q.words, 30)
        assert self._rank(q, index) == self._rank(rotated, index) == self._rank(scaled, index)


class TestBowHistogram:
    def test_empty(self):
        img = ImageBoW("e", np.zeros((0, 2)), np.zeros(0, dtype=np.int64), 10)
        assert bow_histogram(img, 10).tolist() == [0.0] * 10

    def test_counts(self):
        img = ImageBoW("a", np.zeros((3, 2)), np.array([3, 3, 7]), 10)
        h = bow_histogram(img, 10)
        assert h[3] == 2 and h[7] == 1 and h.sum() == 3

    def test_total_is_keypoint_count(self):
        rng = np.random.default_rng(19)
        img = random_image(rng, "a", 57)
        assert bow_histogram(img, 30).sum() == 57


class TestTfIdf:
    def _img(self, iid, words):
        n = len(words)
        return ImageBoW(iid, np.zeros((n, 2)), np.asarray(words), 10)

    def test_everywhere_word_weighs_zero(self):
        corpus = [self._img(f"i{i}", [5, i]) for i in range(4)]
        idf = tfidf_weights(corpus, 10)
        assert idf[5] == 0.0

    def test_rare_word(self):
        corpus = [self._img("a", [1]), self._img("b", [2]), self._img("c", [3])]
        idf = tfidf_weights(corpus, 10)
        assert idf[1] == pytest.approx(math.log(3), abs=1e-12)

    def test_half_corpus(self):
        corpus = [self._img("a", [1]), self._img("b", [1]), self._img("c", [2]), self._img("d", [3])]
        idf = tfidf_weights(corpus, 10)
        assert idf[1] == pytest.approx(math.log(2), abs=1e-12)

    def test_unused_word_zero(self):
        corpus = [self._img("a", [1])]
        assert tfidf_weights(corpus, 10)[9] == 0.0


class TestBowSearch:
    def test_identical_histogram_first_with_zero_distance(self):
        rng = np.random.default_rng(20)
        corpus = random_corpus(rng, 8)
        q = ImageBoW("q", corpus[4].coords + 3.0, corpus[4].words.copy(), 30)
        ranked = bow_search(q, corpus, measure="l2", weighting="none", k=3)
        assert ranked[0] == (corpus[4].image_id, 0.0)

    def test_disjoint_query_jaccard_all_zero_ordered_by_id(self):
        corpus = [
            ImageBoW("b", np.zeros((2, 2)), np.array([1, 2]), 10),
            ImageBoW("a", np.zeros((2, 2)), np.array([3, 4]), 10),
        ]
        q = ImageBoW("q", np.zeros((2, 2)), np.array([8, 9]), 10)
        ranked = bow_search(q, corpus, measure="jaccard", weighting="none", k=5)
        assert ranked == [("a", 0.0), ("b", 0.0)]

    @pytest.mark.parametrize("measure", ["l1", "l2", "cosine", "jaccard"])
    @pytest.mark.parametrize("weighting", ["none", "tfidf"])
    def test_naive_reimplementation_oracle(self, measure, weighting):
        rng = np.random.default_rng(21)
        corpus = random_corpus(rng, 20)
        q = random_image(rng, "q", 15)
        got = bow_search(q, corpus, measure=measure, weighting=weighting, k=20)

        v = 30
        idf = np.ones(v)
        if weighting == "tfidf":
            df = np.zeros(v)
            for img in corpus:
                for w in set(img.words.tolist()):
                    df[w] += 1
            idf = np.where(df > 0, np.log(len(corpus) / np.maximum(df, 1)), 0.0)

        def hist(img):
            h = np.zeros(v)
            for w in img.words.tolist():
                h[w] += 1
            return h * idf

        qh = hist(q)
        rows = []
        for img in corpus:
            hh = hist(img)
            if measure == "l1":
                val, asc = np.abs(qh - hh).sum(), True
            elif measure == "l2":
                val, asc = math.sqrt(((qh - hh) ** 2).sum()), True
            elif measure == "cosine":
                den = math.sqrt((qh * qh).sum()) * math.sqrt((hh * hh).sum())
                val, asc = ((qh * hh).sum() / den if den else 0.0), False
            else:
                mx = np.maximum(qh, hh).sum()
                val, asc = (np.minimum(qh, hh).sum() / mx if mx else 1.0), False
            rows.append((img.image_id, float(val)))
        rows.sort(key=lambda t: (t[1] if asc else -t[1], t[0]))
        assert [iid for iid, _ in got] == [iid for iid, _ in rows]
        np.testing.assert_allclose([v for _, v in got], [v for _, v in rows], atol=1e-12)

    def test_l2_invariant_under_keypoint_permutation(self):
        rng = np.random.default_rng(22)
        corpus = random_corpus(rng, 10)
        q = random_image(rng, "q", 12)
        base = bow_search(q, corpus, measure="l2", weighting="none", k=10)
        shuffled = []
        for img in corpus:
            perm = rng.permutation(len(img))
            shuffled.append(ImageBoW(img.image_id, img.coords[perm], img.words[perm], 30))
        assert bow_search(q, shuffled, measure="l2", weighting="none", k=10) == base
