"""Acceptance suite.

One test per criterion; each prints a PASS/FAIL line (run with -s to see
them on success). The heavy corpus fixtures are session-scoped, so this
module is fastest when run in one pytest invocation.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from pbsearch.cli import main as cli_main
from pbsearch.codebook import build_codebook, kmeans_once
from pbsearch.evaluation import (
    BASELINE_METHODS,
    CorpusParams,
    Occlude,
    apply_transform,
    make_planted_corpus,
    precision_at_k,
    scatter_scenario,
    small_query_scenario,
)
from pbsearch.model import ImageBoW
from pbsearch.profiles import build_all_profiles, image_profile_data
from pbsearch.search import bow_search, build_index, query_topk_images, query_topk_multi
from pbsearch.similarity import (
    SimilarityConfig,
    _MEASURE_FNS,
    profile_distance,
    profile_similarity,
    ring_weights,
    sim_max,
)

LAMBDA = 1.0 / 3.0


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


def _pairwise_sq_dists(coords: np.ndarray) -> np.ndarray:
    dx = coords[:, 0][None, :] - coords[:, 0][:, None]
    dy = coords[:, 1][None, :] - coords[:, 1][:, None]
    return dx * dx + dy * dy


def generic_image(rng, image_id, n, codebook_size=500, extent=1000.0, min_gap=1e-6):
    """Random image whose per-center distance lists have no near-ties."""
    while True:
        coords = rng.uniform(0.0, extent, size=(n, 2))
        gaps = np.diff(np.sort(_pairwise_sq_dists(coords), axis=1), axis=1)
        if gaps.min() > min_gap:
            return ImageBoW(image_id, coords, rng.integers(0, codebook_size, size=n), codebook_size)


@pytest.fixture(scope="session")
def default_corpus():
    """The default synthetic corpus (52 queries, 1000 images) plus its index."""
    corpus, queries, gt = make_planted_corpus(0, CorpusParams())
    index = build_index(corpus, n0=50, similarity=SimilarityConfig(lam=LAMBDA))
    index.scorer()  # build the inverted lists once
    return corpus, queries, gt, index


class TestInvarianceSuite:
    def test_invariance_suite(self):
        started = time.perf_counter()
        rng = np.random.default_rng(2024)
        n_images = 200
        # sizes span the full 10..500 range, weighted towards small images
        sizes = np.concatenate(
            [rng.integers(10, 121, size=n_images - 20), rng.integers(121, 501, size=20)]
        )
        sizes[0], sizes[1] = 10, 500  # hit the stated bounds exactly
        images = [generic_image(rng, f"inv_{i:03d}", int(n)) for i, n in enumerate(sizes)]

        for img in images:
            base = image_profile_data(img, n0=50)
            theta = float(rng.uniform(0, 2 * math.pi))
            c, s = math.cos(theta), math.sin(theta)
            variants = [
                img.coords @ np.array([[c, s], [-s, c]]),
                img.coords * float(rng.uniform(0.1, 10.0)),
                img.coords + rng.uniform(-1e3, 1e3, size=2),
            ]
            for coords in variants:
                moved = image_profile_data(ImageBoW(img.image_id, coords, img.words, 500), n0=50)
                assert moved.ring_plan == base.ring_plan
                assert np.array_equal(moved.ring_words, base.ring_words)
                assert np.array_equal(moved.ring_counts, base.ring_counts)
                assert np.array_equal(moved.ring_offsets, base.ring_offsets)

        index = build_index(images, n0=50, similarity=SimilarityConfig(lam=LAMBDA))
        for i, img in enumerate(images):
            top = query_topk_images(img, index, k=1)[0]
            assert top.image_id == img.image_id
            m = index.data[i].m
            assert abs(top.score - sim_max(m, m, LAMBDA)) <= 1e-9

        elapsed = time.perf_counter() - started
        report(
            "invariance suite (200 images, rotation/scale/translation bit-identical, "
            "self-query == sim_max within 1e-9)",
            elapsed < 60.0,
            f"{elapsed:.1f}s",
        )


class TestOracleEquivalence:
    @staticmethod
    def oracle_topk(query_img, corpus_images, n0, cfg, k):
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

    def test_early_abandon_equals_exhaustive(self):
        started = time.perf_counter()
        rng = np.random.default_rng(7)
        cfg = SimilarityConfig(lam=LAMBDA)
        n0 = 4
        for trial in range(20):
            n_images = int(rng.integers(20, 101))
            corpus = [
                ImageBoW(
                    f"c{trial}_{i:03d}",
                    rng.uniform(0, 100, size=(n, 2)),
                    rng.integers(0, 30, size=n),
                    codebook_size=30,
                )
                for i, n in enumerate(rng.integers(6, 24, size=n_images))
            ]
            index = build_index(corpus, n0=n0, similarity=cfg)
            n_q = int(rng.integers(5, 18))
            query = ImageBoW(
                "q", rng.uniform(0, 100, size=(n_q, 2)), rng.integers(0, 30, size=n_q), 30
            )
            k = int(rng.integers(1, 12))
            got = [
                (r.image_id, r.score, r.db_center_index, r.query_center_index)
                for r in query_topk_images(query, index, k=k, method="early_abandon")
            ]
            want = self.oracle_topk(query, corpus, n0, cfg, k)
            assert got == want, f"trial {trial}: early-abandon output diverged"
        elapsed = time.perf_counter() - started
        report(
            "oracle equivalence (20 corpora, early abandoning == exhaustive double loop exactly)",
            elapsed < 300.0,
            f"{elapsed:.1f}s",
        )


class TestRecurrenceIdentity:
    def test_complement_equals_direct_sum_with_monotone_prefixes(self):
        rng = np.random.default_rng(11)
        cfg = SimilarityConfig(lam=LAMBDA)
        measure = _MEASURE_FNS[cfg.measure]
        pool = []
        for i in range(30):
            n = int(rng.integers(5, 70))
            img = ImageBoW(
                f"p{i}", rng.uniform(0, 100, (n, 2)), rng.integers(0, 25, n), codebook_size=25
            )
            pool.extend(build_all_profiles(img, n0=3))
        checked = 0
        for _ in range(1000):
            a = pool[rng.integers(len(pool))]
            b = pool[rng.integers(len(pool))]
            complement = profile_distance(a, b, cfg)
            depth = min(len(a.rings), len(b.rings))
            w = ring_weights(depth, cfg.lam)
            direct = 0.0
            prefixes = []
            for t in range(depth):
                direct += w[t] * (1.0 - measure(a.rings[t], b.rings[t]))
                prefixes.append(direct)
            assert abs(complement - direct) <= 1e-12
            for l in range(1, depth):
                assert prefixes[l - 1] <= prefixes[l]
            assert all(p <= direct for p in prefixes)
            checked += 1
        report(
            "recurrence identity (1000 pairs, complement == direct sum within 1e-12, prefixes monotone)",
            checked == 1000,
        )


class TestScatterScenarioCriterion:
    def test_fifty_seeds_strict_separation(self):
        profile_wins = 0
        baseline_ties = 0
        n_seeds = 50
        for seed in range(n_seeds):
            sc = scatter_scenario(seed)
            corpus = sc.corpus()
            index = build_index(corpus, n0=50, similarity=SimilarityConfig(lam=LAMBDA))
            scores = {
                r.image_id: r.score
                for r in query_topk_images(sc.query, index, k=len(corpus))
            }
            if scores["coherent"] > scores["scattered"]:
                profile_wins += 1
            all_equal = True
            for measure in ("l1", "l2", "cosine", "jaccard"):
                for weighting in ("none", "tfidf"):
                    ranked = dict(
                        bow_search(sc.query, corpus, measure, weighting, k=len(corpus))
                    )
                    if ranked["coherent"] != ranked["scattered"]:
                        all_equal = False
            if all_equal:
                baseline_ties += 1
        report(
            "scattered-duplicate discrimination (profile strict > in 50/50, baselines tie in 50/50)",
            profile_wins == n_seeds and baseline_ties == n_seeds,
            f"profile {profile_wins}/50, baselines {baseline_ties}/50",
        )


class TestSmallQueryCriterion:
    def test_twenty_five_certified_seeds(self):
        hits = 0
        n_seeds = 25
        for seed in range(n_seeds):
            sc = small_query_scenario(seed)
            index = build_index(sc.corpus(), n0=50, similarity=SimilarityConfig(lam=LAMBDA))
            if query_topk_images(sc.query, index, k=1)[0].image_id == "true_host":
                hits += 1
        report(
            "small-query retrieval (host rank 1 in >= 23/25 L2-defeating scenarios)",
            hits >= 23,
            f"{hits}/25",
        )


class TestOcclusionRobustness:
    def test_thirty_percent_host_occlusion(self):
        hits = 0
        n_trials = 50
        for seed in range(n_trials):
            rng = np.random.default_rng(10_000 + seed)
            v = 500
            n_q = int(rng.integers(35, 51))
            query = ImageBoW(
                "query", rng.uniform(0, 160.0, (n_q, 2)), rng.integers(0, v, n_q), v
            )
            n_b = int(rng.integers(100, 141))
            bg = ImageBoW("host", rng.uniform(0, 1000.0, (n_b, 2)), rng.integers(0, v, n_b), v)
            from pbsearch.evaluation import Embed

            offset = (float(rng.uniform(0, 840)), float(rng.uniform(0, 840)))
            host = apply_transform(query, Embed(host=bg, offset=offset))
            host = apply_transform(host, Occlude(0.3, seed=int(rng.integers(0, 2**31))))
            distractors = [
                ImageBoW(
                    f"dist_{i:03d}",
                    rng.uniform(0, 1000.0, (m, 2)),
                    rng.integers(0, v, m),
                    v,
                )
                for i, m in enumerate(rng.integers(100, 141, size=100))
            ]
            index = build_index([host, *distractors], n0=50, similarity=SimilarityConfig(lam=LAMBDA))
            ranking = [r.image_id for r in query_topk_images(query, index, k=1)]
            hits += precision_at_k(ranking, {"host"}, 1)
        p_at_1 = hits / n_trials
        report(
            "occlusion robustness (30% host occlusion, precision@1 >= 0.9 over 50 trials)",
            p_at_1 >= 0.9,
            f"precision@1 = {p_at_1:.2f}",
        )


class TestDirectionalReproduction:
    def test_cli_evaluate_default_corpus_gap(self, tmp_path):
        started = time.perf_counter()
        runner = CliRunner()
        out = tmp_path / "report"
        result = runner.invoke(cli_main, ["evaluate", "-o", str(out), "--seed", "0"])
        assert result.exit_code == 0, result.output
        rows = {}
        for line in (tmp_path / "report.csv").read_text(encoding="utf-8").strip().splitlines():
            method, k, p = line.split(",")
            rows[(method, int(k))] = float(p)
        profile10 = rows[("profile", 10)]
        best_baseline = max(rows[(m, 10)] for m in BASELINE_METHODS)
        elapsed = time.perf_counter() - started
        report(
            "directional reproduction (default corpus: profile p@10 beats best orderless "
            "baseline by >= 20 points)",
            profile10 - best_baseline >= 0.20 and elapsed < 900.0,
            f"profile {profile10:.3f} vs best baseline {best_baseline:.3f}, {elapsed:.0f}s",
        )


class TestKMeansContract:
    def test_monotone_sse_and_min_scatter_restart(self):
        rng = np.random.default_rng(31)
        datasets = [
            rng.normal(size=(600, 16)),
            np.vstack([rng.normal(loc=c, scale=0.3, size=(150, 8)) for c in (0, 4, 9, 15)]),
            rng.uniform(0, 1, size=(400, 32)),
        ]
        all_monotone = True
        for data in datasets:
            singles = [kmeans_once(data, k=24, seed=s) for s in range(10)]
            for book in singles:
                hist = np.array(book.sse_history)
                if not np.all(np.diff(hist) <= hist[:-1] * 1e-12 + 1e-9):
                    all_monotone = False
            best = build_codebook(data, k=24, restarts=10, base_seed=0)
            assert best.scatter == min(s.scatter for s in singles)
        report(
            "k-means contract (per-iteration SSE non-increasing; restart winner == min over "
            "10 independent single runs)",
            all_monotone,
        )


class TestLambdaSweep:
    def test_profile_beats_baselines_for_each_lambda(self, default_corpus):
        corpus, queries, gt, index = default_corpus
        baseline_best = 0.0
        for measure in ("l1", "l2", "cosine", "jaccard"):
            for weighting in ("none", "tfidf"):
                total = 0.0
                for q in queries:
                    ids = [iid for iid, _ in bow_search(q, corpus, measure, weighting, k=10)]
                    total += precision_at_k(ids, gt[q.image_id], 10)
                baseline_best = max(baseline_best, total / len(queries))
        lams = (0.1, LAMBDA, 0.5, 1.0)
        cfgs = [SimilarityConfig(lam=lam) for lam in lams]
        totals = [0.0] * len(lams)
        for q in queries:
            for i, ranked in enumerate(query_topk_multi(q, index, cfgs, k=10)):
                ids = [r.image_id for r in ranked]
                totals[i] += precision_at_k(ids, gt[q.image_id], 10)
        results = {lam: totals[i] / len(queries) for i, lam in enumerate(lams)}
        ok = all(p > baseline_best for p in results.values())
        detail = ", ".join(f"lambda={l:g}: {p:.3f}" for l, p in results.items())
        report(
            "lambda sweep (profile p@10 exceeds best baseline for lambda in {1/10, 1/3, 1/2, 1})",
            ok,
            f"best baseline {baseline_best:.3f}; {detail}",
        )
