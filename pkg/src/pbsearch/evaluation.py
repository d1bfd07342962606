"""Synthetic keypoint corpora and precision@k evaluation.

All synthesis happens at the keypoint level: images are (coordinate,
visual word) sets, transforms act on coordinates (occlusion/scatter also
on membership/placement), and planting merges a query's keypoints into a
host image. Every generator is a pure function of its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .config import EngineConfig
from .model import ImageBoW
from .search import (
    BOW_MEASURES,
    ProfileIndex,
    bow_search,
    build_index,
    query_topk_images,
)

# -- keypoint-level transforms -----------------------------------------


@dataclass(frozen=True)
class Rotate:
    theta: float  # radians, about the origin


@dataclass(frozen=True)
class Scale:
    s: float

    def __post_init__(self) -> None:
        if not self.s > 0:
            raise ValueError("scale factor must be positive")


@dataclass(frozen=True)
class Translate:
    dx: float
    dy: float


@dataclass(frozen=True)
class Shear:
    kx: float  # x' = x + kx * y


@dataclass(frozen=True)
class Occlude:
    fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0 <= self.fraction < 1:
            raise ValueError("occlusion fraction must be in [0, 1)")


@dataclass(frozen=True)
class Scatter:
    seed: int


@dataclass(frozen=True)
class Embed:
    host: ImageBoW
    offset: tuple[float, float]


TransformSpec = Union[Rotate, Scale, Translate, Shear, Occlude, Scatter, Embed]


def apply_transform(image: ImageBoW, t: TransformSpec) -> ImageBoW:
    """Apply one keypoint-level transform.

    Words are unchanged except under Occlude (drops floor(fraction*n)
    keypoints chosen by seed) and Embed (merges this image's keypoints,
    shifted by offset, into the host's). Scatter keeps words but redraws
    coordinates uniformly over the image's bounding box.
    """
    coords = image.coords
    if isinstance(t, Rotate):
        c, s = math.cos(t.theta), math.sin(t.theta)
        xy = np.column_stack([coords[:, 0] * c - coords[:, 1] * s,
                              coords[:, 0] * s + coords[:, 1] * c])
        return ImageBoW(image.image_id, xy, image.words.copy(), image.codebook_size)
    if isinstance(t, Scale):
        return ImageBoW(image.image_id, coords * t.s, image.words.copy(), image.codebook_size)
    if isinstance(t, Translate):
        return ImageBoW(image.image_id, coords + np.array([t.dx, t.dy]),
                        image.words.copy(), image.codebook_size)
    if isinstance(t, Shear):
        xy = np.column_stack([coords[:, 0] + t.kx * coords[:, 1], coords[:, 1]])
        return ImageBoW(image.image_id, xy, image.words.copy(), image.codebook_size)
    if isinstance(t, Occlude):
        n = len(image)
        drop = int(math.floor(t.fraction * n))
        if n - drop < 2:
            raise ValueError(f"occlusion would leave {n - drop} keypoints (< 2)")
        rng = np.random.default_rng(t.seed)
        dropped = rng.choice(n, size=drop, replace=False)
        keep = np.ones(n, dtype=bool)
        keep[dropped] = False
        return ImageBoW(image.image_id, coords[keep], image.words[keep], image.codebook_size)
    if isinstance(t, Scatter):
        rng = np.random.default_rng(t.seed)
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        xy = rng.uniform(lo, hi, size=coords.shape)
        return ImageBoW(image.image_id, xy, image.words.copy(), image.codebook_size)
    if isinstance(t, Embed):
        host = t.host
        if host.codebook_size != image.codebook_size:
            raise ValueError("embed: codebook size mismatch")
        xy = np.vstack([host.coords, coords + np.array(t.offset)])
        words = np.concatenate([host.words, image.words])
        return ImageBoW(host.image_id, xy, words, host.codebook_size)
    raise TypeError(f"unknown transform {t!r}")


# -- planted corpora -----------------------------------------------------


@dataclass
class CorpusParams:
    """Shape of a planted synthetic corpus.

    Per query, ``hosts_per_query`` images embed the query's keypoints
    (cycling through ``transform_kinds`` with seeded magnitudes) and are
    the relevant set; ``confusers_per_query`` images carry the exact word
    multiset of one of those hosts with scattered coordinates, which no
    orderless bag-of-words method can tell from the real host.
    """

    n_images: int = 1000
    n_queries: int = 52
    hosts_per_query: int = 12
    confusers_per_query: int = 6
    codebook_size: int = 500
    extent: float = 1000.0
    background_keypoints: tuple[int, int] = (140, 220)
    query_keypoints: tuple[int, int] = (55, 90)
    query_extent: float = 160.0
    transform_kinds: tuple[str, ...] = ("identity", "rotate", "scale", "shear", "occlude")

    def __post_init__(self) -> None:
        if self.n_queries < 1:
            raise ValueError("need at least 1 query")
        if self.n_images < 2:
            raise ValueError("need at least 2 corpus images")
        if self.hosts_per_query < 1:
            raise ValueError("need at least 1 host per query")


def _random_image(rng: np.random.Generator, image_id: str, n: int, extent: float, v: int) -> ImageBoW:
    coords = rng.uniform(0.0, extent, size=(n, 2))
    words = rng.integers(0, v, size=n, dtype=np.int64)
    return ImageBoW(image_id, coords, words, codebook_size=v)


def _plant(
    query: ImageBoW,
    host_bg: ImageBoW,
    rng: np.random.Generator,
    kind: str,
    extent: float,
) -> ImageBoW:
    """Embed a transformed copy of the query into a background image."""
    copy = query
    if kind == "rotate":
        copy = apply_transform(copy, Rotate(float(rng.uniform(0, 2 * math.pi))))
    elif kind == "scale":
        copy = apply_transform(copy, Scale(float(rng.uniform(0.6, 1.8))))
    elif kind == "shear":
        copy = apply_transform(copy, Shear(float(rng.uniform(-0.25, 0.25))))
    elif kind == "occlude":
        copy = apply_transform(copy, Occlude(0.25, seed=int(rng.integers(0, 2**31))))
    elif kind != "identity":
        raise ValueError(f"unknown transform kind {kind!r}")
    lo = copy.coords.min(axis=0)
    hi = copy.coords.max(axis=0)
    if (hi - lo).max() >= extent:
        raise ValueError("transformed query does not fit in the host extent")
    dx = float(rng.uniform(-lo[0], extent - hi[0]))
    dy = float(rng.uniform(-lo[1], extent - hi[1]))
    return apply_transform(copy, Embed(host=host_bg, offset=(dx, dy)))


def make_planted_corpus(
    seed: int, params: CorpusParams | None = None
) -> tuple[list[ImageBoW], list[ImageBoW], dict[str, set[str]]]:
    """Deterministic planted corpus: (corpus, queries, ground truth).

    Image ids are assigned by a seeded permutation so that id-based tie
    breaking carries no information about relevance.
    """
    params = params or CorpusParams()
    planted = params.n_queries * (params.hosts_per_query + params.confusers_per_query)
    if planted > params.n_images:
        raise ValueError(
            f"infeasible params: {planted} planted images exceed corpus size {params.n_images}"
        )
    rng = np.random.default_rng(seed)
    v = params.codebook_size

    queries: list[ImageBoW] = []
    for qi in range(params.n_queries):
        n_q = int(rng.integers(params.query_keypoints[0], params.query_keypoints[1] + 1))
        queries.append(_random_image(rng, f"query_{qi:02d}", n_q, params.query_extent, v))

    # role tags parallel to the creation order; ids come after shuffling
    entries: list[ImageBoW] = []
    host_slots: dict[int, list[int]] = {qi: [] for qi in range(params.n_queries)}
    for qi, q in enumerate(queries):
        for p in range(params.hosts_per_query):
            n_b = int(rng.integers(*params.background_keypoints))
            bg = _random_image(rng, "tmp", n_b, params.extent, v)
            kind = params.transform_kinds[p % len(params.transform_kinds)]
            host_slots[qi].append(len(entries))
            entries.append(_plant(q, bg, rng, kind, params.extent))
    for qi in range(params.n_queries):
        for p in range(params.confusers_per_query):
            src = entries[host_slots[qi][p % params.hosts_per_query]]
            entries.append(apply_transform(src, Scatter(seed=int(rng.integers(0, 2**31)))))
    while len(entries) < params.n_images:
        n_b = int(rng.integers(*params.background_keypoints))
        entries.append(_random_image(rng, "tmp", n_b, params.extent, v))

    order = rng.permutation(len(entries))
    corpus: list[ImageBoW] = []
    position: dict[int, int] = {}
    for new_pos, old in enumerate(order):
        img = entries[old]
        corpus.append(ImageBoW(f"img_{new_pos:04d}", img.coords, img.words, img.codebook_size))
        position[int(old)] = new_pos
    gt = {
        q.image_id: {f"img_{position[e]:04d}" for e in host_slots[qi]}
        for qi, q in enumerate(queries)
    }
    return corpus, queries, gt


# -- pathological scenarios ----------------------------------------------


@dataclass
class ScatterScenario:
    query: ImageBoW
    coherent: ImageBoW
    scattered: ImageBoW
    distractors: list[ImageBoW]

    def corpus(self) -> list[ImageBoW]:
        return [self.coherent, self.scattered, *self.distractors]


def scatter_scenario(
    seed: int,
    codebook_size: int = 500,
    n_query: int = 40,
    n_background: int = 120,
    n_distractors: int = 8,
    extent: float = 1000.0,
) -> ScatterScenario:
    """A coherent embedding of the query and a same-word-multiset image
    with randomized coordinates. Their full-image histograms are identical
    by construction, so orderless methods cannot separate them."""
    rng = np.random.default_rng(seed)
    query = _random_image(rng, "query", n_query, 160.0, codebook_size)
    bg = _random_image(rng, "tmp", n_background, extent, codebook_size)
    coherent = _plant(query, bg, rng, "identity", extent)
    coherent = ImageBoW("coherent", coherent.coords, coherent.words, codebook_size)
    scattered = apply_transform(coherent, Scatter(seed=int(rng.integers(0, 2**31))))
    scattered = ImageBoW("scattered", scattered.coords, scattered.words, codebook_size)
    distractors = [
        _random_image(rng, f"dist_{i:02d}", n_background + n_query, extent, codebook_size)
        for i in range(n_distractors)
    ]
    return ScatterScenario(query, coherent, scattered, distractors)


@dataclass
class SmallQueryScenario:
    query: ImageBoW
    true_host: ImageBoW
    outliers: list[ImageBoW]

    def corpus(self) -> list[ImageBoW]:
        return [self.true_host, *self.outliers]


def small_query_scenario(
    seed: int,
    codebook_size: int = 500,
    n_query: int = 30,
    n_host_background: int = 350,
    n_outliers: int = 3,
    n_outlier_background: int = 60,
    extent: float = 1000.0,
    max_attempts: int = 50,
) -> SmallQueryScenario:
    """The query is a small (< 10%) fraction of its true host, while each
    outlier carries the query's exact word multiset diffusely over a much
    lighter background. Generation is certified to defeat plain L2
    bag-of-words ranking (the host must not come first) and errors after
    ``max_attempts`` resamples otherwise."""
    rng = np.random.default_rng(seed)
    query = _random_image(rng, "query", n_query, 100.0, codebook_size)
    bg = _random_image(rng, "tmp", n_host_background, extent, codebook_size)
    host = _plant(query, bg, rng, "identity", extent)
    host = ImageBoW("true_host", host.coords, host.words, codebook_size)
    if n_query / len(host) >= 0.1:
        raise ValueError("query must stay below 10% of the host's keypoints")

    for _ in range(max_attempts):
        outliers = []
        for i in range(n_outliers):
            n_bg = int(rng.integers(n_outlier_background, n_outlier_background + 20))
            extra = _random_image(rng, "tmp", n_bg, extent, codebook_size)
            coords = rng.uniform(0.0, extent, size=(n_query, 2))
            out = ImageBoW(
                f"outlier_{i:02d}",
                np.vstack([coords, extra.coords]),
                np.concatenate([query.words, extra.words]),
                codebook_size,
            )
            outliers.append(out)
        ranking = bow_search(query, [host, *outliers], measure="l2", weighting="none", k=1)
        if ranking[0][0] != "true_host":
            return SmallQueryScenario(query, host, outliers)
    raise RuntimeError(f"small_query_scenario(seed={seed}): could not defeat L2 bag-of-words")


# -- precision reporting --------------------------------------------------


def precision_at_k(ranking: list[str], relevant: set[str], k: int) -> float:
    """|top-k intersect relevant| / k; missing results count as misses."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return sum(1 for iid in ranking[:k] if iid in relevant) / k


BASELINE_METHODS = tuple(
    f"bow-{m}" + ("" if w == "none" else "-tfidf") for m in BOW_MEASURES for w in ("none", "tfidf")
)
ALL_METHODS = ("profile",) + BASELINE_METHODS


@dataclass
class PrecisionReport:
    ks: list[int]
    precisions: dict[str, list[float]]  # method -> mean precision per k

    def best_baseline(self, k: int) -> tuple[str, float]:
        col = self.ks.index(k)
        name = max(BASELINE_METHODS, key=lambda m: self.precisions[m][col])
        return name, self.precisions[name][col]

    def table(self) -> str:
        width = max(len(m) for m in self.precisions) + 2
        header = "method".ljust(width) + "".join(f"k={k}".rjust(8) for k in self.ks)
        lines = [header, "-" * len(header)]
        for method in ALL_METHODS:
            row = method.ljust(width)
            row += "".join(f"{p:8.3f}" for p in self.precisions[method])
            lines.append(row)
        return "\n".join(lines) + "\n"

    def csv_lines(self) -> list[str]:
        out = []
        for method in ALL_METHODS:
            for k, p in zip(self.ks, self.precisions[method]):
                out.append(f"{method},{k},{p:.6f}")
        return out


def run_report(
    corpus: list[ImageBoW],
    queries: list[ImageBoW],
    gt: dict[str, set[str]],
    config: EngineConfig | None = None,
    index: ProfileIndex | None = None,
    ks: range = range(1, 11),
) -> PrecisionReport:
    """Mean precision per method per k over all queries.

    ``index`` may be passed to reuse a prebuilt profile index (its ring
    structure is independent of lambda/measure, which are taken from
    ``config`` at query time).
    """
    config = config or EngineConfig()
    for q in queries:
        if q.image_id not in gt:
            raise ValueError(f"query {q.image_id!r} missing from ground truth")
        if not gt[q.image_id]:
            raise ValueError(f"query {q.image_id!r} has an empty relevant set")
    if index is None:
        index = build_index(corpus, n0=config.n0, similarity=config.similarity())
    max_k = max(ks)
    ks_list = list(ks)
    sums = {m: np.zeros(len(ks_list)) for m in ALL_METHODS}
    for q in queries:
        relevant = gt[q.image_id]
        profile_ids = [r.image_id for r in query_topk_images(q, index, k=max_k, cfg=config.similarity())]
        for j, k in enumerate(ks_list):
            sums["profile"][j] += precision_at_k(profile_ids, relevant, k)
        for measure in BOW_MEASURES:
            for weighting in ("none", "tfidf"):
                name = f"bow-{measure}" + ("" if weighting == "none" else "-tfidf")
                ids = [iid for iid, _ in bow_search(q, corpus, measure, weighting, k=max_k)]
                for j, k in enumerate(ks_list):
                    sums[name][j] += precision_at_k(ids, relevant, k)
    n = len(queries)
    return PrecisionReport(ks=ks_list, precisions={m: [float(s / n) for s in sums[m]] for m in ALL_METHODS})
