"""Ring-histogram similarity measures and decayed profile similarity.

Two profiles are compared ring by ring over their common prefix of
min(m, n) rings. Ring k (1-based) contributes with weight e^(-lambda*(k-1)),
so the innermost ring carries weight 1 and each step outward decays the
contribution by e^(-lambda):

    sim(A, B)  = sum_k e^(-lambda*(k-1)) * S_k
    sim_max    = sum_k e^(-lambda*(k-1))            (every S_k == 1)
    dist(A, B) = sim_max - sim(A, B)
               = sum_k e^(-lambda*(k-1)) * (1 - S_k)

S_k is the configured per-ring measure in [0, 1]. The distance prefix
D_l (first l rings of the direct sum) is non-decreasing in l, which makes
the ring-by-ring recurrence safe to abandon early once a threshold is
exceeded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .profiles import Profile, RingHistogram

DEFAULT_LAMBDA = 1.0 / 3.0

MEASURES = ("jaccard", "cosine")


@dataclass(frozen=True)
class SimilarityConfig:
    lam: float = DEFAULT_LAMBDA  # decay; must be positive
    measure: str = "jaccard"

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")


class Exceeded:
    """Sentinel: a bounded distance computation crossed its threshold."""

    _instance: "Exceeded | None" = None

    def __new__(cls) -> "Exceeded":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EXCEEDED"


EXCEEDED = Exceeded()


def ring_weights(count: int, lam: float) -> list[float]:
    """[e^0, e^(-lam), e^(-2*lam), ...] of the given length."""
    return [math.exp(-lam * k) for k in range(count)]


def jaccard_similarity(h1: RingHistogram, h2: RingHistogram) -> float:
    """Generalized (multiset) Jaccard: sum_w min / sum_w max.

    Both histograms empty -> 1 (identical); exactly one empty -> 0.
    Equals 1 iff the histograms are identical as multisets.
    """
    if h1.size == 0 and h2.size == 0:
        return 1.0
    if h1.size == 0 or h2.size == 0:
        return 0.0
    a, b = h1.counts, h2.counts
    if len(b) < len(a):
        a, b = b, a
    common = 0
    for w, c in a.items():
        other = b.get(w)
        if other is not None:
            common += c if c < other else other
    # sum(max) == size1 + size2 - sum(min), all exact integers
    return common / (h1.size + h2.size - common)


def cosine_similarity(h1: RingHistogram, h2: RingHistogram) -> float:
    """Cosine over raw counts; 0 if either histogram is empty."""
    if h1.size == 0 or h2.size == 0:
        return 0.0
    a, b = h1.counts, h2.counts
    if len(b) < len(a):
        a, b = b, a
    dot = 0
    for w, c in a.items():
        other = b.get(w)
        if other is not None:
            dot += c * other
    ss1 = sum(c * c for c in h1.counts.values())
    ss2 = sum(c * c for c in h2.counts.values())
    # dot and the squared norms are exact integers; sqrt of their product
    # keeps the result <= 1 and exactly 1 for identical histograms.
    return dot / math.sqrt(ss1 * ss2)


_MEASURE_FNS = {"jaccard": jaccard_similarity, "cosine": cosine_similarity}


def _check_compatible(h1: Profile, h2: Profile) -> None:
    if h1.n0 != h2.n0:
        raise ValueError(f"profile n0 mismatch: {h1.n0} != {h2.n0}")


def profile_similarity(h1: Profile, h2: Profile, cfg: SimilarityConfig) -> float:
    """Decayed sum of per-ring similarities over the common ring prefix.

    Extra rings of the longer profile are ignored. Result lies in
    [0, sim_max(m, n, lambda)] and is symmetric in its arguments.
    """
    _check_compatible(h1, h2)
    measure = _MEASURE_FNS[cfg.measure]
    k = min(len(h1.rings), len(h2.rings))
    weights = ring_weights(k, cfg.lam)
    sim = 0.0
    for i in range(k):
        sim += weights[i] * measure(h1.rings[i], h2.rings[i])
    return sim


def sim_max(m: int, n: int, lam: float) -> float:
    """Maximum attainable profile similarity for ring counts m and n:
    the geometric partial sum over min(m, n) rings."""
    if m < 1 or n < 1:
        raise ValueError("ring counts must be at least 1")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    total = 0.0
    for w in ring_weights(min(m, n), lam):
        total += w
    return total


def profile_distance(h1: Profile, h2: Profile, cfg: SimilarityConfig) -> float:
    """Complement of the similarity: sim_max - sim. Zero iff every common
    ring scores 1 under the configured measure."""
    _check_compatible(h1, h2)
    return sim_max(len(h1.rings), len(h2.rings), cfg.lam) - profile_similarity(h1, h2, cfg)


def bounded_distance(
    h1: Profile, h2: Profile, cfg: SimilarityConfig, threshold: float
) -> float | Exceeded:
    """Ring-by-ring distance with early abandoning.

    Evaluates the direct sum D = sum_k w_k * (1 - S_k) incrementally and
    returns EXCEEDED as soon as the running prefix exceeds ``threshold``
    (sound: every remaining term is non-negative). Otherwise returns the
    full distance.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    _check_compatible(h1, h2)
    measure = _MEASURE_FNS[cfg.measure]
    k = min(len(h1.rings), len(h2.rings))
    weights = ring_weights(k, cfg.lam)
    dist = 0.0
    for i in range(k):
        dist += weights[i] * (1.0 - measure(h1.rings[i], h2.rings[i]))
        if dist > threshold:
            return EXCEEDED
    return dist
