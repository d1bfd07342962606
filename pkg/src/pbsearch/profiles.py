"""Per-keypoint ring-histogram profiles.

A keypoint's profile partitions all *other* keypoints of its image into
concentric rings by ascending distance from the keypoint and summarizes
each ring as a visual-word histogram. Ring populations double outward:
the innermost ring holds n0 keypoints, the next 2*n0, and so on, the last
ring taking whatever remains. Because rings are defined by counts rather
than radii, the construction is invariant to uniform scaling, rotation,
and translation of the coordinates (for keypoints in generic position,
i.e. no exact distance ties).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .model import ImageBoW

DEFAULT_N0 = 50

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RingHistogram:
    """Word counts of the keypoints falling in one ring."""

    counts: dict[int, int]  # word -> positive count
    size: int  # number of keypoints summarized == sum(counts.values())


@dataclass(frozen=True)
class Profile:
    """Ordered ring histograms around one keypoint, innermost first."""

    image_id: str
    center_index: int
    rings: tuple[RingHistogram, ...]
    n0: int


def ring_sizes(n_other: int, n0: int) -> list[int]:
    """Ring populations for n_other surrounding keypoints.

    [n0, 2*n0, 4*n0, ...] truncated so the last entry is the positive
    remainder; empty iff n_other == 0. Entries always sum to n_other.
    """
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    if n_other < 0:
        raise ValueError("n_other must be non-negative")
    sizes: list[int] = []
    remaining, size = n_other, n0
    while remaining > 0:
        take = min(size, remaining)
        sizes.append(take)
        remaining -= take
        size *= 2
    return sizes


def neighbor_order(coords: np.ndarray, center: int) -> np.ndarray:
    """Indices of all keypoints except ``center``, sorted by ascending
    squared distance from it; ties broken by angle in [0, 2pi) measured
    counterclockwise from the positive x-axis, then by keypoint index."""
    dx = coords[:, 0] - coords[center, 0]
    dy = coords[:, 1] - coords[center, 1]
    d2 = dx * dx + dy * dy
    ang = np.mod(np.arctan2(dy, dx), _TWO_PI)
    others = np.concatenate([np.arange(center), np.arange(center + 1, coords.shape[0])])
    order = np.lexsort((others, ang[others], d2[others]))
    return others[order]


def build_profile(image: ImageBoW, center_index: int, n0: int = DEFAULT_N0) -> Profile:
    """Profile of one keypoint. The center's own word is excluded."""
    n = len(image)
    if n < 2:
        raise ValueError(f"image {image.image_id!r}: profile undefined for fewer than 2 keypoints")
    if not 0 <= center_index < n:
        raise ValueError(f"center index {center_index} out of range")
    order = neighbor_order(image.coords, center_index)
    ordered_words = image.words[order]
    rings: list[RingHistogram] = []
    start = 0
    for size in ring_sizes(n - 1, n0):
        chunk = ordered_words[start : start + size]
        rings.append(RingHistogram(counts=dict(Counter(int(w) for w in chunk)), size=size))
        start += size
    return Profile(image.image_id, center_index, tuple(rings), n0)


def build_all_profiles(image: ImageBoW, n0: int = DEFAULT_N0) -> list[Profile]:
    """One profile per keypoint, in keypoint order. All profiles of an
    image share the same ring count."""
    data = image_profile_data(image, n0)
    return [data.profile(c) for c in range(data.n)]


@dataclass
class ImageProfileData:
    """All profiles of one image in flat-array form.

    Ring (center c, level l) occupies ring_words/ring_counts slice
    [ring_offsets[c*m + l], ring_offsets[c*m + l + 1]); words are unique
    and ascending within a ring. This is the representation the search
    index scores against; ``profile`` materializes the dict-based view.
    """

    image_id: str
    n: int
    n0: int
    ring_plan: list[int]  # shared by all profiles; sums to n-1
    ring_words: np.ndarray  # int32
    ring_counts: np.ndarray  # int32
    ring_offsets: np.ndarray  # int64, length n*m + 1

    @property
    def m(self) -> int:
        return len(self.ring_plan)

    def ring(self, center: int, level: int) -> tuple[np.ndarray, np.ndarray]:
        """(words, counts) of ring ``level`` (0-based) of ``center``."""
        i = center * self.m + level
        s, e = self.ring_offsets[i], self.ring_offsets[i + 1]
        return self.ring_words[s:e], self.ring_counts[s:e]

    def profile(self, center: int) -> Profile:
        rings = []
        for level, size in enumerate(self.ring_plan):
            words, counts = self.ring(center, level)
            rings.append(
                RingHistogram(counts={int(w): int(c) for w, c in zip(words, counts)}, size=size)
            )
        return Profile(self.image_id, center, tuple(rings), self.n0)


def image_profile_data(image: ImageBoW, n0: int = DEFAULT_N0) -> ImageProfileData:
    n = len(image)
    if n < 2:
        raise ValueError(f"image {image.image_id!r}: profile undefined for fewer than 2 keypoints")
    plan = ring_sizes(n - 1, n0)
    m = len(plan)
    bounds = np.concatenate([[0], np.cumsum(plan)])
    words_parts: list[np.ndarray] = []
    counts_parts: list[np.ndarray] = []
    offsets = np.zeros(n * m + 1, dtype=np.int64)
    pos = 0
    for c in range(n):
        ordered = image.words[neighbor_order(image.coords, c)]
        for level in range(m):
            uw, uc = np.unique(ordered[bounds[level] : bounds[level + 1]], return_counts=True)
            words_parts.append(uw)
            counts_parts.append(uc)
            pos += uw.shape[0]
            offsets[c * m + level + 1] = pos
    return ImageProfileData(
        image_id=image.image_id,
        n=n,
        n0=n0,
        ring_plan=plan,
        ring_words=np.concatenate(words_parts).astype(np.int32) if words_parts else np.zeros(0, np.int32),
        ring_counts=np.concatenate(counts_parts).astype(np.int32) if counts_parts else np.zeros(0, np.int32),
        ring_offsets=offsets,
    )
