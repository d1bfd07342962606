"""Visual codebook construction and descriptor quantization.

The codebook is built by restarted Lloyd's k-means over raw descriptors;
the restart with the smallest scatter (total sum of squared errors) wins.
Everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ImageBoW, KeypointFileError, RawImage

DEFAULT_CODEBOOK_SIZE = 500
DEFAULT_RESTARTS = 10
DEFAULT_MAX_ITER = 100


@dataclass
class Codebook:
    """k cluster centers in descriptor space plus the training scatter."""

    centers: np.ndarray  # (k, dim) float64
    scatter: float
    seed: int | None = None  # seed of the run that produced these centers
    sse_history: tuple[float, ...] = field(default_factory=tuple, repr=False)

    def __post_init__(self) -> None:
        self.centers = np.asarray(self.centers, dtype=np.float64)
        if self.centers.ndim != 2:
            raise ValueError("centers must be a (k, dim) array")
        if self.scatter < 0:
            raise ValueError("scatter must be non-negative")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n, k). Clipped at 0 against rounding."""
    p2 = np.einsum("ij,ij->i", points, points)
    c2 = np.einsum("ij,ij->i", centers, centers)
    d2 = p2[:, None] + c2[None, :] - 2.0 * points @ centers.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise ValueError("points must form a (n, dim) array")
    return pts


def kmeans_once(points, k: int, max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> Codebook:
    """One seeded Lloyd's run.

    Initial centers are k distinct input points sampled uniformly without
    replacement. Iterates until assignments stop changing or max_iter is
    reached. A cluster that loses all members is re-seeded with the point
    farthest from its current center (earlier repairs in the same pass
    exclude their chosen points). Assignment ties go to the lowest center
    index.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    if k == 0:
        raise ValueError("k must be at least 1")
    if n < k:
        raise ValueError(f"insufficient points: {n} < k={k}")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    rng = np.random.default_rng(seed)
    centers = pts[rng.choice(n, size=k, replace=False)].copy()

    def measure(assign_to: np.ndarray) -> tuple[np.ndarray, float]:
        assign = np.argmin(_sq_distances(pts, assign_to), axis=1)
        # SSE from actual differences: exact for coincident point/center
        diff = pts - assign_to[assign]
        return assign, float((diff * diff).sum())

    prev_assign: np.ndarray | None = None
    history: list[float] = []
    converged = False
    for _ in range(max_iter):
        assign, sse = measure(centers)
        if history:
            # Lloyd's iterations cannot increase the SSE (tiny fp slack).
            assert sse <= history[-1] * (1 + 1e-12) + 1e-9, "SSE increased"
        history.append(sse)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            converged = True
            break
        prev_assign = assign
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, pts)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            taken: list[int] = []
            for c in np.flatnonzero(~nonempty):
                far = _sq_distances(pts, centers[c : c + 1])[:, 0]
                if taken:
                    far[taken] = -1.0
                pick = int(np.argmax(far))  # first max: lowest index on ties
                taken.append(pick)
                centers[c] = pts[pick]

    if not converged:
        # max_iter exhausted after a center update: measure the final state so
        # the returned scatter matches the returned centers.
        _, sse = measure(centers)
        history.append(sse)

    return Codebook(centers=centers, scatter=history[-1], seed=seed, sse_history=tuple(history))


def build_codebook(
    points,
    k: int = DEFAULT_CODEBOOK_SIZE,
    restarts: int = DEFAULT_RESTARTS,
    max_iter: int = DEFAULT_MAX_ITER,
    base_seed: int = 0,
) -> Codebook:
    """Run kmeans_once with seeds base_seed..base_seed+restarts-1 and keep
    the result with minimum scatter (ties: lowest seed)."""
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    best: Codebook | None = None
    for s in range(base_seed, base_seed + restarts):
        cand = kmeans_once(points, k, max_iter=max_iter, seed=s)
        if best is None or cand.scatter < best.scatter:
            best = cand
    assert best is not None
    return best


def assign_word(d, cb: Codebook) -> int:
    """Index of the nearest center (Euclidean; ties to the lowest index)."""
    vec = np.asarray(d, dtype=np.float64).reshape(-1)
    if vec.shape[0] != cb.dim:
        raise ValueError(f"descriptor dimension {vec.shape[0]} != codebook dimension {cb.dim}")
    d2 = np.einsum("ij,ij->i", cb.centers - vec, cb.centers - vec)
    return int(np.argmin(d2))


def assign_words(descriptors: np.ndarray, cb: Codebook) -> np.ndarray:
    """Vectorized assign_word over a (n, dim) block."""
    pts = np.asarray(descriptors, dtype=np.float64)
    if pts.shape[1] != cb.dim:
        raise ValueError(f"descriptor dimension {pts.shape[1]} != codebook dimension {cb.dim}")
    return np.argmin(_sq_distances(pts, cb.centers), axis=1).astype(np.int64)


def quantize_image(raw: RawImage, cb: Codebook) -> ImageBoW:
    """Replace descriptor payloads by their visual words; coordinates and
    order are untouched."""
    if len(raw) == 0:
        words = np.zeros(0, dtype=np.int64)
    else:
        words = np.array([assign_word(raw.descriptors[i], cb) for i in range(len(raw))], dtype=np.int64)
    return ImageBoW(raw.image_id, raw.coords.copy(), words, codebook_size=cb.k)


def dump_codebook(cb: Codebook) -> str:
    lines = [f"PCB v1 {cb.k} {cb.dim}"]
    for row in cb.centers:
        lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(f"scatter {repr(float(cb.scatter))}")
    return "\n".join(lines) + "\n"


def save_codebook(cb: Codebook, path: str | Path) -> None:
    Path(path).write_text(dump_codebook(cb), encoding="utf-8")


def load_codebook(path: str | Path) -> Codebook:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise KeypointFileError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "PCB" or head[1] != "v1":
        raise KeypointFileError(f"{path}: bad header {lines[0]!r}")
    try:
        k, dim = int(head[2]), int(head[3])
    except ValueError:
        raise KeypointFileError(f"{path}: bad header {lines[0]!r}") from None
    if len(lines) < k + 2:
        raise KeypointFileError(f"{path}: expected {k} center lines plus scatter")
    centers = np.zeros((k, dim), dtype=np.float64)
    for i in range(k):
        parts = lines[1 + i].split()
        if len(parts) != dim:
            raise KeypointFileError(f"{path}: line {i + 2}: expected {dim} values, got {len(parts)}")
        centers[i] = [float(t) for t in parts]
    tail = lines[1 + k].split()
    if len(tail) != 2 or tail[0] != "scatter":
        raise KeypointFileError(f"{path}: line {k + 2}: expected 'scatter <value>'")
    return Codebook(centers=centers, scatter=float(tail[1]))
