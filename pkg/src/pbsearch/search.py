"""Sub-image search over a corpus of keypoint profiles, plus orderless
bag-of-words baselines.

A corpus is indexed as the flat collection of every keypoint's profile.
A query image is likewise turned into profiles, every (query profile,
database profile) pair is scored with the decayed ring similarity, and
images are ranked by their best-scoring pair.

Three scoring strategies produce identical output (same scores, same tie
handling, verified in tests):

  vectorized     level-synchronous scoring through per-ring inverted word
                 lists (the default; fast enough for thousand-image runs)
  early_abandon  pair-at-a-time with ring-by-ring early abandoning against
                 the running k-th best image score
  naive          pair-at-a-time exhaustive reference
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .model import ImageBoW, KeypointFileError
from .profiles import DEFAULT_N0, ImageProfileData, Profile, image_profile_data, ring_sizes
from .similarity import SimilarityConfig, ring_weights, _MEASURE_FNS

QueryMethod = ("vectorized", "early_abandon", "naive")


@dataclass(frozen=True)
class MatchResult:
    """One ranked image with the profile pair that produced its score."""

    image_id: str
    query_center_index: int
    db_center_index: int
    score: float


class ProfileIndex:
    """Immutable searchable collection of all profiles of a corpus.

    ``coords``/``words`` snapshots of the indexed keypoints are kept when
    available (always for built indexes; for loaded ones only if the
    keypoint sidecar file was present) so that match centers can be
    reported; scoring itself never needs them.
    """

    def __init__(
        self,
        data: list[ImageProfileData],
        n0: int,
        codebook_size: int,
        similarity: SimilarityConfig | None = None,
        coords: list[np.ndarray] | None = None,
        words: list[np.ndarray] | None = None,
    ):
        self.data = data
        self.n0 = n0
        self.codebook_size = codebook_size
        self.similarity = similarity or SimilarityConfig()
        self.coords = coords
        self.words = words
        self.image_ids = [d.image_id for d in data]
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValueError("duplicate image ids in index")
        self._id_to_idx = {iid: i for i, iid in enumerate(self.image_ids)}
        counts = [d.n for d in data]
        self.prof_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._scorer: _Scorer | None = None

    @property
    def n_images(self) -> int:
        return len(self.data)

    @property
    def n_profiles(self) -> int:
        return int(self.prof_start[-1])

    def image_index(self, image_id: str) -> int:
        if image_id not in self._id_to_idx:
            raise KeyError(f"unknown image {image_id!r}")
        return self._id_to_idx[image_id]

    def profile(self, image: int | str, center: int) -> Profile:
        i = image if isinstance(image, int) else self.image_index(image)
        return self.data[i].profile(center)

    def entries(self):
        """Yield (image_id, center_index, Profile) for every indexed keypoint."""
        for d in self.data:
            for c in range(d.n):
                yield d.image_id, c, d.profile(c)

    def center_coords(self, image_id: str, center: int) -> tuple[float, float]:
        if self.coords is None:
            raise ValueError("index has no keypoint coordinates (sidecar not loaded)")
        xy = self.coords[self.image_index(image_id)][center]
        return float(xy[0]), float(xy[1])

    def scorer(self) -> "_Scorer":
        if self._scorer is None:
            self._scorer = _Scorer(self)
        return self._scorer

    # -- serialization -------------------------------------------------

    def dump(self) -> str:
        lines = [f"PIDX v1 {self.n0} {self.codebook_size}"]
        for d in self.data:
            lines.append(f"image {d.image_id} {d.n} {d.m}")
            for c in range(d.n):
                lines.append(f"profile {c}")
                for level, size in enumerate(d.ring_plan):
                    w, cnt = d.ring(c, level)
                    pairs = " ".join(f"{int(a)}:{int(b)}" for a, b in zip(w, cnt))
                    lines.append(f"ring {size} {pairs}".rstrip())
        return "\n".join(lines) + "\n"

    def dump_keypoints(self) -> str:
        if self.coords is None or self.words is None:
            raise ValueError("index has no keypoint snapshot")
        lines = [f"PIDXKP v1 {self.n_images}"]
        for i, d in enumerate(self.data):
            lines.append(f"image {d.image_id} {d.n}")
            for c in range(d.n):
                x, y = self.coords[i][c]
                lines.append(f"{repr(float(x))} {repr(float(y))} {int(self.words[i][c])}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        """Write the PIDX file plus a ``<path>.kp`` keypoint sidecar."""
        path = Path(path)
        path.write_text(self.dump(), encoding="utf-8")
        if self.coords is not None:
            Path(str(path) + ".kp").write_text(self.dump_keypoints(), encoding="utf-8")


def build_index(
    images: list[ImageBoW],
    n0: int = DEFAULT_N0,
    similarity: SimilarityConfig | None = None,
    codebook_size: int | None = None,
) -> ProfileIndex:
    """Build the profile index of a corpus.

    Every image needs at least 2 keypoints and all images must share one
    codebook size. Entry order is deterministic: image order, then center
    index.
    """
    if codebook_size is None and images:
        codebook_size = images[0].codebook_size
    data: list[ImageProfileData] = []
    for img in images:
        if len(img) < 2:
            raise ValueError(f"image {img.image_id!r} has fewer than 2 keypoints; cannot index")
        if img.codebook_size != codebook_size:
            raise ValueError(
                f"image {img.image_id!r} codebook size {img.codebook_size} != corpus {codebook_size}"
            )
        data.append(image_profile_data(img, n0))
    return ProfileIndex(
        data,
        n0=n0,
        codebook_size=int(codebook_size or 0),
        similarity=similarity,
        coords=[img.coords.copy() for img in images],
        words=[img.words.copy() for img in images],
    )


class _Scorer:
    """Per-ring-level sparse word matrices over all indexed profiles.

    Jaccard needs per-ring sums of minima; with integer counts,
    min(a, b) == sum over thresholds t >= 1 of [a >= t][b >= t], so the
    overlap of one query ring against every database ring at a level is a
    short sum of 0/1 sparse matrix products. Every accumulated quantity is
    an exact integer in float64, which keeps the vectorized scores
    bit-identical to the scalar dict-based path.
    """

    def __init__(self, index: ProfileIndex):
        self.index = index
        v = index.codebook_size
        self.levels: list[dict | None] = []
        max_m = max((d.m for d in index.data), default=0)
        for level in range(max_m):
            prof_ids: list[np.ndarray] = []
            sizes: list[np.ndarray] = []
            ss: list[np.ndarray] = []
            words: list[np.ndarray] = []
            counts: list[np.ndarray] = []
            rows: list[np.ndarray] = []
            base = 0
            for i, d in enumerate(index.data):
                if d.m <= level:
                    continue
                start = int(index.prof_start[i])
                prof_ids.append(np.arange(start, start + d.n, dtype=np.int64))
                sizes.append(np.full(d.n, d.ring_plan[level], dtype=np.float64))
                ring_idx = np.arange(d.n, dtype=np.int64) * d.m + level
                s_off = d.ring_offsets[ring_idx]
                e_off = d.ring_offsets[ring_idx + 1]
                lengths = (e_off - s_off).astype(np.int64)
                # per-ring sum of squared counts; rings are never empty
                sq = np.append(d.ring_counts.astype(np.int64) ** 2, np.int64(0))
                pair_idx = np.column_stack([s_off, e_off]).ravel()
                ss.append(np.add.reduceat(sq, pair_idx)[::2].astype(np.float64))
                words.append(np.concatenate([d.ring_words[a:b] for a, b in zip(s_off, e_off)]))
                counts.append(np.concatenate([d.ring_counts[a:b] for a, b in zip(s_off, e_off)]))
                rows.append(np.repeat(np.arange(base, base + d.n, dtype=np.int64), lengths))
                base += d.n
            if not prof_ids:
                self.levels.append(None)
                continue
            lw = np.concatenate(words).astype(np.int64)
            lc = np.concatenate(counts).astype(np.int64)
            lr = np.concatenate(rows)
            n_rows = base
            thresholds = []
            t = 1
            while True:
                mask = lc >= t
                if not mask.any():
                    break
                thresholds.append(
                    sparse.csr_matrix(
                        (np.ones(int(mask.sum())), (lr[mask], lw[mask])), shape=(n_rows, v)
                    )
                )
                t += 1
            count_mat = sparse.csr_matrix((lc.astype(np.float64), (lr, lw)), shape=(n_rows, v))
            prof = np.concatenate(prof_ids)
            self.levels.append(
                {
                    "prof": prof,
                    "full": prof.shape[0] == index.n_profiles,
                    "size": np.concatenate(sizes),
                    "ss": np.concatenate(ss),
                    "thresholds": thresholds,
                    "count_mat": count_mat,
                }
            )

    @staticmethod
    def _query_level_matrices(qdata: ImageProfileData, level: int, v: int):
        """Per-level query-side matrices: count matrix (V x n_q), threshold
        indicator matrices, and per-center ring sums of squared counts."""
        m = qdata.m
        ring_idx = np.arange(qdata.n, dtype=np.int64) * m + level
        s_off = qdata.ring_offsets[ring_idx]
        e_off = qdata.ring_offsets[ring_idx + 1]
        lengths = (e_off - s_off).astype(np.int64)
        words = np.concatenate([qdata.ring_words[a:b] for a, b in zip(s_off, e_off)]).astype(np.int64)
        counts = np.concatenate([qdata.ring_counts[a:b] for a, b in zip(s_off, e_off)]).astype(np.int64)
        cols = np.repeat(np.arange(qdata.n, dtype=np.int64), lengths)
        count_mat = sparse.csc_matrix((counts.astype(np.float64), (words, cols)), shape=(v, qdata.n))
        thresholds = []
        t = 1
        while True:
            mask = counts >= t
            if not mask.any():
                break
            thresholds.append(
                sparse.csc_matrix(
                    (np.ones(int(mask.sum())), (words[mask], cols[mask])), shape=(v, qdata.n)
                )
            )
            t += 1
        local_starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        sq = np.append(counts**2, np.int64(0))
        pair_idx = np.column_stack([local_starts, local_starts + lengths]).ravel()
        ss = np.add.reduceat(sq, pair_idx)[::2].astype(np.float64)
        return {"count_mat": count_mat, "thresholds": thresholds, "ss": ss}

    def score_chunk(self, qdata: ImageProfileData, start: int, stop: int,
                    measure: str, weight_rows: list[list[float]], qlevels: list) -> list[np.ndarray]:
        """Similarities of query profiles [start, stop) against every indexed
        profile, one (n_profiles, stop - start) array per weight row.

        Ring similarities are computed once; the rows differ only in their
        decay weights (e.g. a lambda sweep).
        """
        n_prof = self.index.n_profiles
        nc = stop - start
        scores = [np.zeros((n_prof, nc), dtype=np.float64) for _ in weight_rows]
        jaccard = measure == "jaccard"
        depth = min(qdata.m, len(self.levels))
        for level in range(depth):
            lv = self.levels[level]
            if lv is None:
                break
            ql = qlevels[level]
            q_size = float(qdata.ring_plan[level])
            if jaccard:
                acc = None
                for t, a_t in enumerate(lv["thresholds"]):
                    if t >= len(ql["thresholds"]):
                        break
                    part = a_t @ ql["thresholds"][t][:, start:stop]
                    if acc is None:
                        acc = part.toarray()
                    else:
                        # counts above 1 are rare; scatter-add the few overlaps
                        part = part.tocoo()
                        acc[part.row, part.col] += part.data
                if acc is None:
                    acc = np.zeros((lv["size"].shape[0], nc), dtype=np.float64)
                denom = (q_size + lv["size"][:, None]) - acc
                s_level = np.divide(acc, denom, out=acc)
            else:
                dot = (lv["count_mat"] @ ql["count_mat"][:, start:stop]).toarray()
                dot /= np.sqrt(ql["ss"][start:stop][None, :] * lv["ss"][:, None])
                s_level = dot
            for row, out in zip(weight_rows, scores):
                weighted = s_level * row[level]
                if lv["full"]:
                    out += weighted
                else:
                    out[lv["prof"], :] += weighted
        return scores


def _validate_query(query: ImageBoW, index: ProfileIndex) -> None:
    if index.n_images == 0:
        raise ValueError("empty index")
    if len(query) < 2:
        raise ValueError("query needs at least 2 keypoints")
    if query.codebook_size != index.codebook_size:
        raise ValueError(
            f"incompatible codebook size: query {query.codebook_size}, index {index.codebook_size}"
        )


def _rank(best: dict[int, tuple[float, int, int]], index: ProfileIndex, k: int) -> list[MatchResult]:
    order = sorted(best.items(), key=lambda kv: (-kv[1][0], index.image_ids[kv[0]]))
    return [
        MatchResult(
            image_id=index.image_ids[i],
            query_center_index=q,
            db_center_index=c,
            score=s,
        )
        for i, (s, c, q) in order[:k]
    ]


_CHUNK = 96


def _topk_vectorized_multi(
    query: ImageBoW, index: ProfileIndex, k: int, cfgs: list[SimilarityConfig]
) -> list[list[MatchResult]]:
    measure = cfgs[0].measure
    if any(c.measure != measure for c in cfgs):
        raise ValueError("batched configs must share one measure")
    qdata = image_profile_data(query, index.n0)
    scorer = index.scorer()
    n_levels = min(qdata.m, len(scorer.levels))
    qlevels = [
        scorer._query_level_matrices(qdata, level, index.codebook_size)
        for level in range(n_levels)
    ]
    weight_rows = [ring_weights(n_levels, c.lam) for c in cfgs]
    n_prof = index.n_profiles
    best_score = [np.full(n_prof, -1.0, dtype=np.float64) for _ in cfgs]
    best_q = [np.full(n_prof, -1, dtype=np.int64) for _ in cfgs]
    # balanced chunks over query centers (chunking does not affect results)
    per_chunk = max(16, _CHUNK // len(cfgs))
    n_chunks = max(1, -(-qdata.n // per_chunk))
    step = -(-qdata.n // n_chunks)
    for start in range(0, qdata.n, step):
        stop = min(start + step, qdata.n)
        chunks = scorer.score_chunk(qdata, start, stop, measure, weight_rows, qlevels)
        for ci, chunk in enumerate(chunks):
            cb = chunk.max(axis=1)
            ca = chunk.argmax(axis=1)  # first max: lowest query center in the chunk
            better = cb > best_score[ci]
            best_score[ci][better] = cb[better]
            best_q[ci][better] = start + ca[better]
    out: list[list[MatchResult]] = []
    for ci in range(len(cfgs)):
        best: dict[int, tuple[float, int, int]] = {}
        for i in range(index.n_images):
            a, b = int(index.prof_start[i]), int(index.prof_start[i + 1])
            seg = best_score[ci][a:b]
            c = int(np.argmax(seg))  # first max: lowest center index on ties
            best[i] = (float(seg[c]), c, int(best_q[ci][a + c]))
        out.append(_rank(best, index, k))
    return out


def _topk_vectorized(query: ImageBoW, index: ProfileIndex, k: int, cfg: SimilarityConfig) -> list[MatchResult]:
    return _topk_vectorized_multi(query, index, k, [cfg])[0]


def _topk_scalar(
    query: ImageBoW, index: ProfileIndex, k: int, cfg: SimilarityConfig, prune: bool
) -> list[MatchResult]:
    qdata = image_profile_data(query, index.n0)
    query_profiles = [qdata.profile(j) for j in range(qdata.n)]
    measure = _MEASURE_FNS[cfg.measure]
    wcache: dict[int, list[float]] = {}

    def weights(count: int) -> list[float]:
        if count not in wcache:
            wcache[count] = ring_weights(count, cfg.lam)
        return wcache[count]

    best: dict[int, tuple[float, int, int]] = {}
    s_star: float | None = None  # running k-th best image score; pruning bound
    for i, d in enumerate(index.data):
        for c in range(d.n):
            p = d.profile(c)
            for j, q in enumerate(query_profiles):
                depth = min(len(q.rings), len(p.rings))
                w = weights(depth)
                sim = 0.0
                pruned = False
                for t in range(depth):
                    sim += w[t] * measure(q.rings[t], p.rings[t])
                    if prune and s_star is not None and t + 1 < depth:
                        ub = sim
                        for r in range(t + 1, depth):
                            ub += w[r]
                        if ub < s_star:
                            pruned = True
                            break
                if pruned:
                    continue
                cur = best.get(i)
                if cur is None or sim > cur[0] or (sim == cur[0] and (c, j) < (cur[1], cur[2])):
                    best[i] = (sim, c, j)
        if prune and len(best) >= k:
            s_star = sorted((v[0] for v in best.values()), reverse=True)[k - 1]
    return _rank(best, index, k)


def query_topk_images(
    query: ImageBoW,
    index: ProfileIndex,
    k: int = 10,
    method: str = "vectorized",
    cfg: SimilarityConfig | None = None,
) -> list[MatchResult]:
    """Top-k images by best profile-pair similarity.

    Each image's score is the maximum over all (query profile, image
    profile) pairs; images are ordered by descending score with ties by
    ascending image_id, and each result carries the maximizing pair
    (ties inside an image: lowest db center, then lowest query center).
    All methods return identical results; ``early_abandon`` prunes pairs
    whose similarity provably cannot reach the running k-th best score.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if method not in QueryMethod:
        raise ValueError(f"unknown method {method!r}")
    _validate_query(query, index)
    cfg = cfg or index.similarity
    if method == "vectorized":
        return _topk_vectorized(query, index, k, cfg)
    return _topk_scalar(query, index, k, cfg, prune=(method == "early_abandon"))


def query_topk_multi(
    query: ImageBoW,
    index: ProfileIndex,
    cfgs: list[SimilarityConfig],
    k: int = 10,
) -> list[list[MatchResult]]:
    """query_topk_images for several configs sharing one measure in a single
    pass (per-ring similarities do not depend on the decay, so e.g. a lambda
    sweep only recombines them). Element i equals
    query_topk_images(query, index, k, cfg=cfgs[i])."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not cfgs:
        raise ValueError("need at least one config")
    _validate_query(query, index)
    return _topk_vectorized_multi(query, index, k, list(cfgs))


def query_best_pair(
    query: ImageBoW,
    index: ProfileIndex,
    method: str = "vectorized",
    cfg: SimilarityConfig | None = None,
) -> MatchResult:
    """The globally best (query profile, database profile) pair; ties by
    ascending (image_id, db_center_index, query_center_index)."""
    return query_topk_images(query, index, k=1, method=method, cfg=cfg)[0]


# -- keypoint sidecar / index files -----------------------------------


def load_index(path: str | Path, similarity: SimilarityConfig | None = None) -> ProfileIndex:
    """Parse a PIDX file; attaches the ``<path>.kp`` keypoint sidecar when
    present (needed only to report match-center coordinates)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise KeypointFileError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "PIDX" or head[1] != "v1":
        raise KeypointFileError(f"{path}: line 1: bad header {lines[0]!r}")
    try:
        n0, codebook_size = int(head[2]), int(head[3])
    except ValueError:
        raise KeypointFileError(f"{path}: line 1: bad header {lines[0]!r}") from None

    data: list[ImageProfileData] = []
    ln = 1  # 0-based index of the next line to consume

    def fail(lineno: int, msg: str):
        raise KeypointFileError(f"{path}: line {lineno + 1}: {msg}")

    while ln < len(lines):
        if not lines[ln].strip():
            ln += 1
            continue
        parts = lines[ln].split()
        if parts[0] != "image" or len(parts) != 4:
            fail(ln, f"expected 'image <id> <count> <rings>', got {lines[ln]!r}")
        image_id = parts[1]
        try:
            n, m = int(parts[2]), int(parts[3])
        except ValueError:
            fail(ln, "non-numeric image header")
        ln += 1
        if n < 2:
            fail(ln - 1, f"image {image_id!r} has {n} keypoints; a valid index needs at least 2")
        plan = ring_sizes(n - 1, n0)
        if len(plan) != m:
            fail(ln - 1, f"ring count {m} inconsistent with {n} keypoints and n0={n0}")
        words_parts: list[np.ndarray] = []
        counts_parts: list[np.ndarray] = []
        offsets = np.zeros(n * m + 1, dtype=np.int64)
        pos = 0
        for c in range(n):
            if ln >= len(lines) or lines[ln].split() != ["profile", str(c)]:
                fail(min(ln, len(lines) - 1), f"expected 'profile {c}'")
            ln += 1
            for level in range(m):
                if ln >= len(lines):
                    fail(len(lines) - 1, "truncated ring data")
                rp = lines[ln].split()
                if not rp or rp[0] != "ring" or len(rp) < 2:
                    fail(ln, f"expected ring line, got {lines[ln]!r}")
                try:
                    size = int(rp[1])
                    ws, cs = [], []
                    for tok in rp[2:]:
                        a, b = tok.split(":")
                        ws.append(int(a))
                        cs.append(int(b))
                except ValueError:
                    fail(ln, f"malformed ring line {lines[ln]!r}")
                if size != plan[level]:
                    fail(ln, f"ring size {size} inconsistent with plan {plan}")
                if sum(cs) != size:
                    fail(ln, f"ring counts sum {sum(cs)} != size {size}")
                words_parts.append(np.asarray(ws, dtype=np.int32))
                counts_parts.append(np.asarray(cs, dtype=np.int32))
                pos += len(ws)
                offsets[c * m + level + 1] = pos
                ln += 1
        data.append(
            ImageProfileData(
                image_id=image_id,
                n=n,
                n0=n0,
                ring_plan=plan,
                ring_words=np.concatenate(words_parts) if words_parts else np.zeros(0, np.int32),
                ring_counts=np.concatenate(counts_parts) if counts_parts else np.zeros(0, np.int32),
                ring_offsets=offsets,
            )
        )

    coords = words = None
    kp_path = Path(str(path) + ".kp")
    if kp_path.exists():
        coords, words = _load_keypoint_sidecar(kp_path, [d.image_id for d in data], [d.n for d in data])
    return ProfileIndex(data, n0=n0, codebook_size=codebook_size, similarity=similarity,
                        coords=coords, words=words)


def _load_keypoint_sidecar(path: Path, image_ids: list[str], counts: list[int]):
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split()[:2] != ["PIDXKP", "v1"]:
        raise KeypointFileError(f"{path}: bad sidecar header")
    coords: list[np.ndarray] = []
    words: list[np.ndarray] = []
    ln = 1
    for iid, n in zip(image_ids, counts):
        if ln >= len(lines) or lines[ln].split() != ["image", iid, str(n)]:
            raise KeypointFileError(f"{path}: line {ln + 1}: sidecar does not match index")
        ln += 1
        xy = np.zeros((n, 2), dtype=np.float64)
        ws = np.zeros(n, dtype=np.int64)
        for i in range(n):
            if ln >= len(lines):
                raise KeypointFileError(f"{path}: truncated sidecar")
            parts = lines[ln].split()
            if len(parts) != 3:
                raise KeypointFileError(f"{path}: line {ln + 1}: expected 3 fields")
            xy[i] = (float(parts[0]), float(parts[1]))
            ws[i] = int(parts[2])
            ln += 1
        coords.append(xy)
        words.append(ws)
    return coords, words


# -- orderless bag-of-words baselines ----------------------------------

BOW_MEASURES = ("l1", "l2", "cosine", "jaccard")
BOW_WEIGHTINGS = ("none", "tfidf")


def bow_histogram(image: ImageBoW, codebook_size: int) -> np.ndarray:
    """Word counts over all keypoints of the image, shape (codebook_size,)."""
    return np.bincount(image.words, minlength=codebook_size).astype(np.float64)


def tfidf_weights(corpus: list[ImageBoW], codebook_size: int) -> np.ndarray:
    """Per-word idf = ln(N / df); 0 for words absent from the corpus."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    df = np.zeros(codebook_size, dtype=np.int64)
    for img in corpus:
        df += np.bincount(np.unique(img.words), minlength=codebook_size).astype(np.int64)
    idf = np.zeros(codebook_size, dtype=np.float64)
    present = df > 0
    idf[present] = np.log(len(corpus) / df[present])
    return idf


def _hist_matrix(images: list[ImageBoW], v: int) -> np.ndarray:
    """Stacked bow histograms, shape (len(images), v)."""
    n = len(images)
    if n == 0:
        return np.zeros((0, v), dtype=np.float64)
    rows = np.repeat(np.arange(n, dtype=np.int64), [len(img) for img in images])
    words = np.concatenate([img.words for img in images]) if rows.size else np.zeros(0, np.int64)
    flat = np.bincount(rows * v + words, minlength=n * v)
    return flat.reshape(n, v).astype(np.float64)


def bow_search(
    query: ImageBoW,
    corpus: list[ImageBoW],
    measure: str = "l2",
    weighting: str = "none",
    k: int = 10,
) -> list[tuple[str, float]]:
    """Rank the corpus by full-image histogram similarity/distance.

    l1/l2 sort ascending (distances), cosine/jaccard descending
    (similarities); ties by ascending image_id. With tfidf weighting every
    histogram entry (query included) is multiplied by the corpus idf.
    """
    if measure not in BOW_MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    if weighting not in BOW_WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    v = query.codebook_size
    for img in corpus:
        if img.codebook_size != v:
            raise ValueError(f"image {img.image_id!r} codebook size differs from query")
    q = bow_histogram(query, v)
    hists = _hist_matrix(corpus, v)
    if weighting == "tfidf":
        idf = tfidf_weights(corpus, v)
        q = q * idf
        hists = hists * idf[None, :]
    higher = measure in ("cosine", "jaccard")
    if measure == "l1":
        vals = np.abs(q[None, :] - hists).sum(axis=1)
    elif measure == "l2":
        vals = np.sqrt(((q[None, :] - hists) ** 2).sum(axis=1))
    elif measure == "cosine":
        nq = float(np.sqrt((q * q).sum()))
        nh = np.sqrt((hists * hists).sum(axis=1))
        dots = (hists * q[None, :]).sum(axis=1)
        vals = np.zeros(len(corpus)) if nq == 0.0 else np.divide(
            dots, nq * nh, out=np.zeros_like(dots), where=nh != 0.0
        )
    else:  # jaccard
        mins = np.minimum(q[None, :], hists).sum(axis=1)
        maxs = np.maximum(q[None, :], hists).sum(axis=1)
        vals = np.divide(mins, maxs, out=np.ones_like(mins), where=maxs != 0.0)
    scored = [(img.image_id, float(val)) for img, val in zip(corpus, vals)]
    scored.sort(key=lambda t: (-t[1] if higher else t[1], t[0]))
    return scored[:k]
