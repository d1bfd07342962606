"""Profile-based sub-image similarity search.

Images are bags of (coordinate, visual word) keypoints. Each keypoint
gets a profile: concentric ring histograms of the surrounding words,
ring populations doubling outward. Search ranks images by the best
query-profile/database-profile pair under an exponentially decayed
ring-by-ring similarity, which is invariant to rotation, scaling, and
translation of the keypoints and needs no geometric verification pass.
"""

from .codebook import Codebook, assign_word, build_codebook, kmeans_once, quantize_image
from .config import EngineConfig
from .model import ImageBoW, Keypoint, RawImage, load_keypoints, validate_corpus
from .profiles import Profile, RingHistogram, build_all_profiles, build_profile, ring_sizes
from .search import (
    MatchResult,
    ProfileIndex,
    bow_histogram,
    bow_search,
    build_index,
    load_index,
    query_best_pair,
    query_topk_images,
    query_topk_multi,
    tfidf_weights,
)
from .similarity import (
    EXCEEDED,
    SimilarityConfig,
    bounded_distance,
    cosine_similarity,
    jaccard_similarity,
    profile_distance,
    profile_similarity,
    sim_max,
)

__all__ = [
    "Codebook",
    "EngineConfig",
    "EXCEEDED",
    "ImageBoW",
    "Keypoint",
    "MatchResult",
    "Profile",
    "ProfileIndex",
    "RawImage",
    "RingHistogram",
    "SimilarityConfig",
    "assign_word",
    "bounded_distance",
    "bow_histogram",
    "bow_search",
    "build_all_profiles",
    "build_codebook",
    "build_index",
    "build_profile",
    "cosine_similarity",
    "jaccard_similarity",
    "kmeans_once",
    "load_index",
    "load_keypoints",
    "profile_distance",
    "profile_similarity",
    "quantize_image",
    "query_best_pair",
    "query_topk_images",
    "query_topk_multi",
    "ring_sizes",
    "sim_max",
    "tfidf_weights",
    "validate_corpus",
]

__version__ = "0.1.0"
