"""Engine-wide configuration with the standard defaults."""

from __future__ import annotations

from dataclasses import dataclass

from .similarity import DEFAULT_LAMBDA, MEASURES, SimilarityConfig


@dataclass
class EngineConfig:
    n0: int = 50
    lam: float = DEFAULT_LAMBDA  # 1/3
    measure: str = "jaccard"
    codebook_size: int = 500
    restarts: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n0 < 1:
            raise ValueError("n0 must be positive")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.codebook_size < 1:
            raise ValueError("codebook_size must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")

    def similarity(self) -> SimilarityConfig:
        return SimilarityConfig(lam=self.lam, measure=self.measure)
