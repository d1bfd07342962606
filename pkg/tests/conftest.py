import numpy as np
import pytest

from pbsearch.model import ImageBoW, save_keypoints


@pytest.fixture
def disk_corpus(tmp_path):
    """A small quantized corpus on disk: returns (manifest_path, images)."""
    rng = np.random.default_rng(99)
    images = []
    lines = []
    for i in range(10):
        n = int(rng.integers(8, 20))
        img = ImageBoW(
            f"img_{i:02d}",
            rng.uniform(0, 100, size=(n, 2)),
            rng.integers(0, 40, size=n),
            codebook_size=40,
        )
        save_keypoints(img, tmp_path / f"img_{i:02d}.pbow")
        images.append(img)
        lines.append(f"img_{i:02d} img_{i:02d}.pbow")
    manifest = tmp_path / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest, images
