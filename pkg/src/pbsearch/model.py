"""Domain types and keypoint-file ingestion.

Keypoint data lives in plain-text files, one keypoint per line:

  quantized:  header ``PBOW v1 <codebook_size>``, lines ``<x> <y> <word_id>``
  raw:        header ``PRAW v1 <dim>``,           lines ``<x> <y> <d_1> ... <d_dim>``

A corpus manifest is a text file with one ``<image_id> <relative_path>``
per line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_DESCRIPTOR_DIM = 128


class KeypointFileError(ValueError):
    """A keypoint/codebook/index file could not be parsed."""


class ValidationError(ValueError):
    """Parsed data violates a corpus-level constraint (e.g. word id out of range)."""


@dataclass(frozen=True)
class Keypoint:
    """A single detected interest point.

    Exactly one of ``word`` (quantized) or ``descriptor`` (raw) is set.
    """

    x: float
    y: float
    word: int | None = None
    descriptor: np.ndarray | None = None


@dataclass
class ImageBoW:
    """An image as an ordered list of visual-word keypoints.

    Coordinates and words are stored as parallel arrays in file order;
    the order is stable across loads.
    """

    image_id: str
    coords: np.ndarray  # (n, 2) float64
    words: np.ndarray  # (n,) int64
    codebook_size: int

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 2)
        self.words = np.asarray(self.words, dtype=np.int64).reshape(-1)
        if self.coords.shape[0] != self.words.shape[0]:
            raise ValueError("coords and words length mismatch")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError(f"image {self.image_id!r}: non-finite coordinate")

    def __len__(self) -> int:
        return self.words.shape[0]

    def keypoint(self, i: int) -> Keypoint:
        return Keypoint(float(self.coords[i, 0]), float(self.coords[i, 1]), word=int(self.words[i]))

    def keypoints(self) -> list[Keypoint]:
        return [self.keypoint(i) for i in range(len(self))]


@dataclass
class RawImage:
    """An image as an ordered list of descriptor keypoints (pre-quantization)."""

    image_id: str
    coords: np.ndarray  # (n, 2) float64
    descriptors: np.ndarray  # (n, dim) float64

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 2)
        self.descriptors = np.asarray(self.descriptors, dtype=np.float64)
        if self.descriptors.ndim != 2 or self.descriptors.shape[0] != self.coords.shape[0]:
            raise ValueError("coords and descriptors length mismatch")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError(f"image {self.image_id!r}: non-finite coordinate")
        if not np.all(np.isfinite(self.descriptors)):
            raise ValueError(f"image {self.image_id!r}: non-finite descriptor value")

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]


def _fmt(v: float) -> str:
    """Canonical text form of a coordinate/descriptor value (round-trip exact)."""
    return repr(float(v))


def _parse_header(line: str, path: Path) -> tuple[str, int]:
    parts = line.split()
    if len(parts) != 3 or parts[0] not in ("PBOW", "PRAW") or parts[1] != "v1":
        raise KeypointFileError(f"{path}: bad header {line.strip()!r}")
    try:
        n = int(parts[2])
    except ValueError:
        raise KeypointFileError(f"{path}: bad header {line.strip()!r}") from None
    if n <= 0:
        raise KeypointFileError(f"{path}: header parameter must be positive")
    return parts[0], n


def sniff_format(path: str | Path) -> str:
    """Return 'quantized' or 'raw' from the file header without loading it."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        magic, _ = _parse_header(fh.readline(), path)
    return "quantized" if magic == "PBOW" else "raw"


def load_keypoints(path: str | Path, mode: str, image_id: str | None = None) -> ImageBoW | RawImage:
    """Load a keypoint file.

    ``mode`` is 'quantized' (PBOW, visual-word payloads) or 'raw' (PRAW,
    descriptor payloads) and must match the file header. Parse errors name
    the offending data line (1-based, header excluded).
    """
    if mode not in ("quantized", "raw"):
        raise ValueError(f"unknown mode {mode!r}")
    path = Path(path)
    if image_id is None:
        image_id = path.stem
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise KeypointFileError(f"{path}: empty file, missing header")
    magic, param = _parse_header(lines[0], path)
    file_mode = "quantized" if magic == "PBOW" else "raw"
    if file_mode != mode:
        raise KeypointFileError(f"{path}: file is {file_mode} but {mode} was requested")

    n_fields = 3 if mode == "quantized" else 2 + param
    coords: list[tuple[float, float]] = []
    payload: list = []
    for i, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != n_fields:
            raise KeypointFileError(f"{path}: line {i}: expected {n_fields} fields, got {len(parts)}")
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise KeypointFileError(f"{path}: line {i}: non-numeric coordinate") from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise KeypointFileError(f"{path}: line {i}: non-finite coordinate")
        coords.append((x, y))
        if mode == "quantized":
            try:
                w = int(parts[2])
            except ValueError:
                raise KeypointFileError(f"{path}: line {i}: non-numeric word id") from None
            if not 0 <= w < param:
                raise ValidationError(
                    f"{path}: line {i}: word id {w} out of range for codebook size {param}"
                )
            payload.append(w)
        else:
            try:
                vec = [float(t) for t in parts[2:]]
            except ValueError:
                raise KeypointFileError(f"{path}: line {i}: non-numeric descriptor value") from None
            payload.append(vec)

    xy = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    if mode == "quantized":
        return ImageBoW(image_id, xy, np.asarray(payload, dtype=np.int64), codebook_size=param)
    desc = np.asarray(payload, dtype=np.float64).reshape(-1, param)
    return RawImage(image_id, xy, desc)


def dump_quantized(image: ImageBoW) -> str:
    """Serialize an ImageBoW to PBOW text (canonical float formatting)."""
    out = [f"PBOW v1 {image.codebook_size}"]
    for i in range(len(image)):
        out.append(f"{_fmt(image.coords[i, 0])} {_fmt(image.coords[i, 1])} {int(image.words[i])}")
    return "\n".join(out) + "\n"


def dump_raw(image: RawImage) -> str:
    out = [f"PRAW v1 {image.dim}"]
    for i in range(len(image)):
        vals = " ".join(_fmt(v) for v in image.descriptors[i])
        out.append(f"{_fmt(image.coords[i, 0])} {_fmt(image.coords[i, 1])} {vals}")
    return "\n".join(out) + "\n"


def save_keypoints(image: ImageBoW | RawImage, path: str | Path) -> None:
    text = dump_quantized(image) if isinstance(image, ImageBoW) else dump_raw(image)
    Path(path).write_text(text, encoding="utf-8")


def load_manifest(path: str | Path) -> list[tuple[str, Path]]:
    """Read a corpus manifest: one ``<image_id> <relative_path>`` per line."""
    path = Path(path)
    entries: list[tuple[str, Path]] = []
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(maxsplit=1)
        if len(parts) != 2:
            raise KeypointFileError(f"{path}: line {i}: expected '<image_id> <path>'")
        entries.append((parts[0], path.parent / parts[1].strip()))
    return entries


def load_corpus(manifest_path: str | Path, mode: str) -> list[ImageBoW | RawImage]:
    return [load_keypoints(p, mode, image_id=iid) for iid, p in load_manifest(manifest_path)]


@dataclass
class CorpusValidation:
    """Result of validate_corpus; passes iff no problems were found."""

    duplicate_ids: list[str] = field(default_factory=list)
    out_of_range: list[tuple[str, int, int]] = field(default_factory=list)  # (image_id, index, word)
    empty_images: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.duplicate_ids or self.out_of_range or self.empty_images)

    def summary(self) -> str:
        if self.ok:
            return "corpus ok"
        lines = []
        if self.duplicate_ids:
            lines.append("duplicate image ids: " + ", ".join(self.duplicate_ids))
        if self.empty_images:
            lines.append("images with zero keypoints: " + ", ".join(self.empty_images))
        for iid, idx, w in self.out_of_range:
            lines.append(f"word id {w} out of range at image {iid} keypoint {idx}")
        return "\n".join(lines)


def validate_corpus(images: list[ImageBoW], codebook_size: int) -> CorpusValidation:
    """Report duplicate ids, out-of-range words, and empty images."""
    report = CorpusValidation()
    seen: set[str] = set()
    for img in images:
        if img.image_id in seen:
            if img.image_id not in report.duplicate_ids:
                report.duplicate_ids.append(img.image_id)
        seen.add(img.image_id)
        if len(img) == 0:
            report.empty_images.append(img.image_id)
        bad = np.flatnonzero((img.words < 0) | (img.words >= codebook_size))
        for idx in bad:
            report.out_of_range.append((img.image_id, int(idx), int(img.words[idx])))
    return report
