"""IDX dataset loading and binary-class filtering.

The IDX container is big-endian: images carry magic 0x00000803 followed
by (count, rows, cols) and raw uint8 pixels; labels carry magic
0x00000801 followed by (count) and raw uint8 labels.  Gzip-compressed
files are detected by their 0x1f8b prefix.  Nothing is downloaded here;
callers supply paths (see the CLI's --data-root handling).
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# binary-filtered (classes 0/1) reference counts for the standard splits
EXPECTED_BINARY_COUNTS = {
    ("mnist", "train"): 12665,
    ("mnist", "test"): 2115,
    ("fashion", "train"): 12000,
    ("fashion", "test"): 2000,
}

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class ParseError(ValueError):
    """IDX parse failure; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass
class Dataset:
    name: str
    split: str
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) uint8

    def __len__(self) -> int:
        return len(self.labels)


def _read_file(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _read_u32(buf: bytes, offset: int) -> int:
    if offset + 4 > len(buf):
        raise ParseError("truncated header", offset)
    return struct.unpack_from(">I", buf, offset)[0]


def load_idx_images(path) -> np.ndarray:
    buf = _read_file(path)
    magic = _read_u32(buf, 0)
    if magic != IMAGE_MAGIC:
        raise ParseError(f"bad image magic 0x{magic:08x}", 0)
    count = _read_u32(buf, 4)
    rows = _read_u32(buf, 8)
    cols = _read_u32(buf, 12)
    need = 16 + count * rows * cols
    if len(buf) < need:
        raise ParseError(f"image data truncated, expected {need} bytes", len(buf))
    data = np.frombuffer(buf, dtype=np.uint8, count=count * rows * cols, offset=16)
    return data.reshape(count, rows, cols).copy()


def load_idx_labels(path) -> np.ndarray:
    buf = _read_file(path)
    magic = _read_u32(buf, 0)
    if magic != LABEL_MAGIC:
        raise ParseError(f"bad label magic 0x{magic:08x}", 0)
    count = _read_u32(buf, 4)
    need = 8 + count
    if len(buf) < need:
        raise ParseError(f"label data truncated, expected {need} bytes", len(buf))
    labels = np.frombuffer(buf, dtype=np.uint8, count=count, offset=8).copy()
    if labels.size and labels.max() > 9:
        raise ParseError(f"label value {labels.max()} outside 0..9", 8)
    return labels


def load_idx(images_path, labels_path, name: str = "", split: str = "") -> Dataset:
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise ParseError(
            f"count mismatch: {len(images)} images vs {len(labels)} labels", 4
        )
    if images.shape[1:] != (28, 28):
        raise ParseError(f"expected 28x28 images, got {images.shape[1:]}", 8)
    return Dataset(name, split, images, labels)


def filter_binary(dataset: Dataset, classes=(0, 1)) -> Dataset:
    """Keep only the two target classes, preserving order; relabel to 0/1."""
    mask = np.isin(dataset.labels, classes)
    labels = dataset.labels[mask]
    relabeled = np.where(labels == classes[0], 0, 1).astype(np.uint8)
    return Dataset(dataset.name, dataset.split, dataset.images[mask], relabeled)


def signed_labels(labels01) -> np.ndarray:
    """Map {0,1} class labels to the Z eigenvalues {+1,-1}."""
    return 1 - 2 * np.asarray(labels01, dtype=int)


def load_binary_split(data_root, name: str, split: str) -> Dataset:
    """Load one split from <data_root>/<name>/ and filter to classes 0/1."""
    root = Path(data_root) / name
    paths = []
    for fname in SPLIT_FILES[split]:
        p = root / fname
        if not p.exists() and (root / (fname + ".gz")).exists():
            p = root / (fname + ".gz")
        paths.append(p)
    raw = load_idx(paths[0], paths[1], name=name, split=split)
    return filter_binary(raw)
