"""CIFAR-10 binary-format reader: records of 1 label byte + 3072 pixel bytes (R, G, B planes)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

RECORD = 1 + 3 * 32 * 32
TEST_FILE = "test_batch.bin"


def read_batch(path, limit: int | None = None, scale: float = 1 / 255.0):
    """Return ``(images, labels)`` with images NHWC float32 in ``[0, 1]`` by default."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % RECORD:
        raise ValueError(f"{path}: size {raw.size} is not a multiple of {RECORD}")
    recs = raw.reshape(-1, RECORD)
    if limit is not None:
        recs = recs[:limit]
    labels = recs[:, 0].astype(np.int64)
    images = recs[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).astype(np.float32) * scale
    return images, labels


def write_batch(path, images_u8: np.ndarray, labels: np.ndarray) -> None:
    """Inverse of :func:`read_batch` for uint8 NHWC images; used to build fixtures."""
    recs = np.concatenate(
        [labels.astype(np.uint8)[:, None], images_u8.transpose(0, 3, 1, 2).reshape(len(labels), -1)],
        axis=1,
    )
    recs.astype(np.uint8).tofile(path)


def iter_test_set(directory, limit=None):
    d = Path(directory)
    path = d / TEST_FILE if (d / TEST_FILE).exists() else d
    images, labels = read_batch(path, limit)
    for img, lab in zip(images, labels):
        yield img[None], int(lab)
