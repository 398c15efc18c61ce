"""Dataset ingestion: CIFAR-10 binary batches and a synthetic stand-in."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..tensor.rng import Rng

# channel statistics used to standardize CIFAR-10 after scaling to [0, 1]
CIFAR10_MEAN = np.array([0.4914, 0.4822, 0.4465])
CIFAR10_STD = np.array([0.2470, 0.2435, 0.2616])

_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
_TEST_FILE = "test_batch.bin"
_RECORD = 1 + 3 * 32 * 32
_PER_FILE = 10000


class DataFormatError(ValueError):
    """Dataset bytes do not match the expected binary layout."""


@dataclass
class Dataset:
    images: np.ndarray  # (n, 3, H, W) float32, standardized
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __len__(self):
        return self.images.shape[0]


def parse_cifar10_records(blob, filename="<bytes>"):
    """Decode raw records: 1 label byte + 3072 pixel bytes each."""
    if len(blob) % _RECORD != 0:
        expected = (len(blob) // _RECORD + 1) * _RECORD
        raise DataFormatError(
            f"{filename}: expected a multiple of {_RECORD} bytes, got {len(blob)} "
            f"(nearest valid: {expected})"
        )
    raw = np.frombuffer(blob, dtype=np.uint8).reshape(-1, _RECORD)
    labels = raw[:, 0].astype(np.int64)
    pixels = raw[:, 1:].reshape(-1, 3, 32, 32)
    return pixels, labels


def encode_cifar10_records(pixels, labels):
    """Inverse of parse_cifar10_records, for round-trip verification."""
    n = labels.shape[0]
    out = np.empty((n, _RECORD), dtype=np.uint8)
    out[:, 0] = labels
    out[:, 1:] = pixels.reshape(n, -1)
    return out.tobytes()


def standardize(pixels):
    x = pixels.astype(np.float32) / 255.0
    return (x - CIFAR10_MEAN[None, :, None, None].astype(np.float32)) / CIFAR10_STD[
        None, :, None, None
    ].astype(np.float32)


def load_cifar10_binary(directory):
    """Load the standard 5 train + 1 test binary batches.

    Returns (train: Dataset, test: Dataset) with 50000/10000 examples.
    """
    train_px, train_y = [], []
    for fname in _TRAIN_FILES:
        path = os.path.join(directory, fname)
        if not os.path.exists(path):
            raise DataFormatError(f"missing batch file {path}")
        with open(path, "rb") as f:
            blob = f.read()
        if len(blob) != _RECORD * _PER_FILE:
            raise DataFormatError(
                f"{fname}: expected {_RECORD * _PER_FILE} bytes, got {len(blob)}"
            )
        px, y = parse_cifar10_records(blob, fname)
        train_px.append(px)
        train_y.append(y)
    with open(os.path.join(directory, _TEST_FILE), "rb") as f:
        blob = f.read()
    if len(blob) != _RECORD * _PER_FILE:
        raise DataFormatError(f"{_TEST_FILE}: expected {_RECORD * _PER_FILE} bytes, got {len(blob)}")
    test_px, test_y = parse_cifar10_records(blob, _TEST_FILE)
    train = Dataset(standardize(np.concatenate(train_px)), np.concatenate(train_y), 10)
    test = Dataset(standardize(test_px), test_y, 10)
    return train, test


def synthetic_dataset(n, image_size=16, num_classes=4, seed=0, noise=0.5,
                      template_seed=None):
    """Gaussian class templates plus noise; linearly separable-ish toy data.

    ``template_seed`` fixes the class templates independently of the sample
    draw, so train/val splits built with different ``seed`` values share the
    same underlying classes.
    """
    rng = Rng(seed)
    t_rng = Rng(template_seed) if template_seed is not None else rng
    templates = t_rng.normal((num_classes, 3, image_size, image_size)).astype(np.float32)
    labels = rng.integers(0, num_classes, (n,))
    images = templates[labels] + noise * rng.normal((n, 3, image_size, image_size)).astype(
        np.float32
    )
    return Dataset(images.astype(np.float32), labels.astype(np.int64), num_classes)


def flip_horizontal(images, rng):
    """Randomly mirror each image left-right with probability 1/2."""
    flip = rng.uniform((images.shape[0],)) < 0.5
    out = images.copy()
    out[flip] = out[flip, :, :, ::-1]
    return out
