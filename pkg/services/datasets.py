"""
Datasets module.

Contains the Example/Dataset types, the desk-scale dataset generators and the
CSV dataset format (label first, then d feature columns, optional "#" header).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np
from sklearn.datasets import load_digits, make_blobs
from sklearn.model_selection import train_test_split

from config import BLOB_CENTERS, BLOB_STD, DATA_KINDS
from services.errors import ConfigError, DataError, DimensionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Example:
    """One labelled input."""

    x: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (n, d) with integer labels (n,)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise DimensionError(
                f"features {features.shape} and labels {labels.shape} do not describe the same rows"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0

    @property
    def examples(self) -> List[Example]:
        return [Example(x, int(y)) for x, y in zip(self.features, self.labels)]


def _sklearn_seed(seed: int) -> int:
    return int(seed) % (2**32)


def generate_blobs(n: int, seed: int) -> Dataset:
    """Two Gaussian clusters in R^2, clipped to [0, 1]."""
    features, labels = make_blobs(
        n_samples=n, centers=np.array(BLOB_CENTERS), cluster_std=BLOB_STD, random_state=_sklearn_seed(seed)
    )
    return Dataset(np.clip(features, 0.0, 1.0), labels)


def generate_digits(n: int, seed: int) -> Dataset:
    """
    Seeded subset of the 8x8 handwritten digits shipped with scikit-learn.

    Pixel intensities 0..16 are scaled to [0, 1].
    """
    digits = load_digits()
    total = digits.data.shape[0]
    if n > total:
        raise ConfigError(f"digits8x8 has only {total} examples, requested {n}")
    rows = np.random.default_rng(seed).permutation(total)[:n]
    return Dataset(digits.data[rows] / 16.0, digits.target[rows])


def generate_dataset(kind: str, n: int, seed: int) -> Dataset:
    """
    Generate one of the bundled desk-scale datasets.

    Args:
        kind: "blobs" or "digits8x8"
        n: Number of rows (at least 10)
        seed: Generator seed

    Returns:
        Dataset
    """
    if n < 10:
        raise ConfigError(f"n must be at least 10, got {n}")
    if kind == "blobs":
        return generate_blobs(n, seed)
    if kind == "digits8x8":
        return generate_digits(n, seed)
    raise ConfigError(f"unknown dataset kind '{kind}', expected one of {', '.join(DATA_KINDS)}")


def save_dataset(dataset: Dataset, path) -> None:
    """Write the dataset CSV with a "#" header row."""
    path = Path(path)
    header = ",".join(["label"] + [f"f{i}" for i in range(dataset.dim)])
    lines = ["# " + header]
    for x, y in zip(dataset.features, dataset.labels):
        lines.append(",".join([str(int(y))] + [repr(float(v)) for v in x]))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise DataError(f"Error writing dataset to {path}: {str(e)}") from e


def load_dataset(path) -> Dataset:
    """
    Read a dataset CSV.

    Raises:
        DataError: missing file, empty file, ragged rows or unparsable values
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"Error reading dataset {path}: {str(e)}") from e

    labels, rows, width = [], [], None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split(",")
        if width is None:
            width = len(fields)
        if len(fields) != width or width < 2:
            raise DataError(f"{path}: line {lineno}: expected {width} columns, got {len(fields)}")
        try:
            labels.append(int(fields[0]))
            rows.append([float(v) for v in fields[1:]])
        except ValueError as e:
            raise DataError(f"{path}: line {lineno}: {str(e)}") from e
    if not rows:
        raise DataError(f"{path}: no examples found")
    features = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise DataError(f"{path}: non-finite feature values")
    return Dataset(features, np.array(labels, dtype=np.int64))


def split_dataset(dataset: Dataset, test_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Deterministic stratified train/test split.

    Raises:
        DataError: a class has fewer than two rows, or either side of the
            split would be smaller than the number of classes
    """
    indices = np.arange(len(dataset))
    try:
        train_idx, test_idx = train_test_split(
            indices, test_size=test_fraction, random_state=_sklearn_seed(seed), stratify=dataset.labels
        )
    except ValueError as e:
        raise DataError(f"Cannot split {len(dataset)} rows with test fraction {test_fraction}: {str(e)}") from e
    train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)
    return (
        Dataset(dataset.features[train_idx], dataset.labels[train_idx]),
        Dataset(dataset.features[test_idx], dataset.labels[test_idx]),
    )
