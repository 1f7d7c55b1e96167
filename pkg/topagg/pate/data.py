"""
Desk-scale private datasets and their partition among teachers.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import numpy.typing as npt
from sklearn.model_selection import train_test_split

from topagg.core.rng import make_rng
from topagg.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

DATASETS = ("two_clusters", "digits")

# Stroke templates of the 8x8 digit-like classes.
_DIGIT_STROKES = {
    0: [(slice(1, 7), slice(3, 5))],
    1: [(slice(3, 5), slice(1, 7))],
    2: [(slice(1, 7), slice(1, 3)), (slice(1, 7), slice(5, 7))],
    3: [(slice(1, 3), slice(1, 7)), (slice(5, 7), slice(1, 7))],
}


@dataclass(frozen=True)
class Dataset:
    """Labelled records: ``x`` is (n, d), ``y`` holds class ids in [0, classes)."""

    x: npt.NDArray[np.float64]
    y: npt.NDArray[np.int64]
    classes: int

    def __len__(self) -> int:
        return int(self.y.size)

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    def subset(self, indices: npt.NDArray[np.int64]) -> "Dataset":
        return Dataset(self.x[indices], self.y[indices], self.classes)


def make_two_clusters(n: int, seed: int, dim: int = 2, separation: float = 4.0) -> Dataset:
    """Two unit-variance Gaussian clusters centred at -/+ separation / 2 on the first axis."""
    rng = make_rng(seed)
    y = np.arange(n, dtype=np.int64) % 2
    centres = np.zeros((2, dim))
    centres[0, 0], centres[1, 0] = -separation / 2.0, separation / 2.0
    x = centres[y] + rng.normal(size=(n, dim))
    return Dataset(x, y, 2)


def make_digits(n: int, seed: int, noise: float = 0.15) -> Dataset:
    """8x8 stroke images (four classes) with pixel noise, flattened to d = 64 in [0, 1]."""
    rng = make_rng(seed)
    templates = np.zeros((len(_DIGIT_STROKES), 8, 8))
    for label, strokes in _DIGIT_STROKES.items():
        for rows, cols in strokes:
            templates[label, rows, cols] = 1.0
    y = np.arange(n, dtype=np.int64) % len(_DIGIT_STROKES)
    intensity = rng.uniform(0.7, 1.0, size=(n, 1, 1))
    images = templates[y] * intensity + rng.normal(scale=noise, size=(n, 8, 8))
    return Dataset(np.clip(images, 0.0, 1.0).reshape(n, 64), y, len(_DIGIT_STROKES))


def make_dataset(name: str, n: int, seed: int, dim: int = 2) -> Dataset:
    """
    Builds a named dataset.

    Raises:
        ConfigurationError: On an unknown name
    """
    if name == "two_clusters":
        return make_two_clusters(n, seed, dim=dim)
    if name == "digits":
        return make_digits(n, seed)
    raise ConfigurationError(f"unknown dataset {name!r}; expected one of {DATASETS}")


def split_holdout(data: Dataset, holdout: int, seed: int) -> Tuple[Dataset, Dataset]:
    """Stratified (private, held-out) split; the held-out part only scores the probe."""
    idx = np.arange(len(data))
    private, public = train_test_split(idx, test_size=holdout, random_state=seed % (2**32), stratify=data.y)
    return data.subset(np.sort(private)), data.subset(np.sort(public))


class PartitionHandle:
    """
    A teacher's view of its private partition.

    Every read names the reader; reads by anyone but the owning teacher are
    counted in ``foreign_reads``.
    """

    def __init__(self, partition_id: int, data: Dataset, indices: npt.NDArray[np.int64]):
        self.partition_id = partition_id
        self.indices = indices
        self._data = data.subset(indices)
        self.reads = 0
        self.foreign_reads = 0

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def classes(self) -> int:
        return self._data.classes

    def _audit(self, reader_id: int) -> None:
        self.reads += 1
        if reader_id != self.partition_id:
            self.foreign_reads += 1
            logger.error("partition %d read by teacher %d", self.partition_id, reader_id)

    def records(self, reader_id: int) -> Dataset:
        """The whole partition."""
        self._audit(reader_id)
        return self._data

    def sample(self, reader_id: int, size: int, rng: np.random.Generator) -> Dataset:
        """A minibatch drawn without replacement (with replacement when larger than the partition)."""
        self._audit(reader_id)
        pick = rng.choice(len(self), size=size, replace=size > len(self))
        return self._data.subset(pick)


def partition_dataset(data: Dataset, teachers: int, seed: int) -> List[PartitionHandle]:
    """
    Splits a seeded permutation of ``data`` into equal contiguous blocks.

    Args:
        data: The private dataset
        teachers: Number of partitions N
        seed: Permutation seed

    Returns:
        One handle per teacher; the partitions are disjoint and cover ``data``

    Raises:
        ConfigurationError: If N does not divide |D|
    """
    if teachers < 1 or len(data) % teachers:
        raise ConfigurationError(f"{teachers} teachers do not divide a dataset of {len(data)} records")
    perm = make_rng(seed).permutation(len(data)).astype(np.int64)
    size = len(data) // teachers
    return [PartitionHandle(i, data, perm[i * size : (i + 1) * size]) for i in range(teachers)]


def foreign_reads(handles: List[PartitionHandle]) -> int:
    """Total reads of partitions by teachers that do not own them."""
    return sum(h.foreign_reads for h in handles)


def one_hot(y: npt.NDArray[np.int64], classes: int) -> npt.NDArray[np.float64]:
    out = np.zeros((y.size, classes))
    out[np.arange(y.size), y] = 1.0
    return out
