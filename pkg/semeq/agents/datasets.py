"""
Synthetic Gaussian-mixture classification data.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from semeq.errors import InvalidArgumentError
from semeq.numerics import RealMatrix, as_matrix

STANDARD_CLASS_COUNT = 10
STANDARD_INPUT_DIM = 16
STANDARD_LATENT_DIM = 16
STANDARD_TRAIN_PER_CLASS = 200
STANDARD_TEST_PER_CLASS = 100
STANDARD_SEPARATION = 8.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled samples drawn from `class_count` classes."""

    samples: RealMatrix
    labels: np.ndarray
    class_count: int
    seed: int

    def __post_init__(self):
        samples = as_matrix(self.samples, "samples")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size != samples.shape[0]:
            raise InvalidArgumentError(
                f"expected {samples.shape[0]} labels, got array of shape {labels.shape}"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise InvalidArgumentError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.class_count < 1:
            raise InvalidArgumentError("class_count must be at least 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise InvalidArgumentError(f"labels must lie in [0, {self.class_count})")
        if np.any(np.bincount(labels, minlength=self.class_count) == 0):
            raise InvalidArgumentError("every class needs at least one sample")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.samples.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.samples.shape[1])

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Dataset restricted to `indices`, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.samples[indices], self.labels[indices], self.class_count, self.seed)


def gen_gaussian_mixture(
    class_count: int,
    input_dim: int,
    per_class: int,
    separation: float = STANDARD_SEPARATION,
    seed: int = 0,
) -> Dataset:
    """
    Generate a balanced Gaussian mixture.

    Class means are drawn uniformly from the sphere of radius `separation`; each
    class contributes `per_class` unit-covariance samples. Samples are grouped by
    class in label order.

    Args:
        class_count: Number of classes
        input_dim: Sample dimension
        per_class: Samples per class
        separation: Radius of the sphere holding the class means
        seed: Seed of the generator; equal arguments give bit-identical datasets

    Returns:
        The generated Dataset
    """
    if class_count < 1 or input_dim < 1 or per_class < 1:
        raise InvalidArgumentError("class_count, input_dim and per_class must be at least 1")
    if separation <= 0.0:
        raise InvalidArgumentError("separation must be positive")

    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((class_count, input_dim))
    means = separation * directions / np.linalg.norm(directions, axis=1, keepdims=True)
    labels = np.repeat(np.arange(class_count, dtype=np.int64), per_class)
    samples = means[labels] + rng.standard_normal((labels.size, input_dim))
    return Dataset(samples=samples, labels=labels, class_count=class_count, seed=seed)


def split_dataset(data: Dataset, test_per_class: int) -> Tuple[Dataset, Dataset]:
    """
    Split off the last `test_per_class` samples of every class as a test set.

    Both halves share the generating class means, so a decoder trained on the
    first half is evaluated on the same task.
    """
    if test_per_class < 1:
        raise InvalidArgumentError("test_per_class must be at least 1")
    train_parts, test_parts = [], []
    for label in range(data.class_count):
        members = np.flatnonzero(data.labels == label)
        if members.size <= test_per_class:
            raise InvalidArgumentError(
                f"class {label} has {members.size} samples, cannot hold out {test_per_class}"
            )
        train_parts.append(members[:-test_per_class])
        test_parts.append(members[-test_per_class:])
    return data.subset(np.concatenate(train_parts)), data.subset(np.concatenate(test_parts))


def standard_datasets(
    seed: int = 0,
    class_count: int = STANDARD_CLASS_COUNT,
    input_dim: int = STANDARD_INPUT_DIM,
    train_per_class: int = STANDARD_TRAIN_PER_CLASS,
    test_per_class: int = STANDARD_TEST_PER_CLASS,
    separation: float = STANDARD_SEPARATION,
) -> Tuple[Dataset, Dataset]:
    """Train/test pair of the standard synthetic config."""
    data = gen_gaussian_mixture(
        class_count, input_dim, train_per_class + test_per_class, separation, seed
    )
    return split_dataset(data, test_per_class)
