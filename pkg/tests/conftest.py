import numpy as np
import pytest

from semeq.agents import standard_datasets, train_agent
from semeq.relative import AbsoluteAnchors


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gaussian_anchors():
    """Factory for seeded Gaussian anchor sets."""

    def build(count, dim, seed=0):
        return AbsoluteAnchors(matrix=np.random.default_rng(seed).standard_normal((count, dim)))

    return build


@pytest.fixture(scope="session")
def standard_split():
    """Standard synthetic config: 10 classes, dim 16, 200 train + 100 test per class."""
    return standard_datasets(seed=7)


@pytest.fixture(scope="session")
def reduced_split():
    """Standard classes and dimensions with a 30-per-class test set."""
    return standard_datasets(seed=7, test_per_class=30)


@pytest.fixture(scope="session")
def small_split():
    return standard_datasets(
        seed=3, class_count=4, input_dim=8, train_per_class=40, test_per_class=10
    )


@pytest.fixture(scope="session")
def orthogonal_pair(reduced_split):
    train, _ = reduced_split
    tx = train_agent("tx", train, "orthogonal", 16, seed=11)
    rx = train_agent("rx", train, "orthogonal", 16, seed=12)
    return tx, rx


@pytest.fixture(scope="session")
def standard_orthogonal_pair(standard_split):
    train, _ = standard_split
    tx = train_agent("tx", train, "orthogonal", 16, seed=11)
    rx = train_agent("rx", train, "orthogonal", 16, seed=12)
    return tx, rx
