import logging

import numpy as np
import pytest

from semeq.agents import encode, gen_gaussian_mixture, make_encoder
from semeq.anchors import (
    AnchorMethod,
    AnchorSupport,
    encode_support,
    kmeans,
    prototypical_support,
    select_random_support,
    select_support,
)
from semeq.errors import InvalidArgumentError


@pytest.fixture(scope="module")
def blobs():
    return gen_gaussian_mixture(10, 16, 60, separation=8.0, seed=7)


class TestKMeans:
    def test_single_cluster_is_mean(self, rng):
        points = rng.standard_normal((30, 4))
        result = kmeans(points, 1, seed=0)
        np.testing.assert_array_equal(result.centroids[0], points.mean(axis=0))
        np.testing.assert_array_equal(result.assignments, np.zeros(30))

    def test_two_blobs(self, rng):
        points = np.concatenate(
            [rng.normal(-10.0, 0.5, (25, 2)), rng.normal(10.0, 0.5, (25, 2))]
        )
        truth = np.repeat([0, 1], 25)
        result = kmeans(points, 2, seed=3)
        agreement = np.mean(result.assignments == truth)
        assert agreement in (0.0, 1.0)
        assert result.converged

    def test_one_cluster_per_point(self, rng):
        points = rng.standard_normal((6, 3))
        result = kmeans(points, 6, seed=1)
        assert result.inertia == 0.0
        assert sorted(result.assignments.tolist()) == list(range(6))

    def test_inertia_never_increases(self, blobs):
        history = kmeans(blobs.samples, 10, seed=4).inertia_history
        for before, after in zip(history, history[1:]):
            assert after <= before * (1.0 + 1e-12) + 1e-12

    def test_assignments_are_nearest_centroid(self, blobs):
        result = kmeans(blobs.samples, 7, seed=2, max_iter=3)
        distances = np.linalg.norm(
            blobs.samples[:, None, :] - result.centroids[None], axis=-1
        )
        np.testing.assert_array_equal(result.assignments, np.argmin(distances, axis=1))

    def test_deterministic(self, blobs):
        first = kmeans(blobs.samples, 10, seed=5)
        second = kmeans(blobs.samples, 10, seed=5)
        np.testing.assert_array_equal(first.centroids, second.centroids)
        np.testing.assert_array_equal(first.assignments, second.assignments)

    def test_invalid_cluster_count(self, rng):
        points = rng.standard_normal((5, 2))
        with pytest.raises(InvalidArgumentError):
            kmeans(points, 0)
        with pytest.raises(InvalidArgumentError):
            kmeans(points, 6)


class TestRandomSupport:
    def test_distinct_single_samples(self, blobs):
        support = select_random_support(blobs, 20, seed=1)
        rows = np.concatenate(support.indices)
        assert support.count == 20
        assert support.group_sizes == (1,) * 20
        assert np.unique(rows).size == 20
        np.testing.assert_array_equal(support.stacked(), blobs.samples[rows])

    def test_whole_dataset(self):
        data = gen_gaussian_mixture(2, 3, 4, seed=0)
        support = select_random_support(data, data.size, seed=0)
        assert sorted(np.concatenate(support.indices).tolist()) == list(range(data.size))

    def test_too_many(self, blobs):
        with pytest.raises(InvalidArgumentError):
            select_random_support(blobs, blobs.size + 1, seed=0)

    def test_deterministic(self, blobs):
        first = select_random_support(blobs, 12, seed=8)
        second = select_random_support(blobs, 12, seed=8)
        assert first.fingerprint == second.fingerprint


class TestPrototypicalSupport:
    def test_groups_are_label_pure(self, blobs):
        encoder = make_encoder("orthogonal", 16, 16, seed=3)
        support = prototypical_support(encoder, blobs, 10, m_per_cluster=5, seed=0)
        assert support.method is AnchorMethod.PROTOTYPICAL
        assert support.source_encoder_id == encoder.name
        pure = sum(np.unique(blobs.labels[rows]).size == 1 for rows in support.indices)
        assert pure >= 8

    def test_group_sizes(self, blobs):
        encoder = make_encoder("mlp", 16, 16, seed=3)
        support = prototypical_support(encoder, blobs, 12, m_per_cluster=4, seed=2)
        assert support.count == 12
        assert all(1 <= size <= 4 for size in support.group_sizes)
        for rows in support.indices:
            assert np.unique(rows).size == rows.size

    def test_one_anchor_per_point(self):
        data = gen_gaussian_mixture(2, 3, 4, seed=1)
        encoder = make_encoder("orthogonal", 3, 3, seed=0)
        support = prototypical_support(encoder, data, data.size, m_per_cluster=1, seed=0)
        assert sorted(np.concatenate(support.indices).tolist()) == list(range(data.size))

    def test_small_clusters_are_shrunk(self, caplog):
        data = gen_gaussian_mixture(2, 3, 6, seed=1)
        encoder = make_encoder("orthogonal", 3, 3, seed=0)
        with caplog.at_level(logging.WARNING):
            support = prototypical_support(encoder, data, 6, m_per_cluster=5, seed=0)
        assert sum(support.group_sizes) == data.size
        assert support.notes
        assert "using all of them" in caplog.text

    def test_dispatch(self, blobs):
        encoder = make_encoder("orthogonal", 16, 16, seed=3)
        random = select_support("random", encoder, blobs, 5, seed=1)
        proto = select_support("proto", encoder, blobs, 5, seed=1)
        assert random.method is AnchorMethod.RANDOM
        assert proto.method is AnchorMethod.PROTOTYPICAL

    def test_deterministic(self, blobs):
        encoder = make_encoder("affine", 16, 16, seed=3)
        first = prototypical_support(encoder, blobs, 8, seed=6)
        second = prototypical_support(encoder, blobs, 8, seed=6)
        assert first.fingerprint == second.fingerprint


class TestEncodeSupport:
    def test_single_sample_groups(self, blobs):
        encoder = make_encoder("mlp", 16, 16, seed=5)
        support = select_random_support(blobs, 9, seed=3)
        anchors = encode_support(encoder, support)
        np.testing.assert_allclose(anchors.matrix, encode(encoder, support.stacked()))
        assert anchors.encoder_id == encoder.name
        assert anchors.support_id == support.fingerprint

    def test_linear_encoder_commutes_with_mean(self, blobs):
        encoder = make_encoder("affine", 16, 16, seed=5)
        support = prototypical_support(encoder, blobs, 6, m_per_cluster=5, seed=0)
        anchors = encode_support(encoder, support)
        expected = np.stack([encode(encoder, group.mean(axis=0)) for group in support.groups])
        np.testing.assert_allclose(anchors.matrix, expected, atol=1e-12)

    def test_two_encoders_share_ordering(self, blobs):
        tx = make_encoder("orthogonal", 16, 16, seed=1)
        rx = make_encoder("mlp", 16, 16, seed=2)
        support = prototypical_support(tx, blobs, 7, seed=4)
        tx_anchors = encode_support(tx, support)
        rx_anchors = encode_support(rx, support)
        assert tx_anchors.count == rx_anchors.count == support.count
        assert tx_anchors.support_id == rx_anchors.support_id
        np.testing.assert_allclose(
            rx_anchors.matrix[3], encode(rx, support.groups[3]).mean(axis=0)
        )

    def test_dimension_mismatch(self, blobs):
        support = select_random_support(blobs, 4, seed=0)
        with pytest.raises(InvalidArgumentError):
            encode_support(make_encoder("affine", 8, 8, seed=0), support)


def test_fingerprint_depends_on_content():
    groups = (np.ones((2, 3)), np.zeros((1, 3)) + 2.0)
    indices = (np.array([0, 1]), np.array([2]))
    support = AnchorSupport(groups=groups, indices=indices, method="random", seed=0)
    moved = AnchorSupport(
        groups=(groups[0] + 1e-9, groups[1]), indices=indices, method="random", seed=0
    )
    assert len(support.fingerprint) == 64
    assert support.fingerprint != moved.fingerprint
