"""
Anchor supports: random baseline and prototypical anchors.

A support is a list of groups of raw data samples. It is chosen once (for
prototypical anchors, on the transmitter's latent space) and shared; every
encoder then computes its own anchor rows from it with `encode_support`.
"""

import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from semeq.agents.datasets import Dataset
from semeq.agents.encoders import Encoder, encode
from semeq.anchors.kmeans import DEFAULT_MAX_ITER, kmeans
from semeq.errors import InvalidArgumentError
from semeq.numerics import as_matrix, derive_seed
from semeq.relative import AbsoluteAnchors

logger = logging.getLogger(__name__)

DEFAULT_SUPPORT_SIZE = 5


class AnchorMethod(str, Enum):
    RANDOM = "random"
    PROTOTYPICAL = "proto"


@dataclass(frozen=True, eq=False)
class AnchorSupport:
    """
    N groups of raw samples shared between agents.

    `indices[i]` holds the dataset rows of `groups[i]`. `notes` records groups
    that were shrunk or dropped because their cluster was too small.
    """

    groups: Tuple[np.ndarray, ...]
    indices: Tuple[np.ndarray, ...]
    method: AnchorMethod
    seed: int
    source_encoder_id: Optional[str] = None
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        groups = tuple(as_matrix(group, "support group") for group in self.groups)
        indices = tuple(np.asarray(rows, dtype=np.int64) for rows in self.indices)
        if not groups:
            raise InvalidArgumentError("an anchor support needs at least one group")
        if len(indices) != len(groups):
            raise InvalidArgumentError("one index array per support group is required")
        if any(group.shape[0] < 1 for group in groups):
            raise InvalidArgumentError("support groups must not be empty")
        if len({group.shape[1] for group in groups}) != 1:
            raise InvalidArgumentError("support groups must share one sample dimension")
        if any(rows.shape != (group.shape[0],) for rows, group in zip(indices, groups)):
            raise InvalidArgumentError("index arrays must match their group sizes")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "method", AnchorMethod(self.method))
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def count(self) -> int:
        return len(self.groups)

    @property
    def input_dim(self) -> int:
        return int(self.groups[0].shape[1])

    @property
    def group_sizes(self) -> Tuple[int, ...]:
        return tuple(int(group.shape[0]) for group in self.groups)

    @property
    def support_size(self) -> int:
        """Requested samples per group (M); shrunk groups may hold fewer."""
        return max(self.group_sizes)

    def stacked(self) -> np.ndarray:
        """All samples as one matrix, group after group."""
        return np.concatenate(self.groups, axis=0)

    @property
    def fingerprint(self) -> str:
        """SHA-256 over the group sizes and the raw float64 payload."""
        digest = hashlib.sha256()
        digest.update(",".join(str(size) for size in self.group_sizes).encode("ascii"))
        digest.update(np.ascontiguousarray(self.stacked(), dtype="<f8").tobytes())
        return digest.hexdigest()


def select_random_support(data: Dataset, n_anchors: int, seed: int) -> AnchorSupport:
    """
    Sample `n_anchors` distinct dataset rows uniformly, one per group.

    Raises:
        InvalidArgumentError: If n_anchors is not in [1, data.size]
    """
    if not 1 <= n_anchors <= data.size:
        raise InvalidArgumentError(
            f"cannot select {n_anchors} anchors from a dataset of {data.size} samples"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(data.size, size=n_anchors, replace=False)
    return AnchorSupport(
        groups=tuple(data.samples[[index]] for index in chosen),
        indices=tuple(np.array([index]) for index in chosen),
        method=AnchorMethod.RANDOM,
        seed=seed,
    )


def prototypical_support(
    encoder: Encoder,
    data: Dataset,
    n_anchors: int,
    m_per_cluster: int = DEFAULT_SUPPORT_SIZE,
    seed: int = 0,
) -> AnchorSupport:
    """
    Prototypical anchors: cluster the encoder's latents and sample each cluster.

    The dataset is encoded with `encoder` and clustered with k-means into
    `n_anchors` clusters. From each cluster `m_per_cluster` members are drawn
    uniformly without replacement; their raw samples form one group. A cluster
    with fewer members contributes all of them, and the shrink is logged and
    recorded in `notes`.

    Args:
        encoder: Encoder whose latent space fixes the support (the transmitter)
        data: Dataset the support is drawn from
        n_anchors: Number of clusters, hence of anchors
        m_per_cluster: Samples per group (M)
        seed: Seed; k-means and the per-cluster draw use seeds derived from it

    Returns:
        AnchorSupport usable by any other encoder
    """
    if not 1 <= n_anchors <= data.size:
        raise InvalidArgumentError(
            f"cannot build {n_anchors} prototypes from a dataset of {data.size} samples"
        )
    if m_per_cluster < 1:
        raise InvalidArgumentError("m_per_cluster must be at least 1")

    latents = encode(encoder, data.samples)
    clustering = kmeans(
        latents, n_anchors, seed=derive_seed(seed, "kmeans"), max_iter=DEFAULT_MAX_ITER
    )
    rng = np.random.default_rng(derive_seed(seed, "prototypes"))

    groups, indices, notes = [], [], []
    for cluster in range(n_anchors):
        members = np.flatnonzero(clustering.assignments == cluster)
        if members.size == 0:
            notes.append(f"cluster {cluster} is empty and was dropped")
            logger.warning("Prototype cluster %d is empty, dropping it", cluster)
            continue
        if members.size < m_per_cluster:
            notes.append(
                f"cluster {cluster} has {members.size} < {m_per_cluster} members, group shrunk"
            )
            logger.warning(
                "Prototype cluster %d has only %d members (wanted %d), using all of them",
                cluster,
                members.size,
                m_per_cluster,
            )
            chosen = members
        else:
            chosen = rng.choice(members, size=m_per_cluster, replace=False)
        groups.append(data.samples[chosen])
        indices.append(chosen)

    return AnchorSupport(
        groups=tuple(groups),
        indices=tuple(indices),
        method=AnchorMethod.PROTOTYPICAL,
        seed=seed,
        source_encoder_id=encoder.name,
        notes=tuple(notes),
    )


def select_support(
    method,
    encoder: Encoder,
    data: Dataset,
    n_anchors: int,
    m_per_cluster: int = DEFAULT_SUPPORT_SIZE,
    seed: int = 0,
) -> AnchorSupport:
    """Dispatch to the random or prototypical selector."""
    method = AnchorMethod(method)
    if method is AnchorMethod.RANDOM:
        return select_random_support(data, n_anchors, seed)
    return prototypical_support(encoder, data, n_anchors, m_per_cluster, seed)


def encode_support(encoder: Encoder, support: AnchorSupport) -> AbsoluteAnchors:
    """
    Anchor i is the mean of the encoder's latents over support group i.

    Raises:
        InvalidArgumentError: If the support sample dimension differs from the encoder's
        DegenerateAnchorsError: If an anchor row has zero norm
    """
    if support.input_dim != encoder.input_dim:
        raise InvalidArgumentError(
            f"support samples have dimension {support.input_dim}, "
            f"encoder expects {encoder.input_dim}"
        )
    rows = np.stack([encode(encoder, group).mean(axis=0) for group in support.groups])
    return AbsoluteAnchors(matrix=rows, encoder_id=encoder.name, support_id=support.fingerprint)
