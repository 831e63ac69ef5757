"""
Similarity functions and the anchor-relative projection.

All similarities are evaluated by one elementwise kernel that reduces over the
last (contiguous) axis only, so a batch row and a single-vector call produce
bit-identical values.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import numpy.typing as npt

from semeq.errors import DegenerateAnchorsError, InvalidArgumentError
from semeq.numerics import RealMatrix, as_matrix, as_vector


class SimilarityKind(str, Enum):
    COSINE = "cosine"
    NORMALIZED_EUCLIDEAN = "normalized_euclidean"


@dataclass(frozen=True, eq=False)
class AbsoluteAnchors:
    """
    One encoder's anchor matrix, one anchor per row.

    `encoder_id` and `support_id` record which encoder and which shared support
    produced the rows; equalizers compare them to detect mismatched anchor sets.
    """

    matrix: RealMatrix
    encoder_id: Optional[str] = None
    support_id: Optional[str] = None
    row_norms: np.ndarray = field(init=False, repr=False)
    mean_norm: float = field(init=False)

    def __post_init__(self):
        matrix = as_matrix(self.matrix, "anchor matrix")
        if matrix.shape[0] < 1 or matrix.shape[1] < 1:
            raise InvalidArgumentError("an anchor set needs at least one non-empty row")
        row_norms = np.sqrt(np.sum(matrix * matrix, axis=-1))
        if np.any(row_norms == 0.0):
            zero_rows = np.flatnonzero(row_norms == 0.0).tolist()
            raise DegenerateAnchorsError(f"anchor rows {zero_rows} have zero norm")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "row_norms", row_norms)
        object.__setattr__(self, "mean_norm", float(np.mean(row_norms)))

    @property
    def count(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def latent_dim(self) -> int:
        return int(self.matrix.shape[1])


@dataclass(frozen=True, eq=False)
class RelativeVector:
    values: np.ndarray
    similarity: SimilarityKind

    def __post_init__(self):
        similarity = SimilarityKind(self.similarity)
        values = as_vector(self.values, "relative vector")
        if similarity is SimilarityKind.COSINE and np.any(np.abs(values) > 1.0):
            raise InvalidArgumentError("cosine relative entries must lie in [-1, 1]")
        if similarity is SimilarityKind.NORMALIZED_EUCLIDEAN and np.any(values < 0.0):
            raise InvalidArgumentError("distance relative entries must be non-negative")
        object.__setattr__(self, "similarity", similarity)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


def similarity_matrix(
    batch: np.ndarray, anchors: AbsoluteAnchors, psi: SimilarityKind
) -> np.ndarray:
    """Similarities of every row of `batch` (n x d) to every anchor, shape n x |A|."""
    if psi is SimilarityKind.COSINE:
        dots = np.sum(batch[:, np.newaxis, :] * anchors.matrix[np.newaxis, :, :], axis=-1)
        norms = np.sqrt(np.sum(batch * batch, axis=-1))
        denominators = norms[:, np.newaxis] * anchors.row_norms[np.newaxis, :]
        nonzero = denominators > 0.0
        values = np.where(nonzero, dots / np.where(nonzero, denominators, 1.0), 0.0)
        return np.clip(values, -1.0, 1.0)
    diff = batch[:, np.newaxis, :] - anchors.matrix[np.newaxis, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1)) / anchors.mean_norm


def cosine_similarity(z: npt.ArrayLike, a: npt.ArrayLike) -> float:
    """
    Cosine of the angle between `z` and `a`; 0.0 when `z` is the zero vector.

    Raises:
        InvalidArgumentError: If `a` has zero norm or the shapes differ
    """
    z = as_vector(z, "z")
    a = as_vector(a, "a")
    if z.shape != a.shape:
        raise InvalidArgumentError(f"shape mismatch: {z.shape} vs {a.shape}")
    a_norm = np.sqrt(np.sum(a * a))
    if a_norm == 0.0:
        raise InvalidArgumentError("cosine similarity against a zero-norm anchor")
    z_norm = np.sqrt(np.sum(z * z))
    if z_norm == 0.0:
        return 0.0
    return float(np.clip(np.sum(z * a) / (z_norm * a_norm), -1.0, 1.0))


def normalized_euclidean(z: npt.ArrayLike, a: npt.ArrayLike, anchors: AbsoluteAnchors) -> float:
    """
    Euclidean distance ||z - a|| divided by the anchor set's mean row norm.

    Raises:
        DegenerateAnchorsError: If the anchor set has zero mean norm
    """
    z = as_vector(z, "z")
    a = as_vector(a, "a")
    if z.shape != a.shape:
        raise InvalidArgumentError(f"shape mismatch: {z.shape} vs {a.shape}")
    if anchors.mean_norm <= 0.0:
        raise DegenerateAnchorsError("anchor set has zero mean norm")
    diff = z - a
    return float(np.sqrt(np.sum(diff * diff)) / anchors.mean_norm)


def _check_dim(latent_dim: int, anchors: AbsoluteAnchors):
    if latent_dim != anchors.latent_dim:
        raise InvalidArgumentError(
            f"latent dimension {latent_dim} does not match anchor dimension {anchors.latent_dim}"
        )


def project(z: npt.ArrayLike, anchors: AbsoluteAnchors, psi: SimilarityKind) -> RelativeVector:
    """
    Relative representation of `z`: component j is psi(z, anchor j).

    Args:
        z: Absolute latent vector
        anchors: Anchor set living in the same latent space as `z`
        psi: Similarity kind

    Returns:
        RelativeVector of length anchors.count
    """
    psi = SimilarityKind(psi)
    z = as_vector(z, "z")
    _check_dim(z.size, anchors)
    values = similarity_matrix(z[np.newaxis, :], anchors, psi)[0]
    return RelativeVector(values=values, similarity=psi)


def project_batch(
    batch: npt.ArrayLike, anchors: AbsoluteAnchors, psi: SimilarityKind
) -> np.ndarray:
    """Row-wise `project` of an n x d batch, returned as an n x |A| matrix."""
    psi = SimilarityKind(psi)
    batch = as_matrix(batch, "batch")
    _check_dim(batch.shape[1], anchors)
    return similarity_matrix(batch, anchors, psi)
