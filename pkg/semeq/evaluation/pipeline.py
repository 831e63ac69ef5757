"""
The channel equalizer and end-to-end pair evaluation.

A transmitter latent is projected onto the transmitter's anchors, sent as a
relative vector, and inverted against the receiver's anchors; the receiver's
own decoder then acts on the result.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np
import numpy.typing as npt

from semeq.agents.agent import Agent
from semeq.agents.datasets import Dataset
from semeq.agents.decoders import decode
from semeq.agents.encoders import encode
from semeq.anchors.selection import AnchorSupport, encode_support
from semeq.errors import InvalidArgumentError, InvalidConfigurationError
from semeq.inverse import (
    InverseConfig,
    closed_form_cosine_inverse,
    closed_form_cosine_inverse_batch,
    gradient_inverse,
    invert_batch,
)
from semeq.numerics import as_matrix, as_vector
from semeq.relative import AbsoluteAnchors, SimilarityKind, project, project_batch

logger = logging.getLogger(__name__)


class InverseMethod(str, Enum):
    GRADIENT = "gradient"
    CLOSED_FORM_COSINE = "closed_form_cosine"


@dataclass(frozen=True, eq=False)
class Equalizer:
    """
    Composition of the transmitter projection and the receiver pseudo-inverse.

    Both anchor sets must come from one shared support: equal anchor counts and,
    when recorded, equal `support_id`.
    """

    transmitter_anchors: AbsoluteAnchors
    receiver_anchors: AbsoluteAnchors
    similarity: SimilarityKind
    inverse_method: InverseMethod = InverseMethod.GRADIENT
    inverse_config: InverseConfig = InverseConfig()

    def __post_init__(self):
        similarity = SimilarityKind(self.similarity)
        method = InverseMethod(self.inverse_method)
        object.__setattr__(self, "similarity", similarity)
        object.__setattr__(self, "inverse_method", method)

        tx, rx = self.transmitter_anchors, self.receiver_anchors
        if tx.count != rx.count:
            raise InvalidConfigurationError(
                f"transmitter has {tx.count} anchors but receiver has {rx.count}"
            )
        if tx.support_id is not None and rx.support_id is not None:
            if tx.support_id != rx.support_id:
                raise InvalidConfigurationError(
                    "transmitter and receiver anchors come from different supports"
                )
        if method is InverseMethod.CLOSED_FORM_COSINE and similarity is not SimilarityKind.COSINE:
            raise InvalidConfigurationError(
                f"the closed-form inverse requires cosine similarity, got {similarity.value}"
            )


class SampleRecord(NamedTuple):
    gse: float
    ggo: int
    true_label: int
    predicted_label: int


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """
    Outcome of running one equalized pair over a test set.

    `cross_accuracy_unequalized` is None when the two latent spaces differ in
    dimension and the receiver cannot read raw transmitter latents at all.
    """

    matched_accuracy: float
    cross_accuracy_unequalized: Optional[float]
    cross_accuracy_equalized: float
    decoder_agreement: float
    mean_reconstruction_error: float
    anchor_count: int
    per_sample_records: Tuple[SampleRecord, ...]

    @property
    def correct_flags(self) -> np.ndarray:
        return np.array([r.predicted_label == r.true_label for r in self.per_sample_records])

    @property
    def reconstruction_errors(self) -> np.ndarray:
        return np.array([r.gse for r in self.per_sample_records], dtype=np.float64)


def build_equalizer(
    tx: Agent,
    rx: Agent,
    support: AnchorSupport,
    similarity: SimilarityKind,
    inverse_method: InverseMethod = InverseMethod.GRADIENT,
    inverse_config: InverseConfig = InverseConfig(),
) -> Equalizer:
    """Encode one shared support with both agents and pair the anchor sets."""
    return Equalizer(
        transmitter_anchors=encode_support(tx.encoder, support),
        receiver_anchors=encode_support(rx.encoder, support),
        similarity=similarity,
        inverse_method=inverse_method,
        inverse_config=inverse_config,
    )


def equalize(z_theta: npt.ArrayLike, eq: Equalizer) -> np.ndarray:
    """
    Map a transmitter latent into the receiver's latent space.

    Raises:
        InvalidArgumentError: If z_theta does not match the transmitter dimension
    """
    z_theta = as_vector(z_theta, "z_theta")
    relative = project(z_theta, eq.transmitter_anchors, eq.similarity)
    if eq.inverse_method is InverseMethod.CLOSED_FORM_COSINE:
        return closed_form_cosine_inverse(relative, eq.receiver_anchors)
    return gradient_inverse(relative, eq.receiver_anchors, eq.inverse_config).z_hat


def equalize_batch(latents: npt.ArrayLike, eq: Equalizer) -> np.ndarray:
    """
    Row-wise `equalize` of an n x d batch of transmitter latents.

    With the gradient inverse, row i starts from the seed
    `eq.inverse_config.init_seed + i`; see `invert_batch`.
    """
    latents = as_matrix(latents, "latents")
    targets = project_batch(latents, eq.transmitter_anchors, eq.similarity)
    if eq.inverse_method is InverseMethod.CLOSED_FORM_COSINE:
        return closed_form_cosine_inverse_batch(targets, eq.receiver_anchors)
    z_hat, _, _, _ = invert_batch(targets, eq.receiver_anchors, eq.similarity, eq.inverse_config)
    return z_hat


def check_provenance(agent: Agent, anchors: AbsoluteAnchors, role: str):
    if anchors.latent_dim != agent.encoder.latent_dim:
        raise InvalidConfigurationError(
            f"{role} anchors have dimension {anchors.latent_dim}, "
            f"agent {agent.id!r} has latent dimension {agent.encoder.latent_dim}"
        )
    if anchors.encoder_id is not None and anchors.encoder_id != agent.encoder.name:
        raise InvalidConfigurationError(
            f"{role} anchors were encoded by {anchors.encoder_id!r}, "
            f"not by agent {agent.id!r} ({agent.encoder.name})"
        )


def evaluate_pair(tx: Agent, rx: Agent, eq: Equalizer, test_data: Dataset) -> EvaluationReport:
    """
    Run the full equalized pipeline over every test sample.

    Args:
        tx: Transmitting agent (its encoder produces the messages)
        rx: Receiving agent (its decoder produces the decisions)
        eq: Equalizer built from anchors of tx and rx over one shared support
        test_data: Labelled samples

    Returns:
        EvaluationReport with one record per test sample

    Raises:
        InvalidConfigurationError: If the equalizer's anchors were not encoded by tx and rx
    """
    check_provenance(tx, eq.transmitter_anchors, "transmitter")
    check_provenance(rx, eq.receiver_anchors, "receiver")
    if test_data.input_dim != tx.encoder.input_dim or test_data.input_dim != rx.encoder.input_dim:
        raise InvalidArgumentError("test samples do not match the agents' input dimension")

    labels = test_data.labels
    z_theta = encode(tx.encoder, test_data.samples)
    z_gamma = encode(rx.encoder, test_data.samples)

    matched = decode(rx.decoder, z_gamma)
    unequalized = None
    if tx.encoder.latent_dim == rx.encoder.latent_dim:
        unequalized = float(np.mean(decode(rx.decoder, z_theta) == labels))

    z_hat = equalize_batch(z_theta, eq)
    predicted = decode(rx.decoder, z_hat)
    diff = z_hat - z_gamma
    errors = np.sum(diff * diff, axis=-1)
    agreements = (predicted == matched).astype(np.int64)

    records = tuple(
        SampleRecord(float(e), int(g), int(t), int(p))
        for e, g, t, p in zip(errors, agreements, labels, predicted)
    )
    report = EvaluationReport(
        matched_accuracy=float(np.mean(matched == labels)),
        cross_accuracy_unequalized=unequalized,
        cross_accuracy_equalized=float(np.mean(predicted == labels)),
        decoder_agreement=float(np.mean(agreements)),
        mean_reconstruction_error=float(np.mean(errors)),
        anchor_count=eq.receiver_anchors.count,
        per_sample_records=records,
    )
    logger.info(
        "%s -> %s (%s, %s, %d anchors): matched %.4f, equalized %.4f, agreement %.4f",
        tx.id,
        rx.id,
        eq.similarity.value,
        eq.inverse_method.value,
        report.anchor_count,
        report.matched_accuracy,
        report.cross_accuracy_equalized,
        report.decoder_agreement,
    )
    return report
