"""
Linear-softmax decoders trained by full-batch Adam on cross-entropy.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import numpy.typing as npt

from semeq.agents.datasets import Dataset
from semeq.agents.encoders import Encoder, encode
from semeq.errors import InvalidArgumentError
from semeq.numerics import AdamState, RealMatrix, adam_step, as_matrix, as_vector

logger = logging.getLogger(__name__)

DEFAULT_EPOCHS = 300
DEFAULT_DECODER_LEARNING_RATE = 0.05
INIT_WEIGHT_SCALE = 0.01


@dataclass(frozen=True, eq=False)
class Decoder:
    """Class scores `weights @ z + bias`; the decision is their argmax."""

    weights: RealMatrix
    bias: np.ndarray

    def __post_init__(self):
        weights = as_matrix(self.weights, "decoder weights")
        bias = as_vector(self.bias, "decoder bias")
        if weights.shape[0] < 2:
            raise InvalidArgumentError("a decoder needs at least two classes")
        if bias.shape != (weights.shape[0],):
            raise InvalidArgumentError(
                f"decoder bias of shape {bias.shape} does not match {weights.shape[0]} classes"
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def class_count(self) -> int:
        return int(self.weights.shape[0])

    @property
    def latent_dim(self) -> int:
        return int(self.weights.shape[1])


def init_decoder(latent_dim: int, class_count: int, seed: int) -> Decoder:
    """Untrained decoder: small seeded Gaussian weights and zero bias."""
    rng = np.random.default_rng(seed)
    weights = INIT_WEIGHT_SCALE * rng.standard_normal((class_count, latent_dim))
    return Decoder(weights=weights, bias=np.zeros(class_count))


def _as_batch(decoder: Decoder, z: npt.ArrayLike) -> Tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    batch = z[np.newaxis, :] if single else z
    if batch.ndim != 2 or batch.shape[1] != decoder.latent_dim:
        raise InvalidArgumentError(
            f"decoder expects latents of dimension {decoder.latent_dim}, got shape {z.shape}"
        )
    return batch, single


def decoder_logits(decoder: Decoder, z: npt.ArrayLike) -> np.ndarray:
    batch, single = _as_batch(decoder, z)
    scores = batch @ decoder.weights.T + decoder.bias
    return scores[0] if single else scores


def decode(decoder: Decoder, z: npt.ArrayLike) -> Union[int, np.ndarray]:
    """
    Decide a label for a latent (1-D) or for each row of a batch (2-D).

    Ties go to the lowest class index.
    """
    batch, single = _as_batch(decoder, z)
    labels = np.argmax(batch @ decoder.weights.T + decoder.bias, axis=1)
    return int(labels[0]) if single else labels


def accuracy(decoder: Decoder, latents: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """Fraction of rows of `latents` decoded to their label."""
    predictions = decode(decoder, as_matrix(latents, "latents"))
    return float(np.mean(predictions == np.asarray(labels)))


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def cross_entropy_loss(decoder: Decoder, latents: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """Mean cross-entropy of the decoder's softmax over a labelled batch."""
    scores = decoder_logits(decoder, as_matrix(latents, "latents"))
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    labels = np.asarray(labels, dtype=np.int64)
    return float(-np.mean(log_probs[np.arange(labels.size), labels]))


def cross_entropy_gradient(
    decoder: Decoder, latents: npt.ArrayLike, labels: npt.ArrayLike
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of cross_entropy_loss with respect to (weights, bias)."""
    latents = as_matrix(latents, "latents")
    labels = np.asarray(labels, dtype=np.int64)
    probs = _softmax(decoder_logits(decoder, latents))
    probs[np.arange(labels.size), labels] -= 1.0
    probs /= labels.size
    return probs.T @ latents, probs.sum(axis=0)


def train_decoder(
    encoder: Encoder,
    data: Dataset,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_DECODER_LEARNING_RATE,
    seed: int = 0,
) -> Decoder:
    """
    Train a multinomial-logistic decoder on top of a frozen encoder.

    Args:
        encoder: Encoder producing the training latents
        data: Labelled training data
        epochs: Number of full-batch Adam steps (at least 1)
        lr: Adam learning rate
        seed: Seed of the initial weights; equal inputs give bit-identical decoders

    Returns:
        The trained Decoder

    Raises:
        InvalidArgumentError: If epochs < 1 or the data has a single class
    """
    if epochs < 1:
        raise InvalidArgumentError("epochs must be at least 1")
    if data.class_count < 2:
        raise InvalidArgumentError("decoder training needs at least two classes")

    latents = encode(encoder, data.samples)
    decoder = init_decoder(encoder.latent_dim, data.class_count, seed)
    shape = decoder.weights.shape
    split = shape[0] * shape[1]
    params = np.concatenate([decoder.weights.ravel(), decoder.bias])
    state = AdamState.fresh(params.size, learning_rate=lr)

    for _ in range(epochs):
        grad_weights, grad_bias = cross_entropy_gradient(decoder, latents, data.labels)
        state, params = adam_step(state, np.concatenate([grad_weights.ravel(), grad_bias]), params)
        decoder = Decoder(weights=params[:split].reshape(shape), bias=params[split:])

    logger.debug(
        "Trained decoder on %s: loss %.4g, accuracy %.4f",
        encoder.name,
        cross_entropy_loss(decoder, latents, data.labels),
        accuracy(decoder, latents, data.labels),
    )
    return decoder
