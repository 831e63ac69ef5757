"""
Seeded synthetic encoders: orthogonal, affine and two-layer tanh networks.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import numpy.typing as npt

from semeq.errors import InvalidArgumentError
from semeq.numerics import as_matrix, as_vector

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOLERANCE = 1e-10
AFFINE_CONDITION_LIMIT = 1e6
MAX_AFFINE_DRAWS = 100


class EncoderKind(str, Enum):
    ORTHOGONAL = "orthogonal"
    AFFINE = "affine"
    MLP = "mlp"


@dataclass(frozen=True, eq=False)
class Encoder:
    """
    A deterministic map from input space to a latent space.

    `weights`/`bias` hold the only layer of the linear kinds and the hidden layer
    of the mlp kind; `output_weights`/`output_bias` hold the mlp output layer.
    Every output is multiplied by the positive `scale`.
    """

    kind: EncoderKind
    input_dim: int
    latent_dim: int
    seed: int
    weights: np.ndarray
    bias: np.ndarray
    output_weights: Optional[np.ndarray] = None
    output_bias: Optional[np.ndarray] = None
    scale: float = 1.0

    def __post_init__(self):
        kind = EncoderKind(self.kind)
        object.__setattr__(self, "kind", kind)
        weights = as_matrix(self.weights, "encoder weights")
        bias = as_vector(self.bias, "encoder bias")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        if self.scale <= 0.0 or not np.isfinite(self.scale):
            raise InvalidArgumentError("encoder scale must be a positive finite number")

        if kind is EncoderKind.MLP:
            if self.output_weights is None or self.output_bias is None:
                raise InvalidArgumentError("mlp encoders need an output layer")
            output_weights = as_matrix(self.output_weights, "encoder output weights")
            output_bias = as_vector(self.output_bias, "encoder output bias")
            object.__setattr__(self, "output_weights", output_weights)
            object.__setattr__(self, "output_bias", output_bias)
            expected = [
                (weights.shape, (weights.shape[0], self.input_dim)),
                (bias.shape, (weights.shape[0],)),
                (output_weights.shape, (self.latent_dim, weights.shape[0])),
                (output_bias.shape, (self.latent_dim,)),
            ]
        else:
            expected = [
                (weights.shape, (self.latent_dim, self.input_dim)),
                (bias.shape, (self.latent_dim,)),
            ]
        for actual, wanted in expected:
            if actual != wanted:
                raise InvalidArgumentError(
                    f"{kind.value} encoder parameter shape {actual} != {wanted}"
                )

        if kind is EncoderKind.ORTHOGONAL:
            if self.input_dim != self.latent_dim:
                raise InvalidArgumentError("orthogonal encoders need input_dim == latent_dim")
            gram_error = np.max(np.abs(weights.T @ weights - np.eye(self.input_dim)))
            if gram_error >= ORTHOGONALITY_TOLERANCE:
                raise InvalidArgumentError(f"weights are not orthogonal (error {gram_error:.3g})")

    @property
    def name(self) -> str:
        """Stable identifier built from kind, dimensions, seed and scale."""
        name = f"{self.kind.value}-{self.input_dim}x{self.latent_dim}-s{self.seed}"
        if self.scale != 1.0:
            name += f"-c{self.scale:g}"
        return name

    @property
    def hidden_dim(self) -> Optional[int]:
        return int(self.weights.shape[0]) if self.kind is EncoderKind.MLP else None


def make_encoder(
    kind,
    input_dim: int,
    latent_dim: int,
    seed: int,
    scale: float = 1.0,
) -> Encoder:
    """
    Draw a random encoder of the given kind.

    - orthogonal: Q from the QR decomposition of a seeded Gaussian matrix, with the
      signs fixed so Q is Haar-distributed.
    - affine: Gaussian matrix scaled by 1/sqrt(input_dim), redrawn while its
      condition estimate exceeds 1e6, plus a Gaussian bias.
    - mlp: linear -> tanh -> linear with hidden width 2 * latent_dim and
      fan-in-scaled Gaussian weights.

    Args:
        kind: An EncoderKind or its string value
        input_dim: Input dimension
        latent_dim: Latent dimension
        seed: Seed of the parameter draw
        scale: Positive factor applied to every output

    Returns:
        The Encoder

    Raises:
        InvalidArgumentError: For orthogonal kinds with input_dim != latent_dim
    """
    kind = EncoderKind(kind)
    if input_dim < 1 or latent_dim < 1:
        raise InvalidArgumentError("encoder dimensions must be at least 1")
    rng = np.random.default_rng(seed)

    if kind is EncoderKind.ORTHOGONAL:
        if input_dim != latent_dim:
            raise InvalidArgumentError(
                f"orthogonal encoder needs input_dim == latent_dim, got {input_dim} != {latent_dim}"
            )
        q, r = np.linalg.qr(rng.standard_normal((input_dim, input_dim)))
        signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
        return Encoder(
            kind=kind,
            input_dim=input_dim,
            latent_dim=latent_dim,
            seed=seed,
            weights=q * signs,
            bias=np.zeros(latent_dim),
            scale=scale,
        )

    if kind is EncoderKind.AFFINE:
        for attempt in range(MAX_AFFINE_DRAWS):
            weights = rng.standard_normal((latent_dim, input_dim)) / np.sqrt(input_dim)
            condition = np.linalg.cond(weights)
            if condition <= AFFINE_CONDITION_LIMIT:
                break
            logger.debug("Affine draw %d rejected, condition %.3g", attempt, condition)
        else:
            raise InvalidArgumentError(
                f"no affine matrix with condition <= {AFFINE_CONDITION_LIMIT:g} "
                f"after {MAX_AFFINE_DRAWS} draws"
            )
        bias = rng.standard_normal(latent_dim)
        return Encoder(
            kind=kind,
            input_dim=input_dim,
            latent_dim=latent_dim,
            seed=seed,
            weights=weights,
            bias=bias,
            scale=scale,
        )

    hidden_dim = 2 * latent_dim
    return Encoder(
        kind=kind,
        input_dim=input_dim,
        latent_dim=latent_dim,
        seed=seed,
        weights=rng.standard_normal((hidden_dim, input_dim)) / np.sqrt(input_dim),
        bias=0.1 * rng.standard_normal(hidden_dim),
        output_weights=rng.standard_normal((latent_dim, hidden_dim)) / np.sqrt(hidden_dim),
        output_bias=0.1 * rng.standard_normal(latent_dim),
        scale=scale,
    )


def encode(encoder: Encoder, x: npt.ArrayLike) -> np.ndarray:
    """
    Map a sample (1-D) or a batch (2-D, one sample per row) to latent space.

    Raises:
        InvalidArgumentError: If the sample dimension is not encoder.input_dim
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[np.newaxis, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != encoder.input_dim:
        raise InvalidArgumentError(
            f"encoder expects inputs of dimension {encoder.input_dim}, got shape {x.shape}"
        )

    if encoder.kind is EncoderKind.MLP:
        hidden = np.tanh(batch @ encoder.weights.T + encoder.bias)
        latents = hidden @ encoder.output_weights.T + encoder.output_bias
    else:
        latents = batch @ encoder.weights.T + encoder.bias
    latents = encoder.scale * latents
    return latents[0] if single else latents
