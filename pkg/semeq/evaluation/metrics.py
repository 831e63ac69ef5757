"""
Equalization quality metrics.

g_se is returned as a positive squared distance: smaller is better.
"""

from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from semeq.agents.decoders import Decoder, decode
from semeq.errors import InvalidArgumentError
from semeq.numerics import as_matrix, as_vector

DEFAULT_NOISE_POWERS = tuple(float(p) for p in np.logspace(-4, 2, 25))
DEFAULT_TOLERANCE_LEVEL = 0.99


def g_se(z_hat: npt.ArrayLike, z_target: npt.ArrayLike) -> float:
    """
    Squared Euclidean reconstruction error ||z_hat - z_target||^2.

    Raises:
        InvalidArgumentError: If the vectors differ in dimension
    """
    z_hat = as_vector(z_hat, "z_hat")
    z_target = as_vector(z_target, "z_target")
    if z_hat.shape != z_target.shape:
        raise InvalidArgumentError(f"dimension mismatch: {z_hat.size} vs {z_target.size}")
    diff = z_hat - z_target
    return float(np.sum(diff * diff))


def g_go(decoder: Decoder, z_hat: npt.ArrayLike, z_target: npt.ArrayLike) -> int:
    """1 if the decoder decides the same label for both latents, else 0."""
    decided = decode(decoder, as_vector(z_hat, "z_hat"))
    return int(decided == decode(decoder, as_vector(z_target, "z_target")))


def _noise(shape, noise_power: float, seed: int) -> np.ndarray:
    # per-row E||n||^2 equals noise_power
    rng = np.random.default_rng(seed)
    return np.sqrt(noise_power / shape[1]) * rng.standard_normal(shape)


def perturbed_agreement(
    decoder: Decoder, latents: npt.ArrayLike, noise_power: float, seed: int = 0
) -> float:
    """
    Fraction of latents whose decision survives additive Gaussian noise.

    The noise is isotropic with mean squared norm `noise_power` per row and is
    drawn from a generator seeded with `seed`.
    """
    if noise_power < 0.0:
        raise InvalidArgumentError("noise_power must be non-negative")
    latents = as_matrix(latents, "latents")
    noisy = latents + _noise(latents.shape, noise_power, seed)
    return float(np.mean(decode(decoder, noisy) == decode(decoder, latents)))


def perturbed_accuracy(
    decoder: Decoder,
    latents: npt.ArrayLike,
    labels: npt.ArrayLike,
    noise_power: float,
    seed: int = 0,
) -> float:
    """Accuracy of the decoder on latents perturbed as in perturbed_agreement."""
    if noise_power < 0.0:
        raise InvalidArgumentError("noise_power must be non-negative")
    latents = as_matrix(latents, "latents")
    noisy = latents + _noise(latents.shape, noise_power, seed)
    return float(np.mean(decode(decoder, noisy) == np.asarray(labels)))


def noise_tolerance(
    decoder: Decoder,
    latents: npt.ArrayLike,
    level: float = DEFAULT_TOLERANCE_LEVEL,
    powers: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> float:
    """
    Largest tested noise power at which decisions still agree at rate `level`.

    Powers are tried in increasing order and the scan stops at the first one
    that falls below `level`. Returns 0.0 when even the smallest power fails.

    Args:
        decoder: Decoder under test
        latents: Matched latents of the decoder's own encoder
        level: Required agreement rate in (0, 1]
        powers: Candidate noise powers; DEFAULT_NOISE_POWERS when omitted
        seed: Seed of the noise draw, shared by every power
    """
    if not 0.0 < level <= 1.0:
        raise InvalidArgumentError("level must lie in (0, 1]")
    tolerated = 0.0
    for power in sorted(DEFAULT_NOISE_POWERS if powers is None else powers):
        if perturbed_agreement(decoder, latents, power, seed) < level:
            break
        tolerated = float(power)
    return tolerated
