"""
Pseudo-inverses of the relative projection.

`gradient_inverse` minimizes ||R(z) - target||^2 with Adam from a seeded random
start and works for any similarity kind. `closed_form_cosine_inverse` solves
the cosine case as a least-squares problem on the row-normalized anchor matrix.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt

from semeq.errors import DegenerateAnchorsError, InvalidArgumentError, NumericError
from semeq.numerics import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPSILON,
    AdamState,
    adam_step,
    as_matrix,
    as_vector,
    least_squares_solve,
)
from semeq.relative import AbsoluteAnchors, RelativeVector, SimilarityKind, similarity_matrix

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 1000
DEFAULT_INVERSE_LEARNING_RATE = 0.1
DEFAULT_EARLY_STOP_LOSS = 1e-12


@dataclass(frozen=True)
class InverseConfig:
    """
    Settings of the gradient inverse.

    The Adam step is measured in units of the largest anchor norm r: the
    optimizer works on u = z / r, starting from u ~ Uniform([-1, 1]^d).
    `restarts` independent starts are run per sample and the lowest loss wins.
    """

    max_iterations: int = DEFAULT_MAX_ITERATIONS
    learning_rate: float = DEFAULT_INVERSE_LEARNING_RATE
    init_seed: int = 0
    early_stop_loss: float = DEFAULT_EARLY_STOP_LOSS
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    restarts: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be at least 1")
        if self.restarts < 1:
            raise InvalidArgumentError("restarts must be at least 1")
        if self.learning_rate <= 0.0 or self.epsilon <= 0.0:
            raise InvalidArgumentError("learning_rate and epsilon must be positive")
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise InvalidArgumentError("beta1 and beta2 must lie in (0, 1)")
        if self.early_stop_loss < 0.0:
            raise InvalidArgumentError("early_stop_loss must be non-negative")


@dataclass(frozen=True, eq=False)
class InverseResult:
    z_hat: np.ndarray
    final_loss: float
    iterations_used: int
    initial_loss: float


def _check_target(target: RelativeVector, anchors: AbsoluteAnchors):
    if len(target) != anchors.count:
        raise InvalidArgumentError(
            f"relative vector has {len(target)} entries but there are {anchors.count} anchors"
        )


def _loss_rows(
    batch: np.ndarray, targets: np.ndarray, anchors: AbsoluteAnchors, psi: SimilarityKind
) -> np.ndarray:
    residual = similarity_matrix(batch, anchors, psi) - targets
    return np.sum(residual * residual, axis=-1)


def _gradient_rows(
    batch: np.ndarray, targets: np.ndarray, anchors: AbsoluteAnchors, psi: SimilarityKind
) -> np.ndarray:
    # Reductions run over the last axis only, so each row depends on its own inputs.
    similarities = similarity_matrix(batch, anchors, psi)
    residual = similarities - targets
    anchors_t = anchors.matrix.T[np.newaxis, :, :]

    if psi is SimilarityKind.NORMALIZED_EUCLIDEAN:
        mean_norm = anchors.mean_norm
        positive = similarities > 0.0
        coef = np.where(
            positive,
            2.0 * residual / (mean_norm * mean_norm * np.where(positive, similarities, 1.0)),
            0.0,
        )
        pulled = np.sum(coef[:, np.newaxis, :] * anchors_t, axis=-1)
        gradient = np.sum(coef, axis=-1)[:, np.newaxis] * batch - pulled
    else:
        norms = np.sqrt(np.sum(batch * batch, axis=-1))
        positive = norms > 0.0
        safe_norms = np.where(positive, norms, 1.0)[:, np.newaxis]
        unit_anchors_t = anchors_t / anchors.row_norms[np.newaxis, np.newaxis, :]
        toward_anchors = np.sum(residual[:, np.newaxis, :] * unit_anchors_t, axis=-1)
        radial = np.sum(residual * similarities, axis=-1)[:, np.newaxis] * (batch / safe_norms)
        scaled = 2.0 * (toward_anchors - radial) / safe_norms
        gradient = np.where(positive[:, np.newaxis], scaled, 0.0)

    if not np.all(np.isfinite(gradient)):
        raise NumericError("relative loss gradient is not finite")
    return gradient


def relrep_loss(z: npt.ArrayLike, target: RelativeVector, anchors: AbsoluteAnchors) -> float:
    """
    Squared error ||project(z, anchors, psi) - target||^2, psi taken from `target`.

    Raises:
        InvalidArgumentError: On dimension or anchor-count mismatch
    """
    z = as_vector(z, "z")
    if z.size != anchors.latent_dim:
        raise InvalidArgumentError(
            f"latent dimension {z.size} does not match anchor dimension {anchors.latent_dim}"
        )
    _check_target(target, anchors)
    losses = _loss_rows(z[np.newaxis, :], target.values[np.newaxis, :], anchors, target.similarity)
    return float(losses[0])


def relrep_loss_gradient(
    z: npt.ArrayLike, target: RelativeVector, anchors: AbsoluteAnchors
) -> np.ndarray:
    """
    Analytic gradient of relrep_loss with respect to z.

    Distance terms whose anchor coincides with z, and every cosine term at z = 0,
    contribute a zero subgradient.

    Raises:
        InvalidArgumentError: On dimension or anchor-count mismatch
        NumericError: If an intermediate value is not finite
    """
    z = as_vector(z, "z")
    if z.size != anchors.latent_dim:
        raise InvalidArgumentError(
            f"latent dimension {z.size} does not match anchor dimension {anchors.latent_dim}"
        )
    _check_target(target, anchors)
    batch, targets = z[np.newaxis, :], target.values[np.newaxis, :]
    return _gradient_rows(batch, targets, anchors, target.similarity)[0]


def _initial_points(n_samples: int, latent_dim: int, config: InverseConfig) -> np.ndarray:
    starts = np.empty((n_samples, config.restarts, latent_dim))
    for sample in range(n_samples):
        rng = np.random.default_rng(config.init_seed + sample)
        starts[sample] = rng.uniform(-1.0, 1.0, size=(config.restarts, latent_dim))
    return starts.reshape(n_samples * config.restarts, latent_dim)


def invert_batch(
    targets: npt.ArrayLike,
    anchors: AbsoluteAnchors,
    psi: SimilarityKind,
    config: InverseConfig = InverseConfig(),
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradient inverse of every row of `targets` (n x |A|).

    Sample i draws its starting points from a generator seeded with
    `config.init_seed + i`, so each row's result is independent of the batch it
    is computed in.

    Returns:
        Tuple (z_hat n x d, final losses, iterations used, initial losses)
    """
    psi = SimilarityKind(psi)
    targets = as_matrix(targets, "targets")
    if targets.shape[1] != anchors.count:
        raise InvalidArgumentError(
            f"targets have {targets.shape[1]} columns but there are {anchors.count} anchors"
        )
    n_samples, restarts = targets.shape[0], config.restarts
    radius = float(np.max(anchors.row_norms))

    u = _initial_points(n_samples, anchors.latent_dim, config)
    repeated = np.repeat(targets, restarts, axis=0)
    first = np.zeros_like(u)
    second = np.zeros_like(u)

    initial = _loss_rows(radius * u, repeated, anchors, psi)
    best_loss = initial.copy()
    best_u = u.copy()
    iterations = np.zeros(u.shape[0], dtype=np.int64)
    active = best_loss >= config.early_stop_loss

    for step in range(config.max_iterations):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        gradient = radius * _gradient_rows(radius * u[rows], repeated[rows], anchors, psi)
        state = AdamState(
            first_moment=first[rows],
            second_moment=second[rows],
            step_count=step,
            beta1=config.beta1,
            beta2=config.beta2,
            epsilon=config.epsilon,
            learning_rate=config.learning_rate,
        )
        state, moved = adam_step(state, gradient, u[rows])
        first[rows] = state.first_moment
        second[rows] = state.second_moment
        u[rows] = moved
        iterations[rows] += 1

        losses = _loss_rows(radius * moved, repeated[rows], anchors, psi)
        improved = losses < best_loss[rows]
        best_loss[rows[improved]] = losses[improved]
        best_u[rows[improved]] = moved[improved]
        active[rows[losses < config.early_stop_loss]] = False

    winners = np.argmin(best_loss.reshape(n_samples, restarts), axis=1)
    chosen = np.arange(n_samples) * restarts + winners
    z_hat = radius * best_u[chosen]
    final = _loss_rows(z_hat, targets, anchors, psi)
    logger.debug(
        "Inverted %d targets (%s, %d anchors): mean loss %.3g, %d below early-stop",
        n_samples,
        psi.value,
        anchors.count,
        float(np.mean(final)) if n_samples else 0.0,
        int(np.sum(final < config.early_stop_loss)),
    )
    return z_hat, final, iterations[chosen], initial[np.arange(n_samples) * restarts]


def gradient_inverse(
    target: RelativeVector, anchors: AbsoluteAnchors, config: InverseConfig = InverseConfig()
) -> InverseResult:
    """
    Find a receiver latent whose relative representation matches `target`.

    Runs Adam on the relative squared error for at most config.max_iterations
    steps, stopping early once the loss drops below config.early_stop_loss.
    Non-convergence is reported through final_loss, never raised.

    Args:
        target: Relative vector to invert; its similarity kind selects psi
        anchors: Receiver anchor set
        config: Optimizer settings

    Returns:
        InverseResult with the lowest-loss iterate visited
    """
    _check_target(target, anchors)
    z_hat, final, iterations, initial = invert_batch(
        target.values[np.newaxis, :], anchors, target.similarity, config
    )
    return InverseResult(
        z_hat=z_hat[0],
        final_loss=float(final[0]),
        iterations_used=int(iterations[0]),
        initial_loss=float(initial[0]),
    )


def _normalized_anchor_matrix(anchors: AbsoluteAnchors) -> np.ndarray:
    if anchors.count < anchors.latent_dim:
        raise InvalidArgumentError(
            f"closed-form inverse needs at least {anchors.latent_dim} anchors, got {anchors.count}"
        )
    normalized = anchors.matrix / anchors.row_norms[:, np.newaxis]
    if np.linalg.matrix_rank(normalized) < anchors.latent_dim:
        raise DegenerateAnchorsError("row-normalized anchor matrix is rank deficient")
    return normalized


def closed_form_cosine_inverse_batch(
    targets: npt.ArrayLike, anchors: AbsoluteAnchors
) -> np.ndarray:
    """
    Closed-form cosine inverse of every row of `targets` (n x |A|).

    Each row solves normalized_anchors @ z = target in the least-squares sense
    and is rescaled to the anchors' mean norm.
    """
    targets = as_matrix(targets, "targets")
    if targets.shape[1] != anchors.count:
        raise InvalidArgumentError(
            f"targets have {targets.shape[1]} columns but there are {anchors.count} anchors"
        )
    normalized = _normalized_anchor_matrix(anchors)
    directions = least_squares_solve(normalized, targets.T).T
    norms = np.sqrt(np.sum(directions * directions, axis=-1))
    if np.any(norms == 0.0):
        raise InvalidArgumentError("a cosine target carries no direction to recover")
    return directions * (anchors.mean_norm / norms)[:, np.newaxis]


def closed_form_cosine_inverse(target: RelativeVector, anchors: AbsoluteAnchors) -> np.ndarray:
    """
    Closed-form pseudo-inverse of a cosine relative vector.

    Only the direction is recoverable; the result is scaled to the anchors'
    mean norm.

    Raises:
        InvalidArgumentError: If the target is not cosine or |A| < latent_dim
        DegenerateAnchorsError: If the row-normalized anchors are rank deficient
    """
    if target.similarity is not SimilarityKind.COSINE:
        raise InvalidArgumentError("the closed-form inverse only applies to cosine targets")
    _check_target(target, anchors)
    return closed_form_cosine_inverse_batch(target.values[np.newaxis, :], anchors)[0]
