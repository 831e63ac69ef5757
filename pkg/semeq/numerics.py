"""
Linear algebra, least squares, the Adam optimizer and finite differences.

Everything here works on float64 numpy arrays and is a pure function of its
inputs, so the helpers are safe to share across threads.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from typing import Callable, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy import linalg
from scipy.linalg import lapack

from semeq.errors import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)

RealMatrix = npt.NDArray[np.float64]
RealVector = npt.NDArray[np.float64]

DEFAULT_LEARNING_RATE = 0.01
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8

# Above this estimate the Gram matrix is treated as singular.
GRAM_CONDITION_LIMIT = 1e12

SEED_MASK = (1 << 63) - 1


def as_matrix(data: npt.ArrayLike, name: str = "matrix") -> RealMatrix:
    """
    Build a validated RealMatrix from array-like data.

    Args:
        data: Anything numpy can turn into a 2-D array
        name: Name used in error messages

    Returns:
        A float64 2-D array with only finite entries

    Raises:
        InvalidArgumentError: If the data is not 2-D or holds NaN/Inf
    """
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return matrix


def as_vector(data: npt.ArrayLike, name: str = "vector") -> RealVector:
    """Build a validated 1-D float64 vector; see as_matrix."""
    vector = np.asarray(data, dtype=np.float64)
    if vector.ndim != 1:
        raise InvalidArgumentError(f"{name} must be 1-D, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return vector


def least_squares_solve(a: npt.ArrayLike, b: npt.ArrayLike) -> np.ndarray:
    """
    Solve min ||a x - b||^2, returning the minimum-norm minimizer.

    Well-conditioned problems go through the normal equations with a Cholesky
    solve. When the Cholesky factorization fails, or the LAPACK condition
    estimate of the Gram matrix exceeds GRAM_CONDITION_LIMIT, the SVD-based scipy
    solver is used instead.

    Args:
        a: Design matrix of shape (m, n)
        b: Right-hand side of length m, or an (m, k) matrix of k right-hand sides

    Returns:
        Solution of length n (or shape (n, k) for matrix right-hand sides)

    Raises:
        InvalidArgumentError: On shape mismatch or non-finite input
    """
    a = as_matrix(a, "a")
    b = np.asarray(b, dtype=np.float64)
    if b.ndim not in (1, 2) or b.shape[0] != a.shape[0]:
        raise InvalidArgumentError(
            f"right-hand side of shape {b.shape} does not match matrix of shape {a.shape}"
        )
    if not np.all(np.isfinite(b)):
        raise InvalidArgumentError("right-hand side contains non-finite entries")

    rows, cols = a.shape
    gram_condition = np.inf
    if rows >= cols:
        gram = a.T @ a
        try:
            factor = linalg.cho_factor(gram)
        except linalg.LinAlgError:
            logger.debug("Cholesky failed on Gram matrix, falling back to SVD solve")
        else:
            # LAPACK reciprocal 1-norm condition estimate from the factor
            uplo = "L" if factor[1] else "U"
            rcond, _ = lapack.dpocon(factor[0], np.linalg.norm(gram, 1), uplo=uplo)
            if rcond > 0.0:
                gram_condition = 1.0 / rcond
            if gram_condition <= GRAM_CONDITION_LIMIT:
                return linalg.cho_solve(factor, a.T @ b)

    logger.debug("Gram condition %.3g, using rank-revealing solve", gram_condition)
    solution, _, _, _ = linalg.lstsq(a, b)
    return solution


@dataclass(frozen=True, eq=False)
class AdamState:
    """
    Moment estimates and hyperparameters of the Adam optimizer.

    The moment arrays may have any shape; they must match the optimized variable.
    """

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    learning_rate: float = DEFAULT_LEARNING_RATE

    def __post_init__(self):
        if self.first_moment.shape != self.second_moment.shape:
            raise InvalidArgumentError("Adam moment arrays must share one shape")
        if self.step_count < 0:
            raise InvalidArgumentError("step_count must be non-negative")
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise InvalidArgumentError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0.0 or self.learning_rate <= 0.0:
            raise InvalidArgumentError("epsilon and learning_rate must be positive")

    @classmethod
    def fresh(
        cls,
        shape: Union[int, Tuple[int, ...]],
        learning_rate: float = DEFAULT_LEARNING_RATE,
        beta1: float = DEFAULT_BETA1,
        beta2: float = DEFAULT_BETA2,
        epsilon: float = DEFAULT_EPSILON,
    ) -> "AdamState":
        """Zero-moment state for a variable of the given shape."""
        return cls(
            first_moment=np.zeros(shape, dtype=np.float64),
            second_moment=np.zeros(shape, dtype=np.float64),
            step_count=0,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
            learning_rate=learning_rate,
        )


def adam_step(
    state: AdamState, gradient: npt.ArrayLike, variable: npt.ArrayLike
) -> Tuple[AdamState, np.ndarray]:
    """
    Apply one bias-corrected Adam update.

    Args:
        state: Current optimizer state
        gradient: Gradient of the objective at `variable`
        variable: Current value of the optimized variable

    Returns:
        Tuple of (next state, updated variable). Inputs are not modified.

    Raises:
        InvalidArgumentError: If shapes disagree
        NumericError: If the gradient holds NaN or Inf
    """
    gradient = np.asarray(gradient, dtype=np.float64)
    variable = np.asarray(variable, dtype=np.float64)
    if gradient.shape != variable.shape or gradient.shape != state.first_moment.shape:
        raise InvalidArgumentError(
            f"gradient {gradient.shape}, variable {variable.shape} and moments "
            f"{state.first_moment.shape} must share one shape"
        )
    if not np.all(np.isfinite(gradient)):
        raise NumericError("Adam received a non-finite gradient")

    step = state.step_count + 1
    first = state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient
    second = state.beta2 * state.second_moment + (1.0 - state.beta2) * (gradient * gradient)
    first_hat = first / (1.0 - state.beta1**step)
    second_hat = second / (1.0 - state.beta2**step)
    updated = variable - state.learning_rate * first_hat / (np.sqrt(second_hat) + state.epsilon)

    next_state = replace(state, first_moment=first, second_moment=second, step_count=step)
    return next_state, updated


def finite_diff_gradient(
    f: Callable[[RealVector], float], x: npt.ArrayLike, h: float = 1e-5
) -> RealVector:
    """Central-difference gradient estimate of `f` at `x` with step `h`."""
    if h <= 0.0:
        raise InvalidArgumentError("finite-difference step must be positive")
    x = as_vector(x, "x")
    gradient = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        gradient[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return gradient


def relative_error(actual: npt.ArrayLike, expected: npt.ArrayLike, floor: float = 1e-12) -> float:
    """||actual - expected|| / max(||expected||, floor)."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    return float(np.linalg.norm(actual - expected) / max(np.linalg.norm(expected), floor))


def derive_seed(*parts: object) -> int:
    """
    Derive a 63-bit seed from a tuple of settings.

    The seed is the first 8 bytes of SHA-256 over the JSON encoding of `parts`,
    read little-endian and masked to 63 bits. Parts must be JSON-serializable.
    """
    payload = json.dumps(list(parts), sort_keys=True, separators=(",", ":")).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little") & SEED_MASK
