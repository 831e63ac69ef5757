"""
Run configuration: environment settings, seed derivation and validated run bundles.
"""

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from semeq.agents.datasets import (
    STANDARD_CLASS_COUNT,
    STANDARD_INPUT_DIM,
    STANDARD_LATENT_DIM,
    STANDARD_SEPARATION,
    STANDARD_TEST_PER_CLASS,
    STANDARD_TRAIN_PER_CLASS,
    Dataset,
)
from semeq.anchors.selection import DEFAULT_SUPPORT_SIZE, AnchorMethod
from semeq.errors import InvalidConfigurationError
from semeq.evaluation.pipeline import InverseMethod
from semeq.evaluation.sweep import SweepCell
from semeq.inverse import InverseConfig
from semeq.numerics import derive_seed
from semeq.relative import SimilarityKind

__all__ = [
    "STANDARD_CLASS_COUNT",
    "STANDARD_INPUT_DIM",
    "STANDARD_LATENT_DIM",
    "STANDARD_SEPARATION",
    "STANDARD_TEST_PER_CLASS",
    "STANDARD_TRAIN_PER_CLASS",
    "RunConfig",
    "derive_seed",
    "get_thread_count",
]


def get_thread_count(threads: Optional[int] = None) -> int:
    """
    Get the sweep worker count.

    SEMEQ_THREADS caps the pool: an explicit count above it is lowered to it.

    Args:
        threads: Explicit count (defaults to env SEMEQ_THREADS, then the CPU count)

    Returns:
        A count of at least 1

    Raises:
        InvalidConfigurationError: If SEMEQ_THREADS is not a positive integer
    """
    cap = None
    raw = os.getenv("SEMEQ_THREADS")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise InvalidConfigurationError(f"SEMEQ_THREADS must be an integer, got {raw!r}")
        if cap < 1:
            raise InvalidConfigurationError("SEMEQ_THREADS must be at least 1")

    if threads is None:
        threads = cap if cap is not None else os.cpu_count() or 1
    elif cap is not None:
        threads = min(threads, cap)
    return max(1, int(threads))


@dataclass(frozen=True)
class RunConfig:
    """
    Everything an `evaluate` or `sweep` run needs, checked before any work starts.

    All per-stage seeds are derived from the entries of `seeds`.
    """

    data_dir: Path
    tx_dir: Path
    rx_dir: Path
    output_dir: Path
    anchor_methods: Tuple[AnchorMethod, ...] = (AnchorMethod.PROTOTYPICAL,)
    anchor_counts: Tuple[int, ...] = (2 * STANDARD_LATENT_DIM,)
    support_size: int = DEFAULT_SUPPORT_SIZE
    similarity: SimilarityKind = SimilarityKind.NORMALIZED_EUCLIDEAN
    inverse_methods: Tuple[InverseMethod, ...] = (InverseMethod.GRADIENT,)
    inverse_config: InverseConfig = field(default_factory=InverseConfig)
    seeds: Tuple[int, ...] = (0,)

    def validate(self) -> "RunConfig":
        """
        Check every precondition that does not need the data.

        Raises:
            InvalidConfigurationError: On an empty grid axis, a non-positive count
                or support size, or the closed-form inverse with a non-cosine similarity
        """
        if not self.anchor_methods or not self.anchor_counts:
            raise InvalidConfigurationError("the anchor grid is empty")
        if not self.inverse_methods or not self.seeds:
            raise InvalidConfigurationError("the inverse-method and seed lists must not be empty")
        if any(count < 1 for count in self.anchor_counts):
            raise InvalidConfigurationError("anchor counts must be positive")
        if self.support_size < 1:
            raise InvalidConfigurationError("support size must be at least 1")
        if any(seed < 0 for seed in self.seeds):
            raise InvalidConfigurationError("seeds must be non-negative")
        similarity = SimilarityKind(self.similarity)
        methods = [InverseMethod(m) for m in self.inverse_methods]
        if InverseMethod.CLOSED_FORM_COSINE in methods and similarity is not SimilarityKind.COSINE:
            raise InvalidConfigurationError(
                f"the closed-form inverse requires cosine similarity, got {similarity.value}"
            )
        return self

    def validate_against(self, anchor_data: Dataset) -> "RunConfig":
        """Check anchor counts against the dataset the supports are drawn from."""
        too_large = [count for count in self.anchor_counts if count > anchor_data.size]
        if too_large:
            raise InvalidConfigurationError(
                f"anchor counts {too_large} exceed the {anchor_data.size} available samples"
            )
        return self

    def cells(self) -> List[SweepCell]:
        return sorted(
            {
                SweepCell(AnchorMethod(method).value, count, InverseMethod(inverse).value, seed)
                for method in self.anchor_methods
                for count in self.anchor_counts
                for inverse in self.inverse_methods
                for seed in self.seeds
            }
        )

    def to_dict(self) -> Dict:
        data = asdict(self)
        for key in ("data_dir", "tx_dir", "rx_dir", "output_dir"):
            data[key] = str(data[key])
        data["anchor_methods"] = [AnchorMethod(m).value for m in self.anchor_methods]
        data["inverse_methods"] = [InverseMethod(m).value for m in self.inverse_methods]
        data["similarity"] = SimilarityKind(self.similarity).value
        data["anchor_counts"] = list(self.anchor_counts)
        data["seeds"] = list(self.seeds)
        return data
