"""
Grid sweeps over anchor settings and their analysis.

Every cell derives its own seeds from (run seed, cell settings), so cells can
run in any order and on any thread with identical results.
"""

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from semeq.agents.agent import Agent
from semeq.agents.datasets import Dataset
from semeq.anchors.selection import DEFAULT_SUPPORT_SIZE, AnchorMethod, select_support
from semeq.errors import InvalidArgumentError, InvalidConfigurationError
from semeq.evaluation.pipeline import (
    EvaluationReport,
    InverseMethod,
    build_equalizer,
    evaluate_pair,
)
from semeq.inverse import InverseConfig
from semeq.numerics import derive_seed
from semeq.relative import SimilarityKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class SweepCell:
    """One grid point; cells sort by (anchor_method, anchor_count, inverse_method, seed)."""

    anchor_method: str
    anchor_count: int
    inverse_method: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "anchor_method", AnchorMethod(self.anchor_method).value)
        object.__setattr__(self, "inverse_method", InverseMethod(self.inverse_method).value)
        if self.anchor_count < 1:
            raise InvalidArgumentError("anchor_count must be at least 1")

    def support_seed(self) -> int:
        return derive_seed(self.seed, "support", self.anchor_method, self.anchor_count)

    def inverse_seed(self, similarity: SimilarityKind) -> int:
        return derive_seed(
            self.seed,
            "inverse",
            SimilarityKind(similarity).value,
            self.anchor_method,
            self.anchor_count,
            self.inverse_method,
        )


@dataclass(frozen=True, eq=False)
class SweepRow:
    tx_id: str
    rx_id: str
    similarity: SimilarityKind
    cell: SweepCell
    report: EvaluationReport


def evaluate_cell(
    tx: Agent,
    rx: Agent,
    cell: SweepCell,
    similarity: SimilarityKind,
    test_data: Dataset,
    anchor_data: Optional[Dataset] = None,
    support_size: int = DEFAULT_SUPPORT_SIZE,
    base_config: InverseConfig = InverseConfig(),
) -> SweepRow:
    """
    Evaluate one grid cell.

    The support is drawn from `anchor_data` (default: `test_data`) with seed
    `cell.support_seed()`; prototypical anchors cluster the transmitter's latent
    space. The inverse starts from `cell.inverse_seed(similarity)`.
    """
    similarity = SimilarityKind(similarity)
    anchor_data = test_data if anchor_data is None else anchor_data
    support = select_support(
        cell.anchor_method,
        tx.encoder,
        anchor_data,
        cell.anchor_count,
        m_per_cluster=support_size,
        seed=cell.support_seed(),
    )
    config = replace(base_config, init_seed=cell.inverse_seed(similarity))
    equalizer = build_equalizer(tx, rx, support, similarity, cell.inverse_method, config)
    report = evaluate_pair(tx, rx, equalizer, test_data)
    return SweepRow(tx_id=tx.id, rx_id=rx.id, similarity=similarity, cell=cell, report=report)


def sweep_anchor_counts(
    tx: Agent,
    rx: Agent,
    counts: Sequence[int],
    methods: Sequence[AnchorMethod],
    similarity: SimilarityKind,
    inverse_methods: Sequence[InverseMethod],
    seeds: Sequence[int],
    test_data: Dataset,
    anchor_data: Optional[Dataset] = None,
    support_size: int = DEFAULT_SUPPORT_SIZE,
    base_config: InverseConfig = InverseConfig(),
    workers: int = 1,
) -> List[SweepRow]:
    """
    Evaluate the Cartesian product of anchor methods, counts, inverse methods and seeds.

    Args:
        tx: Transmitting agent
        rx: Receiving agent
        counts: Anchor counts
        methods: Anchor selection methods
        similarity: Similarity kind shared by every cell
        inverse_methods: Inverse methods
        seeds: Run seeds; each cell derives its own seeds from one of them
        test_data: Evaluation samples
        anchor_data: Samples the supports are drawn from (default: test_data)
        support_size: Samples per prototypical group (M)
        base_config: Inverse settings; init_seed is replaced per cell
        workers: Number of worker threads

    Returns:
        One SweepRow per cell, sorted by cell

    Raises:
        InvalidArgumentError: If any axis of the grid is empty or workers < 1
        InvalidConfigurationError: If the closed-form inverse is paired with a
            non-cosine similarity
    """
    similarity = SimilarityKind(similarity)
    if not counts or not methods or not inverse_methods or not seeds:
        raise InvalidArgumentError("every sweep axis needs at least one value")
    if workers < 1:
        raise InvalidArgumentError("workers must be at least 1")
    inverse_methods = [InverseMethod(m) for m in inverse_methods]
    closed_form = InverseMethod.CLOSED_FORM_COSINE in inverse_methods
    if closed_form and similarity is not SimilarityKind.COSINE:
        raise InvalidConfigurationError("the closed-form inverse requires cosine similarity")

    cells = sorted(
        {
            SweepCell(AnchorMethod(method).value, int(count), inverse.value, int(seed))
            for method in methods
            for count in counts
            for inverse in inverse_methods
            for seed in seeds
        }
    )
    logger.info("Sweeping %d cells on %d worker(s)", len(cells), workers)

    def run(cell: SweepCell) -> SweepRow:
        return evaluate_cell(
            tx, rx, cell, similarity, test_data, anchor_data, support_size, base_config
        )

    if workers == 1:
        return [run(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        # map preserves the input order
        return list(executor.map(run, cells))


def mean_accuracy_by_setting(rows: Sequence[SweepRow]) -> Dict[Tuple[str, int, str], float]:
    """Equalized accuracy averaged over seeds, keyed by (anchor method, count, inverse method)."""
    grouped = defaultdict(list)
    for row in rows:
        key = (row.cell.anchor_method, row.cell.anchor_count, row.cell.inverse_method)
        grouped[key].append(row.report.cross_accuracy_equalized)
    return {key: float(np.mean(values)) for key, values in sorted(grouped.items())}


def _spearman(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    if x.size < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    rho = stats.spearmanr(x, y)[0]
    return None if np.isnan(rho) else float(rho)


def error_accuracy_correlation(rows: Sequence[SweepRow]) -> Optional[float]:
    """
    Spearman correlation between cell mean g_se and equalized accuracy.

    Returns None when fewer than two cells exist or either series is constant.
    """
    errors = np.array([row.report.mean_reconstruction_error for row in rows])
    accuracies = np.array([row.report.cross_accuracy_equalized for row in rows])
    return _spearman(errors, accuracies)


def scatter_correlation(rows: Sequence[SweepRow]) -> Optional[float]:
    """Spearman correlation between per-sample g_se and the correct flag, pooled over cells."""
    if not rows:
        return None
    errors = np.concatenate([row.report.reconstruction_errors for row in rows])
    correct = np.concatenate([row.report.correct_flags for row in rows]).astype(np.float64)
    return _spearman(errors, correct)


def reconstruction_inversions(rows: Sequence[SweepRow]) -> List[Tuple[SweepCell, SweepCell]]:
    """
    Cell pairs (a, b) where a has the lower mean g_se yet the lower accuracy.

    These are the cells where a smaller reconstruction error did not buy a
    better decision rate.
    """
    inversions = []
    for a in rows:
        for b in rows:
            if (
                a.report.mean_reconstruction_error < b.report.mean_reconstruction_error
                and a.report.cross_accuracy_equalized < b.report.cross_accuracy_equalized
            ):
                inversions.append((a.cell, b.cell))
    return inversions
