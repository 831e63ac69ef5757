"""
Channel equalization, quality metrics and experiment sweeps.
"""

from .metrics import g_go, g_se, noise_tolerance, perturbed_accuracy, perturbed_agreement
from .pipeline import (
    EvaluationReport,
    Equalizer,
    InverseMethod,
    SampleRecord,
    build_equalizer,
    check_provenance,
    equalize,
    equalize_batch,
    evaluate_pair,
)
from .sweep import (
    SweepCell,
    SweepRow,
    error_accuracy_correlation,
    evaluate_cell,
    mean_accuracy_by_setting,
    reconstruction_inversions,
    scatter_correlation,
    sweep_anchor_counts,
)

__all__ = [
    "EvaluationReport",
    "Equalizer",
    "InverseMethod",
    "SampleRecord",
    "SweepCell",
    "SweepRow",
    "build_equalizer",
    "check_provenance",
    "equalize",
    "equalize_batch",
    "error_accuracy_correlation",
    "evaluate_cell",
    "evaluate_pair",
    "g_go",
    "g_se",
    "mean_accuracy_by_setting",
    "noise_tolerance",
    "perturbed_accuracy",
    "perturbed_agreement",
    "reconstruction_inversions",
    "scatter_correlation",
    "sweep_anchor_counts",
]
