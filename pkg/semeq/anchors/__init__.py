"""
Anchor selection: random supports, prototypical supports and k-means.
"""

from .kmeans import ClusteringResult, kmeans
from .selection import (
    DEFAULT_SUPPORT_SIZE,
    AnchorMethod,
    AnchorSupport,
    encode_support,
    prototypical_support,
    select_random_support,
    select_support,
)

__all__ = [
    "DEFAULT_SUPPORT_SIZE",
    "AnchorMethod",
    "AnchorSupport",
    "ClusteringResult",
    "encode_support",
    "kmeans",
    "prototypical_support",
    "select_random_support",
    "select_support",
]
