"""Distance metrics: weighted and unweighted L1/L2.

Bounds elsewhere rely on the triangle inequality, so L2 is the true
Euclidean distance, never its square; kernels that work in squared space
must take the root before anything bound-related sees the value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

# DDSL metric strings -> (kind, weighted). Case-sensitive by design.
METRIC_NAMES = {
    "Unweighted L1": ("L1", False),
    "Unweighted L2": ("L2", False),
    "Weighted L1": ("L1", True),
    "Weighted L2": ("L2", True),
}


@dataclass(frozen=True, eq=False)
class MetricSpec:
    kind: str = "L2"  # "L1" | "L2"
    weighted: bool = False
    weights: np.ndarray | None = None  # length-d, all entries >= 0

    def __post_init__(self):
        if self.kind not in ("L1", "L2"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.weighted:
            if self.weights is None:
                raise ValueError("weighted metric requires a weight vector")
            w = np.asarray(self.weights, dtype=np.float64).ravel()
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and nonnegative")
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise ValueError("unweighted metric must not carry weights")

    @classmethod
    def from_name(cls, name: str, weights=None) -> "MetricSpec":
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric string {name!r}")
        kind, weighted = METRIC_NAMES[name]
        return cls(kind=kind, weighted=weighted, weights=weights if weighted else None)

    def display_name(self) -> str:
        return f"{'Weighted' if self.weighted else 'Unweighted'} {self.kind}"

    def with_weights(self, weights) -> "MetricSpec":
        return MetricSpec(kind=self.kind, weighted=True, weights=weights)

    def check_dim(self, d: int) -> None:
        if self.weighted and self.weights.shape[0] != d:
            raise DimensionMismatchError(
                f"weight vector has length {self.weights.shape[0]}, data has dim {d}"
            )


def distance(p, q, metric: MetricSpec) -> float:
    """Exact distance between two points under ``metric``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or p.shape != q.shape:
        raise DimensionMismatchError(f"point shapes differ: {p.shape} vs {q.shape}")
    metric.check_dim(p.shape[0])
    diff = p - q
    if metric.kind == "L1":
        terms = np.abs(diff)
        if metric.weighted:
            terms = metric.weights * terms
        return float(np.add.reduce(terms))
    terms = diff * diff
    if metric.weighted:
        terms = metric.weights * terms
    return float(np.sqrt(np.add.reduce(terms)))


def rowwise_distance(a, b, metric: MetricSpec) -> np.ndarray:
    """Distances between corresponding rows of two equally-shaped matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionMismatchError(f"row-paired shapes differ: {a.shape} vs {b.shape}")
    metric.check_dim(a.shape[1])
    diff = a - b
    if metric.kind == "L1":
        terms = np.abs(diff)
    else:
        terms = diff * diff
    if metric.weighted:
        terms = terms * metric.weights
    out = np.add.reduce(terms, axis=1)
    if metric.kind == "L2":
        out = np.sqrt(out)
    return out
