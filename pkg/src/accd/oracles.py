"""Brute-force reference implementations.

Each oracle recomputes its answer by exhaustive enumeration over the raw
point arrays, independent of the grouped/filtered/blocked execution paths
it is used to verify. Shadow-mode runs and the acceptance suite treat
oracle output as ground truth.
"""

from __future__ import annotations

import numpy as np

from .counters import CounterSet
from .dataset import brute_rows, rowwise_lexsort
from .errors import RangeError
from .metrics import MetricSpec

_ROW_BLOCK_ELEMS = 4_000_000


def group_means(
    values: np.ndarray, assign: np.ndarray, k: int, prev: np.ndarray
) -> np.ndarray:
    """Mean of each group's member rows, summed in ascending member order.

    Empty groups keep their previous row. Both the optimized pipeline and
    the Lloyd oracle call this, so their centroid streams stay bitwise
    identical whenever their assignments agree.
    """
    out = prev.copy()
    for g in range(k):
        members = np.flatnonzero(assign == g)
        if members.size:
            out[g] = np.add.reduce(values[members], axis=0) / members.size
    return out


def nearest_assign(
    points: np.ndarray,
    centers: np.ndarray,
    metric: MetricSpec,
    counters: CounterSet | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per point: nearest center under (distance, id) tie-break, plus that
    distance. Row-blocked brute force."""
    n = points.shape[0]
    step = max(1, _ROW_BLOCK_ELEMS // max(1, centers.shape[0] * points.shape[1]))
    assign = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for start in range(0, n, step):
        stop = min(n, start + step)
        d = brute_rows(points[start:stop], centers, metric, counters)
        a = np.argmin(d, axis=1)  # first occurrence = lowest id on ties
        assign[start:stop] = a
        best[start:stop] = d[np.arange(stop - start), a]
    return assign, best


def lloyd_kmeans(
    points: np.ndarray,
    init_centers: np.ndarray,
    metric: MetricSpec,
    max_iter: int,
    counters: CounterSet | None = None,
) -> tuple[list[np.ndarray], np.ndarray, int]:
    """Plain Lloyd iteration. Returns per-iteration assignments, final
    centers, and the number of iterations executed (stops early once
    assignments repeat)."""
    centers = np.array(init_centers, dtype=np.float64, copy=True)
    k = centers.shape[0]
    history: list[np.ndarray] = []
    prev = None
    it = 0
    for it in range(1, max_iter + 1):
        assign, _ = nearest_assign(points, centers, metric, counters)
        history.append(assign)
        centers = group_means(points, assign, k, centers)
        if prev is not None and np.array_equal(prev, assign):
            break
        prev = assign
    return history, centers, it


def knn_topk(
    src: np.ndarray,
    trg: np.ndarray,
    metric: MetricSpec,
    k: int,
    counters: CounterSet | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-sort top-k per source row with (distance, id) tie-break.

    Uses argpartition for speed, then verifies the partition boundary is
    tie-free; rows with a boundary tie fall back to a full lexicographic
    sort so the result always equals the full-sort prefix.
    """
    n2 = trg.shape[0]
    if k < 1 or k > n2:
        raise RangeError(f"k={k} out of range for {n2} targets")
    n1 = src.shape[0]
    out_ids = np.empty((n1, k), dtype=np.int64)
    out_d = np.empty((n1, k), dtype=np.float64)
    step = max(1, _ROW_BLOCK_ELEMS // max(1, n2 * src.shape[1]))
    pad = min(n2, k + 8)
    for start in range(0, n1, step):
        stop = min(n1, start + step)
        d = brute_rows(src[start:stop], trg, metric, counters)
        if pad >= n2:
            cand_idx = np.broadcast_to(np.arange(n2), d.shape).copy()
            cand_d = d
        else:
            cand_idx = np.argpartition(d, pad - 1, axis=1)[:, :pad]
            cand_d = np.take_along_axis(d, cand_idx, axis=1)
        order = rowwise_lexsort(cand_d, cand_idx)
        sel = np.take_along_axis(cand_idx, order, axis=1)
        seld = np.take_along_axis(cand_d, order, axis=1)
        if pad < n2:
            # A tie across the partition boundary would make the prefix
            # ambiguous; redo those rows exactly.
            risky = np.flatnonzero(seld[:, k - 1] >= seld[:, -1])
            for r in risky:
                full_order = np.lexsort((np.arange(n2), d[r]))[:k]
                sel[r, :k] = full_order
                seld[r, :k] = d[r, full_order]
        out_ids[start:stop] = sel[:, :k]
        out_d[start:stop] = seld[:, :k]
    return out_ids, out_d


def radius_neighbors(
    points: np.ndarray,
    metric: MetricSpec,
    radius: float,
    counters: CounterSet | None = None,
) -> list[np.ndarray]:
    """Per point, the sorted ids j != i with d(i, j) <= radius."""
    if radius <= 0:
        raise RangeError("radius must be positive")
    n = points.shape[0]
    out: list[np.ndarray] = []
    step = max(1, _ROW_BLOCK_ELEMS // max(1, n * points.shape[1]))
    for start in range(0, n, step):
        stop = min(n, start + step)
        d = brute_rows(points[start:stop], points, metric, counters)
        for r in range(stop - start):
            i = start + r
            nbr = np.flatnonzero(d[r] <= radius)
            out.append(nbr[nbr != i])
    return out
