"""Adaptive per-object superpixel budgets.

Two reallocation modes on top of plain proportional allocation: a
saliency-driven mode that densifies foreground objects by a ratio r,
and a user-driven mode with an explicit positive factor per object.
Both round with the same largest-remainder rule as plain seeding, so
r = 1 / all-factors-1 reproduce the proportional counts exactly.
"""

from __future__ import annotations

import numpy as np

from .prior import PriorPartition
from .seeding import enforce_min_one, largest_remainder

SALIENCY_THRESHOLD = 0.1


def classify_salient(partition: PriorPartition, saliency, threshold=SALIENCY_THRESHOLD):
    """Mark each object foreground iff its mean saliency exceeds threshold.

    Returns a dict object id -> bool (True = foreground).
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    if saliency.shape != partition.labels.shape:
        raise ValueError("saliency dimensions do not match the partition")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return {
        int(i): float(saliency[partition.labels == i].mean()) > threshold
        for i in partition.object_ids
    }


def _check_budget(n_objects, k):
    if n_objects == 0:
        raise ValueError("partition has no objects")
    if k < n_objects:
        raise ValueError(
            "insufficient budget: k=%d is below the object count %d"
            % (k, n_objects)
        )


def va_quotas(areas, foreground, k, r):
    """Pre-rounding visual-attention quotas.

    Foreground object i gets (|O_i|/A)*K*r with A the labeled area;
    background objects share the remaining budget proportionally.
    When foreground demand reaches K, each background object is clamped
    to exactly 1 and the foreground shares the rest proportionally.
    Quotas always sum to k.
    """
    areas = np.asarray(areas, dtype=np.float64)
    foreground = np.asarray(foreground, dtype=bool)
    if r < 1:
        raise ValueError("ratio r must be >= 1")
    total = areas.sum()
    quotas = np.zeros_like(areas)
    fg, bg = foreground, ~foreground
    quotas[fg] = k * areas[fg] / total * r
    fg_demand = quotas[fg].sum()
    if not np.any(bg):
        return k * areas / total
    if fg_demand >= k:
        n_bg = int(bg.sum())
        quotas[bg] = 1.0
        quotas[fg] = (k - n_bg) * areas[fg] / areas[fg].sum()
    else:
        quotas[bg] = (k - fg_demand) * areas[bg] / areas[bg].sum()
    return quotas


def va_allocate(partition: PriorPartition, classes, k, r):
    """Saliency-mode seed counts: foreground densified by ratio r.

    classes maps object id -> bool foreground (e.g. classify_salient
    output).  Returns dict id -> count summing exactly to k, each >= 1.
    """
    ids = [int(i) for i in partition.object_ids]
    _check_budget(len(ids), k)
    area_map = partition.object_areas
    areas = np.array([area_map[i] for i in ids], dtype=np.float64)
    fg = np.array([bool(classes.get(i, False)) for i in ids])
    quotas = va_quotas(areas, fg, k, r)
    counts = enforce_min_one(largest_remainder(quotas, k))
    return {i: int(c) for i, c in zip(ids, counts)}


def user_quotas(areas, factors, k):
    """Pre-rounding user-mode quotas: K * a_i * r_i / sum(a_j * r_j)."""
    areas = np.asarray(areas, dtype=np.float64)
    factors = np.asarray(factors, dtype=np.float64)
    if np.any(factors <= 0):
        raise ValueError("factor must be positive")
    weighted = areas * factors
    return k * weighted / weighted.sum()


def user_allocate(partition: PriorPartition, factors, k):
    """User-mode seed counts from explicit per-object factors.

    factors maps object id -> positive factor; missing objects default
    to 1.  Returns dict id -> count summing exactly to k, each >= 1.
    """
    ids = [int(i) for i in partition.object_ids]
    _check_budget(len(ids), k)
    unknown = set(factors) - set(ids)
    if unknown:
        raise ValueError("factor for unknown object id %s" % min(unknown))
    area_map = partition.object_areas
    areas = np.array([area_map[i] for i in ids], dtype=np.float64)
    f = np.array([float(factors.get(i, 1.0)) for i in ids])
    quotas = user_quotas(areas, f, k)
    counts = enforce_min_one(largest_remainder(quotas, k))
    return {i: int(c) for i, c in zip(ids, counts)}
