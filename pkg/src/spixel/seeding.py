"""Seed budget allocation and in-object seed placement.

Each prior object receives a share of the requested K proportional to
its area (largest-remainder rounding, at least one seed per object).
Seeds are drawn uniformly inside the object, refined by exactly five
Lloyd iterations of spatial K-means, and snapped to object pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prior import PriorPartition

# Objects above this size are subsampled for the draw and the Lloyd
# updates; snapping always uses the full pixel set.
_SUBSAMPLE_ABOVE = 65536
_SUBSAMPLE_SIZE = 4096

_LLOYD_ITERATIONS = 5

_U64_MASK = (1 << 64) - 1


def largest_remainder(quotas, total):
    """Round non-negative quotas summing to ``total`` into integers.

    Floors first, then hands the remaining units to the largest
    fractional remainders (ties: lower index).
    """
    quotas = np.asarray(quotas, dtype=np.float64)
    if np.any(quotas < 0):
        raise ValueError("quotas must be non-negative")
    floors = np.floor(quotas).astype(np.int64)
    deficit = int(total) - int(floors.sum())
    if deficit < 0:
        raise ValueError("quotas exceed the requested total")
    if deficit:
        remainders = quotas - floors
        order = np.lexsort((np.arange(len(quotas)), -remainders))
        floors[order[:deficit]] += 1
    return floors


def enforce_min_one(counts):
    """Raise zero counts to one, taking units from the current maximum
    (ties: lower index).  The total is preserved."""
    counts = np.asarray(counts, dtype=np.int64).copy()
    for i in range(len(counts)):
        if counts[i] == 0:
            donor = int(np.argmax(counts))
            if counts[donor] <= 1:
                raise ValueError(
                    "insufficient budget: %d seeds for %d objects"
                    % (int(counts.sum()), len(counts))
                )
            counts[donor] -= 1
            counts[i] = 1
    return counts


def allocate_seed_counts(partition: PriorPartition, k):
    """Split a budget of k seeds across objects proportionally to area.

    Returns a dict object id -> count with every count >= 1 and counts
    summing exactly to k.  Raises for k below the object count.
    """
    ids = partition.object_ids
    if len(ids) == 0:
        raise ValueError("partition has no objects")
    if k < len(ids):
        raise ValueError(
            "insufficient budget: k=%d is below the object count %d"
            % (k, len(ids))
        )
    areas = np.array(
        [np.count_nonzero(partition.labels == i) for i in ids],
        dtype=np.float64,
    )
    quotas = k * areas / areas.sum()
    counts = enforce_min_one(largest_remainder(quotas, k))
    return {int(i): int(c) for i, c in zip(ids, counts)}


@dataclass(frozen=True)
class SeedSet:
    """Placed seeds in global index order (ascending object id, then
    draw order within each object)."""

    positions: np.ndarray       # (S, 2) int64, columns (x, y)
    object_ids: np.ndarray      # (S,) int32
    per_object_counts: dict

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64).copy()
        obj = np.asarray(self.object_ids, dtype=np.int32).copy()
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] != obj.shape[0]:
            raise ValueError("positions must be (S, 2) matching object_ids")
        pos.setflags(write=False)
        obj.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "object_ids", obj)

    def __len__(self):
        return self.positions.shape[0]


def _redistribute(counts, areas, total):
    """Cap each count at its object's area and hand the surplus to the
    objects with the most spare capacity (ties: lower index)."""
    counts = np.minimum(np.asarray(counts, dtype=np.int64), areas)
    surplus = int(total - counts.sum())
    while surplus > 0:
        capacity = areas - counts
        if not np.any(capacity > 0):
            break
        counts[int(np.argmax(capacity))] += 1
        surplus -= 1
    return counts


def _lloyd(points, centers):
    """Exactly five Lloyd iterations of spatial K-means.

    Ties in assignment go to the lower center index; empty clusters
    steal the farthest point of the currently largest cluster (ties by
    point order).
    """
    centers = centers.astype(np.float64).copy()
    c = centers.shape[0]
    for _ in range(_LLOYD_ITERATIONS):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        sizes = np.bincount(assign, minlength=c)
        for j in range(c):
            if sizes[j] == 0:
                big = int(np.argmax(sizes))
                members = np.nonzero(assign == big)[0]
                far = members[int(np.argmax(d2[members, big]))]
                assign[far] = j
                sizes[big] -= 1
                sizes[j] = 1
        counts = np.bincount(assign, minlength=c).astype(np.float64)
        sx = np.bincount(assign, weights=points[:, 0], minlength=c)
        sy = np.bincount(assign, weights=points[:, 1], minlength=c)
        centers[:, 0] = sx / counts
        centers[:, 1] = sy / counts
    return centers


def _snap(centers, xs, ys):
    """Nearest in-object pixel per center, ties by raster order."""
    out = np.empty((centers.shape[0], 2), dtype=np.int64)
    chunk = max(1, int(4_000_000 / max(1, len(xs))))
    for start in range(0, centers.shape[0], chunk):
        cs = centers[start:start + chunk]
        d2 = (xs[None, :] - cs[:, 0:1]) ** 2 + (ys[None, :] - cs[:, 1:2]) ** 2
        best = np.argmin(d2, axis=1)
        out[start:start + chunk, 0] = xs[best]
        out[start:start + chunk, 1] = ys[best]
    return out


def place_seeds(partition: PriorPartition, counts, rng_seed=0):
    """Place allocated seeds inside their objects.

    Per object: draw the requested number of distinct pixels with a
    seeded per-object RNG (stream = rng_seed XOR object id), refine by
    five Lloyd iterations over (a capped subsample of) the object's
    pixels, snap each center to the nearest object pixel.  Counts
    exceeding an object's area are clamped and redistributed to objects
    with spare capacity.

    Returns a SeedSet; deterministic in (partition, counts, rng_seed).
    """
    ids = sorted(int(i) for i in counts)
    requested = np.array([counts[i] for i in ids], dtype=np.int64)
    if np.any(requested < 1):
        raise ValueError("every object needs at least one seed")
    areas = np.array(
        [np.count_nonzero(partition.labels == i) for i in ids],
        dtype=np.int64,
    )
    if np.any(areas == 0):
        raise ValueError("count assigned to an object with no pixels")
    final = _redistribute(requested, areas, int(requested.sum()))

    positions = []
    object_ids = []
    realized = {}
    for i, n_seeds in zip(ids, final):
        n_seeds = int(n_seeds)
        ys, xs = np.nonzero(partition.labels == i)
        coords = np.stack([xs, ys], axis=1).astype(np.float64)
        rng = np.random.default_rng((int(rng_seed) ^ i) & _U64_MASK)
        if len(coords) > _SUBSAMPLE_ABOVE:
            size = min(len(coords), max(_SUBSAMPLE_SIZE, n_seeds))
            pool_idx = np.sort(rng.choice(len(coords), size=size, replace=False))
            pool = coords[pool_idx]
        else:
            pool = coords
        chosen = rng.choice(len(pool), size=n_seeds, replace=False)
        centers = _lloyd(pool, pool[chosen])
        snapped = _snap(centers, xs.astype(np.float64), ys.astype(np.float64))
        positions.append(snapped)
        object_ids.append(np.full(n_seeds, i, dtype=np.int32))
        realized[i] = n_seeds
    return SeedSet(
        positions=np.concatenate(positions),
        object_ids=np.concatenate(object_ids),
        per_object_counts=realized,
    )
