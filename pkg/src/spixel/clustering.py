"""Constrained SLIC-style clustering with soft assignments.

Every pixel is restricted to at most 9 candidate seeds of its own
object (UNCERTAIN pixels may use any object's seeds).  The loop
alternates softmax assignment over squared feature distances with
weighted center updates, hardens by argmax, and repairs connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .connectivity import enforce_connectivity
from .prior import UNCERTAIN, PriorPartition
from .raster import ClusterConfig, FeatureStack, Image, assemble_features
from .seeding import SeedSet, allocate_seed_counts, place_seeds

MAX_CANDIDATES = 9

# Extra neighbors fetched per query so distance ties straddling the
# 9-candidate cutoff resolve by seed index instead of KD-tree internals.
_TIE_SLACK = 16


def build_candidates(partition: PriorPartition, seeds: SeedSet, cfg: ClusterConfig):
    """Candidate seed indices per pixel, shape (H*W, 9), -1 padded.

    Keeps the up-to-9 nearest seeds of the pixel's own object within
    radius R = candidate_radius_factor * sqrt(|I|/K) (UNCERTAIN pixels
    search all seeds); falls back to the single nearest eligible seed
    when none is in range.  Slots are sorted by (distance, seed index).
    """
    h, w = partition.height, partition.width
    n = h * w
    radius = cfg.candidate_radius_factor * np.sqrt(n / cfg.k)
    flat = partition.labels.ravel()
    ys, xs = np.divmod(np.arange(n), w)
    coords = np.stack([xs, ys], axis=1).astype(np.float64)
    pos = seeds.positions.astype(np.float64)

    cand = np.full((n, MAX_CANDIDATES), -1, dtype=np.int32)

    groups = [(int(i), np.nonzero(flat == i)[0]) for i in np.unique(flat)]
    for obj, pix in groups:
        if obj == UNCERTAIN:
            seed_idx = np.arange(len(seeds))
        else:
            seed_idx = np.nonzero(seeds.object_ids == obj)[0]
            assert len(seed_idx) > 0, "object %d has no seeds" % obj
        tree = cKDTree(pos[seed_idx])
        kq = min(MAX_CANDIDATES + _TIE_SLACK, len(seed_idx))
        d, loc = tree.query(coords[pix], k=kq, distance_upper_bound=radius)
        d = d.reshape(len(pix), kq)
        loc = loc.reshape(len(pix), kq)
        hit = np.isfinite(d)
        gseed = np.where(hit, seed_idx[np.where(hit, loc, 0)], -1)
        d = np.where(hit, d, np.inf)
        empty = ~hit[:, 0]
        if np.any(empty):
            fq = min(1 + _TIE_SLACK, len(seed_idx))
            df, locf = tree.query(coords[pix[empty]], k=fq)
            df = df.reshape(-1, fq)
            gf = seed_idx[locf.reshape(-1, fq)]
            pick = np.lexsort((gf, df), axis=-1)[:, 0]
            rows = np.arange(len(pick))
            gseed[empty, 0] = gf[rows, pick]
            d[empty, 0] = df[rows, pick]
        # Deterministic slot order regardless of KD-tree internals.
        pad = np.where(gseed < 0, np.iinfo(np.int32).max, gseed)
        order = np.lexsort((pad, d), axis=-1)
        m = min(kq, MAX_CANDIDATES)
        cand[pix, :m] = np.take_along_axis(gseed, order, axis=1)[:, :m]
    return cand


def soft_assign(features, centers, cand):
    """Per-pixel softmax of negative squared distances to candidates.

    Returns float64 q with shape cand.shape; invalid (-1) slots get
    weight 0 and each row sums to 1.  ||f_p||^2 is constant across a
    pixel's row and cancels in the softmax, so the logits reduce to
    2 f.c - ||c||^2, evaluated as one product of [f, 1] rows against
    [2c, -||c||^2] rows in the input dtype.
    """
    n, d = features.shape
    dt = np.result_type(features, centers)
    faug = np.empty((n, d + 1), dtype=dt)
    faug[:, :d] = features
    faug[:, d] = 1
    caug = np.empty((centers.shape[0], d + 1), dtype=dt)
    caug[:, :d] = centers
    caug[:, :d] *= 2
    caug[:, d] = -np.einsum("kd,kd->k", centers, centers)
    safe = np.where(cand < 0, 0, cand)
    z = np.einsum("nd,nsd->ns", faug, caug[safe])
    z[cand < 0] = -np.inf
    z -= z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    # Sum in float64 so row sums hold to 1e-9 for any input dtype.
    return z / z.sum(axis=1, dtype=np.float64, keepdims=True)


def _scatter_structure(cand, n_seeds):
    """CSR layout that scatters per-slot weights onto seed rows.

    The sparsity pattern depends only on the candidate table, so the
    clustering loop builds it once and refills the data each iteration.
    perm maps flattened (pixel, slot) positions into CSR data order.
    """
    n, slots = cand.shape
    flat = cand.ravel()
    valid = np.nonzero(flat >= 0)[0]
    rows = flat[valid].astype(np.int64)
    cols = valid // slots
    mat = sparse.csr_matrix(
        (valid.astype(np.float64), (rows, cols)), shape=(n_seeds, n)
    )
    perm = mat.data.astype(np.int64)
    return mat, perm


def update_centers(features, q, cand, previous, structure=None):
    """Weighted-mean center update; zero-weight seeds keep their center.

    structure is an optional precomputed _scatter_structure(cand, K);
    passing it skips rebuilding the scatter layout on every call.
    """
    n_seeds = previous.shape[0]
    if structure is None:
        structure = _scatter_structure(cand, n_seeds)
    mat, perm = structure
    mat.data = q.ravel()[perm]
    num = mat @ features
    weight = mat @ np.ones(features.shape[0])
    out = previous.copy()
    live = weight > 0
    out[live] = num[live] / weight[live, None]
    return out


def harden(q, cand):
    """Argmax assignment; ties go to the lowest seed index."""
    top = q.max(axis=1, keepdims=True)
    tied = np.where((q == top) & (cand >= 0), cand, np.iinfo(np.int32).max)
    return tied.min(axis=1).astype(np.int32)


@dataclass(frozen=True)
class Segmentation:
    """Final labeling plus the soft state it was hardened from."""

    labels: np.ndarray          # (H, W) int32, dense superpixel ids
    owners: np.ndarray          # (K,) int32, object id per superpixel
    soft: np.ndarray            # (H*W, 9) float64
    candidates: np.ndarray      # (H*W, 9) int32, -1 padded
    centers: np.ndarray         # (S, 5+D) float64, feature-space centers
                                # the hardened assignment was computed from
    seeds: SeedSet
    k_requested: int

    @property
    def k_realized(self):
        return int(self.owners.shape[0])

    @property
    def per_object_counts(self):
        ids, counts = np.unique(self.owners, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}


def cluster(features, partition, seeds, cfg, shape):
    """Run the soft assignment loop and harden to per-pixel seed labels.

    Returns (q, candidates, hard, centers) where hard holds seed
    indices and centers are the ones the final q was assigned against
    (the state that explains the hard labels).
    """
    h, w = shape
    cand = build_candidates(partition, seeds, cfg)
    flat_seed = seeds.positions[:, 1] * w + seeds.positions[:, 0]
    centers = features[flat_seed].astype(np.float64)
    scatter = _scatter_structure(cand, len(seeds))
    # Logits only rank candidates, so they are computed in float32;
    # q normalization and center updates stay in float64.
    feats32 = features.astype(np.float32)
    q, ref = None, centers
    for _ in range(cfg.iterations):
        ref = centers
        q = soft_assign(feats32, centers.astype(np.float32), cand)
        centers = update_centers(features, q, cand, centers, scatter)
    hard = harden(q, cand)
    return q, cand, hard, ref


def segment(
    img: Image,
    partition: PriorPartition,
    cfg: ClusterConfig,
    deep: FeatureStack = None,
    counts=None,
    min_fragment=None,
    workers=1,
):
    """Segment an image into superpixels constrained by a prior partition.

    Args:
        img: the image to segment.
        partition: prior object partition (UNCERTAIN pixels are free).
        cfg: clustering knobs (k, lambdas, iterations, rng seed).
        deep: optional extra feature channels; None means D=0.
        counts: per-object seed budget; None allocates proportionally.
        min_fragment: fragments below this size are merged during
            connectivity repair; None means (|I|/k)/4.
        workers: parallelism hint; results are identical for any value.

    Returns:
        Segmentation with dense connected superpixel labels, one owner
        object per superpixel, and the soft assignment state.
    """
    del workers  # the numeric core is deterministic and worker-free
    if img.height != partition.height or img.width != partition.width:
        raise ValueError("image and partition dimensions differ")
    if deep is None:
        deep = FeatureStack.empty(img.height, img.width)
    features = assemble_features(img, deep, cfg)
    if counts is None:
        counts = allocate_seed_counts(partition, cfg.k)
    seeds = place_seeds(partition, counts, cfg.rng_seed)
    q, cand, hard, centers = cluster(
        features, partition, seeds, cfg, (img.height, img.width)
    )
    if min_fragment is None:
        min_fragment = (img.n_pixels / cfg.k) / 4.0
    labels, owners = enforce_connectivity(
        hard.reshape(img.height, img.width),
        seeds.object_ids,
        partition,
        min_fragment,
    )
    return Segmentation(
        labels=labels,
        owners=owners,
        soft=q,
        candidates=cand,
        centers=centers,
        seeds=seeds,
        k_requested=cfg.k,
    )
