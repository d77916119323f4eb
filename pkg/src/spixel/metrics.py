"""Segmentation quality metrics and clustering loss diagnostics.

Boundary conventions used throughout: a boundary pixel has a 4-neighbor
with a different label; the 1-pixel image frame is excluded from the
counted (denominator) sets but augments the matchable sets, since frame
pixels are boundaries in every segmentation.  Tolerance comparisons are
strict (< eps).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.spatial import ConvexHull

DEFAULT_EPS = 2.0
COMPACTNESS_WEIGHT = 1e-5
LOG_CLAMP = 1e-12

F_PROTOCOL_SCALES = (50, 100, 200, 300, 400, 600, 800, 1000, 1200, 1500)


def asa(seg, gt):
    """Achievable segmentation accuracy: mean best overlap per superpixel.

    (1/|I|) * sum_k max_j |S_k intersect G_j|.
    """
    seg = np.asarray(seg).ravel()
    gt = np.asarray(gt).ravel()
    if seg.shape != gt.shape:
        raise ValueError("segmentation and ground truth sizes differ")
    _, seg_i = np.unique(seg, return_inverse=True)
    gid, gt_i = np.unique(gt, return_inverse=True)
    pair = seg_i.astype(np.int64) * len(gid) + gt_i
    upair, counts = np.unique(pair, return_counts=True)
    owner = upair // len(gid)
    starts = np.nonzero(np.r_[True, owner[1:] != owner[:-1]])[0]
    best = np.maximum.reduceat(counts, starts)
    return float(best.sum() / seg.size)


def boundary_mask(labels):
    """Pixels with a 4-neighbor of a different label."""
    labels = np.asarray(labels)
    m = np.zeros(labels.shape, dtype=bool)
    dif = labels[:, :-1] != labels[:, 1:]
    m[:, :-1] |= dif
    m[:, 1:] |= dif
    dif = labels[:-1, :] != labels[1:, :]
    m[:-1, :] |= dif
    m[1:, :] |= dif
    return m


def _frame(shape):
    f = np.zeros(shape, dtype=bool)
    f[0, :] = f[-1, :] = True
    f[:, 0] = f[:, -1] = True
    return f


def counted_boundary(labels):
    """Boundary pixels that enter the denominators (frame excluded)."""
    return boundary_mask(labels) & ~_frame(np.asarray(labels).shape)


def matchable_boundary(labels):
    """Boundary pixels available for matching (frame included)."""
    return boundary_mask(labels) | _frame(np.asarray(labels).shape)


def _match_fraction(counted, matchable, eps):
    if not counted.any():
        return 1.0
    if not matchable.any():
        return 0.0
    dist = ndimage.distance_transform_edt(~matchable)
    return float(np.mean(dist[counted] < eps))


def boundary_recall(seg, gt, eps=DEFAULT_EPS):
    """Fraction of gt boundary pixels with a seg boundary within < eps."""
    return _match_fraction(counted_boundary(gt), matchable_boundary(seg), eps)


def boundary_precision(seg, gt, eps=DEFAULT_EPS):
    """Fraction of seg boundary pixels with a gt boundary within < eps."""
    return _match_fraction(counted_boundary(seg), matchable_boundary(gt), eps)


def boundary_fmeasure(segs_by_scale, gt, eps=DEFAULT_EPS):
    """Max F over thresholds of the scale-averaged soft contour map.

    Each scale contributes its binary (frame-excluded) boundary map;
    the maps are averaged, the distinct nonzero values are swept as
    thresholds, and the best 2PR/(P+R) against the gt boundaries under
    the same < eps tolerance is returned.  An all-zero map scores 0.
    """
    maps = [counted_boundary(s).astype(np.float64) for s in segs_by_scale]
    if not maps:
        raise ValueError("at least one scale is required")
    soft = np.mean(maps, axis=0)
    thresholds = np.unique(soft[soft > 0])
    g = counted_boundary(np.asarray(gt))
    if thresholds.size == 0:
        return 0.0
    dist_to_g = (
        ndimage.distance_transform_edt(~g) if g.any() else None
    )
    best = 0.0
    for t in thresholds:
        det = soft >= t
        recall = (
            1.0
            if not g.any()
            else float(np.mean(ndimage.distance_transform_edt(~det)[g] < eps))
        )
        if dist_to_g is None:
            precision = 0.0
        else:
            precision = float(np.mean(dist_to_g[det] < eps))
        if precision + recall > 0:
            best = max(best, 2 * precision * recall / (precision + recall))
    return best


def explained_variation(seg, img):
    """Fraction of Lab color variance captured by superpixel means,
    averaged over the three channels; a constant channel counts as 1."""
    labels = np.asarray(seg).ravel()
    _, inv = np.unique(labels, return_inverse=True)
    sizes = np.bincount(inv).astype(np.float64)
    ratios = []
    for c in range(3):
        v = img.lab[..., c].ravel()
        mu = v.mean()
        total = float(((v - mu) ** 2).sum())
        if total == 0.0:
            ratios.append(1.0)
            continue
        means = np.bincount(inv, weights=v) / sizes
        ratios.append(float((sizes * (means - mu) ** 2).sum() / total))
    return float(np.mean(ratios))


def delta_k(k_requested, k_realized):
    """Relative error between requested and realized superpixel counts."""
    if k_requested < 1:
        raise ValueError("k_requested must be >= 1")
    return abs(k_realized - k_requested) / k_requested


def _edge_perimeter(mask):
    """Count of unit edges between mask pixels and the outside."""
    area = int(mask.sum())
    horiz = int(np.count_nonzero(mask[:, :-1] & mask[:, 1:]))
    vert = int(np.count_nonzero(mask[:-1, :] & mask[1:, :]))
    return 4 * area - 2 * (horiz + vert)


def shape_regularity(xs, ys):
    """SRC of one pixel set: convexity times balance.

    Convexity = perimeter of the convex hull of the pixel squares over
    the 4-connected edge perimeter, clamped to [0, 1].  Balance =
    sqrt(min/max) of the coordinate standard deviations (1 when both
    are zero).
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    x0, y0 = xs.min(), ys.min()
    local = np.zeros((ys.max() - y0 + 1, xs.max() - x0 + 1), dtype=bool)
    local[ys - y0, xs - x0] = True
    perim = _edge_perimeter(local)
    corners = np.concatenate(
        [
            np.stack([xs, ys], axis=1),
            np.stack([xs + 1, ys], axis=1),
            np.stack([xs, ys + 1], axis=1),
            np.stack([xs + 1, ys + 1], axis=1),
        ]
    )
    corners = np.unique(corners, axis=0).astype(np.float64)
    hull_perim = float(ConvexHull(corners).area)
    convexity = min(1.0, hull_perim / perim)
    sx, sy = float(np.std(xs)), float(np.std(ys))
    if max(sx, sy) == 0.0:
        balance = 1.0
    else:
        balance = float(np.sqrt(min(sx, sy) / max(sx, sy)))
    return convexity * balance


def granularity_preservation(seg):
    """Area-weighted regularity GR = sum |S_k| SRC_k SMF_k / sum |S_k|.

    SMF compares each superpixel's unit-mass shape, anchored at the
    floor of its centroid, with the unweighted mean shape; identical
    shapes give SMF = 1.
    """
    labels = np.asarray(seg)
    ids, inv = np.unique(labels.ravel(), return_inverse=True)
    k = len(ids)
    ys_all, xs_all = np.divmod(np.arange(labels.size), labels.shape[1])
    areas = np.bincount(inv).astype(np.float64)

    src = np.empty(k)
    offset_index = {}
    rows, cols, data = [], [], []
    for i in range(k):
        pix = np.nonzero(inv == i)[0]
        xs, ys = xs_all[pix], ys_all[pix]
        src[i] = shape_regularity(xs, ys)
        ax = int(np.floor(xs.mean()))
        ay = int(np.floor(ys.mean()))
        mass = 1.0 / len(pix)
        for dx, dy in zip(xs - ax, ys - ay):
            key = (int(dx), int(dy))
            col = offset_index.setdefault(key, len(offset_index))
            rows.append(i)
            cols.append(col)
            data.append(mass)
    shapes = csr_matrix(
        (data, (rows, cols)), shape=(k, len(offset_index))
    )
    mean_shape = np.asarray(shapes.mean(axis=0)).ravel()
    mean_total = mean_shape.sum()
    nnz_rows = np.repeat(np.arange(k), np.diff(shapes.indptr))
    on_support = np.bincount(
        nnz_rows,
        weights=np.abs(shapes.data - mean_shape[shapes.indices]),
        minlength=k,
    )
    mean_on_support = np.bincount(
        nnz_rows, weights=mean_shape[shapes.indices], minlength=k
    )
    smf = 1.0 - 0.5 * (on_support + mean_total - mean_on_support)
    return float((areas * src * smf).sum() / areas.sum())


def project_groundtruth(q, cand, gt, n_classes=None):
    """Project ground-truth classes through the soft assignment.

    Computes the row-normalized assignment times the transposed
    column-normalized assignment times the one-hot ground truth,
    sparsely over the per-pixel candidate lists.  Returns an (N, C)
    array of per-pixel class distributions.
    """
    q = np.asarray(q, dtype=np.float64)
    cand = np.asarray(cand)
    gt = np.asarray(gt).ravel()
    n = q.shape[0]
    if n_classes is None:
        n_classes = int(gt.max()) + 1
    n_seeds = int(cand.max()) + 1
    col_w = np.zeros(n_seeds)
    mass = np.zeros(n_seeds * n_classes)
    for j in range(cand.shape[1]):
        v = cand[:, j] >= 0
        if not np.any(v):
            continue
        idx = cand[v, j].astype(np.int64)
        col_w += np.bincount(idx, weights=q[v, j], minlength=n_seeds)
        mass += np.bincount(
            idx * n_classes + gt[v], weights=q[v, j],
            minlength=n_seeds * n_classes,
        )
    mass = mass.reshape(n_seeds, n_classes)
    live = col_w > 0
    mass[live] /= col_w[live, None]
    out = np.zeros((n, n_classes))
    for j in range(cand.shape[1]):
        v = cand[:, j] >= 0
        if not np.any(v):
            continue
        out[v] += q[v, j, None] * mass[cand[v, j]]
    return out


def seg_loss(g_hat, gt):
    """Mean cross-entropy of projected classes at the true class, with
    probabilities clamped at 1e-12."""
    gt = np.asarray(gt).ravel()
    picked = g_hat[np.arange(len(gt)), gt]
    return float(-np.mean(np.log(np.maximum(picked, LOG_CLAMP))))


def compactness_loss(spatial, q, cand, hard):
    """Sum of distances from pixels to their hard superpixel's soft
    spatial center (the column-normalized weighted mean)."""
    spatial = np.asarray(spatial, dtype=np.float64)
    hard = np.asarray(hard).ravel()
    n_seeds = int(max(cand.max(), hard.max())) + 1
    col_w = np.zeros(n_seeds)
    centers = np.zeros((n_seeds, spatial.shape[1]))
    for j in range(cand.shape[1]):
        v = cand[:, j] >= 0
        if not np.any(v):
            continue
        idx = cand[v, j].astype(np.int64)
        col_w += np.bincount(idx, weights=q[v, j], minlength=n_seeds)
        for c in range(spatial.shape[1]):
            centers[:, c] += np.bincount(
                idx, weights=q[v, j] * spatial[v, c], minlength=n_seeds
            )
    live = col_w > 0
    centers[live] /= col_w[live, None]
    diff = spatial - centers[hard]
    return float(np.sqrt((diff ** 2).sum(axis=1)).sum())


def total_loss(g_hat, gt, spatial, q, cand, hard, weight=COMPACTNESS_WEIGHT):
    """seg_loss plus weight times compactness_loss."""
    return seg_loss(g_hat, gt) + weight * compactness_loss(
        spatial, q, cand, hard
    )


def metrics_report(labels, img, gt, k_requested=None, eps=DEFAULT_EPS):
    """All standard metrics for one label raster as a flat dict.

    The f entry is the single-scale F of this labeling; delta_k is 0
    when no requested count is given.
    """
    labels = np.asarray(labels)
    k_realized = int(len(np.unique(labels)))
    return {
        "asa": asa(labels, gt),
        "gr": granularity_preservation(labels),
        "recall": boundary_recall(labels, gt, eps),
        "precision": boundary_precision(labels, gt, eps),
        "f": boundary_fmeasure([labels], gt, eps),
        "ev": explained_variation(labels, img),
        "delta_k": (
            0.0 if k_requested is None else delta_k(k_requested, k_realized)
        ),
        "k_realized": k_realized,
    }
