"""Random-instance generators shared across the test modules."""

import numpy as np

from spixel import Image, PriorPartition, UNCERTAIN


def same_partition(a, b):
    """True when two label grids agree up to object renumbering."""
    if a.shape != b.shape:
        return False
    if not np.array_equal(a == UNCERTAIN, b == UNCERTAIN):
        return False
    mapping = {}
    reverse = {}
    for va, vb in zip(a.ravel(), b.ravel()):
        if va == UNCERTAIN:
            continue
        if mapping.setdefault(int(va), int(vb)) != int(vb):
            return False
        if reverse.setdefault(int(vb), int(va)) != int(va):
            return False
    return True


def random_image(rng, h, w, smooth=False):
    """uint8 RGB test image; smooth variants use coarse color gradients."""
    if not smooth:
        return Image(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    fx = rng.uniform(0.5, 2.0, size=3)
    fy = rng.uniform(0.5, 2.0, size=3)
    ph = rng.uniform(0, 2 * np.pi, size=3)
    chans = [
        127.5 + 120.0 * np.sin(2 * np.pi * (fx[c] * xx / w + fy[c] * yy / h) + ph[c])
        for c in range(3)
    ]
    rgb = np.clip(np.stack(chans, axis=2), 0, 255).astype(np.uint8)
    return Image(rgb)


def voronoi_partition(rng, h, w, n_objects, uncertain_frac=0.0):
    """Partition from nearest-center cells; cells are 4-connected objects.

    A trailing fraction of pixels (random blob) can be marked UNCERTAIN.
    """
    cy = rng.integers(0, h, size=n_objects)
    cx = rng.integers(0, w, size=n_objects)
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (yy[:, :, None] - cy) ** 2 + (xx[:, :, None] - cx) ** 2
    labels = np.argmin(d2, axis=2).astype(np.int32)
    # renumber densely in case duplicate centers emptied a cell
    _, labels = np.unique(labels, return_inverse=True)
    labels = labels.reshape(h, w).astype(np.int32)
    if uncertain_frac > 0:
        n_unc = int(uncertain_frac * h * w)
        by = rng.integers(0, h)
        bx = rng.integers(0, w)
        side = max(1, int(np.sqrt(n_unc)))
        labels[by : by + side, bx : bx + side] = UNCERTAIN
        if not np.any(labels != UNCERTAIN):
            labels[0, 0] = 0
    return PriorPartition(labels)


def random_mask_stack(rng, h, w, n_masks, max_side=None):
    """Stack of random filled rectangles (possibly overlapping)."""
    if max_side is None:
        max_side = max(2, min(h, w) // 2)
    masks = np.zeros((n_masks, h, w), dtype=bool)
    for i in range(n_masks):
        mh = int(rng.integers(1, max_side + 1))
        mw = int(rng.integers(1, max_side + 1))
        y = int(rng.integers(0, h - mh + 1))
        x = int(rng.integers(0, w - mw + 1))
        masks[i, y : y + mh, x : x + mw] = True
    return masks


def random_labeling(rng, h, w, k):
    """Arbitrary (not necessarily connected) dense labeling with k ids."""
    labels = rng.integers(0, k, size=(h, w)).astype(np.int32)
    labels.ravel()[rng.permutation(h * w)[:k]] = np.arange(k)
    return labels


def grid_labeling(h, w, rows, cols):
    """Labels forming a uniform rows x cols block grid."""
    ys = np.minimum(np.arange(h) * rows // h, rows - 1)
    xs = np.minimum(np.arange(w) * cols // w, cols - 1)
    return (ys[:, None] * cols + xs[None, :]).astype(np.int32)


def random_soft_instance(rng, n, n_seeds, slots=4):
    """Random candidates plus normalized weights for loss/projection tests."""
    cand = np.full((n, slots), -1, dtype=np.int32)
    q = np.zeros((n, slots))
    for p in range(n):
        m = int(rng.integers(1, min(slots, n_seeds) + 1))
        cand[p, :m] = rng.choice(n_seeds, size=m, replace=False)
        v = rng.random(m)
        q[p, :m] = v / v.sum()
    # every seed used at least once keeps column normalization live
    for s in range(n_seeds):
        if not np.any(cand == s):
            p = int(rng.integers(0, n))
            cand[p, 0] = s
    return q, cand
