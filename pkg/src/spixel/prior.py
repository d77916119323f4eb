"""Object partitions and aggregation of overlapping proposal masks.

A prior partition labels every pixel with an object id (>= 0) or the
UNCERTAIN sentinel (-1).  Labeled pixels constrain clustering: they may
only join superpixels seeded inside the same object.  UNCERTAIN pixels
are free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

UNCERTAIN = -1


@dataclass(frozen=True)
class PriorPartition:
    """Per-pixel object labels with a -1 sentinel for unknown ownership."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError("labels must have shape (H, W)")
        if labels.size and labels.min() < UNCERTAIN:
            raise ValueError("labels must be >= -1")
        labels = labels.astype(np.int32, copy=True)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def object_ids(self):
        """Sorted array of distinct object ids present (UNCERTAIN excluded)."""
        return np.unique(self.labels[self.labels != UNCERTAIN])

    @property
    def object_areas(self):
        """Pixel count per object id, as a plain dict."""
        ids, counts = np.unique(
            self.labels[self.labels != UNCERTAIN], return_counts=True
        )
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def object_mask(self, object_id):
        return self.labels == object_id

    @property
    def n_uncertain(self):
        return int(np.count_nonzero(self.labels == UNCERTAIN))


def _as_mask_array(masks, shape=None):
    """Normalize a mask stack to a (n, H, W) boolean array."""
    if isinstance(masks, np.ndarray) and masks.ndim == 3:
        stack = masks.astype(bool)
    else:
        stack = [np.asarray(m).astype(bool) for m in masks]
        if stack and any(m.shape != stack[0].shape for m in stack):
            raise ValueError("all masks must share the same dimensions")
        if not stack:
            if shape is None:
                raise ValueError("empty stack requires explicit dimensions")
            return np.zeros((0,) + tuple(shape), dtype=bool)
        stack = np.stack(stack)
    if stack.ndim != 3:
        raise ValueError("masks must be 2-d rasters")
    if shape is not None and stack.shape[1:] != tuple(shape):
        raise ValueError(
            "mask dimensions %s do not match image %s"
            % (stack.shape[1:], tuple(shape))
        )
    return stack


def default_min_area(height, width):
    """Minimum retained object area: max(64, pixel count / 1000)."""
    return max(64.0, (height * width) / 1000.0)


def filter_min_area(masks, min_area):
    """Drop masks with fewer than min_area pixels; order preserved."""
    stack = _as_mask_array(masks)
    keep = [m for m in stack if int(m.sum()) >= min_area]
    if not keep:
        return np.zeros((0,) + stack.shape[1:], dtype=bool)
    return np.stack(keep)


def remove_overlaps(masks):
    """Make masks pairwise disjoint: the smallest original mask keeps
    each contested pixel (ties go to the lower stack index), mirroring
    iterative subtraction of smaller objects from larger ones."""
    stack = _as_mask_array(masks)
    n = stack.shape[0]
    if n == 0:
        return stack
    areas = stack.sum(axis=(1, 2))
    order = np.lexsort((np.arange(n), areas))
    out = stack.copy()
    claimed = np.zeros(stack.shape[1:], dtype=bool)
    for i in order:
        out[i] &= ~claimed
        claimed |= out[i]
    return out


def morphological_open(binary, radius):
    """Opening with a square structuring element of side 2*radius + 1."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    binary = np.asarray(binary, dtype=bool)
    if radius == 0:
        return binary.copy()
    side = 2 * radius + 1
    element = np.ones((side, side), dtype=bool)
    return ndimage.binary_opening(binary, structure=element)


_FOUR_CONN = ndimage.generate_binary_structure(2, 1)


def aggregate_masks(masks, shape, min_area=None, opening_radius=1):
    """Build a PriorPartition from possibly-overlapping proposal masks.

    Pipeline: drop masks under min_area, resolve overlaps in favor of
    the smallest mask, drop masks pushed under min_area by the
    subtraction, then open the remaining unlabeled set and promote its
    4-connected components of at least min_area to background objects.
    Unlabeled pixels that survive none of that become UNCERTAIN.

    Object ids are assigned by decreasing area (ties: lower stack
    index), with background components appended last (decreasing area,
    ties: raster discovery order).

    Args:
        masks: iterable of binary rasters or an (n, H, W) array.
        shape: (H, W) of the target image.
        min_area: minimum object area; None means max(64, H*W/1000).
        opening_radius: square opening radius for the unlabeled set.

    Returns:
        PriorPartition covering every pixel with object ids or UNCERTAIN.
    """
    h, w = shape
    if min_area is None:
        min_area = default_min_area(h, w)
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    stack = _as_mask_array(masks, shape=(h, w))
    stack = filter_min_area(stack, min_area)
    stack = remove_overlaps(stack)
    areas = stack.sum(axis=(1, 2)) if stack.size else np.zeros(0, dtype=int)
    survivors = areas >= min_area
    stack, areas = stack[survivors], areas[survivors]

    labels = np.full((h, w), UNCERTAIN, dtype=np.int32)
    if stack.shape[0] == 0:
        # Degenerate stacks collapse to a single whole-image background
        # object so downstream seeding always has at least one object.
        labels[:] = 0
        return PriorPartition(labels)

    order = np.lexsort((np.arange(stack.shape[0]), -areas))
    for new_id, i in enumerate(order):
        labels[stack[i]] = new_id
    next_id = stack.shape[0]

    unlabeled = labels == UNCERTAIN
    opened = morphological_open(unlabeled, opening_radius)
    comps, n_comps = ndimage.label(opened, structure=_FOUR_CONN)
    if n_comps:
        sizes = np.bincount(comps.ravel())[1:]
        big = np.nonzero(sizes >= min_area)[0] + 1
        big = big[np.lexsort((big, -sizes[big - 1]))]
        for comp_id in big:
            labels[comps == comp_id] = next_id
            next_id += 1
    return PriorPartition(labels)
