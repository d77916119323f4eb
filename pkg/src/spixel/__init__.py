"""Object-constrained superpixel toolkit.

Segments an image into K superpixels that respect a per-pixel object
partition: every labeled pixel stays inside its object, while pixels
of unknown ownership may join any cluster.  Ships with proposal-mask
aggregation, adaptive per-object density, border refinement, a
standardized metric suite, binary raster formats, a CLI, and a small
HTTP server for interactive use.
"""

from .raster import ClusterConfig, FeatureStack, Image, assemble_features, rgb_to_lab
from .prior import (
    UNCERTAIN,
    PriorPartition,
    aggregate_masks,
    filter_min_area,
    morphological_open,
    remove_overlaps,
)
from .seeding import SeedSet, allocate_seed_counts, place_seeds
from .clustering import Segmentation, build_candidates, segment
from .connectivity import enforce_connectivity
from .adaptive import classify_salient, user_allocate, va_allocate
from .metrics import (
    asa,
    boundary_fmeasure,
    boundary_precision,
    boundary_recall,
    compactness_loss,
    delta_k,
    explained_variation,
    granularity_preservation,
    metrics_report,
    project_groundtruth,
    seg_loss,
    total_loss,
)
from .refinement import dilate_borders, refine_labels
from .bench import run_benchmark

__all__ = [
    "ClusterConfig",
    "FeatureStack",
    "Image",
    "assemble_features",
    "rgb_to_lab",
    "UNCERTAIN",
    "PriorPartition",
    "aggregate_masks",
    "filter_min_area",
    "morphological_open",
    "remove_overlaps",
    "SeedSet",
    "allocate_seed_counts",
    "place_seeds",
    "Segmentation",
    "build_candidates",
    "segment",
    "enforce_connectivity",
    "classify_salient",
    "user_allocate",
    "va_allocate",
    "asa",
    "boundary_fmeasure",
    "boundary_precision",
    "boundary_recall",
    "compactness_loss",
    "delta_k",
    "explained_variation",
    "granularity_preservation",
    "metrics_report",
    "project_groundtruth",
    "seg_loss",
    "total_loss",
    "dilate_borders",
    "refine_labels",
    "run_benchmark",
]
