"""Command-line interface.

Subcommands: aggregate (mask stack -> prior partition), segment
(superpixel segmentation), eval (metric report), fmeasure (multi-scale
boundary F), refine (semantic border refinement), serve (local HTTP
session), bench (directory benchmark runner).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench as bench_mod
from .adaptive import classify_salient, user_allocate, va_allocate
from .clustering import segment
from .formats import (
    read_features,
    read_image,
    read_labels,
    read_masks,
    read_saliency,
    write_image,
    write_labels,
)
from .metrics import (
    DEFAULT_EPS,
    F_PROTOCOL_SCALES,
    boundary_fmeasure,
    boundary_mask,
    metrics_report,
)
from .prior import PriorPartition, aggregate_masks
from .raster import ClusterConfig
from .refinement import DEFAULT_KERNEL, DEFAULT_REFINE_K, refine_labels

def _print_json(payload):
    print(json.dumps(payload, sort_keys=True))


def render_overlay(rgb, labels):
    """Source image with superpixel boundary pixels painted pure red."""
    out = np.asarray(rgb, dtype=np.uint8).copy()
    out[boundary_mask(labels)] = (255, 0, 0)
    return out


def _parse_factors(text):
    factors = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError("factor entries must look like id=ratio")
        key, value = part.split("=", 1)
        factors[int(key)] = float(value)
    return factors


def _add_cluster_flags(p):
    p.add_argument("--lambda-c", type=float, default=0.26)
    p.add_argument("--lambda-s", type=float, default=7.5)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)


def _cluster_config(args, k):
    return ClusterConfig(
        k=k,
        lambda_c=args.lambda_c,
        lambda_s=args.lambda_s,
        iterations=args.iters,
        rng_seed=args.seed,
    )


def _whole_image_partition(shape):
    return aggregate_masks([], shape)


def cmd_aggregate(args):
    masks = read_masks(args.masks)
    shape = masks.shape[1:]
    partition = aggregate_masks(
        masks, shape, min_area=args.min_area, opening_radius=args.open_radius
    )
    write_labels(args.out, partition.labels)
    _print_json(
        {"objects": len(partition.object_ids), "uncertain": partition.n_uncertain}
    )
    return 0


def cmd_segment(args):
    img = read_image(args.image)
    if args.prior:
        partition = PriorPartition(read_labels(args.prior))
        if partition.labels.shape != (img.height, img.width):
            raise ValueError("prior dimensions do not match the image")
    else:
        partition = _whole_image_partition((img.height, img.width))
    deep = read_features(args.features) if args.features else None
    if args.factors and args.va_ratio is not None:
        raise ValueError("--factors and --va-ratio are mutually exclusive")
    if args.va_ratio is not None and not args.saliency:
        raise ValueError("--va-ratio requires --saliency")
    counts = None
    if args.va_ratio is not None:
        saliency = read_saliency(args.saliency)
        classes = classify_salient(partition, saliency)
        counts = va_allocate(partition, classes, args.k, args.va_ratio)
    elif args.factors:
        counts = user_allocate(partition, _parse_factors(args.factors), args.k)
    cfg = _cluster_config(args, args.k)
    seg = segment(
        img, partition, cfg, deep=deep, counts=counts, workers=args.workers
    )
    write_labels(args.out, seg.labels)
    if args.overlay:
        write_image(args.overlay, render_overlay(img.rgb, seg.labels))
    _print_json({"k_realized": seg.k_realized, "k_requested": args.k})
    return 0


def cmd_eval(args):
    img = read_image(args.image)
    seg = read_labels(args.seg)
    gt = read_labels(args.gt)
    report = metrics_report(seg, img, gt, k_requested=args.k, eps=args.eps)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, sort_keys=True)
            fh.write("\n")
    _print_json(report)
    return 0


def cmd_fmeasure(args):
    img = read_image(args.image)
    gt = read_labels(args.gt)
    if args.prior:
        partition = PriorPartition(read_labels(args.prior))
    else:
        partition = _whole_image_partition((img.height, img.width))
    scales = [int(s) for s in args.scales.split(",") if s.strip()]
    if not scales:
        raise ValueError("at least one scale is required")
    labelings = []
    for k in scales:
        cfg = _cluster_config(args, k)
        labelings.append(segment(img, partition, cfg).labels)
    _print_json({"f": boundary_fmeasure(labelings, gt, eps=args.eps)})
    return 0


def cmd_refine(args):
    img = read_image(args.image)
    semantic = read_labels(args.semantic)
    refined = refine_labels(
        img,
        semantic,
        k=args.k,
        kernel=args.kernel,
        lambda_c=args.lambda_c,
        lambda_s=args.lambda_s,
        iterations=args.iters,
        rng_seed=args.seed,
    )
    write_labels(args.out, refined)
    _print_json({"classes": len(np.unique(refined))})
    return 0


def cmd_serve(args):
    import uvicorn

    from .server import Session, create_app

    img = read_image(args.image)
    if args.prior:
        partition = PriorPartition(read_labels(args.prior))
    else:
        partition = _whole_image_partition((img.height, img.width))
    deep = read_features(args.features) if args.features else None
    saliency = read_saliency(args.saliency) if args.saliency else None
    session = Session(
        img=img, partition=partition, deep=deep, saliency=saliency
    )
    uvicorn.run(
        create_app(session), host=args.host, port=args.port,
        log_level="info",
    )
    return 0


def cmd_bench(args):
    k_list = [int(s) for s in args.k.split(",") if s.strip()]
    if not k_list:
        raise ValueError("at least one k is required")
    report = bench_mod.run_benchmark(
        args.dataset,
        k_list,
        args.out,
        eps=args.eps,
        rng_seed=args.seed,
        workers=args.workers,
        lambda_c=args.lambda_c,
        lambda_s=args.lambda_s,
        iterations=args.iters,
    )
    if report["warnings"]:
        print(
            "warning: %d unpaired or skipped entries" % report["warnings"],
            file=sys.stderr,
        )
    _print_json({"rows": len(report["rows"]), "out": args.out})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spixel",
        description="Object-constrained superpixel segmentation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="build a prior partition from masks")
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-area", type=float, default=None)
    p.add_argument("--open-radius", type=int, default=1)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("segment", help="segment an image into superpixels")
    p.add_argument("--image", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--prior")
    p.add_argument("--features")
    p.add_argument("--saliency")
    p.add_argument("--va-ratio", type=float, default=None)
    p.add_argument("--factors")
    p.add_argument("--out", required=True)
    p.add_argument("--overlay")
    p.add_argument("--workers", type=int, default=1)
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="evaluate a segmentation against a gt")
    p.add_argument("--seg", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fmeasure", help="multi-scale boundary F measure")
    p.add_argument("--image", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument(
        "--scales", default=",".join(str(s) for s in F_PROTOCOL_SCALES)
    )
    p.add_argument("--prior")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_fmeasure)

    p = sub.add_parser("refine", help="refine semantic borders")
    p.add_argument("--image", required=True)
    p.add_argument("--semantic", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_REFINE_K)
    p.add_argument("--kernel", type=int, default=DEFAULT_KERNEL)
    p.add_argument("--out", required=True)
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("serve", help="serve one interactive session")
    p.add_argument("--image", required=True)
    p.add_argument("--prior")
    p.add_argument("--features")
    p.add_argument("--saliency")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="run the directory benchmark")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", default="100,250,400")
    p.add_argument("--out", required=True)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--workers", type=int, default=4)
    _add_cluster_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
