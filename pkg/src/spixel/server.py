"""Single-session HTTP API for interactive re-segmentation.

One image per process.  Responses are canonical JSON (sorted keys,
fixed separators) so identical requests against identical session
state produce byte-identical bodies.  Segmentation and prior uploads
are serialized through a non-blocking lock; concurrent mutation gets
a 409.
"""

from __future__ import annotations

import io
import json
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from .adaptive import classify_salient, user_allocate, va_allocate
from .clustering import segment
from .formats import parse_labels, parse_mask_stack
from .metrics import boundary_mask
from .prior import PriorPartition, aggregate_masks
from .raster import ClusterConfig, FeatureStack, Image


@dataclass
class Session:
    img: Image
    partition: PriorPartition
    deep: FeatureStack = None
    saliency: np.ndarray = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _json_response(payload, status=200):
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return Response(
        content=body.encode(), status_code=status,
        media_type="application/json",
    )


def _bad_request(message):
    return _json_response({"error": message}, status=400)


def encode_rle(labels):
    """Run-length pairs [value, length] over the raster-order labels."""
    flat = np.asarray(labels).ravel()
    if flat.size == 0:
        return []
    change = np.nonzero(np.diff(flat))[0]
    starts = np.r_[0, change + 1]
    ends = np.r_[starts[1:], flat.size]
    return [[int(flat[s]), int(e - s)] for s, e in zip(starts, ends)]


def _session_payload(session):
    objects = []
    for i in session.partition.object_ids:
        ys, xs = np.nonzero(session.partition.labels == i)
        objects.append(
            {
                "id": int(i),
                "area": int(len(xs)),
                "bbox": [
                    int(xs.min()), int(ys.min()),
                    int(xs.max()), int(ys.max()),
                ],
            }
        )
    return {
        "width": session.img.width,
        "height": session.img.height,
        "objects": objects,
    }


def _require_int(body, key, default, minimum):
    value = body.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ValueError("%s must be an integer >= %d" % (key, minimum))
    return value


def _require_number(body, key, default, positive=True):
    value = body.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("%s must be a number" % key)
    if positive and value <= 0:
        raise ValueError("%s must be positive" % key)
    return float(value)


def create_app(session: Session):
    app = FastAPI()
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"],
        allow_methods=["*"], allow_headers=["*"],
    )

    @app.get("/api/session")
    def get_session():
        return _json_response(_session_payload(session))

    @app.get("/api/image")
    def get_image():
        from PIL import Image as PILImage

        buf = io.BytesIO()
        PILImage.fromarray(session.img.rgb, "RGB").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/api/segment")
    async def post_segment(request: Request):
        if not session.lock.acquire(blocking=False):
            return _json_response(
                {"error": "segmentation in progress"}, status=409
            )
        try:
            try:
                body = await request.json()
            except Exception:
                return _bad_request("malformed JSON body")
            if not isinstance(body, dict):
                return _bad_request("body must be a JSON object")
            if "k" not in body:
                return _bad_request("k is required")
            try:
                k = _require_int(body, "k", None, 1)
                lambda_s = _require_number(body, "lambda_s", 7.5)
                lambda_c = _require_number(body, "lambda_c", 0.26)
                iters = _require_int(body, "iters", 10, 1)
                seed = _require_int(body, "seed", 0, 0)
                factors_raw = body.get("factors", {})
                if not isinstance(factors_raw, dict):
                    raise ValueError("factors must be an object")
                factors = {}
                for key, value in factors_raw.items():
                    if isinstance(value, bool) or not isinstance(
                        value, (int, float)
                    ):
                        raise ValueError("factor must be a number")
                    if value <= 0:
                        raise ValueError("factor must be positive")
                    factors[int(key)] = float(value)
                va_ratio = body.get("va_ratio")
                if va_ratio is not None:
                    if factors:
                        raise ValueError(
                            "factors and va_ratio are mutually exclusive"
                        )
                    if session.saliency is None:
                        raise ValueError("no saliency map loaded")
                    if isinstance(va_ratio, bool) or not isinstance(
                        va_ratio, (int, float)
                    ):
                        raise ValueError("va_ratio must be a number")
                counts = None
                if va_ratio is not None:
                    classes = classify_salient(
                        session.partition, session.saliency
                    )
                    counts = va_allocate(
                        session.partition, classes, k, float(va_ratio)
                    )
                elif factors:
                    counts = user_allocate(session.partition, factors, k)
                cfg = ClusterConfig(
                    k=k, lambda_c=lambda_c, lambda_s=lambda_s,
                    iterations=iters, rng_seed=seed,
                )
                seg = segment(
                    session.img, session.partition, cfg,
                    deep=session.deep, counts=counts,
                )
            except ValueError as exc:
                return _bad_request(str(exc))
            ys, xs = np.nonzero(boundary_mask(seg.labels))
            return _json_response(
                {
                    "k_realized": seg.k_realized,
                    "labels_rle": encode_rle(seg.labels),
                    "boundaries": [
                        [int(x), int(y)] for y, x in zip(ys, xs)
                    ],
                    "per_object_counts": {
                        str(i): c for i, c in seg.per_object_counts.items()
                    },
                }
            )
        finally:
            session.lock.release()

    @app.post("/api/prior")
    async def post_prior(request: Request):
        if not session.lock.acquire(blocking=False):
            return _json_response(
                {"error": "session busy"}, status=409
            )
        try:
            data = await request.body()
            shape = (session.img.height, session.img.width)
            try:
                if data[:4] == b"SPL1":
                    labels = parse_labels(data)
                    if labels.shape != shape:
                        raise ValueError(
                            "prior dimensions do not match the image"
                        )
                    partition = PriorPartition(labels)
                elif data[:4] == b"SPM1":
                    masks = parse_mask_stack(data)
                    if masks.shape[1:] != shape:
                        raise ValueError(
                            "mask dimensions do not match the image"
                        )
                    partition = aggregate_masks(masks, shape)
                else:
                    raise ValueError(
                        "unsupported prior format (SPL1 or SPM1)"
                    )
            except ValueError as exc:
                return _bad_request(str(exc))
            session.partition = partition
            return _json_response(_session_payload(session))
        finally:
            session.lock.release()

    return app
