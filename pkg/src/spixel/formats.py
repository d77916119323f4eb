"""Readers and writers for the on-disk raster formats.

Formats: P6 PPM images (maxval 255), P5 PGM masks/saliency, and three
little-endian binary containers — SPL1 label maps (u32 per pixel,
0xFFFFFFFF = UNCERTAIN), SPM1 mask stacks (byte per pixel), and SPF1
feature stacks (channel-major float32).  PNG is supported through
Pillow.  Every reader rejects short payloads and trailing bytes with a
diagnostic naming the byte offset; read(write(x)) is bit-exact.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .prior import UNCERTAIN
from .raster import FeatureStack, Image

_SENTINEL_U32 = 0xFFFFFFFF


def _read_file(path):
    with open(path, "rb") as fh:
        return fh.read()


def _need(data, pos, count, what):
    if len(data) - pos < count:
        raise ValueError(
            "unexpected end of %s at byte %d" % (what, len(data))
        )


def _no_trailing(data, pos):
    if len(data) > pos:
        raise ValueError("trailing garbage at byte %d" % pos)


def _netpbm_token(data, pos):
    while pos < len(data):
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= len(data):
        raise ValueError("truncated header at byte %d" % len(data))
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def _netpbm_int(data, pos, what):
    token, pos = _netpbm_token(data, pos)
    try:
        value = int(token)
    except ValueError:
        raise ValueError(
            "malformed %s in header at byte %d" % (what, pos - len(token))
        )
    if value <= 0:
        raise ValueError("%s must be positive" % what)
    return value, pos


def _netpbm_header(data, expected_magic, name):
    magic, pos = _netpbm_token(data, 0)
    if magic != expected_magic:
        raise ValueError("not a %s file" % name)
    width, pos = _netpbm_int(data, pos, "width")
    height, pos = _netpbm_int(data, pos, "height")
    maxval, pos = _netpbm_int(data, pos, "maxval")
    _need(data, pos, 1, "header")
    if not data[pos:pos + 1].isspace():
        raise ValueError("malformed header at byte %d" % pos)
    return width, height, maxval, pos + 1


def read_ppm(path):
    """Read a binary P6 PPM (maxval 255) into an (H, W, 3) uint8 array."""
    data = _read_file(path)
    width, height, maxval, pos = _netpbm_header(data, b"P6", "P6 PPM")
    if maxval != 255:
        raise ValueError("unsupported maxval %d (only 255)" % maxval)
    count = width * height * 3
    _need(data, pos, count, "pixel data")
    _no_trailing(data, pos + count)
    rgb = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    return rgb.reshape(height, width, 3).copy()


def write_ppm(path, rgb):
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("rgb must have shape (H, W, 3)")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(rgb.tobytes())


def read_pgm(path):
    """Read a binary P5 PGM; returns (values, maxval) with values uint16."""
    data = _read_file(path)
    width, height, maxval, pos = _netpbm_header(data, b"P5", "P5 PGM")
    if maxval > 65535:
        raise ValueError("unsupported maxval %d" % maxval)
    itemsize = 1 if maxval < 256 else 2
    count = width * height * itemsize
    _need(data, pos, count, "pixel data")
    _no_trailing(data, pos + count)
    dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
    values = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return values.reshape(height, width).astype(np.uint16), maxval


def write_pgm(path, values, maxval=255):
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError("values must have shape (H, W)")
    if not 1 <= maxval <= 255:
        raise ValueError("writer supports maxval in [1, 255]")
    if values.min() < 0 or values.max() > maxval:
        raise ValueError("values exceed maxval")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(values.astype(np.uint8).tobytes())


def read_image(path):
    """Read a P6 PPM or PNG into an Image (sniffed by magic bytes)."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(b"P6"):
        return Image(read_ppm(path))
    if head.startswith(b"\x89PNG"):
        from PIL import Image as PILImage

        with PILImage.open(path) as im:
            return Image(np.asarray(im.convert("RGB")))
    raise ValueError("unsupported image format (expected P6 PPM or PNG)")


def write_image(path, rgb):
    """Write RGB bytes as PPM or PNG depending on the file extension."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(np.asarray(rgb, dtype=np.uint8), "RGB").save(path)
    else:
        write_ppm(path, rgb)


def read_labels(path):
    """Read an SPL1 label map into an (H, W) int32 array (-1 = UNCERTAIN)."""
    return parse_labels(_read_file(path))


def parse_labels(data):
    """Parse SPL1 bytes; see read_labels."""
    if data[:4] != b"SPL1":
        raise ValueError("not an SPL1 file")
    _need(data, 4, 8, "header")
    height, width = struct.unpack_from("<II", data, 4)
    if height == 0 or width == 0:
        raise ValueError("dimensions must be positive")
    count = height * width
    _need(data, 12, count * 4, "label data")
    _no_trailing(data, 12 + count * 4)
    raw = np.frombuffer(data, dtype="<u4", count=count, offset=12)
    bad = (raw >= 1 << 31) & (raw != _SENTINEL_U32)
    if np.any(bad):
        offset = 12 + 4 * int(np.nonzero(bad)[0][0])
        raise ValueError("label value out of range at byte %d" % offset)
    labels = raw.astype(np.int64)
    labels[raw == _SENTINEL_U32] = UNCERTAIN
    return labels.reshape(height, width).astype(np.int32)


def write_labels(path, labels):
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("labels must have shape (H, W)")
    if labels.size and (labels.min() < UNCERTAIN or labels.max() >= 1 << 31):
        raise ValueError("labels must lie in [-1, 2^31)")
    h, w = labels.shape
    raw = labels.astype(np.int64).copy()
    raw[raw == UNCERTAIN] = _SENTINEL_U32
    with open(path, "wb") as fh:
        fh.write(b"SPL1" + struct.pack("<II", h, w))
        fh.write(raw.astype("<u4").tobytes())


def read_mask_stack(path):
    """Read an SPM1 mask stack into an (n, H, W) boolean array."""
    return parse_mask_stack(_read_file(path))


def parse_mask_stack(data):
    """Parse SPM1 bytes; see read_mask_stack."""
    if data[:4] != b"SPM1":
        raise ValueError("not an SPM1 file")
    _need(data, 4, 12, "header")
    n, height, width = struct.unpack_from("<III", data, 4)
    if height == 0 or width == 0:
        raise ValueError("dimensions must be positive")
    count = n * height * width
    _need(data, 16, count, "mask data")
    _no_trailing(data, 16 + count)
    raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=16)
    return (raw != 0).reshape(n, height, width)


def write_mask_stack(path, masks):
    masks = np.asarray(masks)
    if masks.ndim != 3:
        raise ValueError("masks must have shape (n, H, W)")
    n, h, w = masks.shape
    with open(path, "wb") as fh:
        fh.write(b"SPM1" + struct.pack("<III", n, h, w))
        fh.write((masks != 0).astype(np.uint8).tobytes())


def read_masks(path):
    """Read proposal masks from an SPM1 file or a directory of P5 PGMs
    (taken in lexicographic name order; nonzero pixels are members)."""
    if os.path.isdir(path):
        names = sorted(
            f for f in os.listdir(path) if f.lower().endswith(".pgm")
        )
        if not names:
            raise ValueError("no .pgm masks in directory %s" % path)
        masks = []
        for name in names:
            values, _ = read_pgm(os.path.join(path, name))
            masks.append(values != 0)
        if any(m.shape != masks[0].shape for m in masks):
            raise ValueError("all masks must share the same dimensions")
        return np.stack(masks)
    return read_mask_stack(path)


def read_features(path):
    """Read an SPF1 feature stack (channel-major float32, D=0 allowed)."""
    data = _read_file(path)
    if data[:4] != b"SPF1":
        raise ValueError("not an SPF1 file")
    _need(data, 4, 12, "header")
    height, width, depth = struct.unpack_from("<III", data, 4)
    if height == 0 or width == 0:
        raise ValueError("dimensions must be positive")
    count = depth * height * width
    _need(data, 16, count * 4, "feature data")
    _no_trailing(data, 16 + count * 4)
    raw = np.frombuffer(data, dtype="<f4", count=count, offset=16)
    finite = np.isfinite(raw)
    if not np.all(finite):
        offset = 16 + 4 * int(np.nonzero(~finite)[0][0])
        raise ValueError("non-finite feature at byte %d" % offset)
    return FeatureStack(raw.reshape(depth, height, width).astype(np.float64))


def write_features(path, stack):
    data = stack.data if isinstance(stack, FeatureStack) else np.asarray(stack)
    if data.ndim != 3:
        raise ValueError("features must have shape (D, H, W)")
    d, h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(b"SPF1" + struct.pack("<III", h, w, d))
        fh.write(data.astype("<f4").tobytes())


def read_saliency(path):
    """Read a saliency map: P5 PGM rescaled by maxval, or SPF1 with D=1."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head.startswith(b"P5"):
        values, maxval = read_pgm(path)
        return values.astype(np.float64) / maxval
    if head == b"SPF1":
        stack = read_features(path)
        if stack.depth != 1:
            raise ValueError(
                "saliency SPF1 must have depth 1, got %d" % stack.depth
            )
        scores = stack.data[0]
        if scores.size and (scores.min() < 0 or scores.max() > 1):
            raise ValueError("saliency scores must lie in [0, 1]")
        return scores.copy()
    raise ValueError("unsupported saliency format (expected P5 PGM or SPF1)")
