"""Core raster types: images, Lab conversion, and clustering feature assembly.

Pixel coordinates are (x, y) with x the column and y the row; rasters are
stored row-major as numpy arrays of shape (H, W[, C]).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# sRGB -> XYZ matrix for the D65/2-degree observer (IEC 61966-2-1).
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

# D65 reference white in XYZ.
_WHITE = np.array([0.95047, 1.0, 1.08883])

# CIELAB linear-domain threshold (6/29)^3 and slope 1/(3*(6/29)^2).
_LAB_EPS = 216.0 / 24389.0
_LAB_SLOPE = 24389.0 / (27.0 * 116.0)


def rgb_to_lab(rgb):
    """Convert sRGB bytes to CIELAB (D65 white point).

    Accepts any array whose last axis has size 3, with components in
    [0, 255]; a bare (r, g, b) triple works too.  Returns float64 with
    L in [0, 100] and a, b roughly in [-128, 127].
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ValueError("last axis must hold 3 color components")
    srgb = rgb / 255.0
    linear = np.where(
        srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4
    )
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _LAB_EPS, np.cbrt(t), _LAB_SLOPE * t + 16.0 / 116.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * fy - 16.0
    lab[..., 1] = 500.0 * (fx - fy)
    lab[..., 2] = 200.0 * (fy - fz)
    return lab


@dataclass(frozen=True)
class Image:
    """An RGB raster plus its Lab conversion.

    The Lab plane is derived deterministically from ``rgb`` at
    construction time; both arrays are read-only afterwards.
    """

    rgb: np.ndarray
    lab: np.ndarray = field(init=False)

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.uint8)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError("rgb must have shape (H, W, 3)")
        if rgb.shape[0] < 1 or rgb.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        rgb = rgb.copy()
        rgb.setflags(write=False)
        lab = rgb_to_lab(rgb)
        lab.setflags(write=False)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "lab", lab)

    @property
    def height(self):
        return self.rgb.shape[0]

    @property
    def width(self):
        return self.rgb.shape[1]

    @property
    def n_pixels(self):
        return self.rgb.shape[0] * self.rgb.shape[1]


@dataclass(frozen=True)
class FeatureStack:
    """Optional per-pixel feature channels, stored channel-major (D, H, W).

    D = 0 means no extra features; all values must be finite.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError("feature data must have shape (D, H, W)")
        if data.size and not np.all(np.isfinite(data)):
            raise ValueError("non-finite feature value")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def empty(cls, height, width):
        return cls(np.zeros((0, height, width)))

    @property
    def depth(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


@dataclass(frozen=True)
class ClusterConfig:
    """Knobs for the constrained clustering loop.

    lambda_c / lambda_s are the color and spatial feature weights
    (defaults 0.26 / 7.5); candidate_radius_factor scales the seed
    search radius in units of the expected superpixel side length.
    """

    k: int
    lambda_c: float = 0.26
    lambda_s: float = 7.5
    iterations: int = 10
    candidate_radius_factor: float = 3.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lambda_c <= 0 or self.lambda_s <= 0:
            raise ValueError("lambda_c and lambda_s must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.candidate_radius_factor <= 0:
            raise ValueError("candidate_radius_factor must be positive")


def assemble_features(img: Image, deep: FeatureStack, cfg: ClusterConfig):
    """Build the (H*W, 5+D) per-pixel feature matrix used by clustering.

    Layout per pixel: [lambda_c * Lab, lambda_s * (x/sigma, y/sigma),
    deep channels], with sigma = sqrt(H*W / k) so that one expected
    superpixel side spans one unit in both axes.  Pure function of its
    inputs; pixels are in raster (row-major) order.
    """
    h, w = img.height, img.width
    if deep.depth and (deep.height != h or deep.width != w):
        raise ValueError(
            "feature stack is %dx%d but image is %dx%d"
            % (deep.height, deep.width, h, w)
        )
    sigma = np.sqrt((h * w) / cfg.k)
    n = h * w
    feats = np.empty((n, 5 + deep.depth), dtype=np.float64)
    feats[:, 0:3] = cfg.lambda_c * img.lab.reshape(n, 3)
    ys, xs = np.divmod(np.arange(n), w)
    feats[:, 3] = cfg.lambda_s * (xs / sigma)
    feats[:, 4] = cfg.lambda_s * (ys / sigma)
    if deep.depth:
        feats[:, 5:] = deep.data.reshape(deep.depth, n).T
    return feats
