"""Inverse-mapping warps for images and label maps.

Coordinates are continuous with pixel (i, j) covering [i, i+1) x [j, j+1),
so its centre is (i + 0.5, j + 0.5). With this convention a pure scale
homography reproduces :func:`facadewwr.preprocess.resize_bilinear`.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegeneracyError, ValidationError
from ..ingest import RasterImage
from ..masks import IGNORE_INDEX, LabelMap
from ..preprocess import round_half_up
from .homography import Homography, project


def _source_coords(H: Homography, out_w: int, out_h: int, in_w: int, in_h: int):
    if out_w < 1 or out_h < 1:
        raise ValidationError(f"output size must be positive, got {out_w}x{out_h}")
    try:
        inv = np.linalg.inv(H.h)
    except np.linalg.LinAlgError:
        raise DegeneracyError("homography is not invertible") from None
    u, v = np.meshgrid(np.arange(out_w) + 0.5, np.arange(out_h) + 0.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        src = project(inv, np.stack([u.ravel(), v.ravel()], axis=1))
    x = src[:, 0].reshape(out_h, out_w)
    y = src[:, 1].reshape(out_h, out_w)
    valid = np.isfinite(x) & np.isfinite(y) & (x >= 0) & (x < in_w) & (y >= 0) & (y < in_h)
    x = np.where(valid, x, 0.5)
    y = np.where(valid, y, 0.5)
    return x, y, valid


def warp_image(img: RasterImage, H: Homography, out_w: int, out_h: int) -> RasterImage:
    """Resample ``img`` into the frame that ``H`` maps it to, bilinearly.

    Output pixels whose centre maps outside the source are 0.
    """
    x, y, valid = _source_coords(H, out_w, out_h, img.width, img.height)
    # Continuous -> sample-index coordinates, clamped like resize_bilinear.
    xi = np.clip(x - 0.5, 0, img.width - 1)
    yi = np.clip(y - 0.5, 0, img.height - 1)
    x0 = np.floor(xi).astype(np.intp)
    y0 = np.floor(yi).astype(np.intp)
    x1 = np.minimum(x0 + 1, img.width - 1)
    y1 = np.minimum(y0 + 1, img.height - 1)
    fx, fy = xi - x0, yi - y0

    src = img.pixels.astype(np.float64)
    if img.channels == 3:
        fx, fy = fx[..., None], fy[..., None]
        valid_b = valid[..., None]
    else:
        valid_b = valid
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    out = np.clip(round_half_up(top * (1 - fy) + bot * fy), 0, 255)
    return RasterImage(np.where(valid_b, out, 0).astype(np.uint8))


def warp_labels(label_map: LabelMap, H: Homography, out_w: int, out_h: int) -> LabelMap:
    """Nearest-neighbour counterpart of :func:`warp_image`; outside fills with 255."""
    x, y, valid = _source_coords(H, out_w, out_h, label_map.width, label_map.height)
    xs = np.clip(np.floor(x).astype(np.intp), 0, label_map.width - 1)
    ys = np.clip(np.floor(y).astype(np.intp), 0, label_map.height - 1)
    out = np.where(valid, label_map.classes[ys, xs], IGNORE_INDEX)
    return LabelMap(out.astype(np.uint8))
