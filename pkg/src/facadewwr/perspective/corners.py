"""Facade corner candidates from a segmentation label map."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import DetectionError, ValidationError
from ..masks import ClassConfig, LabelMap
from .homography import Quad

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def largest_component(bits: np.ndarray, structure=_FOUR_CONNECTED) -> np.ndarray:
    """Largest connected component of ``bits``; size ties go to the first in raster order."""
    labels, n = ndimage.label(bits, structure=structure)
    if n == 0:
        return np.zeros_like(bits, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def corners_from_mask(label_map: LabelMap, cfg: ClassConfig = ClassConfig()) -> Quad:
    """Extreme corners of the largest 4-connected building region.

    TL/BR minimise/maximise x + y over the region's pixel centres and TR/BL
    maximise/minimise x - y. Ties go to the smaller y, then the smaller x.
    """
    region = largest_component(label_map.classes == cfg.building_class)
    ys, xs = np.nonzero(region)  # raster order: y ascending, then x ascending
    if len(xs) < 4:
        raise DetectionError(f"need at least 4 building pixels, found {len(xs)}")
    cx = xs + 0.5
    cy = ys + 0.5
    s = xs + ys
    d = xs - ys
    # np.argmin/argmax return the first hit, which in raster order is the smallest (y, x).
    picks = [int(np.argmin(s)), int(np.argmax(d)), int(np.argmax(s)), int(np.argmin(d))]
    corners = tuple((float(cx[i]), float(cy[i])) for i in picks)
    try:
        return Quad(corners)
    except ValidationError as exc:
        raise DetectionError(f"building region gives a degenerate quad: {exc}") from None
