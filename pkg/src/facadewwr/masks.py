"""Binary window masks, class-indexed label maps and label fusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from PIL import Image

from .errors import FormatError, ShapeError, ValidationError
from .ingest import PolygonAnnotation, _open

IGNORE_INDEX = 255
MAX_CLASS = 150


@dataclass(frozen=True)
class ClassConfig:
    """Class indices used for facade (building) and window pixels.

    Defaults follow the 150-class scene-parsing numbering with 0 reserved
    for unlabeled pixels.
    """

    building_class: int = 2
    window_class: int = 9
    ignore_index: int = IGNORE_INDEX

    def __post_init__(self):
        if self.ignore_index != IGNORE_INDEX:
            raise ValidationError(f"ignore index is fixed at {IGNORE_INDEX}")
        for name in ("building_class", "window_class"):
            v = getattr(self, name)
            if not 0 <= v <= MAX_CLASS:
                raise ValidationError(f"{name}={v} outside [0, {MAX_CLASS}]")
        if self.building_class == self.window_class:
            raise ValidationError("building_class and window_class must differ")

    @classmethod
    def parse(cls, text: str) -> "ClassConfig":
        """Parse ``"building=2,window=9"`` (either key may be omitted)."""
        kw = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, value = part.partition("=")
            if not sep or key.strip() not in ("building", "window"):
                raise ValidationError(f"bad class spec {part!r}; expected building=N or window=N")
            try:
                kw[key.strip() + "_class"] = int(value)
            except ValueError:
                raise ValidationError(f"bad class index {value!r}") from None
        return cls(**kw)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        if bits.ndim != 2 or 0 in bits.shape:
            raise ValidationError(f"mask must be a non-empty 2-D array, got shape {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits))

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class indices in [0, 150] plus the ignore index 255."""

    classes: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.classes)
        if raw.ndim != 2 or 0 in raw.shape:
            raise ValidationError(f"label map must be a non-empty 2-D array, got shape {raw.shape}")
        if raw.dtype != np.uint8:
            if raw.size and (raw.min() < 0 or raw.max() > 255):
                raise ValidationError("class values must fit in 8 bits")
        classes = np.array(raw, dtype=np.uint8, copy=True)
        bad = (classes > MAX_CLASS) & (classes != IGNORE_INDEX)
        if bad.any():
            v = int(classes[bad][0])
            raise ValidationError(f"class value {v} outside [0, {MAX_CLASS}] and not the ignore index")
        object.__setattr__(self, "classes", _frozen(classes))

    @classmethod
    def filled(cls, width: int, height: int, value: int) -> "LabelMap":
        return cls(np.full((height, width), value, dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    def values(self) -> set[int]:
        return {int(v) for v in np.unique(self.classes)}

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.classes.shape == other.classes.shape and np.array_equal(self.classes, other.classes)


def _scanline_parity(points: np.ndarray, width: int, height: int) -> np.ndarray:
    # Crossing rule: an edge spans row centre y when min(y0, y1) <= y < max(y0, y1);
    # a pixel centre cx is inside when an odd number of crossings lie at x > cx.
    inside = np.zeros((height, width), dtype=bool)
    x0, y0 = points[:, 0], points[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    centers_x = np.arange(width) + 0.5

    row_lo = max(0, int(np.floor(points[:, 1].min() - 0.5)))
    row_hi = min(height - 1, int(np.ceil(points[:, 1].max() - 0.5)))
    for j in range(row_lo, row_hi + 1):
        y = j + 0.5
        spans = (y0 > y) != (y1 > y)
        if not spans.any():
            continue
        ax, ay, bx, by = x0[spans], y0[spans], x1[spans], y1[spans]
        xs = np.sort(ax + (y - ay) * (bx - ax) / (by - ay))
        right = len(xs) - np.searchsorted(xs, centers_x, side="right")
        inside[j] = (right & 1).astype(bool)
    return inside


def rasterize_polygons(polygons: Iterable[PolygonAnnotation], width: int, height: int) -> BinaryMask:
    """Fill polygons with the even-odd rule, sampling at pixel centres.

    Pixel (i, j) is set when its centre (i + 0.5, j + 0.5) is inside any of
    the polygons. Vertices outside the raster are fine; only in-bounds
    centres are ever tested.
    """
    if width < 1 or height < 1:
        raise ValidationError(f"raster size must be positive, got {width}x{height}")
    bits = np.zeros((height, width), dtype=bool)
    for poly in polygons:
        pts = np.asarray(poly.points, dtype=np.float64)
        bits |= _scanline_parity(pts, width, height)
    return BinaryMask(bits)


def _check_same_size(a, b, what: str) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise ShapeError(f"{what}: size mismatch {a.width}x{a.height} vs {b.width}x{b.height}")


def fuse_labels(base: LabelMap, windows: BinaryMask, cfg: ClassConfig = ClassConfig()) -> LabelMap:
    """Stamp window pixels onto a label map; windows override any base class."""
    _check_same_size(base, windows, "fuse_labels")
    out = base.classes.copy()
    out[windows.bits] = cfg.window_class
    return LabelMap(out)


def mask_from_label(label_map: LabelMap, class_index: int) -> BinaryMask:
    return BinaryMask(label_map.classes == class_index)


def encode_label_png(label_map: LabelMap, path) -> None:
    Image.fromarray(np.ascontiguousarray(label_map.classes)).save(path, format="PNG")


def decode_label_png(path) -> LabelMap:
    im = _open(path)
    if im.format != "PNG" or im.mode != "L":
        raise FormatError(f"{path}: label map must be an 8-bit single-channel PNG (got {im.format} {im.mode})")
    return LabelMap(np.asarray(im))


def encode_mask_png(mask: BinaryMask, path) -> None:
    """Write a window mask as 8-bit grayscale: 0 background, 255 window."""
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8)).save(path, format="PNG")


def decode_mask_png(path) -> BinaryMask:
    """Read a mask PNG; any nonzero sample counts as set."""
    im = _open(path)
    if im.format != "PNG" or im.mode not in ("L", "1"):
        raise FormatError(f"{path}: mask must be a single-channel PNG (got {im.format} {im.mode})")
    return BinaryMask(np.asarray(im.convert("L")) != 0)
