"""Dataset discovery, annotation parsing and image decoding."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import AmbiguityError, AnnotationParseError, DecodeError, SchemaError, ValidationError

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")
DEFAULT_LABEL_SUFFIX = "_label"
DEFAULT_WINDOW_LABELS = frozenset({"window"})


@dataclass(frozen=True)
class DatasetItem:
    id: str
    image_path: Path
    annotation_path: Optional[Path] = None
    label_map_path: Optional[Path] = None

    @property
    def labeled(self) -> bool:
        return self.annotation_path is not None or self.label_map_path is not None


@dataclass(frozen=True)
class PolygonAnnotation:
    """A labeled polygon in image pixel space (origin top-left, y down)."""

    label: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) < 3:
            raise ValidationError(f"polygon needs at least 3 points, got {len(pts)}")
        if not all(math.isfinite(v) for p in pts for v in p):
            raise ValidationError("polygon coordinates must be finite")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit image stored as an (H, W) or (H, W, 3) uint8 array, RGB order."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.uint8, copy=True)
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[:, :, 0]
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ValidationError(f"unsupported pixel array shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError("image must be at least 1x1")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def data(self) -> bytes:
        """Row-major interleaved samples."""
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)


def scan_dataset(root, label_suffix: str = DEFAULT_LABEL_SUFFIX) -> list[DatasetItem]:
    """List the images under ``root`` together with their companion files.

    An image ``<stem>.jpg|.jpeg|.png`` is paired with ``<stem>.json`` and
    ``<stem><label_suffix>.png`` when those exist. Files that are themselves
    label-map companions are not treated as images. Raises
    :class:`AmbiguityError` when two image files share a stem.
    """
    root = Path(root)
    names = sorted(os.listdir(root))  # OSError propagates for unreadable roots
    files = {n for n in names if (root / n).is_file()}
    label_tail = label_suffix.lower() + ".png"

    images: dict[str, str] = {}
    for name in sorted(files):
        stem, ext = os.path.splitext(name)
        if ext.lower() not in IMAGE_EXTENSIONS:
            continue
        if label_suffix and name.lower().endswith(label_tail):
            continue
        if stem in images:
            raise AmbiguityError(f"stem {stem!r} has multiple images: {images[stem]}, {name}")
        images[stem] = name

    items = []
    for stem in sorted(images):
        ann = next((n for n in sorted(files) if os.path.splitext(n)[0] == stem
                    and os.path.splitext(n)[1].lower() == ".json"), None)
        lab = next((n for n in sorted(files) if label_suffix and n.lower() == (stem + label_suffix).lower() + ".png"), None)
        items.append(DatasetItem(
            id=stem,
            image_path=root / images[stem],
            annotation_path=root / ann if ann else None,
            label_map_path=root / lab if lab else None,
        ))
    return items


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_annotations_bytes(raw: bytes) -> list[PolygonAnnotation]:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise AnnotationParseError(f"invalid UTF-8: {exc.reason}", exc.start) from None
    if text.startswith("\ufeff"):
        text = text[1:]
        bom = 3
    else:
        bom = 0
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = bom + len(text[: exc.pos].encode("utf-8"))
        raise AnnotationParseError(f"malformed JSON: {exc.msg}", offset) from None

    if not isinstance(doc, dict):
        raise SchemaError("<root>", "expected an object")
    if "shapes" not in doc:
        raise SchemaError("shapes", "missing")
    shapes = doc["shapes"]
    if not isinstance(shapes, list):
        raise SchemaError("shapes", "expected an array")

    out = []
    for i, shape in enumerate(shapes):
        where = f"shapes[{i}]"
        if not isinstance(shape, dict):
            raise SchemaError(where, "expected an object")
        if "label" not in shape:
            raise SchemaError(f"{where}.label", "missing")
        if not isinstance(shape["label"], str):
            raise SchemaError(f"{where}.label", "expected a string")
        if "points" not in shape:
            raise SchemaError(f"{where}.points", "missing")
        points = shape["points"]
        if not isinstance(points, list):
            raise SchemaError(f"{where}.points", "expected an array")
        for j, p in enumerate(points):
            if not (isinstance(p, list) and len(p) == 2 and all(_is_number(v) for v in p)):
                raise SchemaError(f"{where}.points[{j}]", "expected an [x, y] number pair")
            if not all(math.isfinite(v) for v in p):
                raise SchemaError(f"{where}.points[{j}]", "coordinates must be finite")
        if len(points) < 3:
            raise ValidationError(f"shape {i} has {len(points)} points; at least 3 are required")
        out.append(PolygonAnnotation(shape["label"], tuple((p[0], p[1]) for p in points)))
    return out


def parse_annotations(path) -> list[PolygonAnnotation]:
    """Read a LabelMe-style ``{"shapes": [{"label", "points"}]}`` file.

    Shapes come back in file order. A shape with fewer than three points
    fails the whole file rather than being dropped.
    """
    return parse_annotations_bytes(Path(path).read_bytes())


def window_polygons(polygons: Sequence[PolygonAnnotation],
                    window_labels=DEFAULT_WINDOW_LABELS) -> list[PolygonAnnotation]:
    return [p for p in polygons if p.label in window_labels]


def _open(path) -> Image.Image:
    try:
        im = Image.open(path)
        im.load()
    except (UnidentifiedImageError, SyntaxError) as exc:
        raise DecodeError(f"{path}: cannot decode image ({exc})") from None
    except OSError as exc:
        if not Path(path).is_file():
            raise
        raise DecodeError(f"{path}: cannot decode image ({exc})") from None
    if im.format not in ("PNG", "JPEG"):
        raise DecodeError(f"{path}: unsupported format {im.format}")
    return im


def decode_image(path) -> RasterImage:
    """Decode a PNG or JPEG into an 8-bit gray or RGB raster, dropping alpha."""
    im = _open(path)
    mode = im.mode
    if mode in ("L", "RGB"):
        pass
    elif mode in ("1", "LA"):
        im = im.convert("L")
    elif mode in ("RGBA", "CMYK", "YCbCr"):
        im = im.convert("RGB")
    elif mode in ("P", "PA"):
        im = im.convert("RGBA").convert("RGB")
    else:
        raise DecodeError(f"{path}: unsupported pixel mode {mode} (8-bit only)")
    return RasterImage(np.asarray(im))


def image_size(path) -> tuple[int, int]:
    """(width, height) read from the file header only."""
    try:
        with Image.open(path) as im:
            return im.size
    except UnidentifiedImageError as exc:
        raise DecodeError(f"{path}: cannot decode image ({exc})") from None


def encode_png(img: RasterImage, path) -> None:
    Image.fromarray(img.pixels).save(path, format="PNG")
