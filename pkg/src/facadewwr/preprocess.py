"""Model-input preparation: resizing, normalization, random crop/pad and tensor export."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError, ValidationError
from .ingest import RasterImage
from .masks import IGNORE_INDEX, LabelMap

FCN_SIZE = 520
SEGFORMER_SIZE = 512
CROP_SCALE_RANGE = (0.5, 1.0)

_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NormalizationParams:
    """Per-channel (R, G, B) mean and std applied after scaling to [0, 1].

    The defaults are the ImageNet statistics the pretrained backbones expect.
    """

    mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    std: tuple[float, float, float] = (0.229, 0.224, 0.225)

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValidationError("mean and std need exactly 3 components")
        if not all(s > 0 for s in self.std):
            raise ValidationError(f"std components must be positive, got {self.std}")
        object.__setattr__(self, "mean", tuple(float(m) for m in self.mean))
        object.__setattr__(self, "std", tuple(float(s) for s in self.std))


@dataclass(frozen=True, eq=False)
class FloatImage:
    """Planar float32 image, shape (3, H, W)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 3 or data.shape[0] != 3 or data.shape[1] < 1 or data.shape[2] < 1:
            raise ValidationError(f"float image must have shape (3, H, W), got {data.shape}")
        if not np.isfinite(data).all():
            raise ValidationError("float image contains non-finite values")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return 3

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, FloatImage):
            return NotImplemented
        return self.data.shape == other.data.shape and self.data.tobytes() == other.data.tobytes()


class Lcg64:
    """64-bit linear congruential generator; each draw yields the top 32 bits."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u32(self) -> int:
        self.state = (self.state * _LCG_MULT + _LCG_INC) & _MASK64
        return self.state >> 32

    def uniform(self) -> float:
        """Float in [0, 1)."""
        return self.next_u32() / 2.0**32

    def randint(self, n: int) -> int:
        """Integer in [0, n]."""
        return min(n, int(self.uniform() * (n + 1)))


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def _bilinear_axis(n_in: int, n_out: int):
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def _bilinear(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample of an (H, W, ...) array in float64."""
    h, w = arr.shape[:2]
    y0, y1, fy = _bilinear_axis(h, out_h)
    x0, x1, fx = _bilinear_axis(w, out_w)
    a = arr.astype(np.float64)
    extra = (None,) * (a.ndim - 2)
    fx = fx[(None, slice(None)) + extra]
    fy = fy[(slice(None), None) + extra]
    top = a[y0][:, x0] * (1 - fx) + a[y0][:, x1] * fx
    bot = a[y1][:, x0] * (1 - fx) + a[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: RasterImage, out_w: int, out_h: int) -> RasterImage:
    """Half-pixel-aligned bilinear resize, rounding half up to 8 bits."""
    if out_w < 1 or out_h < 1:
        raise ValidationError(f"output size must be positive, got {out_w}x{out_h}")
    out = _bilinear(img.pixels, out_w, out_h)
    return RasterImage(np.clip(round_half_up(out), 0, 255).astype(np.uint8))


def _nearest_index(n_in: int, n_out: int) -> np.ndarray:
    # Nearest to (dst + 0.5) * scale - 0.5, i.e. floor((dst + 0.5) * scale).
    idx = np.floor((np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out)).astype(np.intp)
    return np.clip(idx, 0, n_in - 1)


def resize_nearest(label_map: LabelMap, out_w: int, out_h: int) -> LabelMap:
    if out_w < 1 or out_h < 1:
        raise ValidationError(f"output size must be positive, got {out_w}x{out_h}")
    ys = _nearest_index(label_map.height, out_h)
    xs = _nearest_index(label_map.width, out_w)
    return LabelMap(label_map.classes[ys][:, xs])


def normalize(img: RasterImage, params: NormalizationParams = NormalizationParams()) -> FloatImage:
    """Scale to [0, 1] and standardize each channel, in float32."""
    if img.channels != 3:
        raise ValidationError(f"normalize expects a 3-channel image, got {img.channels}")
    px = img.pixels.astype(np.float32) / np.float32(255.0)
    mean = np.asarray(params.mean, dtype=np.float32)
    std = np.asarray(params.std, dtype=np.float32)
    out = (px - mean) / std
    return FloatImage(np.ascontiguousarray(out.transpose(2, 0, 1)))


@dataclass(frozen=True)
class CropGeometry:
    x: int
    y: int
    size: int


def sample_crop(width: int, height: int, seed: int,
                scale_range: tuple[float, float] = CROP_SCALE_RANGE) -> CropGeometry:
    """Draw the square crop window used by :func:`crop_pad_resize`.

    Three draws from :class:`Lcg64`: scale fraction, then x and y offsets.
    The side is the scale fraction times the longer image side, so a short
    side gets padded whenever the crop exceeds it.
    """
    lo, hi = scale_range
    if not 0 < lo <= hi <= 1:
        raise ValidationError(f"invalid crop scale range {scale_range}")
    rng = Lcg64(seed)
    s = lo + (hi - lo) * rng.uniform()
    size = max(1, int(math.floor(s * max(width, height) + 0.5)))
    x = rng.randint(max(0, width - size))
    y = rng.randint(max(0, height - size))
    return CropGeometry(x, y, size)


def crop_pad_resize(img: FloatImage, label_map: LabelMap, out: int = SEGFORMER_SIZE, seed: int = 0,
                    scale_range: tuple[float, float] = CROP_SCALE_RANGE) -> tuple[FloatImage, LabelMap]:
    """Random square crop, pad to square, resize to ``out`` x ``out``.

    Image padding is 0.0 (the normalized mean colour); label padding is the
    ignore index. The same window is applied to both inputs.
    """
    if (img.width, img.height) != (label_map.width, label_map.height):
        raise ShapeError(f"crop_pad_resize: size mismatch {img.width}x{img.height} "
                         f"vs {label_map.width}x{label_map.height}")
    if out < 1:
        raise ValidationError(f"output size must be positive, got {out}")
    g = sample_crop(img.width, img.height, seed, scale_range)

    planes = img.data[:, g.y:g.y + g.size, g.x:g.x + g.size]
    classes = label_map.classes[g.y:g.y + g.size, g.x:g.x + g.size]
    ch, cw = classes.shape
    padded = np.zeros((3, g.size, g.size), dtype=np.float32)
    padded[:, :ch, :cw] = planes
    padded_map = np.full((g.size, g.size), IGNORE_INDEX, dtype=np.uint8)
    padded_map[:ch, :cw] = classes

    if g.size == out:
        return FloatImage(padded), LabelMap(padded_map)
    resized = _bilinear(padded.transpose(1, 2, 0), out, out).astype(np.float32).transpose(2, 0, 1)
    return FloatImage(resized), resize_nearest(LabelMap(padded_map), out, out)


def export_tensor(img: FloatImage, path) -> None:
    """Write ``F32 <C> <H> <W>\\n`` followed by little-endian planar float32 data."""
    header = f"F32 {img.channels} {img.height} {img.width}\n".encode("ascii")
    Path(path).write_bytes(header + img.data.astype("<f4").tobytes())


def tensor_from_bytes(raw: bytes) -> FloatImage:
    nl = raw.find(b"\n")
    if nl < 0 or nl > 64:
        raise FormatError("tensor header line missing")
    parts = raw[:nl].split(b" ")
    if len(parts) != 4 or parts[0] != b"F32":
        raise FormatError(f"bad tensor header {raw[:nl]!r}")
    try:
        c, h, w = (int(p) for p in parts[1:])
    except ValueError:
        raise FormatError(f"bad tensor header {raw[:nl]!r}") from None
    if c != 3 or h < 1 or w < 1:
        raise FormatError(f"unsupported tensor shape {c}x{h}x{w}")
    payload = raw[nl + 1:]
    if len(payload) != 4 * c * h * w:
        raise FormatError(f"tensor payload has {len(payload)} bytes, expected {4 * c * h * w}")
    data = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    try:
        return FloatImage(data)
    except ValidationError as exc:
        raise FormatError(str(exc)) from None


def import_tensor(path) -> FloatImage:
    return tensor_from_bytes(Path(path).read_bytes())


def prepare_fcn(img: RasterImage, params: NormalizationParams = NormalizationParams(),
                size: int = FCN_SIZE) -> FloatImage:
    return normalize(resize_bilinear(img, size, size), params)


def prepare_segformer(img: RasterImage, label_map: LabelMap, seed: int = 0,
                      params: NormalizationParams = NormalizationParams(),
                      size: int = SEGFORMER_SIZE) -> tuple[FloatImage, LabelMap]:
    return crop_pad_resize(normalize(img, params), label_map, size, seed)
