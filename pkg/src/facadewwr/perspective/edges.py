"""Canny-style edge detection and Hough-line facade corner estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import DetectionError, ValidationError
from ..ingest import RasterImage
from .homography import Quad

DEFAULT_LOW = 100.0
DEFAULT_HIGH = 200.0

# Line normals are swept over [-30, 150) degrees so that each orientation band
# is one contiguous run of theta bins: vertical lines have normals near 0,
# horizontal lines near 90.
THETA_START = -30
N_THETA = 180
BAND_HALF_WIDTH = 30
MIN_RHO_SEPARATION = 20
MIN_INTERSECTION_ANGLE = 5.0
DEFAULT_MIN_VOTES = 10

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class EdgeMap:
    magnitude: np.ndarray
    binary: np.ndarray
    low: float
    high: float

    @property
    def width(self) -> int:
        return self.binary.shape[1]

    @property
    def height(self) -> int:
        return self.binary.shape[0]


def to_gray(img: RasterImage) -> np.ndarray:
    px = img.pixels.astype(np.float64)
    if img.channels == 1:
        return px
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def sobel(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Written as (weighted far side) - (weighted near side) so flat regions give exactly 0.
    p = np.pad(gray, 1, mode="edge")
    cols = p[:-2] + 2 * p[1:-1] + p[2:]
    rows = p[:, :-2] + 2 * p[:, 1:-1] + p[:, 2:]
    gx = cols[:, 2:] - cols[:, :-2]
    gy = rows[2:] - rows[:-2]
    return gx, gy


def non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges along the quantized gradient direction.

    A pixel survives if it is >= its forward neighbour and strictly > its
    backward neighbour, which leaves plateaus one pixel wide.
    """
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    sector = np.zeros(mag.shape, dtype=np.intp)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1)]  # (dy, dx) of the forward neighbour

    h, w = mag.shape
    p = np.pad(mag, 1)
    out = np.zeros_like(mag)
    for k, (dy, dx) in enumerate(offsets):
        fwd = p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        bwd = p[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        keep = (sector == k) & (mag >= fwd) & (mag > bwd)
        out[keep] = mag[keep]
    return out


def hysteresis(nms: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = nms >= low
    labels, n = ndimage.label(weak, structure=_EIGHT_CONNECTED)
    if n == 0:
        return weak
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[np.unique(labels[nms >= high])] = True
    has_strong[0] = False
    return has_strong[labels]


def detect_edges(img: RasterImage, low: float = DEFAULT_LOW, high: float = DEFAULT_HIGH) -> EdgeMap:
    """Sobel gradients, non-maximum suppression and double-threshold hysteresis."""
    if not (high >= low > 0):
        raise ValidationError(f"need high >= low > 0, got low={low}, high={high}")
    gx, gy = sobel(to_gray(img))
    mag = np.hypot(gx, gy)
    binary = hysteresis(non_max_suppression(mag, gx, gy), low, high)
    return EdgeMap(mag, binary, float(low), float(high))


@dataclass(frozen=True)
class HoughLine:
    theta_deg: float
    rho: float
    votes: int

    @property
    def normal(self) -> tuple[float, float]:
        t = math.radians(self.theta_deg)
        return math.cos(t), math.sin(t)


def hough_accumulator(edges: EdgeMap):
    """Votes over (theta, rho) at 1 degree x 1 px; pixel centres vote."""
    ys, xs = np.nonzero(edges.binary)
    diag = int(math.ceil(math.hypot(edges.width, edges.height))) + 1
    thetas = np.arange(THETA_START, THETA_START + N_THETA)
    t = np.radians(thetas)
    rho = np.outer(xs + 0.5, np.cos(t)) + np.outer(ys + 0.5, np.sin(t))
    rho_bin = np.floor(rho + 0.5).astype(np.intp) + diag
    flat = rho_bin * N_THETA + np.arange(N_THETA)[None, :]
    acc = np.bincount(flat.ravel(), minlength=(2 * diag + 1) * N_THETA).reshape(2 * diag + 1, N_THETA)
    return acc, thetas, diag


def _pick_lines(acc: np.ndarray, thetas: np.ndarray, diag: int, center: int, min_votes: int) -> list[HoughLine]:
    cols = np.nonzero(np.abs(thetas - center) <= BAND_HALF_WIDTH)[0]
    band = acc[:, cols]
    order = np.argsort(-band, axis=None, kind="stable")
    picks: list[HoughLine] = []
    for flat in order:
        r, c = divmod(int(flat), len(cols))
        votes = int(band[r, c])
        if votes < min_votes:
            break
        rho = float(r - diag)
        if all(abs(rho - p.rho) >= MIN_RHO_SEPARATION for p in picks):
            picks.append(HoughLine(float(thetas[cols[c]]), rho, votes))
            if len(picks) == 2:
                break
    return picks


def refine_line(line: HoughLine, edges: EdgeMap, band: float = 1.5) -> HoughLine:
    """Total-least-squares fit to the edge pixels within ``band`` px of ``line``."""
    ys, xs = np.nonzero(edges.binary)
    pts = np.stack([xs + 0.5, ys + 0.5], axis=1)
    n = np.array(line.normal)
    near = np.abs(pts @ n - line.rho) <= band
    if near.sum() < 2:
        return line
    sel = pts[near]
    c = sel.mean(axis=0)
    _, _, vt = np.linalg.svd(sel - c)
    normal = vt[1]
    if normal @ n < 0:
        normal = -normal
    theta = math.degrees(math.atan2(normal[1], normal[0]))
    return HoughLine(theta, float(normal @ c), line.votes)


def _intersect(a: HoughLine, b: HoughLine) -> tuple[float, float]:
    diff = abs(a.theta_deg - b.theta_deg) % 180.0
    if min(diff, 180.0 - diff) < MIN_INTERSECTION_ANGLE:
        raise DetectionError(f"lines at {a.theta_deg:.1f} and {b.theta_deg:.1f} deg are nearly parallel")
    m = np.array([a.normal, b.normal])
    x, y = np.linalg.solve(m, [a.rho, b.rho])
    return float(x), float(y)


def quad_from_edges(edges: EdgeMap, min_votes: int = DEFAULT_MIN_VOTES, refine: bool = True) -> Quad:
    """Facade quad from the two strongest near-vertical and near-horizontal lines."""
    acc, thetas, diag = hough_accumulator(edges)
    vertical = _pick_lines(acc, thetas, diag, 0, min_votes)
    horizontal = _pick_lines(acc, thetas, diag, 90, min_votes)
    if len(vertical) < 2:
        raise DetectionError(f"found {len(vertical)} of 2 near-vertical lines")
    if len(horizontal) < 2:
        raise DetectionError(f"found {len(horizontal)} of 2 near-horizontal lines")
    if refine:
        vertical = [refine_line(l, edges) for l in vertical]
        horizontal = [refine_line(l, edges) for l in horizontal]

    mid_x, mid_y = edges.width / 2.0, edges.height / 2.0

    def x_at(l: HoughLine) -> float:
        c, s = l.normal
        return (l.rho - mid_y * s) / c

    def y_at(l: HoughLine) -> float:
        c, s = l.normal
        return (l.rho - mid_x * c) / s

    left, right = sorted(vertical, key=x_at)
    top, bottom = sorted(horizontal, key=y_at)
    corners = [_intersect(left, top), _intersect(right, top), _intersect(right, bottom), _intersect(left, bottom)]
    try:
        return Quad(tuple(corners))
    except ValidationError as exc:
        raise DetectionError(f"line intersections do not form a valid quad: {exc}") from None
