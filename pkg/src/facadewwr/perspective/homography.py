"""Four-point homography estimation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DegeneracyError, ValidationError

MIN_TRIPLE_AREA = 1e-6
MIN_DET = 1e-12
_ORDER_TOL = 1e-9

Point = tuple[float, float]


def _triangle_area(a, b, c) -> float:
    return abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) / 2.0


@dataclass(frozen=True)
class Quad:
    """Four corners ordered top-left, top-right, bottom-right, bottom-left."""

    corners: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.corners)
        if len(pts) != 4:
            raise ValidationError(f"a quad needs exactly 4 corners, got {len(pts)}")
        if not all(math.isfinite(v) for p in pts for v in p):
            raise ValidationError("quad corners must be finite")
        for tri in itertools.combinations(pts, 3):
            if _triangle_area(*tri) <= MIN_TRIPLE_AREA:
                raise DegeneracyError(f"quad has three (nearly) collinear corners: {tri}")
        tl, tr, br, bl = pts
        sums = [x + y for x, y in pts]
        diffs = [x - y for x, y in pts]
        if not (sums[0] <= min(sums) + _ORDER_TOL and sums[2] >= max(sums) - _ORDER_TOL
                and diffs[1] >= max(diffs) - _ORDER_TOL and diffs[3] <= min(diffs) + _ORDER_TOL):
            raise ValidationError(f"quad corners are not in TL, TR, BR, BL order: {pts}")
        object.__setattr__(self, "corners", pts)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> "Quad":
        """Build a quad from four corners given in any order."""
        pts = [(float(p[0]), float(p[1])) for p in points]
        if len(pts) != 4:
            raise ValidationError(f"a quad needs exactly 4 corners, got {len(pts)}")
        idx = range(4)
        tl = min(idx, key=lambda i: (pts[i][0] + pts[i][1], pts[i][1], pts[i][0]))
        br = max(idx, key=lambda i: (pts[i][0] + pts[i][1], -pts[i][1], -pts[i][0]))
        tr = max(idx, key=lambda i: (pts[i][0] - pts[i][1], -pts[i][1], -pts[i][0]))
        bl = min(idx, key=lambda i: (pts[i][0] - pts[i][1], pts[i][1], pts[i][0]))
        if len({tl, tr, br, bl}) != 4:
            raise ValidationError(f"cannot assign corners unambiguously: {pts}")
        return cls((pts[tl], pts[tr], pts[br], pts[bl]))

    @property
    def tl(self) -> Point:
        return self.corners[0]

    @property
    def tr(self) -> Point:
        return self.corners[1]

    @property
    def br(self) -> Point:
        return self.corners[2]

    @property
    def bl(self) -> Point:
        return self.corners[3]

    def as_array(self) -> np.ndarray:
        return np.array(self.corners, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"tl": list(self.tl), "tr": list(self.tr), "br": list(self.br), "bl": list(self.bl)}


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective transform, scaled so that h[2][2] == 1."""

    h: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64, copy=True)
        if h.shape != (3, 3) or not np.isfinite(h).all():
            raise ValidationError("homography must be a finite 3x3 matrix")
        if abs(h[2, 2]) <= MIN_DET:
            raise DegeneracyError("homography has h[2][2] == 0 and cannot be normalized")
        h /= h[2, 2]
        if abs(np.linalg.det(h)) <= MIN_DET:
            raise DegeneracyError("homography is singular")
        h.flags.writeable = False
        object.__setattr__(self, "h", h)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(self.h @ other.h)


def project(H, points) -> np.ndarray:
    """Apply ``H`` to (N, 2) points in homogeneous coordinates."""
    m = H.h if isinstance(H, Homography) else np.asarray(H, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    w = m[2, 0] * pts[:, 0] + m[2, 1] * pts[:, 1] + m[2, 2]
    x = (m[0, 0] * pts[:, 0] + m[0, 1] * pts[:, 1] + m[0, 2]) / w
    y = (m[1, 0] * pts[:, 0] + m[1, 1] * pts[:, 1] + m[1, 2]) / w
    return np.stack([x, y], axis=1)


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting. Raises DegeneracyError if singular."""
    m = np.array(a, dtype=np.float64)
    v = np.array(b, dtype=np.float64)
    n = len(v)
    scale = max(np.abs(m).max(), 1.0)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(m[col:, col])))
        if abs(m[piv, col]) <= 1e-12 * scale:
            raise DegeneracyError("singular system: degenerate point configuration")
        if piv != col:
            m[[col, piv]] = m[[piv, col]]
            v[[col, piv]] = v[[piv, col]]
        f = m[col + 1:, col] / m[col, col]
        m[col + 1:, col:] -= np.outer(f, m[col, col:])
        v[col + 1:] -= f * v[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (v[row] - m[row, row + 1:] @ x[row + 1:]) / m[row, row]
    return x


def _conditioner(pts: np.ndarray) -> np.ndarray:
    # Centre on the centroid and scale to mean distance sqrt(2).
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d <= 0:
        raise DegeneracyError("all points coincide")
    s = math.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def homography_from_points(src, dst) -> Homography:
    """Homography taking four source points onto four target points, in the given pairing."""
    src = np.asarray(src, dtype=np.float64).reshape(4, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    ts, td = _conditioner(src), _conditioner(dst)
    s = project(ts, src)
    d = project(td, dst)

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(s, d)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    hn = np.append(solve_linear(a, b), 1.0).reshape(3, 3)
    return Homography(np.linalg.inv(td) @ hn @ ts)


def estimate_homography(src: Quad, dst: Quad) -> Homography:
    """Homography mapping each corner of ``src`` onto the matching corner of ``dst``."""
    return homography_from_points(src.as_array(), dst.as_array())


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def target_rectangle(src: Quad) -> tuple[int, int, Quad]:
    """Output size for rectifying ``src``, from its longest opposing edges."""
    tl, tr, br, bl = (np.array(p) for p in src.corners)
    width = _round_half_up(max(np.linalg.norm(tr - tl), np.linalg.norm(br - bl)))
    height = _round_half_up(max(np.linalg.norm(bl - tl), np.linalg.norm(br - tr)))
    width, height = max(width, 1), max(height, 1)
    if width < 2 or height < 2:
        raise DegeneracyError(f"quad too small to rectify ({width}x{height} px)")
    dst = Quad(((0.0, 0.0), (width - 1.0, 0.0), (width - 1.0, height - 1.0), (0.0, height - 1.0)))
    return width, height, dst
