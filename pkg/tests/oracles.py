"""Reference implementations that the tests check the library against.

They deliberately take a different route from the production code: per-pixel
ray casting instead of scanlines, per-pixel tallies instead of bincount,
SVD null spaces instead of the 8x8 elimination, and so on.
"""

import math

import numpy as np


def point_in_polygon(px, py, pts):
    """Classic crossing-number test; an edge counts when it straddles py half-openly."""
    inside = False
    n = len(pts)
    j = n - 1
    for i in range(n):
        xi, yi = pts[i]
        xj, yj = pts[j]
        if (yi > py) != (yj > py):
            x_cross = xi + (py - yi) * (xj - xi) / (yj - yi)
            if px < x_cross:
                inside = not inside
        j = i
    return inside


def raster_oracle(polygons, width, height):
    """Per-pixel-centre even-odd test, vectorized over pixels one edge at a time."""
    cx, cy = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    out = np.zeros((height, width), dtype=bool)
    for pts in polygons:
        parity = np.zeros((height, width), dtype=bool)
        n = len(pts)
        for i in range(n):
            xi, yi = pts[i]
            xj, yj = pts[i - 1]
            if yi == yj:
                continue
            straddle = (yi > cy) != (yj > cy)
            x_cross = xi + (cy - yi) * (xj - xi) / (yj - yi)
            parity ^= straddle & (cx < x_cross)
        out |= parity
    return out


def tally(classes, value):
    count = 0
    for row in classes.tolist():
        for v in row:
            if v == value:
                count += 1
    return count


def set_iou(a, b):
    sa = {(int(y), int(x)) for y, x in zip(*np.nonzero(a))}
    sb = {(int(y), int(x)) for y, x in zip(*np.nonzero(b))}
    inter, union = len(sa & sb), len(sa | sb)
    return inter, union, (inter / union if union else 1.0)


def dlt_homography(src, dst):
    """Homography via the SVD null space of the 8x9 DLT matrix, scaled to h22 = 1."""
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows, dtype=np.float64))
    h = vt[-1].reshape(3, 3)
    return h / h[2, 2]


def apply_h(h, pts):
    out = []
    for x, y in pts:
        w = h[2][0] * x + h[2][1] * y + h[2][2]
        out.append(((h[0][0] * x + h[0][1] * y + h[0][2]) / w, (h[1][0] * x + h[1][1] * y + h[1][2]) / w))
    return out


def histogram_bins(values, n_bins=100):
    """Bin k holds v with float(k/100) <= v < float((k+1)/100); 1.0 is in the last bin."""
    counts = [0] * n_bins
    for v in values:
        for k in range(n_bins):
            hi = (k + 1) / n_bins
            if k / n_bins <= v and (v < hi or k == n_bins - 1):
                counts[k] += 1
                break
    return counts


def spreadsheet_mean(values):
    total = 0
    for v in values:
        total = math.fsum([total, v])
    return total / len(values)


def random_polygon(rng, n, lo=-4.0, hi=68.0, snap=None):
    pts = rng.uniform(lo, hi, size=(n, 2))
    if snap:
        pts = np.round(pts * snap) / snap
    return [tuple(map(float, p)) for p in pts]


def random_simple_polygon(rng, n, center=(32.0, 32.0), rmin=5.0, rmax=30.0):
    """Star-shaped (hence simple) polygon: sorted angles, random radii."""
    ang = np.sort(rng.uniform(0, 2 * np.pi, size=n))
    r = rng.uniform(rmin, rmax, size=n)
    return [(float(center[0] + ri * np.cos(a)), float(center[1] + ri * np.sin(a))) for a, ri in zip(ang, r)]


def random_quad(rng, lo=0.0, span=200.0, jitter=40.0):
    """Perturbed axis-aligned rectangle whose corners stay in TL, TR, BR, BL order."""
    x0, y0 = rng.uniform(lo, lo + span / 2, size=2)
    w, h = rng.uniform(span / 2, span, size=2)
    base = np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]])
    return base + rng.uniform(-jitter / 4, jitter / 4, size=(4, 2))


def convex_hull(points):
    """Andrew's monotone chain; returns hull vertices counter-clockwise (y up)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]
