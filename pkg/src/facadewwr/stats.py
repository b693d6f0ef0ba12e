"""Dataset-level WWR distributions and the CSV/SVG report."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import ValidationError
from .metrics import WWRRecord, format_wwr

N_BINS = 100
STATS_CSV_HEADER = ("id", "wwr", "defined", "window_pct", "building_pct")


@dataclass(frozen=True)
class ImageStats:
    id: str
    wwr: Optional[float]
    window_pct: float
    building_pct: float

    @property
    def defined(self) -> bool:
        return self.wwr is not None


@dataclass(frozen=True)
class DatasetStats:
    n: int
    mean_wwr: Optional[float]
    mode_wwr: Optional[float]
    histogram: tuple[int, ...] = field(default=(0,) * N_BINS)
    per_image: tuple[ImageStats, ...] = ()

    @property
    def n_defined(self) -> int:
        return sum(self.histogram)


def wwr_bin(wwr: float) -> int:
    """Index of the 0.01-wide bin [k/100, (k+1)/100) holding ``wwr``; 1.0 goes to the last bin."""
    k = min(int(math.floor(wwr * N_BINS)), N_BINS - 1)
    # Compare against the float bin edges so 0.29 lands in bin 29, not 28.
    if k + 1 < N_BINS and (k + 1) / N_BINS <= wwr:
        k += 1
    elif k > 0 and wwr < k / N_BINS:
        k -= 1
    return k


def bin_center(k: int) -> float:
    return (k + 0.5) / N_BINS


def dataset_stats(records: Iterable[tuple[WWRRecord, int]]) -> DatasetStats:
    """Aggregate per-image WWR records.

    Each record comes with the image's total pixel count, used for the
    window/building percentage scatter. The mode is the centre of the most
    populated bin (lowest bin on ties).
    """
    per_image = []
    hist = [0] * N_BINS
    for rec, total in records:
        if total <= 0:
            raise ValidationError(f"{rec.id}: total pixel count must be positive")
        if rec.window_pixels + rec.facade_pixels > total:
            raise ValidationError(f"{rec.id}: window + facade pixels exceed the image size")
        wwr = rec.wwr
        if wwr is not None:
            hist[wwr_bin(wwr)] += 1
        per_image.append(ImageStats(rec.id, wwr, 100.0 * rec.window_pixels / total,
                                    100.0 * rec.facade_pixels / total))
    defined = [s.wwr for s in per_image if s.wwr is not None]
    if not defined:
        return DatasetStats(len(per_image), None, None, tuple(hist), tuple(per_image))
    mode_bin = max(range(N_BINS), key=lambda k: (hist[k], -k))
    return DatasetStats(len(per_image), math.fsum(defined) / len(defined), bin_center(mode_bin),
                        tuple(hist), tuple(per_image))


def stats_csv(stats: DatasetStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_CSV_HEADER)
    for s in stats.per_image:
        w.writerow([s.id, format_wwr(s.wwr), "true" if s.defined else "false",
                    repr(s.window_pct), repr(s.building_pct)])
    return buf.getvalue()


def read_stats_csv(text: str) -> list[ImageStats]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != STATS_CSV_HEADER:
        raise ValidationError("stats CSV header mismatch")
    return [ImageStats(r[0], float(r[1]) if r[1] else None, float(r[3]), float(r[4]))
            for r in rows[1:] if r]


# --- SVG ---------------------------------------------------------------------

SVG_W, SVG_H = 800, 600
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 40, 50, 70


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


class _Plot:
    def __init__(self, title: str, xlabel: str, ylabel: str, xmax: float, ymax: float):
        self.xmax, self.ymax = xmax, ymax
        self.pw = SVG_W - _LEFT - _RIGHT
        self.ph = SVG_H - _TOP - _BOTTOM
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_W}" height="{SVG_H}" '
            f'viewBox="0 0 {SVG_W} {SVG_H}">',
            f'<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>',
            f'<text x="{SVG_W / 2}" y="28" text-anchor="middle" font-family="sans-serif" '
            f'font-size="18">{_esc(title)}</text>',
            f'<text x="{_LEFT + self.pw / 2}" y="{SVG_H - 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{_esc(xlabel)}</text>',
            f'<text x="20" y="{_TOP + self.ph / 2}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="14" transform="rotate(-90 20 {_TOP + self.ph / 2})">{_esc(ylabel)}</text>',
        ]

    def sx(self, v: float) -> float:
        return _LEFT + self.pw * v / self.xmax

    def sy(self, v: float) -> float:
        return _TOP + self.ph * (1 - v / self.ymax)

    def axes(self, xticks, yticks):
        x0, y0 = _LEFT, _TOP + self.ph
        self.parts.append('<g class="axes" stroke="black" stroke-width="1">')
        self.parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + self.pw}" y2="{y0}"/>')
        self.parts.append(f'<line x1="{x0}" y1="{_TOP}" x2="{x0}" y2="{y0}"/>')
        self.parts.append("</g>")
        self.parts.append('<g class="ticks" font-family="sans-serif" font-size="12">')
        for v in xticks:
            x = self.sx(v)
            self.parts.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 6}" stroke="black"/>')
            self.parts.append(f'<text x="{x:.2f}" y="{y0 + 22}" text-anchor="middle">{_fmt(v)}</text>')
        for v in yticks:
            y = self.sy(v)
            self.parts.append(f'<line x1="{x0 - 6}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
            self.parts.append(f'<text x="{x0 - 10}" y="{y + 4:.2f}" text-anchor="end">{_fmt(v)}</text>')
        self.parts.append("</g>")

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _nice_ceiling(v: int) -> int:
    if v <= 5:
        return 5
    step = 10 ** int(math.floor(math.log10(v)))
    for m in (1, 2, 5, 10):
        if v <= m * step:
            return m * step
    return 10 * step


def histogram_svg(stats: DatasetStats) -> str:
    ymax = _nice_ceiling(max(stats.histogram, default=0))
    plot = _Plot("WWR distribution", "WWR", "images", 1.0, ymax)
    plot.axes([i / 10 for i in range(11)], [ymax * i / 5 for i in range(6)])
    plot.parts.append('<g class="bars" fill="#7b8fb8" stroke="none">')
    for k, count in enumerate(stats.histogram):
        if count == 0:
            continue
        x, y = plot.sx(k / N_BINS), plot.sy(count)
        plot.parts.append(f'<rect class="bar" x="{x:.2f}" y="{y:.2f}" width="{plot.pw / N_BINS:.2f}" '
                          f'height="{plot.sy(0) - y:.2f}"><title>[{k / N_BINS:.2f}, {(k + 1) / N_BINS:.2f}): '
                          f'{count}</title></rect>')
    plot.parts.append("</g>")
    return plot.render()


def scatter_svg(stats: DatasetStats) -> str:
    plot = _Plot("Window pixels % vs building pixels %", "building pixels (%)", "window pixels (%)", 100.0, 100.0)
    ticks = [20.0 * i for i in range(6)]
    plot.axes(ticks, ticks)
    plot.parts.append('<g class="points" fill="#c0504d" fill-opacity="0.6">')
    for s in stats.per_image:
        plot.parts.append(f'<circle class="point" cx="{plot.sx(s.building_pct):.2f}" '
                          f'cy="{plot.sy(s.window_pct):.2f}" r="3"><title>{_esc(s.id)}</title></circle>')
    plot.parts.append("</g>")
    return plot.render()


def emit_report(stats: DatasetStats, out_dir) -> list[Path]:
    """Write stats.csv, histogram.svg and scatter.svg into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [
        (out_dir / "stats.csv", stats_csv(stats)),
        (out_dir / "histogram.svg", histogram_svg(stats)),
        (out_dir / "scatter.svg", scatter_svg(stats)),
    ]
    for path, text in files:
        try:
            path.write_text(text, encoding="utf-8", newline="")
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return [p for p, _ in files]
