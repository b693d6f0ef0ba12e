"""WWR from pixel counts, window IoU and WWR error summaries."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import PairingError, ShapeError, ValidationError
from .masks import BinaryMask, ClassConfig, LabelMap

DEFAULT_THRESHOLD = 0.10
# Absorbs representation error so that e.g. |0.4 - 0.3| counts as within 0.1.
_THRESHOLD_SLACK = 1e-12

WWR_CSV_HEADER = ("id", "window_pixels", "facade_pixels", "wwr", "defined")


@dataclass(frozen=True)
class WWRRecord:
    id: str
    window_pixels: int
    facade_pixels: int

    @property
    def defined(self) -> bool:
        return self.window_pixels + self.facade_pixels > 0

    @property
    def wwr(self) -> Optional[float]:
        """window / (facade + window), or None when neither class is present."""
        total = self.window_pixels + self.facade_pixels
        return self.window_pixels / total if total else None


@dataclass(frozen=True)
class IoUResult:
    intersection: int
    union: int

    @property
    def iou(self) -> float:
        return self.intersection / self.union if self.union else 1.0


@dataclass(frozen=True)
class ErrorSummary:
    mean_abs_error: float
    fraction_within: float
    threshold: float
    n: int
    n_excluded: int = 0
    relative: bool = False

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "n_excluded": self.n_excluded,
            "threshold": self.threshold,
            "relative": self.relative,
            "mean_abs_error": self.mean_abs_error,
            "fraction_within": self.fraction_within,
        }, sort_keys=True)

    def to_text(self) -> str:
        kind = "relative" if self.relative else "absolute"
        return (f"pairs: {self.n} ({self.n_excluded} excluded)\n"
                f"mean absolute WWR error: {self.mean_abs_error:.4f}\n"
                f"within {self.threshold:g} ({kind}): {100 * self.fraction_within:.1f}%")


def compute_wwr(label_map: LabelMap, cfg: ClassConfig = ClassConfig(), id: str = "") -> WWRRecord:
    counts = np.bincount(label_map.classes.ravel(), minlength=256)
    return WWRRecord(id, int(counts[cfg.window_class]), int(counts[cfg.building_class]))


def compute_iou(pred: BinaryMask, truth: BinaryMask) -> IoUResult:
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise ShapeError(f"compute_iou: size mismatch {pred.width}x{pred.height} "
                         f"vs {truth.width}x{truth.height}")
    inter = int(np.count_nonzero(pred.bits & truth.bits))
    union = int(np.count_nonzero(pred.bits | truth.bits))
    return IoUResult(inter, union)


def wwr_error(pred: Sequence[WWRRecord], truth: Sequence[WWRRecord],
              threshold: float = DEFAULT_THRESHOLD, relative: bool = False) -> ErrorSummary:
    """Pair records by id and summarise the WWR error.

    ``fraction_within`` is the share of pairs whose error is at most
    ``threshold`` (absolute WWR difference, or difference over the true
    WWR when ``relative``). Pairs with an undefined WWR on either side, and
    zero-truth pairs in relative mode, are excluded.
    """
    if threshold < 0:
        raise ValidationError(f"threshold must be non-negative, got {threshold}")
    by_id = {}
    for rec in truth:
        if rec.id in by_id:
            raise PairingError(f"duplicate truth id {rec.id!r}", rec.id)
        by_id[rec.id] = rec
    seen = set()
    diffs, errors = [], []
    excluded = 0
    for rec in pred:
        if rec.id in seen:
            raise PairingError(f"duplicate prediction id {rec.id!r}", rec.id)
        seen.add(rec.id)
        if rec.id not in by_id:
            raise PairingError(f"prediction {rec.id!r} has no ground truth", rec.id)
        t = by_id[rec.id]
        if not (rec.defined and t.defined) or (relative and t.wwr == 0):
            excluded += 1
            continue
        d = abs(rec.wwr - t.wwr)
        diffs.append(d)
        errors.append(d / t.wwr if relative else d)
    missing = sorted(set(by_id) - seen)
    if missing:
        raise PairingError(f"ground truth {missing[0]!r} has no prediction", missing[0])

    used = len(diffs)
    mean = math.fsum(diffs) / used if used else 0.0
    within = sum(e <= threshold + _THRESHOLD_SLACK for e in errors) / used if used else 0.0
    return ErrorSummary(mean, within, threshold, len(seen), excluded, relative)


def format_wwr(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def write_wwr_csv(records: Iterable[WWRRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WWR_CSV_HEADER)
    for r in records:
        w.writerow([r.id, r.window_pixels, r.facade_pixels, format_wwr(r.wwr),
                    "true" if r.defined else "false"])
    return buf.getvalue()


def read_wwr_csv(text: str) -> list[WWRRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != WWR_CSV_HEADER:
        raise ValidationError(f"WWR CSV must start with header {','.join(WWR_CSV_HEADER)}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(WWR_CSV_HEADER):
            raise ValidationError(f"line {n}: expected {len(WWR_CSV_HEADER)} fields, got {len(row)}")
        try:
            out.append(WWRRecord(row[0], int(row[1]), int(row[2])))
        except ValueError:
            raise ValidationError(f"line {n}: pixel counts must be integers") from None
    return out
