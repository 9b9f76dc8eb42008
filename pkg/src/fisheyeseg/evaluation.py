"""Score segmentation masks against ground-truth object polygons."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .flow import write_grid

DEFAULT_RANGE_GATE = 8.0  # meters
DEFAULT_BIN_SIZE = 0.5  # meters


def rasterize_polygon(vertices, image_size: tuple[int, int]) -> np.ndarray:
    """Boolean ``(height, width)`` raster of a polygon sampled at pixel centres.

    Pixel ``(col, row)`` is inside when its centre ``(col, row)`` lies inside
    the polygon by the even-odd rule.
    """
    w, h = image_size
    poly = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
    inside = np.zeros((h, w), dtype=bool)
    if len(poly) < 3:
        return inside
    xs, ys = poly[:, 0], poly[:, 1]
    x0, x1 = max(int(np.floor(xs.min())), 0), min(int(np.ceil(xs.max())), w - 1)
    y0, y1 = max(int(np.floor(ys.min())), 0), min(int(np.ceil(ys.max())), h - 1)
    if x0 > x1 or y0 > y1:
        return inside
    px, py = np.meshgrid(np.arange(x0, x1 + 1, dtype=np.float64),
                         np.arange(y0, y1 + 1, dtype=np.float64))
    acc = np.zeros(px.shape, dtype=bool)
    xj, yj = np.roll(xs, 1), np.roll(ys, 1)
    for xa, ya, xb, yb in zip(xs, ys, xj, yj):
        if ya == yb:
            continue
        crosses = (ya > py) != (yb > py)
        x_at = xa + (py - ya) * (xb - xa) / (yb - ya)
        acc ^= crosses & (px < x_at)
    inside[y0:y1 + 1, x0:x1 + 1] = acc
    return inside


@dataclass
class ObjectScore:
    """Coverage of one ground-truth object in one frame (areas in pixels)."""

    object_id: int
    frame: int
    tag: str
    tp: int
    fn: int
    fp: int
    distance: float
    centroid: tuple[float, float]

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn > 0 else 0.0

    @property
    def iou(self) -> float:
        den = self.tp + self.fp + self.fn
        return self.tp / den if den > 0 else 0.0

    @property
    def detected(self) -> bool:
        return self.tp > 0

    def record(self) -> dict:
        d = asdict(self)
        d["centroid"] = list(self.centroid)
        d.update(tpr=self.tpr, iou=self.iou, detected=self.detected)
        return d


@dataclass
class FrameScore:
    frame: int
    objects: list[ObjectScore]
    fp: int  # detected pixels outside every ground-truth polygon
    area: int

    @property
    def fp_ratio(self) -> float:
        return self.fp / self.area


def score_frame(mask: np.ndarray, objects: Sequence, frame: int = 0,
                range_gate: float = DEFAULT_RANGE_GATE) -> FrameScore:
    """Per-object TP/FN/FP and the frame false-positive area.

    ``objects`` are ground-truth records with ``object_id``, ``tag``,
    ``polygon``, ``distance`` and ``centroid``. Objects farther than
    ``range_gate`` are not scored, but their polygons still count as ground
    truth, so detections on them are not false positives.

    Raises:
        DomainError: if a polygon lies entirely outside the mask dimensions.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DomainError("mask must be 2-D")
    h, w = mask.shape
    covered = np.zeros_like(mask)
    rasters = []
    for obj in objects:
        poly = np.asarray(obj.polygon, dtype=np.float64).reshape(-1, 2)
        if len(poly) and (poly[:, 0].min() > w or poly[:, 1].min() > h):
            raise DomainError(f"object {obj.object_id}: polygon outside the {w}x{h} mask")
        r = rasterize_polygon(poly, (w, h))
        covered |= r
        rasters.append(r)
    fp = int(np.count_nonzero(mask & ~covered))
    scores = []
    for obj, r in zip(objects, rasters):
        if obj.distance > range_gate:
            continue
        tp = int(np.count_nonzero(mask & r))
        fn = int(np.count_nonzero(r)) - tp
        scores.append(ObjectScore(int(obj.object_id), int(frame), obj.tag, tp, fn, fp,
                                  float(obj.distance), tuple(map(float, obj.centroid))))
    return FrameScore(int(frame), scores, fp, int(mask.size))


@dataclass
class ClassSummary:
    tag: str
    samples: int
    detection_rate: float
    mean_tpr: float
    mean_iou: float


def aggregate(scores: Iterable[ObjectScore]) -> dict[str, ClassSummary]:
    """Per-class detection rate (fraction of object-frames with any coverage), mean TPR and IoU."""
    by_tag: dict[str, list[ObjectScore]] = {}
    for s in scores:
        by_tag.setdefault(s.tag, []).append(s)
    out = {}
    for tag in sorted(by_tag):
        group = by_tag[tag]
        out[tag] = ClassSummary(
            tag, len(group),
            float(np.mean([s.detected for s in group])),
            float(np.mean([s.tpr for s in group])),
            float(np.mean([s.iou for s in group])),
        )
    return out


@dataclass
class RangeMap:
    """Detection rate binned on vehicle-frame ground coordinates.

    Row ``i`` covers ``x`` (forward) in ``[x_min + i*bin, x_min + (i+1)*bin)``
    and column ``j`` covers ``y`` (left) likewise. Empty bins hold NaN.
    """

    bin_size: float
    x_min: float
    y_min: float
    rate: np.ndarray
    count: np.ndarray = field(repr=False)


def range_map(scores: Iterable[ObjectScore], bin_size: float = DEFAULT_BIN_SIZE,
              extent: float = DEFAULT_RANGE_GATE) -> RangeMap:
    """Bin object-frames by centroid over ``[-extent, extent]^2`` meters."""
    if bin_size <= 0 or extent <= 0:
        raise DomainError("bin size and extent must be positive")
    n = int(np.ceil(2.0 * extent / bin_size))
    hits = np.zeros((n, n))
    count = np.zeros((n, n), dtype=np.int64)
    for s in scores:
        i = int(np.floor((s.centroid[0] + extent) / bin_size))
        j = int(np.floor((s.centroid[1] + extent) / bin_size))
        if 0 <= i < n and 0 <= j < n:
            count[i, j] += 1
            hits[i, j] += s.detected
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(count > 0, hits / np.maximum(count, 1), np.nan)
    return RangeMap(bin_size, -extent, -extent, rate, count)


def write_scores(path: str | os.PathLike, frames: Sequence[FrameScore],
                 summary: dict[str, ClassSummary]) -> None:
    """Line-delimited JSON: one ``object`` line per scored object-frame, one
    ``frame`` line per frame, then one ``class`` line per class."""
    with open(path, "w", encoding="utf-8") as fh:
        for f in frames:
            for s in f.objects:
                fh.write(json.dumps({"kind": "object", **s.record()}, sort_keys=True) + "\n")
            fh.write(json.dumps({"kind": "frame", "frame": f.frame, "fp": f.fp,
                                 "fp_ratio": f.fp_ratio}, sort_keys=True) + "\n")
        for c in summary.values():
            fh.write(json.dumps({"kind": "class", **asdict(c)}, sort_keys=True) + "\n")


def write_range_map(path: str | os.PathLike, rmap: RangeMap) -> None:
    write_grid(path, rmap.rate.astype(np.float32))
