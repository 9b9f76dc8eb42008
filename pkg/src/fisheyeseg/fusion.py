"""Fuse constraint deviations into a motion likelihood and threshold it."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .constraints import ConstraintDeviations
from .errors import DomainError, FormatError

DEFAULT_THRESHOLD = 6e-4
HEATMAP_SATURATION = 0.02


@dataclass(frozen=True)
class FusionWeights:
    """Weights for the (epipolar, depth, height, anti-parallel, three-view) deviations."""

    epipolar: float = 1.0
    depth: float = 1.0
    height: float = 0.2
    anti_parallel: float = 0.2
    three_view: float = 0.0

    def __post_init__(self):
        w = self.as_array()
        if np.any(~np.isfinite(w)) or np.any(w < 0.0):
            raise DomainError("fusion weights must be finite and non-negative")
        if not np.any(w > 0.0):
            raise DomainError("at least one fusion weight must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.epipolar, self.depth, self.height, self.anti_parallel,
                         self.three_view], dtype=np.float64)

    @classmethod
    def parse(cls, text: str) -> "FusionWeights":
        """From ``"e,d,h,p,3v"``."""
        parts = [float(x) for x in text.replace(" ", "").split(",") if x]
        if len(parts) != 5:
            raise DomainError(f"expected 5 comma-separated weights, got {text!r}")
        return cls(*parts)

    def __str__(self) -> str:
        return ",".join(repr(float(x)) for x in self.as_array())


def fuse(dev, weights: FusionWeights = FusionWeights()):
    """Weighted mean of the applicable deviations.

    ``dev`` is a :class:`ConstraintDeviations` or an ``(..., 5)`` array in
    (e, d, h, p, 3v) order; NaN marks a non-applicable component, which is
    dropped from both numerator and denominator. Degenerate (static-camera)
    deviations bypass the weighting and are returned as they are. The result
    is NaN where nothing applicable carries positive weight.
    """
    if isinstance(dev, ConstraintDeviations):
        if dev.static is not None:
            return np.asarray(dev.static, dtype=np.float64)
        dev = dev.stack()
    xi = np.asarray(dev, dtype=np.float64)
    w = weights.as_array()
    use = np.isfinite(xi) & (w > 0.0)
    num = np.sum(np.where(use, xi * w, 0.0), axis=-1)
    den = np.sum(np.where(use, w, 0.0), axis=-1)
    out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.nan)
    return float(out) if out.ndim == 0 else out


@dataclass
class SegmentationMask:
    moving: np.ndarray
    threshold: float


def segment(likelihood, threshold: float = DEFAULT_THRESHOLD) -> SegmentationMask:
    """Cells with likelihood strictly above ``threshold`` are moving; NaN cells are static."""
    if not (0.0 <= threshold <= 1.0):
        raise DomainError("threshold must lie in [0, 1]")
    xi = np.asarray(likelihood, dtype=np.float64)
    return SegmentationMask(np.nan_to_num(xi, nan=-1.0) > threshold, float(threshold))


def upsample(cells: np.ndarray, cell_size: int, image_size: tuple[int, int]) -> np.ndarray:
    """Replicate each cell over its ``cell_size`` square block, cropped to ``(width, height)``."""
    w, h = image_size
    big = np.repeat(np.repeat(cells, cell_size, axis=0), cell_size, axis=1)
    return big[:h, :w]


def heatmap_cells(likelihood, saturation: float = HEATMAP_SATURATION) -> np.ndarray:
    """Linear map ``[0, saturation] -> [0, 255]`` with round-half-up; NaN maps to 0."""
    xi = np.nan_to_num(np.asarray(likelihood, dtype=np.float64), nan=0.0)
    return np.floor(np.clip(xi / saturation, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def render_heatmap(likelihood, cell_size: int, image_size: tuple[int, int],
                   saturation: float = HEATMAP_SATURATION) -> np.ndarray:
    return upsample(heatmap_cells(likelihood, saturation), cell_size, image_size)


def render_mask(mask: SegmentationMask | np.ndarray, cell_size: int,
                image_size: tuple[int, int]) -> np.ndarray:
    moving = mask.moving if isinstance(mask, SegmentationMask) else np.asarray(mask, bool)
    return upsample(np.where(moving, 255, 0).astype(np.uint8), cell_size, image_size)


def write_pgm(path: str | os.PathLike, image: np.ndarray) -> None:
    """Write an 8-bit grayscale image as binary PGM (P5)."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 2:
        raise FormatError("PGM output needs a 2-D uint8 array")
    Image.fromarray(image).save(os.fspath(path), format="PPM")


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with Image.open(os.fspath(path)) as img:
        if img.format != "PPM" or img.mode != "L":
            raise FormatError(f"{path}: not an 8-bit PGM")
        return np.array(img)
