"""Dense flow ingestion: binary flow files, cell averaging, lifting to the sphere.

Binary layouts (little-endian)::

    SMFL: b"SMFL" | u32 width | u32 height | height*width*(f32 du, f32 dv)
    SMLG: b"SMLG" | u32 width | u32 height | height*width*f32

A NaN flow pair marks an invalid pixel; NaN in an SMLG grid marks an
empty / not-applicable cell.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .camera import FisheyeCalibration, pixel_in_fov, unproject
from .errors import DomainError, FormatError
from .odometry import FramePairGeometry

DEFAULT_CELL_SIZE = 5
MIN_VALID_FRACTION = 0.5

_HEADER = struct.Struct("<4sII")


def _write_grid(path, magic: bytes, data: np.ndarray) -> None:
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, w, h))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def _read_grid(path, magic: bytes, channels: int) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        tag, w, h = _HEADER.unpack(head)
        if tag != magic:
            raise FormatError(f"{path}: bad magic {tag!r}, expected {magic!r}")
        count = w * h * channels
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != count:
        raise FormatError(f"{path}: expected {count} floats, found {data.size}")
    shape = (h, w, channels) if channels > 1 else (h, w)
    return data.reshape(shape).astype(np.float64)


def write_flow(path: str | os.PathLike, flow: np.ndarray) -> None:
    """Write an ``(H, W, 2)`` flow field; NaN pairs are invalid pixels."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise FormatError("flow must have shape (H, W, 2)")
    _write_grid(path, b"SMFL", flow)


def read_flow(path: str | os.PathLike) -> np.ndarray:
    return _read_grid(path, b"SMFL", 2)


def write_grid(path: str | os.PathLike, grid: np.ndarray) -> None:
    """Write a single-channel f32 grid in the SMLG layout."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise FormatError("grid must be 2-D")
    _write_grid(path, b"SMLG", grid)


def read_grid(path: str | os.PathLike) -> np.ndarray:
    return _read_grid(path, b"SMLG", 1)


def grid_shape(image_size: tuple[int, int], cell_size: int) -> tuple[int, int]:
    """``(rows, cols)`` of the cell grid covering a ``(width, height)`` image."""
    w, h = image_size
    return (-(-h // cell_size), -(-w // cell_size))


def cell_centers(image_size: tuple[int, int], cell_size: int) -> np.ndarray:
    """Pixel coordinates ``(u, v)`` of every cell centre, shape ``(rows, cols, 2)``.

    Pixel ``(col, row)`` has its centre at integer coordinates; a cell's
    centre is the mean of the pixel centres it covers.
    """
    w, h = image_size

    def centers(n):
        start = np.arange(0, n, cell_size, dtype=np.float64)
        end = np.minimum(start + cell_size, n)
        return 0.5 * (start + end - 1.0)

    uu, vv = np.meshgrid(centers(w), centers(h))
    return np.stack([uu, vv], axis=-1)


def cell_pixel_counts(image_size: tuple[int, int], cell_size: int) -> np.ndarray:
    w, h = image_size

    def sizes(n):
        start = np.arange(0, n, cell_size)
        return np.minimum(start + cell_size, n) - start

    return np.outer(sizes(h), sizes(w))


@dataclass
class FlowGrid:
    """Cell-averaged flow.

    Attributes:
        cell_size: cell edge in pixels.
        image_size: ``(width, height)`` of the source field.
        flow: ``(rows, cols, 2)`` mean displacement; NaN where invalid.
        valid: ``(rows, cols)`` validity flags.
    """

    cell_size: int
    image_size: tuple[int, int]
    flow: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    def centers(self) -> np.ndarray:
        return cell_centers(self.image_size, self.cell_size)


def average_flow(
    flow: np.ndarray,
    cell_size: int = DEFAULT_CELL_SIZE,
    image_size: tuple[int, int] | None = None,
    min_valid_fraction: float = MIN_VALID_FRACTION,
) -> FlowGrid:
    """Average a dense ``(H, W, 2)`` flow field over square cells.

    A pixel is valid when both components are finite. A cell keeps the mean
    of its valid pixels if at least ``min_valid_fraction`` of them are valid.

    Raises:
        DomainError: if the field size differs from ``image_size``.
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise DomainError("flow must have shape (H, W, 2)")
    h, w = flow.shape[:2]
    if image_size is not None and tuple(image_size) != (w, h):
        raise DomainError(f"flow is {w}x{h}, calibration expects {image_size[0]}x{image_size[1]}")
    if cell_size < 1:
        raise DomainError("cell_size must be >= 1")

    ok = np.isfinite(flow[..., 0]) & np.isfinite(flow[..., 1])
    row_starts = np.arange(0, h, cell_size)
    col_starts = np.arange(0, w, cell_size)

    def block_sum(a):
        return np.add.reduceat(np.add.reduceat(a, row_starts, axis=0), col_starts, axis=1)

    sums = block_sum(np.where(ok[..., None], flow, 0.0))
    counts = block_sum(ok.astype(np.float64))
    rows, cols = counts.shape
    valid = (counts > 0) & (counts >= min_valid_fraction * cell_pixel_counts((w, h), cell_size))
    mean = np.full((rows, cols, 2), np.nan)
    mean[valid] = sums[valid] / counts[valid][:, None]
    return FlowGrid(cell_size, (w, h), mean, valid)


@dataclass
class Correspondences:
    """Spherical correspondences for one frame pair, one row per kept cell.

    ``p`` is the previous-view ray rotated into the current camera frame,
    ``p_raw`` the same ray unrotated, ``p_prime`` the current-view ray and
    ``cells`` the ``(row, col)`` index of the source cell.
    """

    p: np.ndarray
    p_raw: np.ndarray
    p_prime: np.ndarray
    cells: np.ndarray
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.cells)


def lift_correspondences(
    grid: FlowGrid,
    calib: FisheyeCalibration,
    geom: FramePairGeometry,
) -> Correspondences:
    """Lift each valid cell centre and its displaced endpoint onto the sphere.

    Cells whose start or end point falls outside the fov rim are dropped and
    counted in ``Correspondences.dropped``.
    """
    centers = grid.centers()
    idx = np.argwhere(grid.valid)
    u = centers[grid.valid]
    u2 = u + grid.flow[grid.valid]
    keep = pixel_in_fov(calib, u) & pixel_in_fov(calib, u2)
    p_raw = unproject(calib, u[keep])
    p_prime = unproject(calib, u2[keep])
    p = p_raw @ geom.R.T
    return Correspondences(p, p_raw, p_prime, idx[keep], int(np.count_nonzero(~keep)))
