"""Per-frame-pair segmentation: flow grid in, likelihood grid and mask out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import FisheyeCalibration, horizon_vector
from .constraints import ConstraintDeviations, Thresholds, evaluate_pair
from .flow import Correspondences, FlowGrid, lift_correspondences
from .fusion import DEFAULT_THRESHOLD, FusionWeights, SegmentationMask, fuse, segment
from .odometry import FramePairGeometry


@dataclass
class PairResult:
    """Everything computed for one frame pair.

    Grids have the flow-grid shape; cells without a correspondence hold NaN.
    ``deviations`` is ``(rows, cols, 5)`` in (e, d, h, p, 3v) order and
    ``static`` is only filled on degenerate pairs.
    """

    likelihood: np.ndarray
    deviations: np.ndarray
    static: np.ndarray
    mask: SegmentationMask
    degenerate: bool
    dropped: int
    correspondences: Correspondences


def scatter(cells: np.ndarray, values: np.ndarray, shape) -> np.ndarray:
    """Place per-correspondence ``values`` into a NaN grid at ``cells`` (row, col)."""
    out = np.full(tuple(shape) + values.shape[1:], np.nan)
    if len(cells):
        out[cells[:, 0], cells[:, 1]] = values
    return out


def process_pair(
    grid: FlowGrid,
    calib: FisheyeCalibration,
    geom: FramePairGeometry,
    weights: FusionWeights = FusionWeights(),
    thresholds: Thresholds = Thresholds(),
    threshold: float = DEFAULT_THRESHOLD,
    three_view: np.ndarray | None = None,
) -> PairResult:
    """Lift, evaluate all constraints, fuse and threshold one frame pair.

    ``three_view`` optionally supplies a ``(rows, cols)`` grid of three-view
    deviations (NaN where no triple correspondence exists).
    """
    corr = lift_correspondences(grid, calib, geom)
    h = horizon_vector(calib)
    tv = None
    if three_view is not None and len(corr):
        tv = three_view[corr.cells[:, 0], corr.cells[:, 1]]
    if len(corr):
        dev = evaluate_pair(corr.p, corr.p_prime, geom.t, h, calib.eta_C,
                            degenerate=geom.degenerate, thresholds=thresholds, three_view=tv)
    else:
        empty = np.empty(0)
        dev = ConstraintDeviations(empty, empty, empty, empty, empty,
                                   empty if geom.degenerate else None)
    xi = fuse(dev, weights)
    shape = grid.shape
    likelihood = scatter(corr.cells, np.asarray(xi, dtype=np.float64), shape)
    deviations = scatter(corr.cells, dev.stack(), shape)
    static = np.full(shape, np.nan)
    if dev.static is not None:
        static = scatter(corr.cells, dev.static, shape)
    return PairResult(likelihood, deviations, static, segment(likelihood, threshold),
                      geom.degenerate, corr.dropped, corr)
