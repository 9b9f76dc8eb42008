"""Shared helpers for running the pipeline on simulated data."""

import numpy as np

from fisheyeseg.flow import average_flow
from fisheyeseg.pipeline import process_pair
from fisheyeseg.simulator import three_view_grid


def run_pair(sim, k, three_view=False, **kwargs):
    """Process simulated pair ``k`` straight from its in-memory (float64) flow."""
    pair = sim.pairs[k]
    grid = average_flow(pair.flow, sim.spec.cell_size, sim.calibration.image_size)
    geom = sim.geometry(k)
    tv = None
    if three_view:
        base = process_pair(grid, sim.calibration, geom, **kwargs)
        c = base.correspondences
        tv = three_view_grid(sim, k, c.p_raw, c.p_prime, c.cells, grid.shape)
    return process_pair(grid, sim.calibration, geom, three_view=tv, **kwargs)


def max_deviation(result, cells=None):
    """Largest finite deviation (all components plus the static one) over ``cells``."""
    stack = np.concatenate([result.deviations, result.static[..., None]], axis=-1)
    if cells is not None:
        stack = stack[cells]
    finite = stack[np.isfinite(stack)]
    return float(finite.max()) if finite.size else 0.0
