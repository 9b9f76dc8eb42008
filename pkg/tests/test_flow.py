import numpy as np
import pytest

from fisheyeseg.camera import FisheyeCalibration
from fisheyeseg.errors import DomainError, FormatError
from fisheyeseg.flow import (average_flow, cell_centers, lift_correspondences, read_flow,
                             read_grid, write_flow, write_grid)
from fisheyeseg.geometry import rot_y
from fisheyeseg.odometry import FramePairGeometry


def test_uniform_flow():
    flow = np.broadcast_to([3.0, -2.0], (48, 64, 2)).copy()
    g = average_flow(flow)
    assert g.shape == (10, 13)
    assert g.valid.all()
    np.testing.assert_array_equal(g.flow[..., 0], 3.0)
    np.testing.assert_array_equal(g.flow[..., 1], -2.0)


def test_all_invalid():
    g = average_flow(np.full((20, 20, 2), np.nan))
    assert not g.valid.any() and np.isnan(g.flow).all()


def checkerboard(h, w):
    rows, cols = np.indices((h, w))
    return np.where(((rows + cols) % 2 == 1)[..., None], 2.0, 0.0) * np.ones(2)


def test_checkerboard_even_cells_average_to_one():
    g = average_flow(checkerboard(40, 40), cell_size=4)
    np.testing.assert_array_equal(g.flow, 1.0)


def test_checkerboard_odd_cells_hand_means():
    # a 5x5 block holds 13 pixels of one colour and 12 of the other
    g = average_flow(checkerboard(40, 40), cell_size=5)
    assert set(np.unique(g.flow).tolist()) == {24 / 25, 26 / 25}


def test_validity_fraction_threshold():
    flow = np.zeros((5, 10, 2))
    flow.reshape(-1, 2)[:12] = np.nan  # first cell: 12 of 25 pixels invalid -> valid
    flow[:, 5:].reshape(-1, 2)[:13] = np.nan
    flow[:, 5:][:3, :] = np.nan
    flow[:, 5:][3, :3] = np.nan  # second cell: 18 invalid -> invalid
    g = average_flow(flow, cell_size=5)
    assert g.valid.tolist() == [[True, False]]


def test_partial_edge_cells():
    g = average_flow(np.ones((7, 7, 2)), cell_size=5)
    assert g.shape == (2, 2) and g.valid.all()
    np.testing.assert_array_equal(cell_centers((7, 7), 5)[1, 1], [5.5, 5.5])


def test_size_mismatch_raises():
    with pytest.raises(DomainError):
        average_flow(np.zeros((10, 10, 2)), 5, image_size=(12, 10))


def test_flow_file_round_trip(tmp_path):
    flow = np.random.default_rng(0).normal(size=(6, 7, 2))
    flow[2, 3] = np.nan
    write_flow(tmp_path / "f.smfl", flow)
    back = read_flow(tmp_path / "f.smfl")
    np.testing.assert_array_equal(back, flow.astype(np.float32))
    raw = (tmp_path / "f.smfl").read_bytes()
    assert raw[:4] == b"SMFL" and len(raw) == 12 + 6 * 7 * 8


def test_flow_file_errors(tmp_path):
    write_grid(tmp_path / "g.smlg", np.zeros((3, 4)))
    with pytest.raises(FormatError, match="magic"):
        read_flow(tmp_path / "g.smlg")
    np.testing.assert_array_equal(read_grid(tmp_path / "g.smlg"), 0.0)
    (tmp_path / "t.smfl").write_bytes(b"SMFL" + (4).to_bytes(4, "little") + (4).to_bytes(4, "little") + b"\0" * 8)
    with pytest.raises(FormatError, match="expected"):
        read_flow(tmp_path / "t.smfl")


def zero_grid(calib, cell_size=20):
    w, h = calib.image_size
    return average_flow(np.zeros((h, w, 2)), cell_size, calib.image_size)


def test_zero_flow_identity_rotation(calib):
    geom = FramePairGeometry.from_motion(np.eye(3), [0.0, 0.0, -1.0])
    c = lift_correspondences(zero_grid(calib), calib, geom)
    assert len(c) > 0
    np.testing.assert_allclose(c.p, c.p_prime, atol=1e-15)


def test_zero_flow_rotation_only(calib):
    # principal row on a cell-centre row (5 k + 2) so some rays lie on the rotation's great circle
    calib = FisheyeCalibration(calib.coeffs, (322.0, 242.0), calib.image_size, calib.theta_max,
                               calib.R_C, calib.eta_C)
    yaw = 0.02
    R = rot_y(yaw)  # rotation about the camera y axis
    geom = FramePairGeometry.from_motion(R, [0.0, 0.0, -1.0])
    c = lift_correspondences(zero_grid(calib, 5), calib, geom)
    angle = np.arccos(np.clip(np.sum(c.p * c.p_prime, axis=1), -1, 1))
    # chord of a rotation about a: 2 sin(yaw/2) |a x v|
    perp = np.linalg.norm(np.cross([0.0, 1.0, 0.0], c.p_raw), axis=1)
    np.testing.assert_allclose(angle, 2 * np.arcsin(np.sin(yaw / 2) * perp), atol=1e-7)
    on_circle = np.abs(c.p_raw[:, 1]) < 1e-12
    assert on_circle.any()
    np.testing.assert_allclose(angle[on_circle], yaw, atol=1e-7)


def test_flow_leaving_the_rim_is_dropped(calib):
    grid = zero_grid(calib)
    centers = grid.centers()
    i, j = grid.shape[0] // 2, grid.shape[1] // 2 + 3
    # push one cell beyond the rim
    r = centers[i, j] - calib.principal_point
    grid.flow[i, j] = r / np.linalg.norm(r) * (calib.max_radius + 5.0) - r
    base = lift_correspondences(zero_grid(calib), calib, FramePairGeometry.from_motion(np.eye(3), [0, 0, -1.0]))
    c = lift_correspondences(grid, calib, FramePairGeometry.from_motion(np.eye(3), [0, 0, -1.0]))
    assert c.dropped == base.dropped + 1
    assert len(c) == len(base) - 1
