"""Synthetic fisheye driving scenes with exact ground truth.

The world is a flat road (z = 0) enclosed by a cylindrical wall, optional
static boxes, and moving boxes with constant velocity. For every flow cell
a ray through the cell centre is cast in frame ``k``; the surface point it
hits is the cell's representative scene point. Its flow is the pixel
displacement of that point between frames ``k`` and ``k + 1`` and is
written to all pixels of the cell, so cell averaging reproduces it
exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.spatial import ConvexHull

from . import flow as flowio
from .camera import FisheyeCalibration, pixel_in_fov, project, ray_in_fov, save_calibration, unproject
from .constraints import (ThreeViewCorrespondence, _project_to_plane, midpoint_triangulate,
                          three_view_deviation)
from .errors import SceneError
from .geometry import camera_rotation, rot_z, unit
from .odometry import (DEFAULT_MOTION_FLOOR, FramePairGeometry, Mounting, OdometrySample,
                       PoseDelta, camera_motion, dead_reckon, save_mounting, write_odometry_log)

CLASS_TAGS = ("crossing", "overtaking", "preceding", "approaching", "static-ego")

NO_HIT = -1
STATIC = 0


@dataclass(frozen=True)
class Box:
    """Axis-aligned box standing on the road: centre ``(x, y)``, ``size = (dx, dy, dz)``."""

    center: tuple[float, float]
    size: tuple[float, float, float]
    z_min: float = 0.0

    def bounds(self, offset=(0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
        cx, cy = self.center[0] + offset[0], self.center[1] + offset[1]
        half = np.array(self.size[:2]) / 2.0
        lo = np.array([cx - half[0], cy - half[1], self.z_min])
        hi = np.array([cx + half[0], cy + half[1], self.z_min + self.size[2]])
        return lo, hi


@dataclass(frozen=True)
class MovingObject:
    object_id: int
    tag: str
    box: Box
    velocity: tuple[float, float]  # m/s in the world frame


def default_intrinsics() -> FisheyeCalibration:
    """640x480 lens with a 190 degree field of view."""
    return FisheyeCalibration(
        coeffs=(190.0, -8.0, 3.0, -1.0),
        principal_point=(319.5, 239.5),
        image_size=(640, 480),
        theta_max=np.deg2rad(95.0),
        R_C=np.eye(3),
        eta_C=1.0,
    )


def default_mounting() -> Mounting:
    """Front camera 1 m above the road, pitched 0.15 rad down."""
    return Mounting(rotation=camera_rotation(pitch=0.15), position=np.array([2.0, 0.0, 1.0]))


@dataclass(frozen=True)
class SceneSpec:
    """Scenario description.

    The host starts at the world origin heading along +x and drives with
    constant ``host_speed`` (m/s) and ``host_yaw_rate`` (rad/s). The world
    wall is a cylinder of ``wall_radius`` around the origin; ``None``
    removes it. The default wall is far enough that its parallax stays
    below the anti-parallel tolerance, so static backgrounds are clean.
    """

    name: str
    host_speed: float
    host_yaw_rate: float = 0.0
    objects: tuple[MovingObject, ...] = ()
    static_boxes: tuple[Box, ...] = ()
    n_frames: int = 31
    fps: float = 15.0
    odometry_rate: float = 60.0
    wall_radius: float | None = 1000.0
    wall_height: float = 150.0
    noise: float = 0.0
    seed: int = 0
    cell_size: int = 5
    intrinsics: FisheyeCalibration = field(default_factory=default_intrinsics)
    mounting: Mounting = field(default_factory=default_mounting)

    def __post_init__(self):
        if self.n_frames < 2:
            raise SceneError("need at least 2 frames")
        if self.fps <= 0 or self.odometry_rate <= 0:
            raise SceneError("rates must be positive")
        if self.host_speed < 0 or self.noise < 0:
            raise SceneError("speeds and noise must be non-negative")
        for obj in self.objects:
            if obj.tag not in CLASS_TAGS:
                raise SceneError(f"unknown class tag {obj.tag!r}")
            if obj.object_id <= 0:
                raise SceneError("moving object ids must be positive")

    @property
    def calibration(self) -> FisheyeCalibration:
        return self.mounting.calibration(self.intrinsics)

    def static_world(self) -> "SceneSpec":
        return replace(self, objects=(), name=f"{self.name}-static")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "host_speed": self.host_speed,
            "host_yaw_rate": self.host_yaw_rate,
            "objects": [asdict(o) for o in self.objects],
            "static_boxes": [asdict(b) for b in self.static_boxes],
            "n_frames": self.n_frames,
            "fps": self.fps,
            "odometry_rate": self.odometry_rate,
            "wall_radius": self.wall_radius,
            "wall_height": self.wall_height,
            "noise": self.noise,
            "seed": self.seed,
            "cell_size": self.cell_size,
            "intrinsics": {
                "coeffs": self.intrinsics.coeffs.tolist(),
                "principal_point": self.intrinsics.principal_point.tolist(),
                "image_size": list(self.intrinsics.image_size),
                "theta_max": self.intrinsics.theta_max,
            },
            "mounting": {
                "rotation": self.mounting.rotation.tolist(),
                "position": self.mounting.position.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["objects"] = tuple(
            MovingObject(o["object_id"], o["tag"], Box(**_box_args(o["box"])), tuple(o["velocity"]))
            for o in d.get("objects", ())
        )
        d["static_boxes"] = tuple(Box(**_box_args(b)) for b in d.get("static_boxes", ()))
        if "intrinsics" in d:
            i = d["intrinsics"]
            d["intrinsics"] = FisheyeCalibration(i["coeffs"], i["principal_point"], tuple(i["image_size"]),
                                                 i["theta_max"], np.eye(3), 1.0)
        if "mounting" in d:
            d["mounting"] = Mounting(np.array(d["mounting"]["rotation"]), np.array(d["mounting"]["position"]))
        return cls(**d)


def _box_args(b: dict) -> dict:
    return {"center": tuple(b["center"]), "size": tuple(b["size"]), "z_min": b.get("z_min", 0.0)}


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _car(x, y, length=4.4, width=1.8, height=1.5):
    return Box((x, y), (length, width, height), z_min=0.15)


def _pedestrian(x, y):
    return Box((x, y), (0.4, 0.6, 1.8))


def preset(name: str, **overrides) -> SceneSpec:
    """Canonical scene for one motion class.

    ``crossing``     host 2 m/s; pedestrian 6 m ahead walking right to left at 1.4 m/s.
    ``overtaking``   host 5 m/s; car in the left lane at 8 m/s.
    ``preceding``    host 5 m/s; car ahead in the same lane at 3.5 m/s.
    ``approaching``  host 2 m/s; oncoming car in the left lane at -2 m/s (mirrored).
    ``static-ego``   host parked; pedestrian crossing 5 m ahead at 1.4 m/s.
    """
    if name == "crossing":
        spec = SceneSpec(
            name, host_speed=2.0,
            objects=(MovingObject(1, "crossing", _pedestrian(8.0, 1.5), (0.0, -1.4)),),
        )
    elif name == "overtaking":
        spec = SceneSpec(
            name, host_speed=5.0,
            objects=(MovingObject(1, "overtaking", _car(2.5, 3.0), (8.0, 0.0)),),
        )
    elif name == "preceding":
        spec = SceneSpec(
            name, host_speed=5.0,
            objects=(MovingObject(1, "preceding", _car(8.2, 0.4), (3.5, 0.0)),),
        )
    elif name == "approaching":
        spec = SceneSpec(
            name, host_speed=2.0, n_frames=44,
            objects=(MovingObject(1, "approaching", _car(12.0, 2.6), (-2.0, 0.0)),),
        )
    elif name == "static-ego":
        spec = SceneSpec(
            name, host_speed=0.0,
            objects=(MovingObject(1, "static-ego", _pedestrian(7.0, 1.5), (0.0, -1.4)),),
        )
    else:
        raise SceneError(f"unknown preset {name!r}; choose from {', '.join(CLASS_TAGS)}")
    return replace(spec, **overrides) if overrides else spec


def tall_obstacle_scene(**overrides) -> SceneSpec:
    """Static world with a tall pillar close to the camera path."""
    spec = SceneSpec(
        "tall-obstacle", host_speed=5.0, n_frames=6,
        static_boxes=(Box((6.0, 2.0), (0.6, 0.6, 3.0)),),
    )
    return replace(spec, **overrides) if overrides else spec


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass
class ObjectFrame:
    """Ground truth of one moving object in one frame."""

    object_id: int
    frame: int
    tag: str
    moving: bool
    centroid: tuple[float, float]  # vehicle frame, meters
    distance: float  # horizontal, camera centre to centroid
    polygon: np.ndarray  # (V, 2) pixel vertices, counter-clockwise
    cells: int

    def record(self) -> dict:
        return {
            "frame": self.frame,
            "object_id": self.object_id,
            "class": self.tag,
            "moving": self.moving,
            "distance": round(self.distance, 6),
            "centroid": [round(c, 6) for c in self.centroid],
            "cells": self.cells,
        }


@dataclass
class FrameTruth:
    """Per-cell truth for frame ``k`` (the first frame of pair ``k``).

    ``object_id`` is the moving object seen in each cell, 0 for static
    surfaces and -1 where the ray hits nothing.
    """

    object_id: np.ndarray
    moving: np.ndarray
    distance: np.ndarray
    points: np.ndarray  # (rows, cols, 3) world coordinates, NaN without hit
    objects: list[ObjectFrame]


@dataclass
class SimulatedPair:
    index: int
    t_prev: float
    t_cur: float
    flow: np.ndarray  # (H, W, 2) float64, NaN invalid
    truth: FrameTruth
    rays_next2: np.ndarray | None  # (rows, cols, 3) view k+2 rays, NaN when unavailable


@dataclass
class Simulation:
    spec: SceneSpec
    calibration: FisheyeCalibration
    mounting: Mounting
    odometry: list[OdometrySample]
    frame_times: np.ndarray
    poses: list[PoseDelta]  # vehicle pose per frame, relative to the start
    pairs: list[SimulatedPair]

    def geometry(self, k: int, motion_floor: float = DEFAULT_MOTION_FLOOR) -> FramePairGeometry:
        """Frame-pair geometry recovered from the odometry log, as the pipeline sees it."""
        delta = dead_reckon(self.odometry, self.frame_times[k], self.frame_times[k + 1])
        return camera_motion(delta, self.calibration, self.mounting, motion_floor)


def odometry_samples(spec: SceneSpec) -> list[OdometrySample]:
    duration = (spec.n_frames - 1) / spec.fps
    n = int(np.ceil(duration * spec.odometry_rate - 1e-9)) + 1
    return [OdometrySample(i / spec.odometry_rate, spec.host_speed, spec.host_yaw_rate)
            for i in range(n + 1)]


def _camera_pose(pose: PoseDelta, mounting: Mounting):
    """World-to-camera rotation and camera centre for a vehicle pose."""
    Rv = rot_z(pose.dyaw)
    center = np.array([pose.dx, pose.dy, 0.0]) + Rv @ mounting.position
    return mounting.rotation @ Rv.T, center


def _cast(origin, dirs, spec: SceneSpec, t: float):
    """Nearest hit along each ray: distance, moving object id (0 static), velocity."""
    n = len(dirs)
    best = np.full(n, np.inf)
    ids = np.full(n, NO_HIT)
    vel = np.zeros((n, 2))

    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(dz < 0.0, -origin[2] / dz, np.inf)
    closer = (s > 0.0) & (s < best)
    best[closer] = s[closer]
    ids[closer] = STATIC

    if spec.wall_radius is not None:
        dxy = dirs[:, :2]
        a = np.sum(dxy * dxy, axis=1)
        b = 2.0 * dxy @ origin[:2]
        c = origin[:2] @ origin[:2] - spec.wall_radius ** 2
        disc = b * b - 4.0 * a * c
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where((a > 0.0) & (disc >= 0.0), (-b + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a), np.inf)
        z = origin[2] + s * dz
        s = np.where((z >= 0.0) & (z <= spec.wall_height), s, np.inf)
        closer = (s > 0.0) & (s < best)
        best[closer] = s[closer]
        ids[closer] = STATIC

    boxes = [(b, STATIC, (0.0, 0.0), (0.0, 0.0)) for b in spec.static_boxes]
    boxes += [(o.box, o.object_id, o.velocity, (o.velocity[0] * t, o.velocity[1] * t))
              for o in spec.objects]
    for box, oid, v, offset in boxes:
        lo, hi = box.bounds(offset)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - origin) / dirs
            t2 = (hi - origin) / dirs
        t1 = np.where(np.isnan(t1), -np.inf, t1)
        t2 = np.where(np.isnan(t2), np.inf, t2)
        tmin = np.max(np.minimum(t1, t2), axis=1)
        tmax = np.min(np.maximum(t1, t2), axis=1)
        s = np.where((tmax >= tmin) & (tmin > 0.0), tmin, np.inf)
        closer = s < best
        best[closer] = s[closer]
        ids[closer] = oid
        vel[closer] = v
    return best, ids, vel


def _polygon(cells: np.ndarray, cell_size: int) -> np.ndarray:
    """Convex hull of the pixel blocks covered by ``cells`` (row, col)."""
    r, c = cells[:, 0].astype(float), cells[:, 1].astype(float)
    x0, y0 = c * cell_size - 0.5, r * cell_size - 0.5
    x1, y1 = x0 + cell_size, y0 + cell_size
    corners = np.concatenate([
        np.stack([x0, y0], 1), np.stack([x1, y0], 1),
        np.stack([x1, y1], 1), np.stack([x0, y1], 1),
    ])
    hull = ConvexHull(corners)
    return corners[hull.vertices]


def simulate(spec: SceneSpec, three_view: bool = False) -> Simulation:
    """Generate flow fields, odometry and ground truth for every frame pair.

    With ``three_view`` each pair also records the view ``k + 2`` ray of its
    scene points (for three-view constraint checks).

    Raises:
        SceneError: if no cell sees any surface in any frame.
    """
    calib = spec.calibration
    mounting = spec.mounting
    samples = odometry_samples(spec)
    times = np.arange(spec.n_frames) / spec.fps
    poses = [dead_reckon(samples, 0.0, t) for t in times]
    cams = [_camera_pose(p, mounting) for p in poses]
    objects = {o.object_id: o for o in spec.objects}

    w, h = calib.image_size
    cs = spec.cell_size
    centers = flowio.cell_centers(calib.image_size, cs)
    rows, cols = centers.shape[:2]
    in_fov = pixel_in_fov(calib, centers)
    cell_idx = np.argwhere(in_fov)
    u = centers[in_fov]
    rays_cam = unproject(calib, u)
    rng = np.random.default_rng(spec.seed)

    pairs = []
    any_hit = False
    for k in range(spec.n_frames - 1):
        W2C, C = cams[k]
        dirs = rays_cam @ W2C  # camera -> world is W2C.T
        dist, ids, vel = _cast(C, dirs, spec, times[k])
        hit = np.isfinite(dist)
        any_hit |= bool(np.any(hit))
        X = C + np.where(hit, dist, 0.0)[:, None] * dirs
        dt = 1.0 / spec.fps

        def ray_in(frame, steps):
            W2Cn, Cn = cams[frame]
            Xn = X.copy()
            Xn[:, :2] += vel * (steps * dt)
            q = (Xn - Cn) @ W2Cn.T
            ok = hit & ray_in_fov(calib, np.where(hit[:, None], q, 1.0))
            return q, ok

        q1, ok1 = ray_in(k + 1, 1)
        q0 = (X - C) @ W2C.T
        # both endpoints go through project() so identical views give exactly zero flow
        cell_flow = np.full_like(u, np.nan)
        cell_flow[ok1] = project(calib, q1[ok1]) - project(calib, q0[ok1])
        field_cells = np.full((rows, cols, 2), np.nan)
        field_cells[cell_idx[:, 0], cell_idx[:, 1]] = cell_flow
        flow = np.repeat(np.repeat(field_cells, cs, axis=0), cs, axis=1)[:h, :w].copy()
        noise = rng.normal(0.0, 1.0, flow.shape) * spec.noise if spec.noise > 0 else None
        if noise is not None:
            flow += noise  # NaN stays NaN

        rays2 = None
        if three_view and k + 2 < spec.n_frames:
            q2, ok2 = ray_in(k + 2, 2)
            r2 = np.where((ok2 & ok1)[:, None], unit(np.where(hit[:, None], q2, 1.0)), np.nan)
            rays2 = np.full((rows, cols, 3), np.nan)
            rays2[cell_idx[:, 0], cell_idx[:, 1]] = r2

        truth = _frame_truth(k, X, ids, hit, C, poses[k], cell_idx, (rows, cols), objects, cs)
        pairs.append(SimulatedPair(k, float(times[k]), float(times[k + 1]), flow, truth, rays2))

    if not any_hit:
        raise SceneError("no surface visible in any frame")
    return Simulation(spec, calib, mounting, samples, times, poses, pairs)


def _frame_truth(k, X, ids, hit, C, pose, cell_idx, shape, objects, cs) -> FrameTruth:
    rows, cols = shape
    oid = np.full(shape, NO_HIT)
    oid[cell_idx[:, 0], cell_idx[:, 1]] = np.where(hit, ids, NO_HIT)
    pts = np.full(shape + (3,), np.nan)
    pts[cell_idx[:, 0], cell_idx[:, 1]] = np.where(hit[:, None], X, np.nan)
    dist = np.hypot(pts[..., 0] - C[0], pts[..., 1] - C[1])
    moving = oid > 0

    Rv = rot_z(pose.dyaw)
    records = []
    for obj_id in sorted(set(np.unique(oid[moving]).tolist())):
        obj = objects[obj_id]
        cells = np.argwhere(oid == obj_id)
        P = pts[cells[:, 0], cells[:, 1]]
        centroid_w = P.mean(axis=0)
        local = Rv.T @ (centroid_w - np.array([pose.dx, pose.dy, 0.0]))
        d = float(np.hypot(centroid_w[0] - C[0], centroid_w[1] - C[1]))
        moving_obj = bool(np.any(np.asarray(obj.velocity) != 0.0))
        records.append(ObjectFrame(obj_id, k, obj.tag, moving_obj, (float(local[0]), float(local[1])),
                                   d, _polygon(cells, cs), len(cells)))
    return FrameTruth(oid, moving, dist, pts, records)


def three_view_correspondence(sim: Simulation, k: int, p_prev: np.ndarray, p_cur: np.ndarray,
                              cells: np.ndarray) -> ThreeViewCorrespondence:
    """Triples for pair ``k`` using lifted rays ``p_prev``/``p_cur`` (unrotated) at ``cells``."""
    g01 = sim.geometry(k)
    g12 = sim.geometry(k + 1)
    p2 = sim.pairs[k].rays_next2[cells[:, 0], cells[:, 1]]
    return ThreeViewCorrespondence(
        p=p_prev, p1=p_cur, p2=p2, t=g01.t, t1=g12.R.T @ g12.t, R01=g01.R, R21=g12.R.T,
    )


def three_view_grid(sim: Simulation, k: int, p_prev, p_cur, cells, shape) -> np.ndarray:
    tv = three_view_deviation(three_view_correspondence(sim, k, p_prev, p_cur, cells))
    out = np.full(shape, np.nan)
    out[cells[:, 0], cells[:, 1]] = tv
    return out


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

ORACLE_LABELS = ("static-consistent", "epipolar-violating", "behind-convergence",
                 "below-road", "above-road-excess", "parallel")


@dataclass
class OracleResult:
    """Outcome of the explicit 3-D classification of one correspondence."""

    label: str
    plane_distance: float
    s: float
    s_prime: float
    height_below_road: float  # > 0 when the triangulated point is under the road
    excess_sine: float
    epipolar_violating: bool
    behind_convergence: bool
    below_road: bool
    above_road_excess: bool
    parallel: bool


def oracle_classify(p, pp, t, h, eta: float, lambda_p: float = 0.001,
                    epipolar_tol: float = 1e-6, height_tol: float = 1e-9) -> OracleResult:
    """Classify a correspondence by triangulating it in 3-D.

    The previous centre sits at ``t`` and the current centre at the origin
    (current camera frame); the road is the plane ``x . h = eta``. The
    epipolar plane is the plane through both centres and the point
    ``C + p``; the current ray's component in that plane is triangulated
    against the previous ray by the midpoint method. Points within
    ``height_tol`` meters of the road count as on it.
    """
    p, pp, t, h = (np.asarray(v, dtype=np.float64) for v in (p, pp, t, h))
    C, C2 = t, np.zeros(3)
    normal = np.cross(C2 - C, (C + p) - C)
    normal = normal / np.linalg.norm(normal)
    dist = float(abs(normal @ ((C2 + pp) - C)))
    pp_in = _project_to_plane(pp, normal)
    tri = midpoint_triangulate(C, p, C2, pp_in)
    parallel = not bool(tri.converged)
    s, s2 = float(tri.s), float(tri.s_prime)

    below_h = p @ h > 0.0 and pp @ h > 0.0
    # Road point on the previous ray: solve (C + s p) . h = eta.
    q = C + (eta - C @ h) / (p @ h) * p if p @ h > 0.0 else np.full(3, np.nan)
    X = tri.point
    height_below = float(X @ h - eta)
    a, b = X - C2, q - C2
    excess = float(np.linalg.norm(np.cross(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))

    epi = dist > epipolar_tol
    behind = (not parallel) and (s < 0.0 or s2 < 0.0)
    below = (not parallel) and below_h and s > 0.0 and s2 > 0.0 and height_below > height_tol
    above = (not parallel) and below_h and s2 > 0.0 and height_below < -height_tol and excess > lambda_p

    if parallel:
        label = "parallel"
    elif epi:
        label = "epipolar-violating"
    elif behind:
        label = "behind-convergence"
    elif below:
        label = "below-road"
    elif above:
        label = "above-road-excess"
    else:
        label = "static-consistent"
    return OracleResult(label, dist, s, s2, height_below, excess, epi, behind, below, above, parallel)


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def write_dataset(sim: Simulation, out_dir: str | os.PathLike) -> None:
    """Write calibration, mounting, odometry, flow files and ground truth.

    Layout::

        calibration.ini  mounting.ini  odometry.txt  scene.json
        frames.txt                 index t_prev t_cur flow-file
        flow/flow_00000.smfl ...
        labels/labels_00000.smlg   per-cell object id (-1 no surface)
        groundtruth.jsonl          one object-frame record per line
        polygons.txt               object_id frame x1 y1 x2 y2 ...
    """
    os.makedirs(os.path.join(out_dir, "flow"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "labels"), exist_ok=True)
    save_calibration(sim.calibration, os.path.join(out_dir, "calibration.ini"))
    save_mounting(sim.mounting, os.path.join(out_dir, "mounting.ini"))
    write_odometry_log(sim.odometry, os.path.join(out_dir, "odometry.txt"))
    with open(os.path.join(out_dir, "scene.json"), "w", encoding="utf-8") as fh:
        json.dump(sim.spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    frames, records, polys = [], [], []
    for pair in sim.pairs:
        name = f"flow/flow_{pair.index:05d}.smfl"
        flowio.write_flow(os.path.join(out_dir, name), pair.flow)
        flowio.write_grid(os.path.join(out_dir, f"labels/labels_{pair.index:05d}.smlg"),
                          pair.truth.object_id.astype(np.float32))
        frames.append(f"{pair.index} {pair.t_prev!r} {pair.t_cur!r} {name}")
        for obj in pair.truth.objects:
            records.append(json.dumps(obj.record(), sort_keys=True))
            coords = " ".join(f"{x:.3f} {y:.3f}" for x, y in obj.polygon)
            polys.append(f"{obj.object_id} {obj.frame} {coords}")
    for fname, lines in (("frames.txt", frames), ("groundtruth.jsonl", records),
                         ("polygons.txt", polys)):
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in lines))


def read_frames(path: str | os.PathLike) -> list[tuple[int, float, float, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 4:
                out.append((int(parts[0]), float(parts[1]), float(parts[2]), parts[3]))
    return out


def read_ground_truth(directory: str | os.PathLike) -> dict[int, list[ObjectFrame]]:
    """Load ``groundtruth.jsonl`` + ``polygons.txt`` keyed by frame index."""
    polys: dict[tuple[int, int], np.ndarray] = {}
    with open(os.path.join(directory, "polygons.txt"), encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) < 8:
                continue
            oid, frame = int(parts[0]), int(parts[1])
            polys[(oid, frame)] = np.array(parts[2:], dtype=np.float64).reshape(-1, 2)
    out: dict[int, list[ObjectFrame]] = {}
    with open(os.path.join(directory, "groundtruth.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            r = json.loads(line)
            obj = ObjectFrame(r["object_id"], r["frame"], r["class"], r["moving"],
                              tuple(r["centroid"]), r["distance"],
                              polys.get((r["object_id"], r["frame"]), np.empty((0, 2))), r["cells"])
            out.setdefault(obj.frame, []).append(obj)
    return out


def load_scene(path: str | os.PathLike) -> SceneSpec:
    with open(path, encoding="utf-8") as fh:
        return SceneSpec.from_dict(json.load(fh))
