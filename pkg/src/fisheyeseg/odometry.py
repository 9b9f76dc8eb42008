"""Wheel-speed / yaw-rate dead reckoning and camera motion between frames."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import textconfig
from .camera import FisheyeCalibration
from .errors import CalibrationError, CoverageError, DomainError, FormatError
from .geometry import FORWARD_CAMERA, is_rotation, rot_z

DEFAULT_MOTION_FLOOR = 0.005  # m per frame pair


@dataclass(frozen=True)
class OdometrySample:
    """Vehicle state reported at ``timestamp``; held constant until the next sample."""

    timestamp: float
    wheel_speed: float
    yaw_rate: float


@dataclass(frozen=True)
class PoseDelta:
    """Planar motion expressed in the vehicle frame at the start time.

    Vehicle frame: +x forward, +y left, +z up.
    """

    dx: float = 0.0
    dy: float = 0.0
    dyaw: float = 0.0

    def compose(self, other: "PoseDelta") -> "PoseDelta":
        """This motion followed by ``other`` (given in the frame reached by this one)."""
        c, s = math.cos(self.dyaw), math.sin(self.dyaw)
        return PoseDelta(
            self.dx + c * other.dx - s * other.dy,
            self.dy + s * other.dx + c * other.dy,
            self.dyaw + other.dyaw,
        )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dyaw)


def validate_samples(samples: Sequence[OdometrySample]) -> None:
    ts = np.array([s.timestamp for s in samples], dtype=np.float64)
    if ts.size == 0:
        raise CoverageError("empty odometry log")
    if np.any(np.diff(ts) <= 0.0):
        raise FormatError("odometry timestamps must be strictly increasing")


def dead_reckon(
    samples: Sequence[OdometrySample],
    t0: float,
    t1: float,
    max_gap: float = 0.5,
) -> PoseDelta:
    """Integrate a unicycle model over ``[t0, t1]``.

    Each sample's speed and yaw rate hold until the next sample. Within one
    such piece the vehicle follows a circular arc; its displacement is the
    arc chord ``v*dt*sinc(w*dt/2)`` taken along the midpoint heading, which
    is exact for piecewise-constant inputs and therefore additive over
    adjacent intervals.

    Raises:
        CoverageError: if the samples do not span ``[t0, t1]`` or two
            consecutive samples inside it are more than ``max_gap`` apart.
    """
    if t1 < t0:
        raise DomainError("t1 must not precede t0")
    validate_samples(samples)
    ts = [s.timestamp for s in samples]
    if t0 < ts[0] or t1 > ts[-1]:
        raise CoverageError(f"odometry covers [{ts[0]}, {ts[-1]}], requested [{t0}, {t1}]")

    x = y = psi = 0.0
    for i in range(len(samples) - 1):
        a, b = max(ts[i], t0), min(ts[i + 1], t1)
        if b <= a:
            continue
        if ts[i + 1] - ts[i] > max_gap:
            raise CoverageError(f"odometry gap of {ts[i + 1] - ts[i]:.3f} s at t={ts[i]}")
        dt = b - a
        v, w = samples[i].wheel_speed, samples[i].yaw_rate
        half = 0.5 * w * dt
        chord = v * dt * np.sinc(half / np.pi)
        heading = psi + half
        x += chord * math.cos(heading)
        y += chord * math.sin(heading)
        psi += w * dt
    return PoseDelta(x, y, psi)


def read_odometry_log(path: str | os.PathLike) -> list[OdometrySample]:
    """Parse ``timestamp wheel_speed yaw_rate`` lines; ``#`` starts a comment."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            try:
                samples.append(OdometrySample(*(float(p) for p in parts)))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    validate_samples(samples)
    return samples


def write_odometry_log(samples: Sequence[OdometrySample], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# timestamp wheel_speed yaw_rate\n")
        for s in samples:
            fh.write(f"{float(s.timestamp)!r} {float(s.wheel_speed)!r} {float(s.yaw_rate)!r}\n")


@dataclass(frozen=True)
class Mounting:
    """Rigid pose of the camera on the vehicle.

    ``rotation`` maps vehicle-frame vectors into the camera frame;
    ``position`` is the camera centre in the vehicle frame (meters).
    """

    rotation: np.ndarray = field(default_factory=lambda: FORWARD_CAMERA.copy())
    position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        pos = np.asarray(self.position, dtype=np.float64).reshape(-1)
        if not is_rotation(R):
            raise CalibrationError("rotation: must be orthonormal with determinant +1 (tol 1e-9)")
        if pos.size != 3 or not np.all(np.isfinite(pos)):
            raise CalibrationError("position: need 3 finite values")
        if pos[2] <= 0.0:
            raise CalibrationError("position: camera must sit above the road (z > 0)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "position", pos)

    def calibration(self, intrinsics: FisheyeCalibration) -> FisheyeCalibration:
        """``intrinsics`` with the road pose implied by this mounting."""
        return intrinsics.with_pose(R_C=self.rotation, eta_C=float(self.position[2]))


def load_mounting(path: str | os.PathLike) -> Mounting:
    values = textconfig.read_section(path, "mounting")
    return Mounting(
        rotation=textconfig.numbers(values, "rotation", 9).reshape(3, 3),
        position=textconfig.numbers(values, "position", 3),
    )


def save_mounting(mounting: Mounting, path: str | os.PathLike) -> None:
    textconfig.write_section(path, "mounting", {
        "rotation": textconfig.format_values(mounting.rotation),
        "position": textconfig.format_values(mounting.position),
    })


@dataclass(frozen=True)
class FramePairGeometry:
    """Relative camera motion for a frame pair, in current-camera coordinates.

    Attributes:
        R: rotation taking previous-camera vectors into the current camera frame.
        t: ``C - C'`` (previous minus current camera centre), meters.
        epipole: ``t / |t|``, or NaNs when ``degenerate``.
        degenerate: ``|t|`` is below the motion floor (static camera).
    """

    R: np.ndarray
    t: np.ndarray
    epipole: np.ndarray
    degenerate: bool

    @classmethod
    def from_motion(cls, R, t, motion_floor: float = DEFAULT_MOTION_FLOOR) -> "FramePairGeometry":
        R = np.asarray(R, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if not is_rotation(R):
            raise DomainError("R must be a rotation")
        n = float(np.linalg.norm(t))
        degenerate = n < motion_floor
        e = np.full(3, np.nan) if degenerate or n == 0.0 else t / n
        return cls(R, t, e, degenerate)


def camera_motion(
    delta: PoseDelta,
    calib: FisheyeCalibration | None,
    mounting: Mounting,
    motion_floor: float = DEFAULT_MOTION_FLOOR,
) -> FramePairGeometry:
    """Compose a planar vehicle motion with the camera mounting.

    When ``calib`` is given its road pose must agree with ``mounting``.
    """
    M = mounting.rotation
    m = mounting.position
    if calib is not None:
        if np.max(np.abs(calib.R_C - M)) > 1e-9 or abs(calib.eta_C - m[2]) > 1e-9:
            raise CalibrationError("mounting rotation/height disagree with calibration R_C/eta_C")
    Rz = rot_z(delta.dyaw)
    R = M @ Rz.T @ M.T
    d = np.array([delta.dx, delta.dy, 0.0])
    t = M @ Rz.T @ (m - d - Rz @ m)
    return FramePairGeometry.from_motion(R, t, motion_floor)
