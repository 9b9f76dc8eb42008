"""Radial polynomial fisheye model.

The lens maps the incidence angle ``theta`` of a ray (measured from the
optical axis) to a radial pixel distance from the principal point::

    r(theta) = a1*theta + a2*theta**2 + a3*theta**3 + a4*theta**4

Camera frame: +z along the optical axis, +x to the image right, +y down.
The road frame has +z up; ``R_C`` rotates road-frame vectors into the
camera frame.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import textconfig
from .errors import CalibrationError, DomainError, OutOfFovError
from .geometry import is_rotation

# Slack for pixels computed from a ray sitting exactly on the rim.
_RIM_SLACK_PX = 1e-9


@dataclass(frozen=True)
class FisheyeCalibration:
    """Intrinsics plus the camera pose relative to the road plane.

    Attributes:
        coeffs: ``(a1, a2, a3, a4)`` in pixels per radian**k.
        principal_point: ``(cx, cy)`` in pixels.
        image_size: ``(width, height)`` in pixels.
        theta_max: field-of-view half angle in radians, ``0 < theta_max <= pi``.
        R_C: 3x3 rotation, road frame to camera frame.
        eta_C: camera height above the road in meters.
    """

    coeffs: np.ndarray
    principal_point: np.ndarray
    image_size: tuple[int, int]
    theta_max: float
    R_C: np.ndarray
    eta_C: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64).reshape(-1)
        pp = np.asarray(self.principal_point, dtype=np.float64).reshape(-1)
        R = np.asarray(self.R_C, dtype=np.float64)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "principal_point", pp)
        object.__setattr__(self, "R_C", R)
        object.__setattr__(self, "image_size", tuple(int(x) for x in self.image_size))
        object.__setattr__(self, "theta_max", float(self.theta_max))
        object.__setattr__(self, "eta_C", float(self.eta_C))
        coeffs.setflags(write=False)
        pp.setflags(write=False)
        R.setflags(write=False)
        self._validate()

    def _validate(self) -> None:
        if self.coeffs.size != 4 or not np.all(np.isfinite(self.coeffs)):
            raise CalibrationError("coeffs: need 4 finite polynomial coefficients")
        if self.principal_point.size != 2 or not np.all(np.isfinite(self.principal_point)):
            raise CalibrationError("principal_point: need 2 finite values")
        if len(self.image_size) != 2 or min(self.image_size) <= 0:
            raise CalibrationError("image_size: width and height must be positive")
        if not (0.0 < self.theta_max <= np.pi):
            raise CalibrationError("theta_max: must lie in (0, pi]")
        if not is_rotation(self.R_C):
            raise CalibrationError("R_C: must be orthonormal with determinant +1 (tol 1e-9)")
        if not (self.eta_C > 0.0 and np.isfinite(self.eta_C)):
            raise CalibrationError("eta_C: camera height must be > 0")
        if not _strictly_increasing(self.coeffs, self.theta_max):
            raise CalibrationError("monotonicity: r(theta) is not strictly increasing on [0, theta_max]")

    @property
    def max_radius(self) -> float:
        """Image radius of the field-of-view rim, ``r(theta_max)``."""
        return float(_poly(self.coeffs, self.theta_max))

    def with_pose(self, R_C=None, eta_C=None) -> "FisheyeCalibration":
        return FisheyeCalibration(
            self.coeffs, self.principal_point, self.image_size, self.theta_max,
            self.R_C if R_C is None else R_C,
            self.eta_C if eta_C is None else eta_C,
        )


def _poly(c, theta):
    return theta * (c[0] + theta * (c[1] + theta * (c[2] + theta * c[3])))


def _dpoly(c, theta):
    return c[0] + theta * (2.0 * c[1] + theta * (3.0 * c[2] + theta * 4.0 * c[3]))


def _strictly_increasing(c, theta_max: float) -> bool:
    # The derivative is a cubic: its minimum on the interval sits at an
    # endpoint or at a root of the second derivative.
    candidates = [0.0, theta_max]
    for root in np.roots([12.0 * c[3], 6.0 * c[2], 2.0 * c[1]]) if np.any(c[1:]) else []:
        if abs(root.imag) < 1e-12 and 0.0 <= root.real <= theta_max:
            candidates.append(root.real)
    return bool(min(_dpoly(c, t) for t in candidates) > 0.0)


def radius_of_angle(calib: FisheyeCalibration, theta):
    """Pixel radius for incidence angle ``theta`` (scalar or array)."""
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0.0) or np.any(theta > calib.theta_max):
        raise DomainError(f"theta outside [0, {calib.theta_max}]")
    r = _poly(calib.coeffs, theta)
    return float(r) if r.ndim == 0 else r


def angle_of_radius(calib: FisheyeCalibration, r, tol: float = 1e-13, max_iter: int = 200):
    """Invert ``radius_of_angle`` by bracketed Newton iteration.

    Newton steps that leave the current bracket fall back to bisection, so
    convergence is guaranteed for any calibration that passed validation.

    Raises:
        OutOfFovError: if a radius exceeds the rim radius ``r(theta_max)``.
    """
    r = np.asarray(r, dtype=np.float64)
    scalar = r.ndim == 0
    r = np.atleast_1d(r).copy()
    rmax = calib.max_radius
    if np.any(~np.isfinite(r)) or np.any(r < 0.0) or np.any(r > rmax + _RIM_SLACK_PX):
        raise OutOfFovError(f"radius outside [0, {rmax}] px")
    np.minimum(r, rmax, out=r)

    c = calib.coeffs
    lo = np.zeros_like(r)
    hi = np.full_like(r, calib.theta_max)
    theta = r / rmax * calib.theta_max
    for _ in range(max_iter):
        f = _poly(c, theta) - r
        lo = np.where(f < 0.0, theta, lo)
        hi = np.where(f > 0.0, theta, hi)
        nxt = theta - f / _dpoly(c, theta)
        outside = ~((nxt > lo) & (nxt < hi))
        nxt = np.where(outside, 0.5 * (lo + hi), nxt)
        nxt = np.where(f == 0.0, theta, nxt)
        done = np.abs(nxt - theta) <= tol
        theta = nxt
        if np.all(done):
            break
    theta = np.clip(theta, 0.0, calib.theta_max)
    theta[r == 0.0] = 0.0
    return float(theta[0]) if scalar else theta


def pixel_in_fov(calib: FisheyeCalibration, u) -> np.ndarray:
    """Boolean mask of pixels whose radius lies within the fov rim."""
    d = np.asarray(u, dtype=np.float64) - calib.principal_point
    rad = np.hypot(d[..., 0], d[..., 1])
    return np.isfinite(rad) & (rad <= calib.max_radius + _RIM_SLACK_PX)


def ray_in_fov(calib: FisheyeCalibration, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    theta = np.arctan2(np.hypot(p[..., 0], p[..., 1]), p[..., 2])
    return np.isfinite(theta) & (theta <= calib.theta_max)


def unproject(calib: FisheyeCalibration, u) -> np.ndarray:
    """Lift pixel(s) ``u`` (``(..., 2)``) to unit ray(s) ``(..., 3)``."""
    u = np.asarray(u, dtype=np.float64)
    d = u - calib.principal_point
    rad = np.hypot(d[..., 0], d[..., 1])
    theta = np.asarray(angle_of_radius(calib, rad))
    safe = np.where(rad > 0.0, rad, 1.0)
    cos_phi = np.where(rad > 0.0, d[..., 0] / safe, 1.0)
    sin_phi = np.where(rad > 0.0, d[..., 1] / safe, 0.0)
    s = np.sin(theta)
    p = np.stack([s * cos_phi, s * sin_phi, np.cos(theta)], axis=-1)
    # Remove the rounding left by sin/cos so that |p| = 1 to ~1e-16.
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def project(calib: FisheyeCalibration, p) -> np.ndarray:
    """Map ray(s) ``p`` (``(..., 3)``, any positive length) to pixels."""
    p = np.asarray(p, dtype=np.float64)
    rho = np.hypot(p[..., 0], p[..., 1])
    theta = np.arctan2(rho, p[..., 2])
    if np.any(~np.isfinite(theta)) or np.any(theta > calib.theta_max):
        raise OutOfFovError("ray beyond the fov rim")
    r = _poly(calib.coeffs, theta)
    safe = np.where(rho > 0.0, rho, 1.0)
    scale = np.where(rho > 0.0, r / safe, 0.0)
    return calib.principal_point + np.stack([p[..., 0] * scale, p[..., 1] * scale], axis=-1)


def horizon_vector(calib: FisheyeCalibration) -> np.ndarray:
    """Downward road normal in camera coordinates.

    A ray ``p`` points below the horizon plane through the camera centre
    exactly when ``p @ h > 0``.
    """
    return calib.R_C @ np.array([0.0, 0.0, -1.0])


def load_calibration(path: str | os.PathLike) -> FisheyeCalibration:
    """Read a ``[calibration]`` section; invariants are checked on construction."""
    values = textconfig.read_section(path, "calibration")
    size = textconfig.numbers(values, "image_size", 2)
    if np.any(size != np.round(size)):
        raise CalibrationError("image_size: must be integers")
    return FisheyeCalibration(
        coeffs=textconfig.numbers(values, "coeffs", 4),
        principal_point=textconfig.numbers(values, "principal_point", 2),
        image_size=(int(size[0]), int(size[1])),
        theta_max=float(textconfig.numbers(values, "theta_max", 1)[0]),
        R_C=textconfig.numbers(values, "R_C", 9).reshape(3, 3),
        eta_C=float(textconfig.numbers(values, "eta_C", 1)[0]),
    )


def save_calibration(calib: FisheyeCalibration, path: str | os.PathLike) -> None:
    textconfig.write_section(path, "calibration", {
        "coeffs": textconfig.format_values(calib.coeffs),
        "principal_point": textconfig.format_values(calib.principal_point),
        "image_size": f"{calib.image_size[0]} {calib.image_size[1]}",
        "theta_max": repr(calib.theta_max),
        "R_C": textconfig.format_values(calib.R_C),
        "eta_C": repr(calib.eta_C),
    })
