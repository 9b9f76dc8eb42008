"""Spherical motion-segmentation constraints.

Every function works on unit vectors stored in the last axis of numpy
arrays and broadcasts over leading axes, so one call evaluates a whole
frame of correspondences. Conventions, all in current-camera coordinates:

* ``p``  previous-view ray, already rotated into the current frame;
* ``pp`` current-view ray (p-prime);
* ``t``  ``C - C'``, previous minus current camera centre (meters);
* ``e``  epipole ``t / |t|``;
* ``h``  downward road normal (``p @ h > 0`` below the horizon);
* ``eta`` camera height above the road (meters).

A NaN deviation means "not applicable".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .geometry import dot, unit

EPIPOLE_EPS = 1e-9
PARALLEL_EPS = 1e-12
DEFAULT_LAMBDA_H = 0.001
DEFAULT_LAMBDA_P = 0.001
DEFAULT_LAMBDA_S = 0.02  # meters


@dataclass(frozen=True)
class Thresholds:
    lambda_h: float = DEFAULT_LAMBDA_H
    lambda_p: float = DEFAULT_LAMBDA_P
    lambda_s: float = DEFAULT_LAMBDA_S


class EpipolarFrame(NamedTuple):
    """Pole ``normal`` of the epipolar great circle through ``p`` and the epipole."""

    normal: np.ndarray
    epipole: np.ndarray
    degenerate: np.ndarray


def _norm(v):
    return np.linalg.norm(v, axis=-1)


def _signed_angle(a, b, n):
    """Angle from ``a`` to ``b`` measured positively about axis ``n``."""
    return np.arctan2(dot(n, np.cross(a, b)), dot(a, b))


def epipolar_frame(p, e) -> EpipolarFrame:
    p = np.asarray(p, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    cross = np.cross(p, e)
    mag = _norm(cross)
    degenerate = ~(mag >= EPIPOLE_EPS)
    safe = np.where(degenerate, 1.0, mag)[..., None]
    normal = np.where(degenerate[..., None], np.nan, cross / safe)
    return EpipolarFrame(normal, np.broadcast_to(e, normal.shape), degenerate)


def epipolar_deviation(frame: EpipolarFrame, pp):
    """``|n' . p'|``: sine of the angle between ``p'`` and the epipolar plane."""
    return np.abs(dot(frame.normal, pp))


def geodesic_epipolar_deviation(frame: EpipolarFrame, pp):
    """Arc length (radians) from ``p'`` to the epipolar great circle."""
    return np.abs(np.arcsin(np.clip(dot(frame.normal, pp), -1.0, 1.0)))


def _project_to_plane(pp, n):
    pp = np.asarray(pp, dtype=np.float64)
    v = pp - dot(pp, n)[..., None] * n
    mag = _norm(v)
    bad = ~(mag >= PARALLEL_EPS)
    return np.where(bad[..., None], np.nan, v / np.where(bad, 1.0, mag)[..., None])


def project_to_plane(pp, n):
    """Unit vector of the component of ``p'`` lying in the plane with normal ``n``.

    Raises:
        DomainError: if ``p'`` is parallel to ``n`` (projection undefined).
    """
    out = _project_to_plane(pp, n)
    if np.any(np.isnan(out) & np.isfinite(np.asarray(n, dtype=np.float64))):
        raise DomainError("p' is parallel to the plane normal")
    return out


def positive_depth_deviation(p, pp_plane, n, epipole=None):
    """Positive-depth (cheirality) deviation from the in-plane cross product.

    ``p_n = p'_pi x p`` pointing along ``n'`` means the two rays converge
    behind the cameras; the deviation is then ``|p_n|``, the sine of the
    angle between ``p'_pi`` and ``p``.

    When ``epipole`` is supplied, rays that swing past the epipole (so the
    lines meet behind the previous camera centre) also count: the deviation
    there is the sine of the overshoot angle ``|p'_pi x e'|``. Without it
    the plain cross-product test is applied.
    """
    p = np.asarray(p, dtype=np.float64)
    pn = np.cross(pp_plane, p)
    behind = dot(n, pn) > 0.0
    xi = np.where(behind, _norm(pn), 0.0)
    if epipole is not None:
        alpha = _signed_angle(p, pp_plane, n)
        gamma = _signed_angle(p, epipole, n)
        overshoot = ~behind & (alpha > gamma)
        xi = np.where(overshoot, _norm(np.cross(pp_plane, epipole)), xi)
    return np.where(np.isnan(dot(n, pn)), np.nan, xi)


class Triangulation(NamedTuple):
    point: np.ndarray
    s: np.ndarray
    s_prime: np.ndarray
    converged: np.ndarray


def midpoint_triangulate(C, p, C2, p2) -> Triangulation:
    """Midpoint of the shortest segment between lines ``C + s p`` and ``C2 + s' p2``.

    ``s`` and ``s'`` are the line parameters of the two closest points.
    Parallel lines (``|p x p2| < 1e-12``) give ``converged == False`` and NaNs.
    """
    C, p, C2, p2 = (np.asarray(v, dtype=np.float64) for v in (C, p, C2, p2))
    w0 = C - C2
    a, b, c = dot(p, p), dot(p, p2), dot(p2, p2)
    d, e = dot(p, w0), dot(p2, w0)
    denom = a * c - b * b
    converged = _norm(np.cross(p, p2)) >= PARALLEL_EPS * np.sqrt(a * c)
    safe = np.where(converged, denom, 1.0)
    s = np.where(converged, (b * e - c * d) / safe, np.nan)
    s2 = np.where(converged, (a * e - b * d) / safe, np.nan)
    X = 0.5 * (C + s[..., None] * p + C2 + s2[..., None] * p2)
    return Triangulation(X, s, s2, converged)


def road_scale(p, h, eta):
    """Distance along ``p`` from the camera to the road plane; NaN above the horizon."""
    ph = dot(p, h)
    return np.where(ph > 0.0, eta / np.where(ph > 0.0, ph, 1.0), np.nan)


def road_reprojection(p, delta, t):
    """Ray from the current camera to the road point hit by ``p`` from the previous one.

    Raises:
        DomainError: if the current camera centre sits on that road point.
    """
    v = np.asarray(delta, dtype=np.float64)[..., None] * np.asarray(p) + np.asarray(t)
    mag = _norm(v)
    if np.any(mag == 0.0):
        raise DomainError("current camera centre coincides with the road point")
    return v / mag[..., None]


def _road_side(p, pp, pp_plane, pr, h, n):
    """Signed arc positions of ``p'_pi`` and ``p'_r`` from ``p`` about ``n'``."""
    applicable = (dot(p, h) > 0.0) & (dot(pp, h) > 0.0) & np.all(np.isfinite(n), axis=-1)
    alpha = _signed_angle(p, pp_plane, n)
    beta = _signed_angle(p, pr, n)
    same = np.sign(alpha) * np.sign(beta) > 0.0
    excess = _norm(np.cross(pp_plane, pr))
    return applicable, same, np.abs(alpha), np.abs(beta), excess


def positive_height_deviation(p, pp, pp_plane, pr, h, n, lambda_h: float = DEFAULT_LAMBDA_H):
    """Deviation for rays that converge below the road plane.

    Applies when both rays point below the horizon. The rays cross below the
    road when ``p'_pi`` sits on the arc between ``p`` and ``p'_r``; the
    deviation is then ``max(0, |p'_pi x p'_r| - lambda_h)``.
    """
    applicable, same, a, b, excess = _road_side(p, pp, pp_plane, pr, h, n)
    below = same & (a < b)
    xi = np.where(below, np.maximum(excess - lambda_h, 0.0), 0.0)
    return np.where(applicable & np.isfinite(excess), xi, np.nan)


def anti_parallel_deviation(p, pp, pp_plane, pr, h, n, lambda_p: float = DEFAULT_LAMBDA_P):
    """Deviation for rays that triangulate above the road with an excess angle.

    Mirror image of :func:`positive_height_deviation`: ``p'_pi`` lies beyond
    ``p'_r`` as seen from ``p``. Static obstacles that stand high and close
    to the camera trigger this too.
    """
    applicable, same, a, b, excess = _road_side(p, pp, pp_plane, pr, h, n)
    above = same & (a > b)
    xi = np.where(above, np.maximum(excess - lambda_p, 0.0), 0.0)
    return np.where(applicable & np.isfinite(excess), xi, np.nan)


def static_degenerate_deviation(p, pp, h, eta, lambda_s: float = DEFAULT_LAMBDA_S):
    """Deviation for a camera that did not move: the flow magnitude ``|p' x p|``.

    Below-horizon pairs whose road-plane footprints moved less than
    ``lambda_s`` meters are treated as static.
    """
    p = np.asarray(p, dtype=np.float64)
    pp = np.asarray(pp, dtype=np.float64)
    xi = _norm(np.cross(pp, p))
    ph, pph = dot(p, h), dot(pp, h)
    below = (ph > 0.0) & (pph > 0.0)
    d = (eta / np.where(below, pph, 1.0))[..., None] * pp - (eta / np.where(below, ph, 1.0))[..., None] * p
    small = below & (_norm(d) < lambda_s)
    return np.where(small, 0.0, xi)


@dataclass
class ThreeViewCorrespondence:
    """A point seen from three camera centres ``C``, ``C'``, ``C''``.

    All quantities are expressed in the middle camera's frame except the
    raw rays, which are rotated in by ``R01`` (view 0 -> 1) and ``R21``
    (view 2 -> 1).

    Attributes:
        p, p1, p2: unit rays in views 0, 1, 2, shape ``(..., 3)``.
        t: ``C - C'`` in meters.
        t1: ``C' - C''`` in meters.
    """

    p: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    t: np.ndarray
    t1: np.ndarray
    R01: np.ndarray = field(default_factory=lambda: np.eye(3))
    R21: np.ndarray = field(default_factory=lambda: np.eye(3))


def three_view_deviation(c: ThreeViewCorrespondence, motion_floor: float = 0.005):
    """Triangle-consistency deviation over three views.

    Rays and baselines are projected onto the epipolar plane of the first
    two views. ``theta`` and ``theta'`` are the angles at the two pairwise
    ray intersections; ``theta_tot`` is the angle subtended by the total
    baseline at ``P_i`` (the intersection of the last two rays), obtained by
    the law of sines and cosines. The deviation is
    ``sin(| |theta + theta'| - theta_tot |)``; NaN when any triangle
    degenerates.
    """
    t = np.asarray(c.t, dtype=np.float64)
    t1 = np.asarray(c.t1, dtype=np.float64)
    a = np.asarray(c.p, dtype=np.float64) @ np.asarray(c.R01).T
    b = np.asarray(c.p1, dtype=np.float64)
    g = np.asarray(c.p2, dtype=np.float64) @ np.asarray(c.R21).T
    a, b, g, t, t1 = np.broadcast_arrays(a, b, g, t, t1)

    ok = (_norm(t) >= motion_floor) & (_norm(t1) >= motion_floor)
    n_raw = np.cross(a, t)
    n_mag = _norm(n_raw)
    ok &= n_mag >= EPIPOLE_EPS * np.maximum(_norm(t), 1e-300)
    n = n_raw / np.where(ok, n_mag, 1.0)[..., None]

    def flat(v):
        return v - dot(v, n)[..., None] * n

    b, g, t1 = flat(b), flat(g), flat(t1)
    ok &= (_norm(b) > PARALLEL_EPS) & (_norm(g) > PARALLEL_EPS) & (_norm(t1) > motion_floor * 1e-3)

    def sang(u, v):
        return _signed_angle(u, v, n)

    def wrap(x):
        return np.angle(np.exp(1j * x))

    theta = wrap(sang(t, a) - sang(t, b))
    theta1 = wrap(sang(t1, b) - sang(t1, g))
    sin_theta1 = np.abs(np.sin(theta1))
    ok &= sin_theta1 >= 1e-9

    phi1 = np.abs(sang(t1, b))
    side = _norm(t1) * np.sin(phi1) / np.where(ok, sin_theta1, 1.0)  # C''P_i
    t_tot = t + t1
    T = _norm(t_tot)
    rho_tot = np.abs(sang(t_tot, g))
    cp = np.sqrt(np.maximum(T * T + side * side - 2.0 * T * side * np.cos(rho_tot), 0.0))
    ok &= cp > PARALLEL_EPS
    ratio = np.clip(np.sin(rho_tot) * T / np.where(ok, cp, 1.0), -1.0, 1.0)
    theta_tot = np.arcsin(ratio)
    obtuse = T * T > side * side + cp * cp
    theta_tot = np.where(obtuse, np.pi - theta_tot, theta_tot)

    xi = np.sin(np.abs(np.abs(wrap(theta + theta1)) - theta_tot))
    return np.where(ok, np.clip(xi, 0.0, 1.0), np.nan)


@dataclass
class ConstraintDeviations:
    """Per-feature deviations; NaN entries are not applicable.

    ``static`` holds the static-camera deviation and is only filled for
    degenerate frame pairs, in which case the plane-based entries are NaN.
    """

    epipolar: np.ndarray
    depth: np.ndarray
    height: np.ndarray
    anti_parallel: np.ndarray
    three_view: np.ndarray
    static: np.ndarray | None = None

    def stack(self) -> np.ndarray:
        """``(..., 5)`` array ordered (e, d, h, p, 3v)."""
        return np.stack([self.epipolar, self.depth, self.height, self.anti_parallel,
                         self.three_view], axis=-1)


def evaluate_pair(
    p,
    pp,
    t,
    h,
    eta: float,
    degenerate: bool = False,
    thresholds: Thresholds = Thresholds(),
    three_view=None,
) -> ConstraintDeviations:
    """Evaluate every two-view constraint for a batch of correspondences.

    ``three_view`` optionally carries precomputed three-view deviations.
    """
    p = unit(p)
    pp = unit(pp)
    shape = p.shape[:-1]
    nan = np.full(shape, np.nan)
    tv = nan.copy() if three_view is None else np.asarray(three_view, dtype=np.float64)
    if degenerate:
        static = static_degenerate_deviation(p, pp, h, eta, thresholds.lambda_s)
        return ConstraintDeviations(nan, nan.copy(), nan.copy(), nan.copy(), tv, static)

    t = np.asarray(t, dtype=np.float64)
    e = t / np.linalg.norm(t)
    frame = epipolar_frame(p, e)
    n = frame.normal
    xi_e = epipolar_deviation(frame, pp)
    pp_plane = _project_to_plane(pp, n)
    xi_d = positive_depth_deviation(p, pp_plane, n, epipole=e)
    delta = road_scale(p, h, eta)
    pr = delta[..., None] * p + t
    pr = pr / np.linalg.norm(pr, axis=-1, keepdims=True)
    xi_h = positive_height_deviation(p, pp, pp_plane, pr, h, n, thresholds.lambda_h)
    xi_p = anti_parallel_deviation(p, pp, pp_plane, pr, h, n, thresholds.lambda_p)
    return ConstraintDeviations(xi_e, xi_d, xi_h, xi_p, tv)
