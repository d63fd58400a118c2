"""Shared 3D and angular math.

Conventions used throughout the toolkit:

- world frame: x/y horizontal, z up, angles in radians
- camera yaw ``psi`` rotates about +z (yaw 0 looks along +x)
- camera pitch ``zeta`` is positive when the optical axis tilts down
- camera image frame: u = camera-right, v = camera-up, w = toward camera
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError

EPS_UNIT = 1e-9


def vec3(x, y, z):
    return np.array([float(x), float(y), float(z)])


def norm(v):
    return float(np.linalg.norm(v))


def unit(v):
    n = np.linalg.norm(v)
    if n < EPS_UNIT:
        raise DegenerateGeometryError("cannot normalize a near-zero vector")
    return np.asarray(v, dtype=float) / n


def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def camera_basis(yaw, pitch):
    """Right/up/forward unit vectors of a camera at the given yaw and pitch.

    The frame is built by yawing about +z and then pitching down about the
    resulting right axis, so it stays well defined for a straight-down view.
    Returns (right, up, forward).
    """
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    forward = np.array([cp * cy, cp * sy, -sp])
    right = np.array([sy, -cy, 0.0])
    up = np.array([sp * cy, sp * sy, cp])
    return right, up, forward


@dataclass
class CameraModel:
    """Pinhole camera pose and angular extent used for FoV geometry."""

    position: np.ndarray
    yaw: float = 0.0
    pitch: float = 0.0
    aov_h: float = math.radians(60.0)
    aov_v: float = math.radians(45.0)
    body_radius: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if not (0.0 < self.aov_h < math.pi and 0.0 < self.aov_v < math.pi):
            raise DegenerateGeometryError("camera AoV must lie in (0, pi)")
        if self.body_radius < 0.0:
            raise DegenerateGeometryError("camera body radius must be >= 0")

    def basis(self):
        return camera_basis(self.yaw, self.pitch)


@dataclass
class LightingVector:
    """Unit light direction projected to image-plane components.

    ``valid`` is False when the light sits behind the surface plane
    (w component negative); such vectors are kept but flagged so the
    fitter can reject them.
    """

    lu: float
    lv: float
    lw: float
    valid: bool = True

    def as_array(self):
        return np.array([self.lu, self.lv, self.lw])


def lighting_vector(light_pos, ooi_pos, camera):
    """Project the OoI-to-light direction into the camera image frame.

    Returns a LightingVector with lu along camera-right, lv along
    camera-up and lw toward the camera. A light behind the surface
    plane (lw < 0) is returned flagged invalid with lw clamped to 0.
    """
    light_pos = np.asarray(light_pos, dtype=float)
    ooi_pos = np.asarray(ooi_pos, dtype=float)
    d = light_pos - ooi_pos
    if np.linalg.norm(d) < EPS_UNIT:
        raise DegenerateGeometryError("light position coincides with the OoI")
    d = d / np.linalg.norm(d)
    right, up, forward = camera.basis()
    lu = float(np.dot(d, right))
    lv = float(np.dot(d, up))
    lw = float(np.dot(d, -forward))
    if lw < 0.0:
        return LightingVector(lu, lv, 0.0, valid=False)
    # renormalize against rounding so lu^2 + lv^2 + lw^2 == 1
    s = math.sqrt(lu * lu + lv * lv + lw * lw)
    return LightingVector(lu / s, lv / s, lw / s, valid=True)


def fov_components(light_pos, camera):
    """Signed horizontal/vertical FoV border distances for a light position.

    The horizontal angle is the azimuth offset from the optical axis; the
    vertical angle is measured inside the axis' vertical plane. Both are
    folded against the rear-mirrored (virtual) camera so offsets land in
    [0, pi/2]. A component goes negative when the light sits angularly
    inside the real or mirrored wedge along that axis.
    """
    light_pos = np.asarray(light_pos, dtype=float)
    rel = light_pos - camera.position
    dist = np.linalg.norm(rel)
    if dist < EPS_UNIT:
        raise DegenerateGeometryError("light position coincides with the camera")

    d_xy = math.hypot(rel[0], rel[1])
    bearing = math.atan2(rel[1], rel[0])
    a_h = abs(wrap_angle(bearing - camera.yaw)) if d_xy > EPS_UNIT else 0.0
    b_h = min(a_h, math.pi - a_h)

    # project onto the vertical plane containing the optical axis; the
    # axis sits at elevation -pitch inside that plane
    along = rel[0] * math.cos(camera.yaw) + rel[1] * math.sin(camera.yaw)
    a_v = abs(wrap_angle(math.atan2(rel[2], along) + camera.pitch))
    b_v = min(a_v, math.pi - a_v)

    comp_xy = d_xy * math.sin(b_h - 0.5 * camera.aov_h)
    comp_z = dist * math.sin(b_v - 0.5 * camera.aov_v)
    return comp_xy, comp_z


def fov_distance(light_pos, camera):
    """Signed distance from a light position to the nearest FoV border.

    Combines the per-axis border distances of fov_components; when either
    component is negative (inside the real or mirrored wedge along that
    axis) the combined magnitude is negated, so the MPC keep-out
    constraint sees a proper inside/outside signal. The camera body
    radius is subtracted at the end.
    """
    comp_xy, comp_z = fov_components(light_pos, camera)
    mag = math.hypot(comp_xy, comp_z)
    sign = -1.0 if min(comp_xy, comp_z) < 0.0 else 1.0
    return sign * mag - camera.body_radius


def fov_distance_batch(points, camera):
    """Vectorized fov_distance over an (n, 3) array of positions."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rel = pts - camera.position
    dist = np.linalg.norm(rel, axis=1)
    d_xy = np.hypot(rel[:, 0], rel[:, 1])

    bearing = np.arctan2(rel[:, 1], rel[:, 0])
    a_h = np.abs(_wrap_array(bearing - camera.yaw))
    a_h = np.where(d_xy > EPS_UNIT, a_h, 0.0)
    b_h = np.minimum(a_h, math.pi - a_h)

    along = rel[:, 0] * math.cos(camera.yaw) + rel[:, 1] * math.sin(camera.yaw)
    a_v = np.abs(_wrap_array(np.arctan2(rel[:, 2], along) + camera.pitch))
    b_v = np.minimum(a_v, math.pi - a_v)

    comp_xy = d_xy * np.sin(b_h - 0.5 * camera.aov_h)
    comp_z = dist * np.sin(b_v - 0.5 * camera.aov_v)
    mag = np.hypot(comp_xy, comp_z)
    sign = np.where(np.minimum(comp_xy, comp_z) < 0.0, -1.0, 1.0)
    return sign * mag - camera.body_radius


def _wrap_array(a):
    return (np.asarray(a) + math.pi) % (2.0 * math.pi) - math.pi
