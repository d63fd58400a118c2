"""Deterministic software renderer and the localization noise model.

The scene is a heightfield patch that lives in the capture camera's
image plane: u across columns, v up the rows, heights along w toward
the camera. Rendering is orthographic along -w, which keeps pixel
normals in exactly the frame the PTM fitter works in.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ConfigError
from .geometry import lighting_vector
from .lighting import format_lp


def quantize_u8(values):
    """Map [0, 1] floats to uint8 with round-half-away-from-zero."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0) * 255.0
    return np.floor(v + 0.5).astype(np.uint8)


@dataclass
class Scene:
    """Heightfield stand-in for the scanned artifact."""

    heights: np.ndarray  # (H, W) meters along +w
    albedo: np.ndarray  # (H, W, 3) in [0, 1]
    extent: float = 0.5  # half-width of the patch in meters
    specular_strength: float = 0.0
    specular_exponent: float = 16.0
    shadowing: bool = False

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        self.albedo = np.asarray(self.albedo, dtype=float)
        if not np.isfinite(self.heights).all():
            raise ConfigError("heightfield must be finite")
        if self.albedo.min() < 0.0 or self.albedo.max() > 1.0:
            raise ConfigError("albedo must lie in [0, 1]")

    @property
    def shape(self):
        return self.heights.shape

    def pixel_size(self):
        return 2.0 * self.extent / self.heights.shape[1]

    def normals(self):
        """Per-pixel unit normals in the (u, v, w) frame.

        Row index runs top to bottom, i.e. along -v, hence the sign flip
        on the row gradient.
        """
        step = self.pixel_size()
        dh_dv, dh_du = np.gradient(self.heights, -step, step)
        n = np.dstack([-dh_du, -dh_dv, np.ones_like(self.heights)])
        n /= np.linalg.norm(n, axis=2, keepdims=True)
        return n


def flat_scene(size=128, extent=0.5, albedo=(0.8, 0.7, 0.6), **kw):
    h = np.zeros((size, size))
    a = np.broadcast_to(np.asarray(albedo, dtype=float), (size, size, 3)).copy()
    return Scene(h, a, extent=extent, **kw)


def hemisphere_bump_scene(
    size=128,
    extent=0.5,
    sphere_radius=0.6,
    cap_angle=0.45,
    albedo=(0.8, 0.7, 0.6),
    **kw,
):
    """Spherical-cap bump on a flat plane.

    cap_angle bounds the surface slope, which keeps the maximum-luminance
    direction of a fitted PTM inside the unit disc.
    """
    u, v = _patch_coords(size, extent)
    a = sphere_radius * math.sin(cap_angle)
    r2 = u * u + v * v
    inside = r2 < a * a
    h = np.zeros((size, size))
    base = sphere_radius * math.cos(cap_angle)
    h[inside] = np.sqrt(sphere_radius**2 - r2[inside]) - base
    alb = np.broadcast_to(np.asarray(albedo, dtype=float), (size, size, 3)).copy()
    return Scene(h, alb, extent=extent, **kw)


def hemisphere_bump_normals(scene, sphere_radius=0.6, cap_angle=0.45):
    """Analytic normals matching hemisphere_bump_scene, plus the bump mask."""
    size = scene.heights.shape[0]
    u, v = _patch_coords(size, scene.extent)
    a = sphere_radius * math.sin(cap_angle)
    r2 = u * u + v * v
    inside = r2 < a * a
    n = np.zeros((size, size, 3))
    n[..., 2] = 1.0
    w = np.sqrt(np.maximum(0.0, sphere_radius**2 - r2[inside]))
    n[inside] = np.column_stack(
        [u[inside], v[inside], w]
    ) / sphere_radius
    return n, inside


def _patch_coords(size, extent):
    axis = (np.arange(size) + 0.5) / size * 2.0 * extent - extent
    u = axis[None, :] * np.ones((size, 1))
    v = -axis[:, None] * np.ones((1, size))  # row 0 is the top of the image
    return u, v


def render(scene, camera, light_pos, ooi, ref_distance=None):
    """Shade the scene under a single light; returns a uint8 RGB image.

    Lambertian plus an optional Phong lobe, lit by the direction from
    the patch center to the light, with inverse-square falloff
    normalized at ref_distance (no falloff when omitted). Deterministic.
    """
    lv = lighting_vector(light_pos, ooi, camera)
    l = lv.as_array()
    dist = float(np.linalg.norm(np.asarray(light_pos, dtype=float) - ooi))
    falloff = 1.0 if ref_distance is None else (ref_distance / dist) ** 2

    n = scene.normals()
    ndotl = np.maximum(0.0, n @ l)
    if not lv.valid:
        ndotl = np.zeros_like(ndotl)

    lit = np.ones_like(ndotl)
    if scene.shadowing:
        lit = _shadow_mask(scene, l)

    # 0.8 exposure leaves headroom for the specular lobe
    shading = 0.8 * scene.albedo * (ndotl * lit * falloff)[..., None]
    if scene.specular_strength > 0.0:
        refl = 2.0 * ndotl[..., None] * n - l
        spec = np.maximum(0.0, refl[..., 2]) ** scene.specular_exponent
        shading += scene.specular_strength * (spec * lit * falloff)[..., None]
    return quantize_u8(shading)


def _shadow_mask(scene, l):
    """Hard shadows by marching the heightfield toward the light."""
    h = scene.heights
    size_y, size_x = h.shape
    step = scene.pixel_size()
    if l[2] <= 1e-6:
        return np.zeros_like(h)
    # march in pixel units; du right, dv up the image (negative row)
    n_steps = int(max(size_x, size_y))
    lit = np.ones_like(h, dtype=bool)
    iy, ix = np.mgrid[0:size_y, 0:size_x]
    for s in range(1, n_steps):
        px = ix + s * l[0] / max(abs(l[0]), abs(l[1]), 1e-9)
        py = iy - s * l[1] / max(abs(l[0]), abs(l[1]), 1e-9)
        qx = np.round(px).astype(int)
        qy = np.round(py).astype(int)
        valid = (qx >= 0) & (qx < size_x) & (qy >= 0) & (qy < size_y)
        if not valid.any():
            break
        ray_h = h + (s * step) * l[2] / max(abs(l[0]), abs(l[1]), 1e-9)
        blocked = np.zeros_like(h, dtype=bool)
        blocked[valid] = h[qy[valid], qx[valid]] > ray_h[valid] + 1e-9
        lit &= ~blocked
    return lit.astype(float)


def perturb_localization(pose, sigma, rng):
    """Gaussian localization noise on a (position, yaw, pitch) pose.

    Position noise is N(0, sigma^2) per axis; orientation noise is
    N(0, (2*pi*sigma/36)^2) per angle.
    """
    if sigma < 0.0:
        raise ConfigError("sigma must be >= 0")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    pos, yaw, pitch = pose
    pos = np.asarray(pos, dtype=float)
    if sigma == 0.0:
        return pos.copy(), yaw, pitch
    ang_sigma = 2.0 * math.pi * sigma / 36.0
    new_pos = pos + rng.normal(0.0, sigma, size=3)
    return new_pos, yaw + rng.normal(0.0, ang_sigma), pitch + rng.normal(0.0, ang_sigma)


@dataclass
class CaptureSet:
    """Rendered images paired with recorded and true lighting vectors."""

    images: list  # uint8 (H, W, 3)
    recorded: list  # LightingVector from the perturbed pose
    true: list  # LightingVector from the true pose
    camera: object
    ooi: np.ndarray = None
    low_count: bool = False

    def __post_init__(self):
        if len(self.images) < 6:
            self.low_count = True
        shapes = {im.shape for im in self.images}
        if len(shapes) > 1:
            raise ConfigError("captures must share dimensions")

    def __len__(self):
        return len(self.images)

    def names(self):
        return ["img_%04d.png" % i for i in range(len(self.images))]

    def to_lp(self):
        return format_lp(list(zip(self.names(), self.recorded)))

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        names = self.names()
        for name, im in zip(names, self.images):
            Image.fromarray(im).save(os.path.join(out_dir, name))
        with open(os.path.join(out_dir, "captures.lp"), "w") as f:
            f.write(self.to_lp())
        manifest = {
            "count": len(self.images),
            "low_count": self.low_count,
            "captures": [
                {
                    "image": name,
                    "recorded_light": [r.lu, r.lv, r.lw],
                    "true_light": [t.lu, t.lv, t.lw],
                }
                for name, r, t in zip(names, self.recorded, self.true)
            ],
        }
        with open(os.path.join(out_dir, "captures.json"), "w") as f:
            json.dump(manifest, f, indent=2)


def run_capture(source, scene, camera, ooi, sigma=0.0, seed=0, ref_distance=None):
    """Render one image per capture and attach its lighting vectors.

    ``source`` is either a MissionLog (true poses come from flown
    captures) or a LightingPlan (true poses are the planned positions).
    Images use the TRUE light pose; the recorded lighting vector comes
    from the perturbed pose, which is exactly how localization error
    corrupts the fitter input.
    """
    rng = np.random.default_rng(seed)
    ooi = np.asarray(ooi, dtype=float)

    if hasattr(source, "captures"):  # MissionLog
        poses = [
            (c.true_position, c.yaw, c.pitch) for c in source.captures
        ]
    else:  # LightingPlan
        poses = [(np.asarray(p, dtype=float), 0.0, 0.0) for p in source.positions]

    images, recorded, true = [], [], []
    for pos, yaw, pitch in poses:
        pert_pos, _, _ = perturb_localization((pos, yaw, pitch), sigma, rng)
        true.append(lighting_vector(pos, ooi, camera))
        recorded.append(lighting_vector(pert_pos, ooi, camera))
        images.append(render(scene, camera, pos, ooi, ref_distance=ref_distance))
    return CaptureSet(images, recorded, true, camera, ooi=ooi)
