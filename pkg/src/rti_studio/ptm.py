"""Polynomial texture maps: per-pixel biquadratic relighting model.

Intensity of each channel is modeled as
    I = a1*lu^2 + a2*lv^2 + a3*lu*lv + a4*lu + a5*lv + a6
with per-pixel coefficients fitted by least squares over the capture
stack. Normals are recovered from the maximum-luminance direction.
"""

import io
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, PngImagePlugin

from .capture import quantize_u8
from .errors import (
    ConfigError,
    IllConditionedLightingError,
    UndefinedMeanError,
)

MAGIC = b"RTIPTM1\n"
N_PLANES = 6
CHANNELS = ("red", "green", "blue")
EPS_D = 1e-9
COND_LIMIT = 1e8
LUMA = np.array([0.299, 0.587, 0.114])


def design_row(lu, lv):
    return np.array([lu * lu, lv * lv, lu * lv, lu, lv, 1.0])


def design_matrix(lights):
    """Stack of polynomial basis rows, one per lighting vector."""
    arr = np.asarray(lights, dtype=float)
    lu, lv = arr[:, 0], arr[:, 1]
    return np.column_stack([lu * lu, lv * lv, lu * lv, lu, lv, np.ones_like(lu)])


@dataclass
class PtmImage:
    """Quantized biquadratic coefficients, six planes per channel."""

    width: int
    height: int
    planes: np.ndarray  # uint8 (6, 3, H, W)
    scale: np.ndarray  # float (6, 3)
    bias: np.ndarray  # int (6, 3)
    colorspace: str = "srgb-linear"
    float_planes: np.ndarray = None  # optional lossless sidecar (H, W, 3, 6)

    def coefficients(self):
        """Dequantized coefficients as float (H, W, 3, 6)."""
        c = (
            self.planes.astype(float)
            - self.bias[:, :, None, None].astype(float)
        ) * self.scale[:, :, None, None]
        return np.transpose(c, (2, 3, 1, 0))

    def luminance_coefficients(self):
        coeffs = (
            self.float_planes if self.float_planes is not None else self.coefficients()
        )
        return np.tensordot(coeffs, LUMA, axes=([2], [0]))  # (H, W, 6)

    def to_bytes(self):
        header = {
            "width": self.width,
            "height": self.height,
            "channels": list(CHANNELS),
            "scale": [[float(s) for s in row] for row in self.scale],
            "bias": [[int(b) for b in row] for row in self.bias],
            "colorspace": self.colorspace,
        }
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write((json.dumps(header, separators=(",", ":")) + "\n").encode())
        for i in range(N_PLANES):
            for c in range(3):
                buf.write(self.planes[i, c].astype("<u1").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data):
        if not data.startswith(MAGIC):
            raise ConfigError("not an RTIPTM1 container")
        nl = data.index(b"\n", len(MAGIC))
        header = json.loads(data[len(MAGIC) : nl].decode())
        w, h = header["width"], header["height"]
        plane_bytes = w * h
        need = nl + 1 + N_PLANES * 3 * plane_bytes
        if len(data) < need:
            raise ConfigError("truncated RTIPTM1 container")
        planes = np.frombuffer(
            data[nl + 1 : need], dtype=np.uint8
        ).reshape(N_PLANES, 3, h, w)
        return cls(
            width=w,
            height=h,
            planes=planes.copy(),
            scale=np.asarray(header["scale"], dtype=float),
            bias=np.asarray(header["bias"], dtype=int),
            colorspace=header.get("colorspace", "srgb-linear"),
        )


def _quantize_plane(values):
    """Affine 8-bit quantization of one coefficient plane."""
    vmin = float(values.min())
    vmax = float(values.max())
    spread = vmax - vmin
    if spread > 1e-9:
        scale = spread / 255.0
        bias = int(round(-vmin / scale))
    else:
        scale = max(abs(vmin), 1e-7) / 100.0
        bias = 127
    raw = np.clip(np.round(values / scale + bias), 0, 255).astype(np.uint8)
    return raw, scale, bias


def fit_ptm(captures, keep_float=True):
    """Least-squares PTM fit of a capture set using recorded lighting.

    Requires at least six captures whose lighting vectors are in general
    position; invalid (behind-surface) vectors are dropped first.
    """
    usable = [
        (im, r)
        for im, r in zip(captures.images, captures.recorded)
        if r.valid
    ]
    if len(usable) < 6:
        raise IllConditionedLightingError(
            "need at least 6 captures with valid lighting, got %d" % len(usable)
        )
    lights = [(r.lu, r.lv) for _, r in usable]
    a = design_matrix(lights)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedLightingError(
            "lighting directions are too degenerate (condition number %.3g); "
            "spread the lights over the angular window" % cond
        )

    stack = np.stack([im for im, _ in usable]).astype(float) / 255.0  # (n,H,W,3)
    n, h, w, _ = stack.shape
    y = stack.reshape(n, -1)
    coeffs, *_ = np.linalg.lstsq(a, y, rcond=None)
    coeffs = coeffs.reshape(6, h, w, 3)
    coeffs = np.transpose(coeffs, (1, 2, 3, 0))  # (H, W, 3, 6)

    planes = np.empty((N_PLANES, 3, h, w), dtype=np.uint8)
    scale = np.empty((N_PLANES, 3))
    bias = np.empty((N_PLANES, 3), dtype=int)
    for i in range(N_PLANES):
        for c in range(3):
            planes[i, c], scale[i, c], bias[i, c] = _quantize_plane(
                coeffs[:, :, c, i]
            )
    return PtmImage(
        width=w,
        height=h,
        planes=planes,
        scale=scale,
        bias=bias,
        float_planes=coeffs if keep_float else None,
    )


def relight(ptm, lu, lv, use_float=False):
    """Evaluate the polynomial at a lighting vector; uint8 RGB image.

    Uses the dequantized coefficients so an external decoder of the
    container reproduces the result bit for bit.
    """
    if lu * lu + lv * lv > 1.0 + 1e-12:
        raise ConfigError("lighting vector outside the unit disc")
    coeffs = (
        ptm.float_planes
        if (use_float and ptm.float_planes is not None)
        else ptm.coefficients()
    )
    basis = design_row(lu, lv)
    img = np.tensordot(coeffs, basis, axes=([3], [0]))
    return quantize_u8(img)


@dataclass
class NormalMap:
    normals: np.ndarray  # (H, W, 3)
    valid: np.ndarray  # (H, W) bool

    def to_png_bytes(self):
        rgb = quantize_u8((self.normals + 1.0) / 2.0)
        rgb[~self.valid] = 0
        buf = io.BytesIO()
        Image.fromarray(rgb).save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path_png, path_npz=None):
        with open(path_png, "wb") as f:
            f.write(self.to_png_bytes())
        if path_npz is not None:
            np.savez(path_npz, normals=self.normals, valid=self.valid)


def normal_map(ptm):
    """Surface normals from the luminance maximum of the polynomial.

    Solves the stationary point of the biquadratic per pixel; pixels
    whose stationary point is degenerate, not a maximum, or outside the
    unit disc are flagged invalid rather than clamped.
    """
    c = ptm.luminance_coefficients()  # (H, W, 6)
    a1, a2, a3, a4, a5 = (c[..., i] for i in range(5))
    det = 4.0 * a1 * a2 - a3 * a3
    safe = np.abs(det) >= EPS_D
    det_safe = np.where(safe, det, 1.0)
    lu0 = (a3 * a5 - 2.0 * a2 * a4) / det_safe
    lv0 = (a3 * a4 - 2.0 * a1 * a5) / det_safe
    r2 = lu0 * lu0 + lv0 * lv0
    # a maximum needs a negative-definite Hessian: a1 < 0 and det > 0
    valid = safe & (a1 < 0.0) & (det > 0.0) & (r2 <= 1.0)

    normals = np.zeros(c.shape[:2] + (3,))
    lw = np.sqrt(np.maximum(0.0, 1.0 - r2))
    normals[..., 0] = np.where(valid, lu0, 0.0)
    normals[..., 1] = np.where(valid, lv0, 0.0)
    normals[..., 2] = np.where(valid, lw, 0.0)
    return NormalMap(normals=normals, valid=valid)


def compare_normals(a, b, colormap="inferno", angle_max=None):
    """Mean angle between two normal maps plus a heatmap image.

    Returns (delta, heatmap PNG bytes, per-pixel angles). Only pixels
    valid in both maps enter the mean.
    """
    if a.normals.shape != b.normals.shape:
        raise ConfigError("normal maps must share dimensions")
    both = a.valid & b.valid
    if not both.any():
        raise UndefinedMeanError("no mutually valid pixels to compare")
    dot = np.clip((a.normals * b.normals).sum(axis=2), -1.0, 1.0)
    angles = np.where(both, np.arccos(dot), 0.0)
    delta = float(angles[both].mean())

    amax = angle_max if angle_max is not None else max(1e-9, float(angles.max()))
    from matplotlib import colormaps

    rgba = colormaps[colormap](np.clip(angles / amax, 0.0, 1.0))
    rgb = quantize_u8(rgba[..., :3])
    rgb[~both] = 0

    meta = PngImagePlugin.PngInfo()
    meta.add_text("angle_min", "0.0")
    meta.add_text("angle_max", repr(amax))
    meta.add_text("units", "radians")
    meta.add_text("colormap", colormap)
    buf = io.BytesIO()
    Image.fromarray(rgb).save(buf, format="PNG", pnginfo=meta)
    return delta, buf.getvalue(), angles
