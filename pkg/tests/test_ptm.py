"""Tests for rti_studio.ptm."""

import math

import numpy as np
import pytest

from rti_studio.capture import CaptureSet, hemisphere_bump_scene, run_capture
from rti_studio.errors import (
    ConfigError,
    IllConditionedLightingError,
    UndefinedMeanError,
)
from rti_studio.geometry import CameraModel, LightingVector
from rti_studio.lighting import ScanRegion, sppa_positions
from rti_studio.ptm import (
    NormalMap,
    PtmImage,
    compare_normals,
    design_matrix,
    fit_ptm,
    normal_map,
    relight,
)


def _lights(n=9, radius=0.7):
    """n lighting vectors spread on a ring plus the zenith."""
    out = [LightingVector(0.0, 0.0, 1.0)]
    for k in range(n - 1):
        a = 2.0 * math.pi * k / (n - 1)
        lu, lv = radius * math.cos(a), radius * math.sin(a)
        out.append(LightingVector(lu, lv, math.sqrt(1.0 - lu * lu - lv * lv)))
    return out


def _synthetic_captures(coeff_fn, size=8, lights=None):
    """Capture set whose intensities come from an exact polynomial."""
    lights = lights if lights is not None else _lights()
    images = []
    for lv in lights:
        val = coeff_fn(lv.lu, lv.lv)
        img = np.clip(np.asarray(val, dtype=float), 0.0, 1.0)
        img = np.broadcast_to(img, (size, size, 3))
        images.append(np.floor(img * 255.0 + 0.5).astype(np.uint8))
    return CaptureSet(images, lights, lights, None)


class TestFitPtm:
    def test_constant_images(self):
        caps = _synthetic_captures(lambda lu, lv: 0.5)
        ptm = fit_ptm(caps)
        c = ptm.float_planes[0, 0, 0]
        np.testing.assert_allclose(c[:5], 0.0, atol=1e-6)
        assert c[5] == pytest.approx(0.5, abs=1.0 / 255.0)

    def test_in_class_recovery(self):
        # I = 0.5 + 0.3 l_u is in the model class; quantization of the
        # inputs is the only error source, so fit on exact float images
        lights = _lights()
        a = design_matrix([(l.lu, l.lv) for l in lights])
        y = np.array([0.5 + 0.3 * l.lu for l in lights])
        coeffs, *_ = np.linalg.lstsq(a, y, rcond=None)
        np.testing.assert_allclose(
            coeffs, [0.0, 0.0, 0.0, 0.3, 0.0, 0.5], atol=1e-6
        )

    def test_in_class_recovery_through_fitter(self):
        caps = _synthetic_captures(lambda lu, lv: 0.5 + 0.3 * lu)
        ptm = fit_ptm(caps)
        c = ptm.float_planes[0, 0, 0]
        # image quantization bounds the recovery error
        np.testing.assert_allclose(
            c, [0.0, 0.0, 0.0, 0.3, 0.0, 0.5], atol=2.0 / 255.0
        )

    def test_too_few_captures_rejected(self):
        lights = _lights()[:5]
        caps = _synthetic_captures(lambda lu, lv: 0.5, lights=lights)
        with pytest.raises(IllConditionedLightingError):
            fit_ptm(caps)

    def test_degenerate_lighting_rejected(self):
        lights = [LightingVector(0.1, 0.0, math.sqrt(1 - 0.01))] * 8
        caps = _synthetic_captures(lambda lu, lv: 0.5, lights=lights)
        with pytest.raises(IllConditionedLightingError):
            fit_ptm(caps)

    def test_invalid_lights_dropped(self):
        lights = _lights() + [LightingVector(0.3, 0.3, 0.0, valid=False)]
        caps = _synthetic_captures(lambda lu, lv: 0.4, lights=lights)
        ptm = fit_ptm(caps)
        assert ptm.float_planes[0, 0, 0, 5] == pytest.approx(0.4, abs=1.0 / 255.0)

    def test_fit_optimality(self):
        caps = _synthetic_captures(lambda lu, lv: 0.4 + 0.2 * lu - 0.1 * lv * lv)
        ptm = fit_ptm(caps)
        lights = [(l.lu, l.lv) for l in caps.recorded]
        a = design_matrix(lights)
        y = np.array([im[0, 0, 0] / 255.0 for im in caps.images])
        c = ptm.float_planes[0, 0, 0]
        base = np.sum((a @ c - y) ** 2)
        rng = np.random.default_rng(3)
        for _ in range(50):
            pert = c + rng.normal(scale=1e-3, size=6)
            assert np.sum((a @ pert - y) ** 2) >= base - 1e-15


class TestRelight:
    def test_origin_returns_alpha6(self):
        caps = _synthetic_captures(lambda lu, lv: 0.5 + 0.3 * lu)
        ptm = fit_ptm(caps)
        img = relight(ptm, 0.0, 0.0)
        c6 = ptm.coefficients()[..., 5]
        expected = np.floor(np.clip(c6, 0, 1) * 255 + 0.5).astype(np.uint8)
        np.testing.assert_array_equal(img, expected)

    def test_rejects_out_of_disc(self):
        caps = _synthetic_captures(lambda lu, lv: 0.5)
        ptm = fit_ptm(caps)
        with pytest.raises(ConfigError):
            relight(ptm, 0.9, 0.9)

    def test_roundtrip_on_lambertian_fixture(self):
        region = ScanRegion(
            lambda_h_min=-math.pi,
            lambda_h_max=math.pi - 1e-9,
            lambda_v_min=-1.1,
            lambda_v_max=-0.6,
            d_l=2.0,
            ooi=np.zeros(3),
        )
        camera = CameraModel(position=np.array([0.0, 0.0, 3.0]),
                             pitch=math.pi / 2)
        plan = sppa_positions(region, 4, np.array([0.0, 0.0, 2.0]))
        caps = run_capture(plan, hemisphere_bump_scene(size=32), camera,
                           region.ooi, ref_distance=region.d_l)
        ptm = fit_ptm(caps)
        errs = []
        for img, lv in zip(caps.images, caps.recorded):
            relit = relight(ptm, lv.lu, lv.lv)
            errs.append(np.abs(relit.astype(float) - img.astype(float)).mean())
        assert max(errs) <= 3.0

    def test_superposition_in_coefficients(self):
        caps_a = _synthetic_captures(lambda lu, lv: 0.3 + 0.2 * lu)
        caps_b = _synthetic_captures(lambda lu, lv: 0.2 + 0.3 * lv)
        ptm_a, ptm_b = fit_ptm(caps_a), fit_ptm(caps_b)
        combined = PtmImage(
            width=ptm_a.width,
            height=ptm_a.height,
            planes=ptm_a.planes,
            scale=ptm_a.scale,
            bias=ptm_a.bias,
            float_planes=ptm_a.float_planes + ptm_b.float_planes,
        )
        lu, lv = 0.4, -0.3
        basis_eval = lambda p: np.tensordot(
            p.float_planes,
            np.array([lu * lu, lv * lv, lu * lv, lu, lv, 1.0]),
            axes=([3], [0]),
        )
        np.testing.assert_allclose(
            basis_eval(combined), basis_eval(ptm_a) + basis_eval(ptm_b), atol=1e-12
        )

    def test_quantization_roundtrip_one_step(self):
        caps = _synthetic_captures(lambda lu, lv: 0.4 + 0.2 * lu + 0.1 * lv)
        ptm = fit_ptm(caps)
        again = PtmImage.from_bytes(ptm.to_bytes())
        for lu, lv in [(0.0, 0.0), (0.5, 0.2), (-0.4, 0.4)]:
            a = relight(ptm, lu, lv)  # already uses dequantized planes
            b = relight(again, lu, lv)
            assert np.abs(a.astype(int) - b.astype(int)).max() <= 1


class TestContainer:
    def test_bytes_roundtrip_bit_exact(self):
        caps = _synthetic_captures(lambda lu, lv: 0.5 + 0.1 * lu * lv)
        ptm = fit_ptm(caps)
        data = ptm.to_bytes()
        assert data.startswith(b"RTIPTM1\n")
        again = PtmImage.from_bytes(data)
        np.testing.assert_array_equal(again.planes, ptm.planes)
        np.testing.assert_allclose(again.scale, ptm.scale)
        np.testing.assert_array_equal(again.bias, ptm.bias)
        assert again.to_bytes() == data

    def test_bad_magic_rejected(self):
        with pytest.raises(ConfigError):
            PtmImage.from_bytes(b"NOTAPTM0\n{}")

    def test_truncated_rejected(self):
        caps = _synthetic_captures(lambda lu, lv: 0.5)
        data = fit_ptm(caps).to_bytes()
        with pytest.raises(ConfigError):
            PtmImage.from_bytes(data[:-10])


class TestNormalMap:
    def test_constructed_stationary_point(self):
        # I = 1 - (l_u - 0.2)^2 - (l_v + 0.1)^2
        coeffs = np.array([-1.0, -1.0, 0.0, 0.4, -0.2, 0.95])
        planes = np.tile(coeffs.reshape(1, 1, 1, 6), (4, 4, 3, 1))
        ptm = PtmImage(
            width=4, height=4,
            planes=np.zeros((6, 3, 4, 4), dtype=np.uint8),
            scale=np.ones((6, 3)), bias=np.zeros((6, 3), dtype=int),
            float_planes=planes,
        )
        nm = normal_map(ptm)
        assert nm.valid.all()
        np.testing.assert_allclose(nm.normals[0, 0, 0], 0.2, atol=1e-12)
        np.testing.assert_allclose(nm.normals[0, 0, 1], -0.1, atol=1e-12)
        np.testing.assert_allclose(
            nm.normals[0, 0, 2], math.sqrt(1 - 0.05), atol=1e-5
        )

    def test_symmetric_paraboloid_normal_up(self):
        coeffs = np.array([-1.0, -1.0, 0.0, 0.0, 0.0, 1.0])
        planes = np.tile(coeffs.reshape(1, 1, 1, 6), (2, 2, 3, 1))
        ptm = PtmImage(
            width=2, height=2,
            planes=np.zeros((6, 3, 2, 2), dtype=np.uint8),
            scale=np.ones((6, 3)), bias=np.zeros((6, 3), dtype=int),
            float_planes=planes,
        )
        nm = normal_map(ptm)
        np.testing.assert_allclose(nm.normals[..., 2], 1.0)

    def test_saddle_and_out_of_disc_invalid(self):
        bad = np.zeros((2, 2, 3, 6))
        bad[0, 0, :, :] = [1.0, 1.0, 0.0, 0.1, 0.0, 0.5]  # minimum, a1 >= 0
        bad[0, 1, :, :] = [-1.0, 1.0, 0.0, 0.1, 0.0, 0.5]  # saddle, D < 0
        bad[1, 0, :, :] = [-0.1, -0.1, 0.0, 0.5, 0.5, 0.5]  # outside disc
        bad[1, 1, :, :] = [-1.0, -1.0, 0.0, 0.0, 0.0, 0.9]  # fine
        ptm = PtmImage(
            width=2, height=2,
            planes=np.zeros((6, 3, 2, 2), dtype=np.uint8),
            scale=np.ones((6, 3)), bias=np.zeros((6, 3), dtype=int),
            float_planes=bad,
        )
        nm = normal_map(ptm)
        assert not nm.valid[0, 0]
        assert not nm.valid[0, 1]
        assert not nm.valid[1, 0]
        assert nm.valid[1, 1]

    def test_valid_normals_are_unit(self):
        caps_scene = hemisphere_bump_scene(size=24)
        region = ScanRegion(
            lambda_h_min=-math.pi, lambda_h_max=math.pi - 1e-9,
            lambda_v_min=-1.1, lambda_v_max=-0.6, d_l=2.0, ooi=np.zeros(3),
        )
        camera = CameraModel(position=np.array([0.0, 0.0, 3.0]),
                             pitch=math.pi / 2)
        plan = sppa_positions(region, 4, np.array([0.0, 0.0, 2.0]))
        caps = run_capture(plan, caps_scene, camera, region.ooi,
                           ref_distance=region.d_l)
        nm = normal_map(fit_ptm(caps))
        norms = np.linalg.norm(nm.normals[nm.valid], axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)


class TestCompareNormals:
    def _uniform_map(self, normal, shape=(4, 4)):
        normals = np.tile(np.asarray(normal, dtype=float), shape + (1,))
        return NormalMap(normals=normals, valid=np.ones(shape, dtype=bool))

    def test_identity_zero(self):
        a = self._uniform_map([0.0, 0.0, 1.0])
        delta, heatmap, _ = compare_normals(a, a)
        assert delta == 0.0
        assert heatmap.startswith(b"\x89PNG")

    def test_constructed_rotation(self):
        a = self._uniform_map([0.0, 0.0, 1.0])
        b = self._uniform_map([math.sin(0.1), 0.0, math.cos(0.1)])
        delta, _, _ = compare_normals(a, b)
        assert delta == pytest.approx(0.1, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        n1 = rng.normal(size=(5, 5, 3))
        n1 /= np.linalg.norm(n1, axis=2, keepdims=True)
        n2 = rng.normal(size=(5, 5, 3))
        n2 /= np.linalg.norm(n2, axis=2, keepdims=True)
        valid = np.ones((5, 5), dtype=bool)
        a = NormalMap(n1, valid)
        b = NormalMap(n2, valid)
        assert compare_normals(a, b)[0] == pytest.approx(compare_normals(b, a)[0])

    def test_no_overlap_is_error(self):
        a = self._uniform_map([0.0, 0.0, 1.0])
        a.valid[:] = False
        with pytest.raises(UndefinedMeanError):
            compare_normals(a, a)

    def test_shape_mismatch_is_error(self):
        a = self._uniform_map([0.0, 0.0, 1.0], shape=(4, 4))
        b = self._uniform_map([0.0, 0.0, 1.0], shape=(5, 5))
        with pytest.raises(ConfigError):
            compare_normals(a, b)
