"""Tests for rti_studio.capture."""

import math

import numpy as np
import pytest

from rti_studio.capture import (
    CaptureSet,
    flat_scene,
    hemisphere_bump_normals,
    hemisphere_bump_scene,
    perturb_localization,
    quantize_u8,
    render,
    run_capture,
)
from rti_studio.errors import ConfigError
from rti_studio.geometry import CameraModel, lighting_vector
from rti_studio.lighting import ScanRegion, sppa_positions


def _overhead_camera():
    return CameraModel(
        position=np.array([0.0, 0.0, 3.0]), yaw=0.0, pitch=math.pi / 2
    )


class TestQuantizeU8:
    def test_rounds_half_away(self):
        vals = np.array([0.0, 0.5 / 255.0, 1.5 / 255.0, 1.0])
        np.testing.assert_array_equal(quantize_u8(vals), [0, 1, 2, 255])

    def test_clamps(self):
        np.testing.assert_array_equal(quantize_u8(np.array([-1.0, 2.0])), [0, 255])


class TestScene:
    def test_rejects_bad_albedo(self):
        with pytest.raises(ConfigError):
            flat_scene(size=4, albedo=(1.5, 0.5, 0.5))

    def test_flat_scene_normals_point_up(self):
        n = flat_scene(size=8).normals()
        np.testing.assert_allclose(n, np.dstack([np.zeros((8, 8)),
                                                 np.zeros((8, 8)),
                                                 np.ones((8, 8))]))

    def test_bump_normals_match_analytic(self):
        scene = hemisphere_bump_scene(size=64)
        analytic, inside = hemisphere_bump_normals(scene)
        numeric = scene.normals()
        # compare away from the bump rim where the gradient stencil blurs
        core = inside & (np.linalg.norm(analytic[..., :2], axis=2) < 0.3)
        dots = np.clip((analytic * numeric).sum(axis=2), -1.0, 1.0)
        assert np.arccos(dots[core]).mean() < 0.05


class TestRender:
    def test_flat_normal_incidence_uniform(self):
        scene = flat_scene(size=16, albedo=(1.0, 1.0, 1.0))
        camera = _overhead_camera()
        img = render(scene, camera, np.array([0.0, 0.0, 2.0]), np.zeros(3))
        # 0.8 exposure at n.l = 1
        assert img.min() == img.max() == quantize_u8(np.array([0.8]))[0]

    def test_grazing_light_black(self):
        scene = flat_scene(size=16)
        camera = _overhead_camera()
        img = render(scene, camera, np.array([2.0, 0.0, 0.0]), np.zeros(3))
        assert img.max() == 0

    def test_brightest_pixel_faces_the_light(self):
        scene = hemisphere_bump_scene(size=96)
        camera = _overhead_camera()
        light = np.array([0.6, 0.0, 1.9])  # tilt within the bump's cap angle
        img = render(scene, camera, light, np.zeros(3))
        lum = img.astype(float) @ np.array([0.299, 0.587, 0.114])
        analytic, _ = hemisphere_bump_normals(scene)
        lv = lighting_vector(light, np.zeros(3), camera).as_array()
        # 8-bit quantization flattens the peak into a plateau: the pixel
        # whose normal points at the light must lie on that plateau
        peak = lum >= lum.max()
        dots = np.clip(np.tensordot(analytic, lv, axes=([2], [0])), -1.0, 1.0)
        assert np.arccos(dots[peak]).min() < 0.05
        assert np.arccos(dots[peak]).max() < 0.2

    def test_deterministic(self):
        scene = hemisphere_bump_scene(size=32)
        camera = _overhead_camera()
        light = np.array([0.5, -0.3, 2.0])
        a = render(scene, camera, light, np.zeros(3))
        b = render(scene, camera, light, np.zeros(3))
        np.testing.assert_array_equal(a, b)

    def test_lambertian_linearity(self):
        # with specular and shadows off the pre-quantization shading is
        # 0.8 * albedo * max(0, n.l): verify against analytic normals
        scene = hemisphere_bump_scene(size=48, albedo=(1.0, 1.0, 1.0))
        camera = _overhead_camera()
        light = np.array([0.8, 0.4, 1.8])
        img = render(scene, camera, light, np.zeros(3)).astype(float) / 255.0
        lv = lighting_vector(light, np.zeros(3), camera).as_array()
        expected = 0.8 * np.maximum(0.0, scene.normals() @ lv)
        assert np.abs(img[..., 0] - expected).max() <= 0.5 / 255.0 + 1e-9

    def test_inverse_square_falloff(self):
        scene = flat_scene(size=8, albedo=(1.0, 1.0, 1.0))
        camera = _overhead_camera()
        near = render(scene, camera, np.array([0.0, 0.0, 1.0]), np.zeros(3),
                      ref_distance=1.0)
        far = render(scene, camera, np.array([0.0, 0.0, 2.0]), np.zeros(3),
                     ref_distance=1.0)
        assert near[0, 0, 0] == pytest.approx(0.8 * 255, abs=1)
        assert far[0, 0, 0] == pytest.approx(0.2 * 255, abs=1)


class TestPerturbLocalization:
    def test_sigma_zero_identity(self):
        pose = (np.array([1.0, 2.0, 3.0]), 0.4, -0.1)
        pos, yaw, pitch = perturb_localization(pose, 0.0, 5)
        np.testing.assert_array_equal(pos, pose[0])
        assert yaw == 0.4 and pitch == -0.1

    def test_position_std_matches_sigma(self):
        rng = np.random.default_rng(0)
        samples = np.array([
            perturb_localization((np.zeros(3), 0.0, 0.0), 0.1, rng)[0]
            for _ in range(10_000)
        ])
        stds = samples.std(axis=0)
        assert np.all((0.097 <= stds) & (stds <= 0.103))

    def test_orientation_std_matches_formula(self):
        rng = np.random.default_rng(1)
        yaws = np.array([
            perturb_localization((np.zeros(3), 0.0, 0.0), 0.1, rng)[1]
            for _ in range(10_000)
        ])
        target = 2.0 * math.pi * 0.1 / 36.0
        assert yaws.std() == pytest.approx(target, rel=0.05)

    def test_rejects_negative_sigma(self):
        with pytest.raises(ConfigError):
            perturb_localization((np.zeros(3), 0.0, 0.0), -0.1, 0)


class TestRunCapture:
    def _plan(self):
        region = ScanRegion(
            lambda_h_min=-math.pi,
            lambda_h_max=math.pi - 1e-9,
            lambda_v_min=-1.1,
            lambda_v_max=-0.6,
            d_l=2.0,
            ooi=np.zeros(3),
        )
        return region, sppa_positions(region, 3, np.array([0.0, 0.0, 2.0]))

    def test_sigma_zero_recorded_equals_true(self):
        region, plan = self._plan()
        caps = run_capture(plan, hemisphere_bump_scene(size=16),
                           _overhead_camera(), region.ooi, sigma=0.0)
        assert len(caps) == len(plan.positions)
        for r, t in zip(caps.recorded, caps.true):
            assert (r.lu, r.lv, r.lw) == (t.lu, t.lv, t.lw)

    def test_noise_grows_lighting_gap(self):
        region, plan = self._plan()
        scene = hemisphere_bump_scene(size=8)
        camera = _overhead_camera()

        def mean_gap(sigma):
            gaps = []
            for seed in range(20):
                caps = run_capture(plan, scene, camera, region.ooi,
                                   sigma=sigma, seed=seed)
                for r, t in zip(caps.recorded, caps.true):
                    dot = np.clip(np.dot(r.as_array(), t.as_array()), -1, 1)
                    gaps.append(np.arccos(dot))
            return float(np.mean(gaps))

        g1, g2, g3 = mean_gap(0.02), mean_gap(0.1), mean_gap(0.3)
        assert g1 < g2 < g3

    def test_low_count_flag(self):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        lv = lighting_vector(np.array([0.0, 0.0, 1.0]), np.zeros(3),
                             _overhead_camera())
        caps = CaptureSet([img] * 4, [lv] * 4, [lv] * 4, None)
        assert caps.low_count

    def test_mismatched_sizes_rejected(self):
        lv = lighting_vector(np.array([0.0, 0.0, 1.0]), np.zeros(3),
                             _overhead_camera())
        with pytest.raises(ConfigError):
            CaptureSet(
                [np.zeros((4, 4, 3), dtype=np.uint8),
                 np.zeros((5, 5, 3), dtype=np.uint8)],
                [lv] * 2, [lv] * 2, None,
            )

    def test_save_writes_manifest(self, tmp_path):
        region, plan = self._plan()
        caps = run_capture(plan, hemisphere_bump_scene(size=8),
                           _overhead_camera(), region.ooi)
        caps.save(tmp_path)
        assert (tmp_path / "captures.json").exists()
        assert (tmp_path / "captures.lp").exists()
        assert (tmp_path / "img_0000.png").exists()
