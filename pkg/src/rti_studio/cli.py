"""Command-line entry point wiring the whole pipeline.

Every command reads a JSON mission config (flags override individual
fields), is seed-deterministic, and exits with a distinct nonzero code
per error class.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .capture import CaptureSet, Scene, flat_scene, hemisphere_bump_scene, run_capture
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    IllConditionedLightingError,
    InfeasibleStepError,
    InvalidRegionError,
    RtiStudioError,
    UndefinedMeanError,
)
from .experiments import (
    noise_sweep,
    path_length_study,
    plot_noise_curve,
    plot_percentiles,
)
from .geometry import CameraModel, LightingVector
from .lighting import LightingPlan, ScanRegion, fibonacci_positions, sppa_positions
from .ptm import NormalMap, PtmImage, compare_normals, fit_ptm, normal_map, relight
from .sequencing import Sequence, etsp_tour, sppa_sequence
from .trajectory import MpcConfig, ObstacleSet, generate_trajectory, simulate_mission

EXIT_CODES = {
    ConfigError: 2,
    InvalidRegionError: 3,
    DegenerateGeometryError: 4,
    InfeasibleStepError: 5,
    IllConditionedLightingError: 6,
    UndefinedMeanError: 7,
    RtiStudioError: 8,
}

DEFAULT_CONFIG = os.path.join(os.path.dirname(__file__), "data", "demo_config.json")


@dataclass
class MissionConfig:
    """Full parameter set of a mission, loadable from one JSON file."""

    region: ScanRegion
    camera: CameraModel
    generator: str = "sppa"
    v_s: int = 3
    n: int = 30
    mode: str = "spherical"
    sequencer: str = "sppa"
    traversal: str = "zigzag"
    v_des: float = 0.4
    dt: float = 0.25
    t_stab: float = 0.5
    mpc: MpcConfig = field(default_factory=MpcConfig)
    initial: np.ndarray = None
    scene: dict = field(default_factory=lambda: {"type": "hemisphere_bump"})
    sigma: float = 0.0
    seed: int = 0
    obstacles: list = field(default_factory=list)

    def __post_init__(self):
        if self.generator not in ("sppa", "fibonacci"):
            raise ConfigError("generator must be sppa or fibonacci")
        if self.sequencer not in ("sppa", "etsp"):
            raise ConfigError("sequencer must be sppa or etsp")
        if self.initial is None:
            self.initial = self.region.position(
                0.5 * (self.region.lambda_h_min + self.region.lambda_h_max),
                self.region.lambda_v_max,
            ) + np.array([0.0, 0.0, -0.3])
        self.initial = np.asarray(self.initial, dtype=float)

    @classmethod
    def from_dict(cls, d):
        try:
            region = ScanRegion.from_dict(d["region"])
            cam = d["camera"]
            camera = CameraModel(
                position=np.asarray(cam["position"], dtype=float),
                yaw=cam.get("yaw", 0.0),
                pitch=cam.get("pitch", 0.0),
                aov_h=cam.get("aov_h", math.radians(60.0)),
                aov_v=cam.get("aov_v", math.radians(45.0)),
                body_radius=cam.get("body_radius", 0.0),
            )
            return cls(
                region=region,
                camera=camera,
                generator=d.get("generator", "sppa"),
                v_s=d.get("v_s", 3),
                n=d.get("n", 30),
                mode=d.get("mode", "spherical"),
                sequencer=d.get("sequencer", "sppa"),
                traversal=d.get("traversal", "zigzag"),
                v_des=d.get("v_des", 0.4),
                dt=d.get("dt", 0.25),
                t_stab=d.get("t_stab", 0.5),
                mpc=MpcConfig(**d.get("mpc", {})),
                initial=d.get("initial"),
                scene=d.get("scene", {"type": "hemisphere_bump"}),
                sigma=d.get("sigma", 0.0),
                seed=d.get("seed", 0),
                obstacles=d.get("obstacles", []),
            )
        except KeyError as e:
            raise ConfigError("missing config field: %s" % e) from e
        except TypeError as e:
            raise ConfigError("bad config field: %s" % e) from e

    def to_dict(self):
        return {
            "region": self.region.to_dict(),
            "camera": {
                "position": list(self.camera.position),
                "yaw": self.camera.yaw,
                "pitch": self.camera.pitch,
                "aov_h": self.camera.aov_h,
                "aov_v": self.camera.aov_v,
                "body_radius": self.camera.body_radius,
            },
            "generator": self.generator,
            "v_s": self.v_s,
            "n": self.n,
            "mode": self.mode,
            "sequencer": self.sequencer,
            "traversal": self.traversal,
            "v_des": self.v_des,
            "dt": self.dt,
            "t_stab": self.t_stab,
            "mpc": {k: getattr(self.mpc, k) for k in (
                "horizon", "alpha", "beta", "gamma", "delta", "zeta", "kappa",
                "r_d_fov", "r_a_fov", "accel_limit", "vel_limit",
                "obstacle_margin", "eps_capture",
            )},
            "initial": list(self.initial),
            "scene": self.scene,
            "sigma": self.sigma,
            "seed": self.seed,
            "obstacles": self.obstacles,
        }


def load_config(path, overrides=None):
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError("cannot read config %s: %s" % (path, e)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(
            "config %s: parse error at line %d column %d: %s"
            % (path, e.lineno, e.colno, e.msg)
        ) from e
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return MissionConfig.from_dict(raw)


def build_scene(spec):
    """Scene from a config dict: a builtin name or an .npz heightfield."""
    kind = spec.get("type", "hemisphere_bump")
    if kind == "hemisphere_bump":
        return hemisphere_bump_scene(
            size=spec.get("size", 128),
            extent=spec.get("extent", 0.5),
            sphere_radius=spec.get("sphere_radius", 0.6),
            cap_angle=spec.get("cap_angle", 0.45),
            specular_strength=spec.get("specular_strength", 0.0),
            shadowing=spec.get("shadowing", False),
        )
    if kind == "flat":
        return flat_scene(size=spec.get("size", 128), extent=spec.get("extent", 0.5))
    if kind == "npz":
        path = spec.get("path")
        if path is None or not os.path.exists(path):
            raise ConfigError("scene npz path missing or not found: %r" % path)
        data = np.load(path)
        return Scene(
            heights=data["heights"],
            albedo=data["albedo"],
            extent=float(spec.get("extent", 0.5)),
        )
    raise ConfigError("unknown scene type %r" % kind)


def make_plan(cfg):
    if cfg.generator == "sppa":
        return sppa_positions(cfg.region, cfg.v_s, cfg.initial, mode=cfg.mode)
    return fibonacci_positions(cfg.region, cfg.n, cfg.initial)


def make_sequence(cfg, plan):
    if cfg.sequencer == "sppa" and plan.kind == "sppa":
        return sppa_sequence(plan, traversal=cfg.traversal)
    return etsp_tour([plan.initial] + plan.positions, seed=cfg.seed)


def load_captures(capture_dir, camera=None):
    """Rehydrate a CaptureSet from a capture directory on disk."""
    manifest_path = os.path.join(capture_dir, "captures.json")
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except OSError as e:
        raise ConfigError("cannot read %s: %s" % (manifest_path, e)) from e
    images, recorded, true = [], [], []
    for entry in manifest["captures"]:
        img_path = os.path.join(capture_dir, entry["image"])
        images.append(np.asarray(Image.open(img_path).convert("RGB")))
        for key, dest in (("recorded_light", recorded), ("true_light", true)):
            lu, lv, lw = entry[key]
            dest.append(LightingVector(lu, lv, lw, valid=lw > 0.0))
    return CaptureSet(images, recorded, true, camera)


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as f:
        f.write(data)


# ---------------------------------------------------------------------------
# Commands


def cmd_plan(args):
    cfg = load_config(args.config, _config_overrides(args))
    plan = make_plan(cfg)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "plan.json"), plan.to_json())
    _write(os.path.join(args.out, "plan.lp"), plan.to_lp(cfg.camera))
    print(
        "plan: %d positions in %d row(s) -> %s"
        % (len(plan.positions), len(plan.rows), args.out)
    )
    return 0


def cmd_sequence(args):
    cfg = load_config(args.config, _config_overrides(args))
    with open(args.plan) as f:
        plan = LightingPlan.from_json(f.read())
    seq = make_sequence(cfg, plan)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "sequence.json"), seq.to_json())
    _write(os.path.join(args.out, "sequence.csv"), seq.to_csv())
    print("sequence: %d stops, length %.3f m" % (len(seq.positions) - 2, seq.length_m))
    return 0


def cmd_trajectory(args):
    cfg = load_config(args.config, _config_overrides(args))
    with open(args.sequence) as f:
        seq = Sequence.from_json(f.read())
    traj = generate_trajectory(seq, cfg.v_des, cfg.dt, cfg.t_stab)
    os.makedirs(args.out, exist_ok=True)
    doc = {
        "dt": traj.dt,
        "d_rti": traj.d_rti,
        "samples": [
            {
                "time": float(t),
                "position": [float(x) for x in p],
                "hold": bool(h),
                "rti_index": int(r),
            }
            for t, p, h, r in zip(traj.times, traj.positions, traj.hold, traj.rti_index)
        ],
    }
    _write(os.path.join(args.out, "trajectory.json"), json.dumps(doc, indent=2))
    print("trajectory: %d samples, %.3f m" % (len(traj), traj.path_length()))
    return 0


def cmd_simulate(args):
    cfg = load_config(args.config, _config_overrides(args))
    plan, seq = _plan_and_sequence(cfg, args)
    obstacles = ObstacleSet(
        spheres=[(np.asarray(o["center"]), o["radius"]) for o in cfg.obstacles],
        camera=cfg.camera,
    )
    log = simulate_mission(
        plan, seq, cfg.mpc, cfg.camera, cfg.v_des, cfg.dt, cfg.t_stab,
        obstacles=obstacles, seed=cfg.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "mission.jsonl"), log.to_jsonl())
    _write(
        os.path.join(args.out, "captures_manifest.json"),
        log.captures_manifest(cfg.region.ooi, cfg.camera),
    )
    print(
        "mission: %d/%d captures, %d skipped, %.3f m flown"
        % (len(log.captures), len(seq.positions) - 2, len(log.skipped), log.path_length)
    )
    return 0 if not log.skipped else 0


def cmd_capture(args):
    cfg = load_config(args.config, _config_overrides(args))
    plan, seq = _plan_and_sequence(cfg, args)
    scene = build_scene(cfg.scene)
    caps = run_capture(
        plan, scene, cfg.camera, cfg.region.ooi,
        sigma=cfg.sigma, seed=cfg.seed, ref_distance=cfg.region.d_l,
    )
    caps.save(args.out)
    print("captures: %d images -> %s" % (len(caps), args.out))
    return 0


def cmd_fit(args):
    caps = load_captures(args.captures)
    ptm = fit_ptm(caps)
    _write(args.out, ptm.to_bytes())
    print("ptm: %dx%d -> %s" % (ptm.width, ptm.height, args.out))
    return 0


def cmd_relight(args):
    with open(args.ptm, "rb") as f:
        ptm = PtmImage.from_bytes(f.read())
    img = relight(ptm, args.lu, args.lv)
    Image.fromarray(img).save(args.out)
    print("relit (%.3f, %.3f) -> %s" % (args.lu, args.lv, args.out))
    return 0


def cmd_normals(args):
    with open(args.ptm, "rb") as f:
        ptm = PtmImage.from_bytes(f.read())
    nm = normal_map(ptm)
    npz = os.path.splitext(args.out)[0] + ".npz"
    nm.save(args.out, npz)
    print(
        "normals: %.1f%% valid -> %s"
        % (100.0 * nm.valid.mean(), args.out)
    )
    return 0


def cmd_compare(args):
    a, b = (_load_normals(p) for p in (args.a, args.b))
    delta, heatmap, _ = compare_normals(a, b)
    if args.out:
        _write(args.out, heatmap)
    print("delta = %.6f rad" % delta)
    return 0


def _load_normals(path):
    data = np.load(path)
    return NormalMap(normals=data["normals"], valid=data["valid"])


def cmd_experiment_paths(args):
    report = path_length_study(n_trials=args.trials, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "path_lengths.json"), report.to_json())
    _write(os.path.join(args.out, "path_lengths.csv"), report.to_csv())
    plot_percentiles(report, os.path.join(args.out, "path_lengths.png"))
    s = report.summary
    print(
        "path lengths: %d trials, SPPA<=LKH %.1f%%, within 1.5x %.1f%%"
        % (s["n_trials"], 100 * s["pct_sppa_le_lkh"], 100 * s["pct_sppa_within_1p5"])
    )
    return 0


def cmd_experiment_noise(args):
    sigmas = [float(s) for s in args.sigmas.split(",")]
    report = noise_sweep(
        sigmas=sigmas, trials_per_sigma=args.trials, seed=args.seed,
        image_size=args.size,
    )
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "noise_sweep.json"), report.to_json())
    _write(os.path.join(args.out, "noise_sweep.csv"), report.to_csv())
    plot_noise_curve(report, os.path.join(args.out, "noise_sweep.png"))
    curve = ", ".join("%.4f" % v for v in report.summary["delta_curve"])
    print("noise sweep: delta(sigma) = [%s] rad" % curve)
    return 0


def cmd_demo(args):
    """Full pipeline on one config; writes a manifest linking every artifact."""
    cfg = load_config(args.config, _config_overrides(args))
    out = args.out
    os.makedirs(out, exist_ok=True)
    manifest = {"config": cfg.to_dict(), "artifacts": {}}

    plan = make_plan(cfg)
    _write(os.path.join(out, "plan.json"), plan.to_json())
    _write(os.path.join(out, "plan.lp"), plan.to_lp(cfg.camera))
    manifest["artifacts"]["plan"] = "plan.json"
    manifest["artifacts"]["lp"] = "plan.lp"

    seq = make_sequence(cfg, plan)
    _write(os.path.join(out, "sequence.json"), seq.to_json())
    manifest["artifacts"]["sequence"] = "sequence.json"

    traj = generate_trajectory(seq, cfg.v_des, cfg.dt, cfg.t_stab)
    manifest["trajectory_samples"] = len(traj)

    obstacles = ObstacleSet(
        spheres=[(np.asarray(o["center"]), o["radius"]) for o in cfg.obstacles],
        camera=cfg.camera,
    )
    log = simulate_mission(
        plan, seq, cfg.mpc, cfg.camera, cfg.v_des, cfg.dt, cfg.t_stab,
        obstacles=obstacles, seed=cfg.seed,
    )
    _write(os.path.join(out, "mission.jsonl"), log.to_jsonl())
    manifest["artifacts"]["mission_log"] = "mission.jsonl"
    manifest["captures"] = len(log.captures)
    manifest["skipped"] = log.skipped
    manifest["path_length_m"] = log.path_length

    scene = build_scene(cfg.scene)
    caps = run_capture(
        log, scene, cfg.camera, cfg.region.ooi,
        sigma=cfg.sigma, seed=cfg.seed, ref_distance=cfg.region.d_l,
    )
    cap_dir = os.path.join(out, "captures")
    caps.save(cap_dir)
    manifest["artifacts"]["captures"] = "captures/"

    ptm = fit_ptm(caps)
    _write(os.path.join(out, "result.rtiptm"), ptm.to_bytes())
    manifest["artifacts"]["ptm"] = "result.rtiptm"

    nm = normal_map(ptm)
    nm.save(os.path.join(out, "normals.png"), os.path.join(out, "normals.npz"))
    manifest["artifacts"]["normals"] = "normals.png"

    _write(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=2))
    print(
        "demo: %d captures (%d skipped), %.2f m flown -> %s"
        % (len(log.captures), len(log.skipped), log.path_length, out)
    )
    return 0


def _plan_and_sequence(cfg, args):
    """Plan/sequence from files when given, regenerated otherwise."""
    if getattr(args, "plan", None):
        with open(args.plan) as f:
            plan = LightingPlan.from_json(f.read())
    else:
        plan = make_plan(cfg)
    if getattr(args, "sequence", None):
        with open(args.sequence) as f:
            seq = Sequence.from_json(f.read())
    else:
        seq = make_sequence(cfg, plan)
    return plan, seq


def _config_overrides(args):
    keys = ("generator", "v_s", "n", "mode", "sequencer", "traversal",
            "v_des", "dt", "t_stab", "sigma", "seed")
    return {k: getattr(args, k, None) for k in keys}


# ---------------------------------------------------------------------------
# Argument parsing


def _add_config_flags(p, with_overrides=True):
    p.add_argument("--config", default=DEFAULT_CONFIG, help="mission config JSON")
    p.add_argument("--out", default="out", help="output directory or file")
    if with_overrides:
        p.add_argument("--generator", choices=("sppa", "fibonacci"))
        p.add_argument("--v-s", dest="v_s", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--mode", choices=("spherical", "faithful"))
        p.add_argument("--sequencer", choices=("sppa", "etsp"))
        p.add_argument("--traversal", choices=("zigzag", "double_pass"))
        p.add_argument("--v-des", dest="v_des", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--t-stab", dest="t_stab", type=float)
        p.add_argument("--sigma", type=float)
        p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rti-studio",
        description="Dual-UAV RTI planning, simulation and imaging toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="generate lighting positions")
    _add_config_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sequence", help="order a lighting plan")
    _add_config_flags(p)
    p.add_argument("--plan", required=True, help="plan.json from the plan command")
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("trajectory", help="time-sample a sequence")
    _add_config_flags(p)
    p.add_argument("--sequence", required=True)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("simulate", help="fly the mission in closed loop")
    _add_config_flags(p)
    p.add_argument("--plan")
    p.add_argument("--sequence")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("capture", help="render the capture set")
    _add_config_flags(p)
    p.add_argument("--plan")
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("fit", help="fit a PTM from a capture directory")
    p.add_argument("--captures", required=True)
    p.add_argument("--out", default="result.rtiptm")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("relight", help="evaluate a PTM at a lighting vector")
    p.add_argument("--ptm", required=True)
    p.add_argument("--lu", type=float, default=0.0)
    p.add_argument("--lv", type=float, default=0.0)
    p.add_argument("--out", default="relit.png")
    p.set_defaults(func=cmd_relight)

    p = sub.add_parser("normals", help="extract the normal map of a PTM")
    p.add_argument("--ptm", required=True)
    p.add_argument("--out", default="normals.png")
    p.set_defaults(func=cmd_normals)

    p = sub.add_parser("compare", help="angular difference of two normal maps")
    p.add_argument("--a", required=True, help="normals .npz")
    p.add_argument("--b", required=True, help="normals .npz")
    p.add_argument("--out", help="heatmap PNG")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("experiment", help="reproduce the evaluation studies")
    esub = p.add_subparsers(dest="experiment", required=True)

    e = esub.add_parser("path-lengths", help="sequencing path-length percentiles")
    e.add_argument("--trials", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="out")
    e.set_defaults(func=cmd_experiment_paths)

    e = esub.add_parser("noise-sweep", help="normal error vs localization noise")
    e.add_argument("--sigmas", default="0,0.05,0.1,0.2,0.3")
    e.add_argument("--trials", type=int, default=20)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--size", type=int, default=128)
    e.add_argument("--out", default="out")
    e.set_defaults(func=cmd_experiment_noise)

    p = sub.add_parser("demo", help="end-to-end pipeline on the bundled config")
    _add_config_flags(p)
    p.set_defaults(func=cmd_demo)

    return parser


def _apply_thread_cap():
    threads = os.environ.get("RTI_STUDIO_THREADS")
    if not threads:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, threads)


def main(argv=None):
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RtiStudioError as e:
        code = EXIT_CODES.get(type(e), EXIT_CODES[RtiStudioError])
        print("error: %s" % e, file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
