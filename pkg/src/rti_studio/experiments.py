"""Desk-scale studies: sequencing path lengths and noise sensitivity.

Both studies are seed-deterministic; reports serialize to JSON and CSV
and can emit static percentile / error-curve plots.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .capture import hemisphere_bump_scene, run_capture
from .geometry import CameraModel, lighting_vector
from .lighting import ScanRegion, fibonacci_positions, sppa_positions
from .ptm import compare_normals, design_matrix, fit_ptm, normal_map
from .sequencing import etsp_tour, sppa_sequence


@dataclass
class ExperimentReport:
    name: str
    records: list
    summary: dict
    runtime_s: float

    def to_json(self):
        return json.dumps(
            {
                "name": self.name,
                "summary": self.summary,
                "runtime_s": self.runtime_s,
                "records": self.records,
            },
            indent=2,
        )

    def to_csv(self):
        if not self.records:
            return ""
        keys = list(self.records[0])
        lines = [",".join(keys)]
        for r in self.records:
            lines.append(",".join(repr(r[k]) for k in keys))
        return "\n".join(lines) + "\n"


def nearest_rank_percentiles(values, percentiles):
    """Nearest-rank percentile curve over a sample."""
    vals = np.sort(np.asarray(values, dtype=float))
    out = {}
    for p in percentiles:
        rank = max(1, math.ceil(p / 100.0 * len(vals)))
        out[p] = float(vals[rank - 1])
    return out


# sampling ranges for the random path-length trials (documented defaults)
PATH_STUDY_RANGES = {
    "lambda_v_span": (math.pi / 12.0, math.pi / 2.2),
    "lambda_h_span": (math.pi / 6.0, 2.0 * math.pi),
    "d_l": (1.0, 5.0),
    "v_s": (2, 8),
}


def _random_region(rng, ranges=PATH_STUDY_RANGES):
    span_v = rng.uniform(*ranges["lambda_v_span"])
    span_h = rng.uniform(*ranges["lambda_h_span"])
    lv_min = rng.uniform(-math.pi / 2.0, math.pi / 2.0 - span_v)
    lh_min = rng.uniform(-math.pi, math.pi - span_h)
    d_l = rng.uniform(*ranges["d_l"])
    return ScanRegion(
        lambda_h_min=lh_min,
        lambda_h_max=lh_min + span_h,
        lambda_v_min=lv_min,
        lambda_v_max=lv_min + span_v,
        d_l=d_l,
        ooi=np.zeros(3),
    )


def path_length_study(n_trials=1000, seed=0, ranges=PATH_STUDY_RANGES):
    """Random-region comparison of SPPA, LKH-style and Fib-LKH tours."""
    if n_trials < 100:
        raise ValueError("need at least 100 trials for stable percentiles")
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    records = []
    for trial in range(n_trials):
        region = _random_region(rng, ranges)
        v_s = int(rng.integers(ranges["v_s"][0], ranges["v_s"][1] + 1))
        initial = region.ooi + rng.uniform(-2.0, 2.0, size=3) * np.array(
            [1.0, 1.0, 0.5]
        ) + np.array([0.0, 0.0, -region.d_l])

        # per-method planning times use CPU time, which keeps the
        # percentile/timing summaries robust against scheduler stalls
        t_sppa = time.process_time()
        plan = sppa_positions(region, v_s, initial)
        seq_sppa = sppa_sequence(plan)
        t_sppa = time.process_time() - t_sppa

        points = [initial] + plan.positions
        t_lkh = time.process_time()
        seq_lkh = etsp_tour(points, seed=seed + trial)
        t_lkh = time.process_time() - t_lkh

        t_fib = time.process_time()
        fib = fibonacci_positions(region, len(plan.positions), initial)
        seq_fib = etsp_tour([initial] + fib.positions, seed=seed + trial)
        t_fib = time.process_time() - t_fib

        records.append(
            {
                "trial": trial,
                "n_positions": len(plan.positions),
                "v_s": v_s,
                "len_sppa": seq_sppa.length_m,
                "len_lkh": seq_lkh.length_m,
                "len_fib_lkh": seq_fib.length_m,
                "t_sppa": t_sppa,
                "t_lkh": t_lkh,
                "t_fib_lkh": t_fib,
            }
        )

    ratios_sppa_lkh = [r["len_sppa"] / r["len_lkh"] for r in records]
    ratios_sppa_fib = [r["len_sppa"] / r["len_fib_lkh"] for r in records]
    ratios_lkh_fib = [r["len_lkh"] / r["len_fib_lkh"] for r in records]
    pcts = list(range(5, 100, 5)) + [98, 99]
    summary = {
        "n_trials": n_trials,
        "pct_sppa_le_lkh": float(
            np.mean([r <= 1.0 + 1e-9 for r in ratios_sppa_lkh])
        ),
        "pct_sppa_within_1p5": float(
            np.mean([r <= 1.5 for r in ratios_sppa_lkh])
        ),
        "max_trial_time": max(
            max(r["t_sppa"], r["t_lkh"], r["t_fib_lkh"]) for r in records
        ),
        "percentiles_sppa_vs_lkh": nearest_rank_percentiles(ratios_sppa_lkh, pcts),
        "percentiles_sppa_vs_fib": nearest_rank_percentiles(ratios_sppa_fib, pcts),
        "percentiles_lkh_vs_fib": nearest_rank_percentiles(ratios_lkh_fib, pcts),
        "mean_time_sppa": float(np.mean([r["t_sppa"] for r in records])),
        "mean_time_lkh": float(np.mean([r["t_lkh"] for r in records])),
        "mean_time_fib_lkh": float(np.mean([r["t_fib_lkh"] for r in records])),
    }
    return ExperimentReport(
        "path_length_study", records, summary, time.perf_counter() - t0
    )


# ---------------------------------------------------------------------------
# Localization-noise sweep


def default_sweep_setup(image_size=128):
    """Overhead camera plus a bump scene used as the sweep default."""
    ooi = np.zeros(3)
    camera = CameraModel(
        position=np.array([0.0, 0.0, 3.0]),
        yaw=0.0,
        pitch=math.pi / 2.0,  # looking straight down at the patch
    )
    region = ScanRegion(
        lambda_h_min=-math.pi,
        lambda_h_max=math.pi - 1e-9,
        lambda_v_min=-1.1,
        lambda_v_max=-0.6,
        d_l=2.0,
        ooi=ooi,
        cam_yaw=0.0,
        cam_pitch=0.0,
    )
    scene = hemisphere_bump_scene(size=image_size)
    return region, camera, scene


def sppa_plan_with_size(region, target, initial=None):
    """SPPA plan whose position count is closest to the target."""
    if initial is None:
        initial = region.ooi + np.array([0.0, 0.0, region.d_l])
    best = None
    for v_s in range(2, 40):
        plan = sppa_positions(region, v_s, initial)
        gap = abs(len(plan.positions) - target)
        if best is None or gap < best[0]:
            best = (gap, plan)
    return best[1]


def noise_sweep(
    sigmas=(0.0, 0.05, 0.1, 0.2, 0.3),
    trials_per_sigma=20,
    scene=None,
    plan_size=60,
    gt_size=360,
    seed=0,
    image_size=128,
):
    """Average normal-map error against a dense zero-noise ground truth.

    Renders each plan once (the true poses never change) and re-fits
    per trial with freshly perturbed lighting vectors.
    """
    if list(sigmas) != sorted(sigmas):
        raise ValueError("sigma list must be sorted ascending")
    t0 = time.perf_counter()
    region, camera, default_scene = default_sweep_setup(image_size)
    if scene is None:
        scene = default_scene

    gt_plan = sppa_plan_with_size(region, gt_size)
    gt_caps = run_capture(
        gt_plan, scene, camera, region.ooi, sigma=0.0, ref_distance=region.d_l
    )
    gt_normals = normal_map(fit_ptm(gt_caps))

    plan = sppa_plan_with_size(region, plan_size)
    base_caps = run_capture(
        plan, scene, camera, region.ooi, sigma=0.0, ref_distance=region.d_l
    )

    records = []
    curve = []
    for sigma in sigmas:
        deltas = []
        for trial in range(trials_per_sigma):
            rng = np.random.default_rng(seed + 1000 * trial + hash(round(sigma * 1e6)) % 1000)
            caps = _perturbed_copy(base_caps, plan, camera, region.ooi, sigma, rng)
            nm = normal_map(fit_ptm(caps))
            delta, _, _ = compare_normals(nm, gt_normals)
            deltas.append(delta)
            records.append({"sigma": sigma, "trial": trial, "delta": delta})
        curve.append(float(np.mean(deltas)))

    summary = {
        "sigmas": list(sigmas),
        "delta_curve": curve,
        "trials_per_sigma": trials_per_sigma,
        "plan_positions": len(plan.positions),
        "gt_positions": len(gt_plan.positions),
    }
    return ExperimentReport("noise_sweep", records, summary, time.perf_counter() - t0)


def _perturbed_copy(base_caps, plan, camera, ooi, sigma, rng):
    """Capture set with re-recorded lighting under fresh pose noise."""
    from .capture import CaptureSet, perturb_localization

    recorded = []
    for pos in plan.positions:
        pert, _, _ = perturb_localization((pos, 0.0, 0.0), sigma, rng)
        recorded.append(lighting_vector(pert, ooi, camera))
    return CaptureSet(
        list(base_caps.images), recorded, list(base_caps.true), camera, ooi=ooi
    )


# ---------------------------------------------------------------------------
# Plot emission (static files only)


def plot_percentiles(report, out_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.2))
    for key, label in [
        ("percentiles_lkh_vs_fib", "LKH vs. Fib-LKH"),
        ("percentiles_sppa_vs_fib", "SPPA vs. Fib-LKH"),
        ("percentiles_sppa_vs_lkh", "SPPA vs. LKH"),
    ]:
        curve = report.summary[key]
        ax.plot(list(curve), list(curve.values()), marker="o", ms=3, label=label)
    ax.set_xlabel("n-th percentile (-)")
    ax.set_ylabel("distance ratio (-)")
    ax.grid(True)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_noise_curve(report, out_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 2.8))
    ax.plot(report.summary["sigmas"], report.summary["delta_curve"], marker="o")
    ax.set_xlabel("sigma (-)")
    ax.set_ylabel("delta (rad)")
    ax.grid(True)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
