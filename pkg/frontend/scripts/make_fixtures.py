"""Generate shared fixtures for the browser viewer test suite.

Runs the primary pipeline on a small noiseless Lambertian hemisphere
scene and dumps the container plus raw expected outputs (uint8 .bin and
float64 .bin files) so the TypeScript tests need no image decoding.
"""

import json
import math
import os

import numpy as np

from rti_studio.capture import hemisphere_bump_scene, run_capture
from rti_studio.geometry import CameraModel
from rti_studio.lighting import ScanRegion, sppa_positions
from rti_studio.ptm import fit_ptm, normal_map, relight

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")


def main():
    os.makedirs(OUT, exist_ok=True)
    region = ScanRegion(
        lambda_h_min=-math.pi,
        lambda_h_max=math.pi - 1e-9,
        lambda_v_min=-1.1,
        lambda_v_max=-0.6,
        d_l=2.0,
        ooi=np.zeros(3),
    )
    camera = CameraModel(position=np.array([0.0, 0.0, 3.0]), pitch=math.pi / 2)
    plan = sppa_positions(region, 4, np.array([0.0, 0.0, 2.0]))
    caps = run_capture(
        plan,
        hemisphere_bump_scene(size=24),
        camera,
        region.ooi,
        ref_distance=region.d_l,
    )
    ptm = fit_ptm(caps)

    with open(os.path.join(OUT, "fixture.rtiptm"), "wb") as f:
        f.write(ptm.to_bytes())
    coeffs = ptm.coefficients()  # (H, W, 3, 6)
    coeffs.astype("<f8").tofile(os.path.join(OUT, "coeffs.bin"))

    # 5x5 lighting grid inside the unit disc plus expected relit frames
    axis = np.linspace(-0.7, 0.7, 5)
    grid = []
    for gi, lv_ in enumerate(axis):
        for gj, lu_ in enumerate(axis):
            k = len(grid)
            relit = relight(ptm, float(lu_), float(lv_))
            relit.astype("<u1").tofile(
                os.path.join(OUT, "relight_%02d.bin" % k)
            )
            grid.append({"lu": float(lu_), "lv": float(lv_)})
    with open(os.path.join(OUT, "relight_grid.json"), "w") as f:
        json.dump(
            {"width": ptm.width, "height": ptm.height, "vectors": grid}, f
        )

    relight(ptm, 0.0, 0.0).astype("<u1").tofile(
        os.path.join(OUT, "alpha6.bin")
    )

    # one noiseless capture with its recorded lighting vector
    rec0 = caps.recorded[0]
    caps.images[0].astype("<u1").tofile(os.path.join(OUT, "capture0.bin"))
    with open(os.path.join(OUT, "capture0.json"), "w") as f:
        json.dump({"lu": rec0.lu, "lv": rec0.lv}, f)

    with open(os.path.join(OUT, "plan.lp"), "w") as f:
        f.write(plan.to_lp(camera))

    nm = normal_map(ptm)
    with open(os.path.join(OUT, "normals.png"), "wb") as f:
        f.write(nm.to_png_bytes())

    print("fixtures -> %s (%dx%d, %d captures)" % (
        os.path.abspath(OUT), ptm.width, ptm.height, len(caps.images)
    ))


if __name__ == "__main__":
    main()
