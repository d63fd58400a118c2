"""Generation of the desired lighting positions on a spherical cap.

Two generators are provided: a Fibonacci lattice restricted to the
angular window (uniform coverage, irregular structure) and the SPPA
grid (rows of equally spaced samples along horizontal splines, chosen
for predictable flight paths).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRegionError
from .geometry import lighting_vector, wrap_angle

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass
class ScanRegion:
    """Angular window, lighting distance and pose of the scanned object."""

    lambda_h_min: float
    lambda_h_max: float
    lambda_v_min: float
    lambda_v_max: float
    d_l: float
    ooi: np.ndarray
    cam_yaw: float = 0.0
    cam_pitch: float = 0.0

    def __post_init__(self):
        self.ooi = np.asarray(self.ooi, dtype=float)
        if not self.lambda_h_min < self.lambda_h_max:
            raise InvalidRegionError("horizontal window is empty or inverted")
        if not self.lambda_v_min < self.lambda_v_max:
            raise InvalidRegionError("vertical window is empty or inverted")
        if self.lambda_h_max - self.lambda_h_min > 2.0 * math.pi + 1e-12:
            raise InvalidRegionError("horizontal span exceeds 2*pi")
        if self.lambda_v_max - self.lambda_v_min >= math.pi:
            raise InvalidRegionError("vertical span must be below pi")
        if self.d_l <= 0.0:
            raise InvalidRegionError("lighting distance must be positive")

    def position(self, lambda_h, lambda_v, mode="spherical"):
        """3D light position for a pair of lighting angles.

        Mode "spherical" keeps the position at distance d_l from the OoI;
        mode "faithful" stretches the vertical offset with tan, matching
        the printed spline equation but leaving the sphere.
        """
        phi = lambda_v + self.cam_pitch
        theta = lambda_h + self.cam_yaw
        x = self.ooi[0] - self.d_l * math.cos(phi) * math.cos(theta)
        y = self.ooi[1] - self.d_l * math.cos(phi) * math.sin(theta)
        if mode == "faithful":
            z = self.ooi[2] - self.d_l * math.tan(phi)
        else:
            z = self.ooi[2] - self.d_l * math.sin(phi)
        return np.array([x, y, z])

    def angles_of(self, position):
        """Recover (lambda_h, lambda_v) of a position on the lighting sphere."""
        d = self.ooi - np.asarray(position, dtype=float)
        r = np.linalg.norm(d)
        if r == 0.0:
            raise InvalidRegionError("position coincides with the OoI")
        d = d / r
        lv = math.asin(np.clip(d[2], -1.0, 1.0)) - self.cam_pitch
        lh = math.atan2(d[1], d[0]) - self.cam_yaw
        return lh, lv

    def contains_angles(self, lambda_h, lambda_v, tol=1e-9):
        if not (self.lambda_v_min - tol <= lambda_v <= self.lambda_v_max + tol):
            return False
        for k in (-1, 0, 1):
            lh = lambda_h + 2.0 * math.pi * k
            if self.lambda_h_min - tol <= lh <= self.lambda_h_max + tol:
                return True
        return False

    def to_dict(self):
        return {
            "lambda_h_min": self.lambda_h_min,
            "lambda_h_max": self.lambda_h_max,
            "lambda_v_min": self.lambda_v_min,
            "lambda_v_max": self.lambda_v_max,
            "d_l": self.d_l,
            "ooi": list(self.ooi),
            "cam_yaw": self.cam_yaw,
            "cam_pitch": self.cam_pitch,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            lambda_h_min=d["lambda_h_min"],
            lambda_h_max=d["lambda_h_max"],
            lambda_v_min=d["lambda_v_min"],
            lambda_v_max=d["lambda_v_max"],
            d_l=d["d_l"],
            ooi=np.asarray(d["ooi"], dtype=float),
            cam_yaw=d.get("cam_yaw", 0.0),
            cam_pitch=d.get("cam_pitch", 0.0),
        )


@dataclass
class LightingPlan:
    """The complete set of desired lighting positions.

    ``rows`` holds (lambda_v, [lambda_h...]) per grid row; Fibonacci
    plans keep a single synthetic row. ``positions`` is flat in row
    order and excludes ``initial``, which is kept separately.
    """

    kind: str
    region: ScanRegion
    rows: list
    positions: list
    initial: np.ndarray
    mode: str = "spherical"

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        self.positions = [np.asarray(p, dtype=float) for p in self.positions]

    @property
    def all_positions(self):
        """Grid/lattice positions plus the initial position, in visit-set order."""
        return self.positions + [self.initial]

    def row_sizes(self):
        return [len(samples) for _, samples in self.rows]

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "mode": self.mode,
                "region": self.region.to_dict(),
                "rows": [[lv, list(samples)] for lv, samples in self.rows],
                "positions": [list(p) for p in self.positions],
                "initial": list(self.initial),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            kind=d["kind"],
            region=ScanRegion.from_dict(d["region"]),
            rows=[(lv, list(samples)) for lv, samples in d["rows"]],
            positions=[np.asarray(p, dtype=float) for p in d["positions"]],
            initial=np.asarray(d["initial"], dtype=float),
            mode=d.get("mode", "spherical"),
        )

    def to_lp(self, camera, names=None):
        """Render the plan as a light-position text file.

        One line per (non-initial) position with the lighting vector
        computed against the given mission camera.
        """
        entries = []
        for i, p in enumerate(self.positions):
            name = names[i] if names is not None else "img_%04d.png" % i
            lv = lighting_vector(p, self.region.ooi, camera)
            entries.append((name, lv))
        return format_lp(entries)


def format_lp(entries):
    """Format (image-name, LightingVector) pairs as .lp text."""
    lines = ["%d" % len(entries)]
    for name, lv in entries:
        lines.append("%s %.9f %.9f %.9f" % (name, lv.lu, lv.lv, lv.lw))
    return "\n".join(lines) + "\n"


def parse_lp(text):
    """Parse .lp text into (image-name, [lu, lv, lw]) pairs."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    count = int(lines[0])
    entries = []
    for ln in lines[1 : 1 + count]:
        parts = ln.split()
        entries.append((parts[0], np.array([float(v) for v in parts[1:4]])))
    return entries


def round_half_away(x):
    """Round to nearest with halves away from zero."""
    return math.floor(x + 0.5) if x >= 0.0 else math.ceil(x - 0.5)


def _fibonacci_directions(n_total):
    """Golden-angle lattice of n_total unit directions on the full sphere."""
    i = np.arange(n_total)
    z = 1.0 - (2.0 * i + 1.0) / n_total
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = i * GOLDEN_ANGLE
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def fibonacci_positions(region, n, initial):
    """Lattice of n uniformly spread positions inside the angular window.

    Grows the full-sphere lattice until exactly n of its points fall in
    the window, which preserves the lattice spacing instead of squeezing
    a fixed-size lattice into the cap.
    """
    if n < 0:
        raise InvalidRegionError("requested point count must be >= 0")
    if n == 0:
        return LightingPlan("fibonacci", region, [(0.0, [])], [], initial)

    span_h = region.lambda_h_max - region.lambda_h_min
    phi_lo = region.lambda_v_min + region.cam_pitch
    phi_hi = region.lambda_v_max + region.cam_pitch
    frac = span_h * abs(math.sin(phi_hi) - math.sin(phi_lo)) / (4.0 * math.pi)
    if frac <= 0.0:
        raise InvalidRegionError("angular window has zero area")

    # grow the lattice proportionally until the window holds >= n points
    hi = max(n, int(round(n / frac)))
    count_hi = _window_count(region, hi)
    for _ in range(200):
        if count_hi >= n:
            break
        hi += max(1, int(round(hi * (n - count_hi) / max(n, 1) * 0.9)))
        count_hi = _window_count(region, hi)
    if count_hi < n:
        raise InvalidRegionError("could not place the requested point count")

    # the survivor count is near-monotone in the lattice size: bisect to
    # the transition, then walk a few sizes hunting an exact-n lattice
    lo = n - 1
    best_total = None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        c = _window_count(region, mid)
        if c == n:
            best_total = mid
            break
        if c < n:
            lo = mid
        else:
            hi = mid
    if best_total is None:
        for cand in range(hi, hi + 30):
            if _window_count(region, cand) == n:
                best_total = cand
                break
    if best_total is not None:
        angles = _window_survivors(region, best_total)
    else:
        # no lattice size yields exactly n: keep the first n by index of
        # the smallest overshooting lattice
        angles = _window_survivors(region, hi)[:n]
    positions = [region.position(lh, lv) for lh, lv in angles]
    rows = [(0.0, [lh for lh, _ in angles])]
    return LightingPlan("fibonacci", region, rows, positions, initial)


def _lattice_window_angles(region, n_total):
    """(lambda_h, lambda_v) arrays of the lattice points inside the window.

    The golden-angle lattice angles are known analytically (no direction
    vectors needed), and the cheap vertical test runs first so the
    horizontal wrap only touches the surviving band.
    """
    i = np.arange(n_total)
    z = 1.0 - (2.0 * i + 1.0) / n_total
    lv = np.arcsin(np.clip(z, -1.0, 1.0)) - region.cam_pitch
    in_v = (region.lambda_v_min <= lv) & (lv <= region.lambda_v_max)
    i = i[in_v]
    lv = lv[in_v]

    lh = i * GOLDEN_ANGLE - region.cam_yaw
    lh = (lh + math.pi) % (2.0 * math.pi) - math.pi
    ok_h = np.zeros(len(lh), dtype=bool)
    lh_in = lh.copy()
    # test the three 2*pi-shifted representatives of the horizontal angle
    for k in (-1.0, 0.0, 1.0):
        cand = lh + 2.0 * math.pi * k
        hit = (region.lambda_h_min <= cand) & (cand <= region.lambda_h_max)
        lh_in = np.where(hit & ~ok_h, cand, lh_in)
        ok_h |= hit
    return lh_in[ok_h], lv[ok_h]


def _window_count(region, n_total):
    """Number of lattice points of size n_total inside the window."""
    return len(_lattice_window_angles(region, n_total)[0])


def _window_survivors(region, n_total):
    lh, lv = _lattice_window_angles(region, n_total)
    return list(zip(lh, lv))


def sppa_positions(region, v_s, initial, mode="spherical", rounding="half-away"):
    """SPPA grid of lighting positions.

    Rows sit at v_s equally spaced vertical angles; the per-row sample
    count keeps the arc spacing close to the row-to-row spacing s_d.
    Row 1 is the lambda_v_min row.
    """
    if v_s < 2:
        raise InvalidRegionError("SPPA needs at least two vertical samples")

    span_v = region.lambda_v_max - region.lambda_v_min
    span_h = region.lambda_h_max - region.lambda_h_min
    s_d = region.d_l * span_v / v_s

    lambda_vs = [
        region.lambda_v_min + span_v * k / (v_s - 1) for k in range(v_s)
    ]
    rows = []
    for lv in lambda_vs:
        raw = region.d_l * math.cos(lv) * span_h / s_d
        if rounding == "half-even":
            n_s = 1 + int(round(raw))
        else:
            n_s = 1 + int(round_half_away(raw))
        n_s = max(1, n_s)
        if n_s == 1:
            samples = [region.lambda_h_min + 0.5 * span_h]
        else:
            samples = [
                region.lambda_h_min + span_h * k / (n_s - 1) for k in range(n_s)
            ]
        rows.append((lv, samples))

    positions = [
        region.position(lh, lv, mode=mode)
        for lv, samples in rows
        for lh in samples
    ]
    return LightingPlan("sppa", region, rows, positions, initial, mode=mode)
