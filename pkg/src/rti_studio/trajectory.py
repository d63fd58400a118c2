"""Time-sampled trajectories and the MPC tracker for the light UAV.

The UAV is a discrete double integrator controlled by acceleration.
Position tracking minimizes a weighted sum of tracking error, control
smoothness, obstacle proximity and a camera-FoV occlusion penalty,
subject to hard input, obstacle and FoV keep-out constraints. The
solver is a deterministic sampled search (cross-entropy style) with
candidate filtering and coordinate refinement.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleStepError
from .geometry import fov_distance_batch, lighting_vector, wrap_angle

RTI_TERM_CAP = 1e6


@dataclass
class Trajectory:
    """Uniformly sampled reference with hover repetitions at RTI stops."""

    positions: np.ndarray  # (n, 3)
    hold: np.ndarray  # (n,) bool
    rti_index: np.ndarray  # (n,) int, -1 when not a hold sample
    dt: float
    d_rti: float

    @property
    def times(self):
        return np.arange(len(self.positions)) * self.dt

    def __len__(self):
        return len(self.positions)

    def path_length(self):
        return float(
            np.linalg.norm(np.diff(self.positions, axis=0), axis=1).sum()
        )


def generate_trajectory(seq, v_des, dt, t_stab):
    """Sample straight legs of a sequence at spacing v_des * dt.

    Every interior sequence position (the actual RTI stops) is repeated
    ceil(t_stab / dt) times, minimum one sample, flagged as a hold.
    """
    if v_des <= 0.0 or dt <= 0.0 or t_stab < 0.0:
        raise ConfigError("need v_des > 0, dt > 0, t_stab >= 0")
    d_rti = v_des * dt
    n_hover = max(1, math.ceil(t_stab / dt - 1e-12))

    pts = [np.asarray(p, dtype=float) for p in seq.positions]
    positions = [pts[0]]
    hold = [False]
    rti = [-1]
    if len(pts) < 2:
        positions = [pts[0]] * n_hover
        hold = [True] * n_hover
        rti = [0] * n_hover
    for leg, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        length = float(np.linalg.norm(b - a))
        n_steps = max(1, math.ceil(length / d_rti - 1e-12))
        for s in range(1, n_steps + 1):
            positions.append(a + (b - a) * (s / n_steps))
            hold.append(False)
            rti.append(-1)
        # interior arrivals are RTI stops; the final return to P_i is not
        if leg < len(pts) - 2:
            hold[-1] = True
            rti[-1] = leg
            for _ in range(n_hover - 1):
                positions.append(positions[-1])
                hold.append(True)
                rti.append(leg)
    return Trajectory(
        positions=np.asarray(positions),
        hold=np.asarray(hold, dtype=bool),
        rti_index=np.asarray(rti, dtype=int),
        dt=dt,
        d_rti=d_rti,
    )


@dataclass
class MpcConfig:
    horizon: int = 8
    alpha: float = 20.0  # tracking
    beta: float = 1.0  # control smoothness
    gamma: float = 5.0  # obstacle proximity
    delta: float = 5.0  # FoV occlusion
    zeta: float = 10.0  # orientation tracking
    kappa: float = 0.5  # orientation smoothness
    r_d_fov: float = 0.6
    r_a_fov: float = 0.15
    accel_limit: float = 2.0
    vel_limit: float = 1.5
    yaw_rate_limit: float = 1.5
    pitch_rate_limit: float = 1.5
    yaw_limits: tuple = (-math.pi, math.pi)
    pitch_limits: tuple = (-1.4, 1.4)
    obstacle_margin: float = 0.2
    eps_capture: float = 0.05
    samples: int = 24
    cem_iters: int = 2
    elites: int = 6
    refine_passes: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.r_a_fov < self.r_d_fov:
            raise ConfigError("need r_a_fov < r_d_fov")
        for w in (self.alpha, self.beta, self.gamma, self.delta, self.zeta, self.kappa):
            if w < 0.0:
                raise ConfigError("weights must be >= 0")


@dataclass
class ObstacleSet:
    spheres: list = field(default_factory=list)  # (center, radius) pairs
    camera: object = None  # CameraModel acting as dynamic obstacle + FoV

    def __post_init__(self):
        self.spheres = [
            (np.asarray(c, dtype=float), float(r)) for c, r in self.spheres
        ]
        if any(r <= 0.0 for _, r in self.spheres):
            raise ConfigError("obstacle radii must be positive")


def rti_term(d_fov, r_d, r_a, cap=RTI_TERM_CAP):
    """Occlusion penalty for one horizon step.

    Zero at and beyond the detection radius, one at the midpoint of the
    detection/avoidance band, capped near the avoidance radius where the
    ratio blows up (inside r_a the hard constraint takes over).
    """
    d = np.asarray(d_fov, dtype=float)
    out = np.zeros_like(d)
    inside_band = d < r_d
    denom = d - r_a
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (d - r_d) / denom
    val = np.where(denom > 0.0, np.minimum(cap, ratio * ratio), cap)
    out = np.where(inside_band, val, 0.0)
    if np.isscalar(d_fov):
        return float(out)
    return out


def rollout(state, controls, dt):
    """Roll the double integrator; returns positions and velocities (N, 3)."""
    p0, v0 = state
    u = np.asarray(controls, dtype=float)
    v = v0 + dt * np.cumsum(u, axis=0)
    v_before = np.vstack([v0, v[:-1]])
    dp = v_before * dt + 0.5 * u * dt * dt
    p = p0 + np.cumsum(dp, axis=0)
    return p, v


def _rollout_batch(state, controls, dt):
    p0, v0 = state
    u = np.asarray(controls, dtype=float)  # (m, N, 3)
    v = v0 + dt * np.cumsum(u, axis=1)
    v_before = np.concatenate(
        [np.broadcast_to(v0, (u.shape[0], 1, 3)), v[:, :-1]], axis=1
    )
    dp = v_before * dt + 0.5 * u * dt * dt
    p = p0 + np.cumsum(dp, axis=1)
    return p, v


def position_cost(controls, state, reference, obstacles, cfg, dt):
    """Weighted MPC position cost and its term breakdown."""
    p, _ = rollout(state, controls, dt)
    ref = np.asarray(reference, dtype=float)
    u = np.asarray(controls, dtype=float)

    j_pos = float(((p - ref) ** 2).sum())
    j_c = float((np.diff(u, axis=0) ** 2).sum())

    j_obs = 0.0
    for center, radius in obstacles.spheres:
        d = np.linalg.norm(p - center, axis=1)
        h = np.maximum(0.0, radius + cfg.obstacle_margin - d)
        j_obs += float((h * h).sum())

    j_rti = 0.0
    if obstacles.camera is not None:
        d_fov = fov_distance_batch(p, obstacles.camera)
        j_rti = float(rti_term(d_fov, cfg.r_d_fov, cfg.r_a_fov).sum())

    total = (
        cfg.alpha * j_pos + cfg.beta * j_c + cfg.gamma * j_obs + cfg.delta * j_rti
    )
    return total, {"pos": j_pos, "c": j_c, "obs": j_obs, "rti": j_rti}


def smooth_cost_gradient(controls, state, reference, obstacles, cfg, dt):
    """Analytic gradient of the smooth cost terms (tracking, smoothness,
    obstacle hinge) with respect to the control sequence."""
    u = np.asarray(controls, dtype=float)
    n = len(u)
    p, _ = rollout(state, u, dt)
    ref = np.asarray(reference, dtype=float)

    # dp_k / du_j = dt^2 (k - j + 1/2) for j <= k (0-based indices)
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    coef = dt * dt * np.where(j <= k, k - j + 0.5, 0.0)  # (k, j)

    djdp_total = cfg.alpha * 2.0 * (p - ref)  # (n, 3)
    for center, radius in obstacles.spheres:
        diff = p - center
        d = np.linalg.norm(diff, axis=1)
        h = np.maximum(0.0, radius + cfg.obstacle_margin - d)
        mask = h > 0.0
        g = np.zeros_like(p)
        g[mask] = (-2.0 * h[mask] / d[mask])[:, None] * diff[mask]
        djdp_total += cfg.gamma * g

    grad = np.einsum("kj,kd->jd", coef, djdp_total)

    du = np.diff(u, axis=0)
    grad_c = np.zeros_like(u)
    grad_c[:-1] -= 2.0 * du
    grad_c[1:] += 2.0 * du
    return grad + cfg.beta * grad_c


def check_constraints(state, controls, obstacles, cfg, dt, tol=1e-9):
    """Name of the first violated hard constraint, or None."""
    u = np.asarray(controls, dtype=float)
    if np.any(np.abs(u) > cfg.accel_limit + tol):
        return "g_c_accel"
    p, v = rollout(state, u, dt)
    if np.any(np.abs(v) > cfg.vel_limit + tol):
        return "g_c_vel"
    for center, radius in obstacles.spheres:
        d = np.linalg.norm(p - center, axis=1)
        if np.any(d < radius - tol):
            return "g_obs"
    if obstacles.camera is not None:
        if np.any(fov_distance_batch(p, obstacles.camera) < -tol):
            return "g_rti"
    return None


def point_feasible(point, obstacles, cfg, tol=1e-9):
    point = np.asarray(point, dtype=float)
    for center, radius in obstacles.spheres:
        if np.linalg.norm(point - center) < radius - tol:
            return False
    if obstacles.camera is not None:
        from .geometry import fov_distance

        if fov_distance(point, obstacles.camera) < -tol:
            return False
    return True


def _batch_feasible(state, controls, obstacles, cfg, dt, tol=1e-9):
    u = np.asarray(controls, dtype=float)
    p, v = _rollout_batch(state, u, dt)
    ok = np.all(np.abs(u) <= cfg.accel_limit + tol, axis=(1, 2))
    ok &= np.all(np.abs(v) <= cfg.vel_limit + tol, axis=(1, 2))
    for center, radius in obstacles.spheres:
        d = np.linalg.norm(p - center, axis=2)
        ok &= np.all(d >= radius - tol, axis=1)
    if obstacles.camera is not None:
        flat = p.reshape(-1, 3)
        d_fov = fov_distance_batch(flat, obstacles.camera).reshape(p.shape[:2])
        ok &= np.all(d_fov >= -tol, axis=1)
    return ok, p


def _batch_cost(p, controls, reference, obstacles, cfg):
    ref = np.asarray(reference, dtype=float)
    u = np.asarray(controls, dtype=float)
    j = cfg.alpha * ((p - ref) ** 2).sum(axis=(1, 2))
    j += cfg.beta * (np.diff(u, axis=1) ** 2).sum(axis=(1, 2))
    for center, radius in obstacles.spheres:
        d = np.linalg.norm(p - center, axis=2)
        h = np.maximum(0.0, radius + cfg.obstacle_margin - d)
        j += cfg.gamma * (h * h).sum(axis=1)
    if obstacles.camera is not None:
        flat = p.reshape(-1, 3)
        d_fov = fov_distance_batch(flat, obstacles.camera).reshape(p.shape[:2])
        j += cfg.delta * rti_term(d_fov, cfg.r_d_fov, cfg.r_a_fov).sum(axis=1)
    return j


def _pd_candidate(state, reference, cfg, dt, kp=4.0, kd=3.0):
    p, v = state
    ref = np.asarray(reference, dtype=float)
    vref = np.vstack([np.diff(ref, axis=0), np.zeros(3)]) / dt
    controls = []
    for k in range(len(ref)):
        u = np.clip(
            kp * (ref[k] - p) + kd * (vref[k] - v),
            -cfg.accel_limit,
            cfg.accel_limit,
        )
        # respect the velocity box while rolling the candidate forward
        v_next = np.clip(v + u * dt, -cfg.vel_limit, cfg.vel_limit)
        u = (v_next - v) / dt
        p = p + v * dt + 0.5 * u * dt * dt
        v = v_next
        controls.append(u)
    return np.asarray(controls)


def _brake_candidate(state, cfg, dt):
    _, v = state
    controls = []
    v = v.copy()
    for _ in range(cfg.horizon):
        u = np.clip(-v / dt, -cfg.accel_limit, cfg.accel_limit)
        v = v + u * dt
        controls.append(u)
    return np.asarray(controls)


def solve_position_mpc(
    state, reference, obstacles, cfg, dt, seed=0, warm_start=None
):
    """Feasible control sequence tracking the reference window.

    Returns the best of a deterministic candidate set (PD tracker,
    brake, zeros, warm start, CEM samples) after filtering by the hard
    constraints and a coordinate refinement pass. Raises
    InfeasibleStepError naming the violated constraint when no
    candidate is feasible.
    """
    state = (np.asarray(state[0], dtype=float), np.asarray(state[1], dtype=float))
    ref = np.asarray(reference, dtype=float)
    n = cfg.horizon
    if len(ref) != n:
        raise ConfigError("reference window must match the horizon")

    rng = np.random.default_rng(seed)
    seeds = [
        np.zeros((n, 3)),
        _brake_candidate(state, cfg, dt),
        _pd_candidate(state, ref, cfg, dt),
    ]
    if warm_start is not None:
        ws = np.vstack([warm_start[1:], np.zeros((1, 3))])
        seeds.append(ws)

    mean = seeds[-1].copy()
    std = np.full((n, 3), cfg.accel_limit / 2.0)
    best_u = None
    best_cost = np.inf
    last_violation = None
    for it in range(cfg.cem_iters):
        samples = mean + std * rng.standard_normal((cfg.samples, n, 3))
        samples = np.clip(samples, -cfg.accel_limit, cfg.accel_limit)
        cands = np.concatenate([np.asarray(seeds), samples]) if it == 0 else samples
        ok, p = _batch_feasible(state, cands, obstacles, cfg, dt)
        if not ok.any():
            last_violation = check_constraints(state, cands[0], obstacles, cfg, dt)
            continue
        costs = np.where(
            ok, _batch_cost(p, cands, ref, obstacles, cfg), np.inf
        )
        order = np.argsort(costs)
        if costs[order[0]] < best_cost:
            best_cost = float(costs[order[0]])
            best_u = cands[order[0]].copy()
        elite = cands[order[: cfg.elites]]
        elite = elite[np.isfinite(costs[order[: cfg.elites]])]
        if len(elite):
            mean = elite.mean(axis=0)
            std = elite.std(axis=0) * 0.7 + 1e-3

    if best_u is None:
        for cand in seeds:
            if check_constraints(state, cand, obstacles, cfg, dt) is None:
                best_u = cand
                best_cost, _ = position_cost(cand, state, ref, obstacles, cfg, dt)
                break
    if best_u is None:
        raise InfeasibleStepError(
            "no feasible control candidate", constraint=last_violation or "g_obs"
        )

    best_u, best_cost = _gradient_refine(
        best_u, best_cost, state, ref, obstacles, cfg, dt
    )
    best_u = _coordinate_refine(best_u, best_cost, state, ref, obstacles, cfg, dt)
    return best_u


def _gradient_refine(u, cost, state, ref, obstacles, cfg, dt, iters=25):
    """Projected-gradient polish on the smooth cost terms.

    Steps are accepted only when they stay feasible and lower the full
    cost (including the occlusion term the gradient ignores).
    """
    lr = 0.25
    for _ in range(iters):
        g = smooth_cost_gradient(u, state, ref, obstacles, cfg, dt)
        gmax = np.max(np.abs(g))
        if gmax < 1e-12:
            break
        trial = np.clip(u - lr * g, -cfg.accel_limit, cfg.accel_limit)
        if check_constraints(state, trial, obstacles, cfg, dt) is None:
            c, _ = position_cost(trial, state, ref, obstacles, cfg, dt)
            if c < cost - 1e-12:
                u, cost = trial, c
                lr = min(lr * 1.5, 2.0)
                continue
        lr *= 0.5
        if lr < 1e-6:
            break
    return u, cost


def _coordinate_refine(u, cost, state, ref, obstacles, cfg, dt):
    step = cfg.accel_limit / 8.0
    u = u.copy()
    for _ in range(cfg.refine_passes):
        improved = False
        for k in range(len(u)):
            for d in range(3):
                for sgn in (1.0, -1.0):
                    trial = u.copy()
                    trial[k, d] = np.clip(
                        trial[k, d] + sgn * step,
                        -cfg.accel_limit,
                        cfg.accel_limit,
                    )
                    if check_constraints(state, trial, obstacles, cfg, dt):
                        continue
                    c, _ = position_cost(trial, state, ref, obstacles, cfg, dt)
                    if c < cost - 1e-12:
                        u, cost = trial, c
                        improved = True
                        break
        if not improved:
            break
    return u


# ---------------------------------------------------------------------------
# Orientation control


def orientation_cost(controls, state, desired, cfg, dt):
    """Quadratic orientation cost: target deviation plus control changes."""
    u = np.asarray(controls, dtype=float)  # (N, 2) yaw/pitch rates
    yaw0, pitch0 = state
    yaw_des, pitch_des = desired
    yaw = yaw0 + dt * np.cumsum(u[:, 0])
    pitch = pitch0 + dt * np.cumsum(u[:, 1])
    j_or = float(((yaw - yaw_des) ** 2 + (pitch - pitch_des) ** 2).sum())
    j_co = float((np.diff(u, axis=0) ** 2).sum())
    return cfg.zeta * j_or + cfg.kappa * j_co, {"or": j_or, "co": j_co}


def desired_light_orientation(light_pos, ooi):
    """Yaw/pitch pointing the light at the object of interest."""
    d = np.asarray(ooi, dtype=float) - np.asarray(light_pos, dtype=float)
    yaw = math.atan2(d[1], d[0])
    pitch = -math.atan2(d[2], math.hypot(d[0], d[1]))
    return yaw, pitch


def solve_orientation_mpc(state, desired, cfg, dt, iters=300):
    """Rate-limited pursuit of the desired orientation.

    Projected gradient descent on the convex quadratic cost with box
    bounds on the yaw/pitch rates. The desired orientation is clamped
    into the angle limits first; the clamp residual is returned.
    """
    yaw0, pitch0 = state
    yaw_des, pitch_des = desired
    yaw_t = float(np.clip(yaw_des, *cfg.yaw_limits))
    pitch_t = float(np.clip(pitch_des, *cfg.pitch_limits))
    residual = math.hypot(yaw_des - yaw_t, pitch_des - pitch_t)
    # chase the nearest equivalent yaw
    yaw_t = yaw0 + wrap_angle(yaw_t - yaw0)

    n = cfg.horizon
    lims = np.array([cfg.yaw_rate_limit, cfg.pitch_rate_limit])
    u = np.zeros((n, 2))
    if lims.max() == 0.0:
        return u, residual

    # Lipschitz bound for the gradient: zeta * dt^2 * n^2 + 8 kappa
    lr = 1.0 / (2.0 * cfg.zeta * dt * dt * n * n + 8.0 * cfg.kappa + 1e-9)
    target = np.array([yaw_t, pitch_t])
    state0 = np.array([yaw0, pitch0])
    tri = np.tril(np.ones((n, n))) * dt  # angle_k = state0 + tri @ u
    for _ in range(iters):
        ang = state0 + tri @ u
        g = cfg.zeta * 2.0 * (tri.T @ (ang - target))
        du = np.diff(u, axis=0)
        gc = np.zeros_like(u)
        gc[:-1] -= 2.0 * du
        gc[1:] += 2.0 * du
        g += cfg.kappa * gc
        u_new = np.clip(u - lr * g, -lims, lims)
        if np.max(np.abs(u_new - u)) < 1e-12:
            u = u_new
            break
        u = u_new
    return u, residual


# ---------------------------------------------------------------------------
# Closed-loop mission simulation


@dataclass
class CaptureEvent:
    rti_index: int
    time: float
    true_position: np.ndarray
    commanded_position: np.ndarray
    yaw: float
    pitch: float


@dataclass
class MissionLog:
    records: list
    captures: list
    skipped: list
    path_length: float

    def to_jsonl(self):
        lines = []
        for r in self.records:
            lines.append(json.dumps(r))
        return "\n".join(lines) + "\n"

    def captures_manifest(self, ooi, camera):
        out = {}
        for i, c in enumerate(self.captures):
            lv = lighting_vector(c.true_position, ooi, camera)
            out["capture_%04d" % i] = {
                "rti_index": c.rti_index,
                "time": c.time,
                "true_position": list(c.true_position),
                "commanded_position": list(c.commanded_position),
                "yaw": c.yaw,
                "pitch": c.pitch,
                "lighting_vector": [lv.lu, lv.lv, lv.lw],
            }
        return json.dumps(out, indent=2)


def simulate_mission(
    plan, seq, cfg, camera, v_des, dt, t_stab, obstacles=None, seed=0
):
    """Closed-loop tracking of the sequence with capture bookkeeping.

    Alternates the position and orientation solvers at every sample of
    the generated trajectory. A capture fires at the first hold sample
    of each RTI stop where the position error is below eps_capture and
    the keep-out constraints hold; stops that never meet the bar are
    logged as skipped.
    """
    if obstacles is None:
        obstacles = ObstacleSet()
    if camera is not None and obstacles.camera is None:
        obstacles.camera = camera
    traj = generate_trajectory(seq, v_des, dt, t_stab)
    ooi = plan.region.ooi

    pos = traj.positions[0].copy()
    vel = np.zeros(3)
    yaw, pitch = desired_light_orientation(pos, ooi)
    if not point_feasible(pos, obstacles, cfg):
        raise InfeasibleStepError(
            "initial position violates the keep-out constraints",
            constraint="g_obs",
        )

    n = cfg.horizon
    records = []
    captures = {}
    warm = None
    path_length = 0.0
    for s in range(1, len(traj)):
        window = traj.positions[s : s + n]
        if len(window) < n:
            pad = np.repeat(traj.positions[-1][None, :], n - len(window), axis=0)
            window = np.vstack([window, pad])
        state = (pos, vel)
        try:
            u = solve_position_mpc(
                state, window, obstacles, cfg, dt, seed=seed + s, warm_start=warm
            )
        except InfeasibleStepError:
            u = _safe_fallback(state, obstacles, cfg, dt, warm)
        warm = u

        yaw_des, pitch_des = desired_light_orientation(pos, ooi)
        u_o, _ = solve_orientation_mpc(
            (yaw, pitch), (yaw_des, pitch_des), cfg, dt
        )

        p_roll, v_roll = rollout(state, u, dt)
        new_pos, new_vel = p_roll[0], v_roll[0]
        path_length += float(np.linalg.norm(new_pos - pos))
        pos, vel = new_pos, new_vel
        yaw = yaw + u_o[0, 0] * dt
        pitch = pitch + u_o[0, 1] * dt

        captured = False
        r = int(traj.rti_index[s])
        if traj.hold[s] and r >= 0 and r not in captures:
            target = traj.positions[s]
            err = float(np.linalg.norm(pos - target))
            if err < cfg.eps_capture and point_feasible(pos, obstacles, cfg):
                captures[r] = CaptureEvent(
                    rti_index=r,
                    time=s * dt,
                    true_position=pos.copy(),
                    commanded_position=target.copy(),
                    yaw=yaw,
                    pitch=pitch,
                )
                captured = True

        records.append(
            {
                "time": s * dt,
                "light_position": [float(x) for x in pos],
                "light_yaw": yaw,
                "light_pitch": pitch,
                "camera_position": [float(x) for x in camera.position]
                if camera is not None
                else None,
                "reference": [float(x) for x in traj.positions[s]],
                "capture": captured,
            }
        )

    planned = set(range(len(seq.positions) - 2))
    skipped = sorted(planned - set(captures))
    return MissionLog(
        records=records,
        captures=[captures[k] for k in sorted(captures)],
        skipped=skipped,
        path_length=path_length,
    )


def _safe_fallback(state, obstacles, cfg, dt, warm):
    """Keep the flown state feasible when the solver finds no candidate."""
    options = []
    if warm is not None:
        options.append(np.vstack([warm[1:], np.zeros((1, 3))]))
    options.append(_brake_candidate(state, cfg, dt))
    options.append(np.zeros((cfg.horizon, 3)))
    for u in options:
        if check_constraints(state, u, obstacles, cfg, dt) is None:
            return u
    raise InfeasibleStepError(
        "no safe fallback control available", constraint="g_obs"
    )
