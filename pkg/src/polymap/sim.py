"""Ground-truth polygonal worlds, lidar raycasting, noisy odometry and
waypoint-following motion.

The robot keeps two poses: a fine pose integrated every control step (used
for collision and control) and a scan pose advanced only at scan events by
composing the accumulated body-frame increment - the exact increment that,
plus noise, is reported as odometry. A filter that composes the same deltas
therefore reproduces the scan pose bit for bit when noise is zero; do not
break that alignment.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, replace

import numpy as np
import shapely
from shapely.geometry import Point as ShapelyPoint, Polygon

from polymap.motion import (
    MotionNoise,
    OdometryDelta,
    pose_compose,
    seeded_rng,
    unicycle_increment,
)
from polymap.scan_pipeline import LaserScan


class SimulationError(RuntimeError):
    pass


@functools.lru_cache(maxsize=16)
def _free_polygon(world: "World"):
    poly = Polygon(world.boundary)
    for o in world.obstacles:
        poly = poly.difference(Polygon(o))
    shapely.prepare(poly)
    return poly


@dataclass(frozen=True)
class World:
    """Boundary ring (counterclockwise) with forbidden obstacle interiors."""

    name: str
    boundary: tuple
    obstacles: tuple

    @classmethod
    def build(cls, name, boundary, obstacles=()) -> "World":
        b = [tuple(map(float, p)) for p in boundary]
        obs = [[tuple(map(float, p)) for p in o] for o in obstacles]
        return cls(name, tuple(b), tuple(tuple(o) for o in obs))

    def segments(self) -> np.ndarray:
        """(m, 4) array of all wall segments (x1, y1, x2, y2)."""
        segs = []
        for ring in (self.boundary, *self.obstacles):
            n = len(ring)
            for i in range(n):
                segs.append((*ring[i], *ring[(i + 1) % n]))
        return np.asarray(segs, dtype=float)

    def free_polygon(self):
        return _free_polygon(self)

    def contains(self, p, clearance: float = 0.0) -> bool:
        free = self.free_polygon()
        pt = ShapelyPoint(p[0], p[1])
        if not free.covers(pt):
            return False
        return clearance == 0.0 or free.boundary.distance(pt) >= clearance

    def to_dict(self) -> dict:
        def ccw(ring):
            area = sum(
                ring[i][0] * ring[(i + 1) % len(ring)][1]
                - ring[(i + 1) % len(ring)][0] * ring[i][1]
                for i in range(len(ring))
            )
            return area > 0

        boundary = list(self.boundary)
        if not ccw(boundary):
            boundary = boundary[::-1]
        obstacles = [
            list(o)[::-1] if ccw(o) else list(o) for o in self.obstacles
        ]
        return {
            "name": self.name,
            "boundary": [[round(x, 6), round(y, 6)] for x, y in boundary],
            "obstacles": [[[round(x, 6), round(y, 6)] for x, y in o] for o in obstacles],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "World":
        with open(path) as fh:
            doc = json.load(fh)
        return cls.build(doc["name"], doc["boundary"], doc.get("obstacles", []))


@dataclass(frozen=True)
class SensorParams:
    beams: int = 541
    fov: float = math.radians(270.0)
    max_range: float = 10.0
    range_noise_std: float = 0.01


def raycast_scan(
    world: World,
    pose,
    sensor: SensorParams = SensorParams(),
    rng: np.random.Generator | None = None,
) -> LaserScan:
    """Ranges to the nearest wall per beam, Gaussian range noise on hits;
    beams without an intersection inside max_range come back as misses."""
    if not world.contains((pose[0], pose[1])):
        raise SimulationError(f"sensor pose {pose[:2]} outside free space")
    segs = world.segments()
    bearings = np.linspace(-sensor.fov / 2.0, sensor.fov / 2.0, sensor.beams)
    ang = pose[2] + bearings
    dx = np.cos(ang)[:, None]
    dy = np.sin(ang)[:, None]
    ax = segs[None, :, 0] - pose[0]
    ay = segs[None, :, 1] - pose[1]
    ex = segs[None, :, 2] - segs[None, :, 0]
    ey = segs[None, :, 3] - segs[None, :, 1]
    den = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ax * ey - ay * ex) / den
        s = (ax * dy - ay * dx) / den
    valid = (np.abs(den) > 1e-12) & (s >= 0.0) & (s <= 1.0) & (t > 1e-9)
    t = np.where(valid, t, np.inf)
    dist = t.min(axis=1)
    hit = dist <= sensor.max_range
    ranges = np.where(hit, dist, sensor.max_range)
    if rng is not None and sensor.range_noise_std > 0:
        noise = rng.normal(0.0, sensor.range_noise_std, sensor.beams)
        ranges = np.where(hit, ranges + noise, ranges)
        ranges = np.clip(ranges, 1e-3, sensor.max_range)
    return LaserScan(tuple(pose), bearings, ranges, sensor.max_range, hit)


@dataclass
class RobotState:
    fine_pose: tuple  # integrated every control step
    scan_pose: tuple  # advanced only at scan events (see module docstring)
    rel_true: tuple = (0.0, 0.0, 0.0)  # true body increment since last scan
    rel_odom: tuple = (0.0, 0.0, 0.0)  # noisy body increment since last scan
    v: float = 0.0
    w: float = 0.0

    @classmethod
    def at(cls, pose) -> "RobotState":
        return cls(tuple(pose), tuple(pose))


def free_distance(world_segments: np.ndarray, p, direction) -> float:
    """Distance from p to the first wall along `direction` (unit not needed)."""
    dx, dy = direction
    norm = math.hypot(dx, dy)
    if norm == 0:
        return math.inf
    dx, dy = dx / norm, dy / norm
    ax = world_segments[:, 0] - p[0]
    ay = world_segments[:, 1] - p[1]
    ex = world_segments[:, 2] - world_segments[:, 0]
    ey = world_segments[:, 3] - world_segments[:, 1]
    den = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ax * ey - ay * ex) / den
        s = (ax * dy - ay * dx) / den
    valid = (np.abs(den) > 1e-12) & (s >= 0.0) & (s <= 1.0) & (t > 0.0)
    if not valid.any():
        return math.inf
    return float(t[valid].min())


def step_motion(
    state: RobotState,
    dt: float,
    world: World,
    robot_radius: float,
    odom_noise: MotionNoise,
    rng: np.random.Generator,
    segments: np.ndarray | None = None,
) -> RobotState:
    """One control step of unicycle kinematics. Motion that would collide is
    truncated at the wall standoff; the reported odometry increment reflects
    the truncated motion plus noise."""
    if dt <= 0:
        raise SimulationError("dt must be > 0")
    inc = unicycle_increment(state.v, state.w, dt)
    segs = segments if segments is not None else world.segments()
    disp = math.hypot(inc.forward, inc.lateral)
    if disp > 1e-12:
        th = state.fine_pose[2]
        c, s = math.cos(th), math.sin(th)
        wx = c * inc.forward - s * inc.lateral
        wy = s * inc.forward + c * inc.lateral
        free = free_distance(segs, state.fine_pose, (wx, wy)) - robot_radius - 0.01
        if disp > free:
            f = max(0.0, free / disp)
            inc = OdometryDelta(inc.forward * f, inc.lateral * f, inc.rotation)
    stds = odom_noise.stds(inc)
    noise = rng.normal(0.0, 1.0, 3)
    noisy = OdometryDelta(
        inc.forward + stds[0] * noise[0],
        inc.lateral + stds[1] * noise[1],
        inc.rotation + stds[2] * noise[2],
    )
    return replace(
        state,
        fine_pose=pose_compose(state.fine_pose, inc),
        rel_true=pose_compose(state.rel_true, inc),
        rel_odom=pose_compose(state.rel_odom, noisy),
    )


def take_scan_event(state: RobotState):
    """Advance the scan pose by the accumulated true increment and hand back
    the matching noisy odometry delta; resets the accumulators."""
    delta_true = OdometryDelta(*state.rel_true)
    delta_odom = OdometryDelta(*state.rel_odom)
    state.scan_pose = pose_compose(state.scan_pose, delta_true)
    state.rel_true = (0.0, 0.0, 0.0)
    state.rel_odom = (0.0, 0.0, 0.0)
    return delta_odom


@dataclass(frozen=True)
class FollowConfig:
    dt: float = 0.1
    v_max: float = 0.7
    w_max: float = 1.8
    k_heading: float = 2.5
    goal_tolerance: float = 0.15
    waypoint_tolerance: float = 0.3
    scan_period: float = 1.5
    stall_timeout: float = 30.0
    stall_progress: float = 0.05
    max_leg_time: float = 240.0


@dataclass
class FollowResult:
    status: str  # "arrived" | "stalled" | "timeout"
    distance_driven: float
    sim_time: float


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def follow_path(
    state: RobotState,
    waypoints,
    world: World,
    robot_radius: float,
    odom_noise: MotionNoise,
    cfg: FollowConfig,
    rng: np.random.Generator,
    on_scan=None,
):
    """Chase waypoints with rotate-then-drive control; emits a scan event via
    `on_scan(state)` every scan_period of simulated time and once at the end.
    Stalls when distance to the current waypoint stops improving."""
    segs = world.segments()
    wp = [(float(x), float(y)) for x, y in waypoints]
    if not wp:
        raise SimulationError("empty waypoint list")
    target_idx = 0
    t = 0.0
    driven = 0.0
    steps_per_scan = max(1, int(round(cfg.scan_period / cfg.dt)))
    step_count = 0
    best_goal_dist = math.inf
    last_progress_t = 0.0
    status = None
    while True:
        pose = state.fine_pose
        tx, ty = wp[target_idx]
        dist = math.hypot(tx - pose[0], ty - pose[1])
        tol = cfg.goal_tolerance if target_idx == len(wp) - 1 else cfg.waypoint_tolerance
        if dist <= tol:
            if target_idx == len(wp) - 1:
                status = "arrived"
                break
            target_idx += 1
            continue
        goal_dist = math.hypot(wp[-1][0] - pose[0], wp[-1][1] - pose[1]) + dist
        if goal_dist < best_goal_dist - cfg.stall_progress:
            best_goal_dist = goal_dist
            last_progress_t = t
        if t - last_progress_t > cfg.stall_timeout:
            status = "stalled"
            break
        if t > cfg.max_leg_time:
            status = "timeout"
            break
        err = _wrap(math.atan2(ty - pose[1], tx - pose[0]) - pose[2])
        state.w = max(-cfg.w_max, min(cfg.w_max, cfg.k_heading * err))
        state.v = cfg.v_max if abs(err) < 0.5 else 0.0
        before = state.fine_pose
        state = step_motion(state, cfg.dt, world, robot_radius, odom_noise, rng, segs)
        driven += math.hypot(
            state.fine_pose[0] - before[0], state.fine_pose[1] - before[1]
        )
        t += cfg.dt
        step_count += 1
        if on_scan is not None and step_count % steps_per_scan == 0:
            on_scan(state)
    if on_scan is not None:
        on_scan(state)
    state.v = 0.0
    state.w = 0.0
    return FollowResult(status, driven, t), state


# ---------------------------------------------------------------------------
# bundled worlds
# ---------------------------------------------------------------------------

def _rect(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def office_world() -> World:
    """Rooms on both sides of a central corridor, doorways into it."""
    walls = []
    # corridor walls y in [5.7, 6.0] and [8.0, 8.3] with door gaps
    for x0, x1 in [(0, 2.5), (4.0, 9.0), (10.5, 15.5), (17.0, 20.0)]:
        walls.append(_rect(x0, 5.7, x1, 6.0))
    for x0, x1 in [(0, 5.0), (6.5, 12.0), (13.5, 18.0), (19.5, 20.0)]:
        walls.append(_rect(x0, 8.0, x1, 8.3))
    # room dividers below and above the corridor
    walls.append(_rect(6.0, 0.0, 6.3, 5.7))
    walls.append(_rect(13.0, 0.0, 13.3, 5.7))
    walls.append(_rect(6.5, 8.3, 6.8, 14.0))
    walls.append(_rect(13.5, 8.3, 13.8, 14.0))
    return World.build("office", _rect(0, 0, 20, 14), walls)


def openlab_world() -> World:
    """Large open space with pillars and one L-shaped bench."""
    pillars = [
        _rect(6, 5, 7, 6),
        _rect(14, 4, 15, 5),
        _rect(18, 11, 19, 12),
        _rect(7, 12, 8, 13),
    ]
    bench = [
        (11.0, 8.0),
        (16.0, 8.0),
        (16.0, 9.0),
        (12.0, 9.0),
        (12.0, 12.0),
        (11.0, 12.0),
    ]
    return World.build("openlab", _rect(0, 0, 25, 18), pillars + [bench])


def loop_world() -> World:
    """Ring corridor around a central block; closing the loop forces the
    filter to reconcile accumulated drift."""
    return World.build("loop", _rect(0, 0, 16, 16), [_rect(4, 4, 12, 12)])


BUNDLED_WORLDS = {
    "office": office_world,
    "openlab": openlab_world,
    "loop": loop_world,
}

START_POSES = {
    "office": (10.0, 7.0, 0.0),
    "openlab": (3.0, 3.0, 0.8),
    "loop": (2.0, 2.0, 0.0),
}


def get_world(name_or_path: str) -> World:
    if name_or_path in BUNDLED_WORLDS:
        return BUNDLED_WORLDS[name_or_path]()
    return World.load(name_or_path)
