"""SE(2) pose algebra, odometry increments and seeded noise streams.

The simulator integrates the true pose by composing exactly the body-frame
increment it reports as odometry; a filter that composes the same increments
with the same function reproduces the true pose bit for bit when noise is
zero. Keep that property in mind before "simplifying" anything here.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

Pose = tuple  # (x, y, heading)


@dataclass(frozen=True)
class OdometryDelta:
    """Body-frame increment between consecutive scans."""

    forward: float
    lateral: float
    rotation: float

    def __post_init__(self) -> None:
        for v in (self.forward, self.lateral, self.rotation):
            if not math.isfinite(v):
                raise ValueError("non-finite odometry increment")


@dataclass(frozen=True)
class MotionNoise:
    """Std scalings: translation alpha1*|forward| + alpha2*|rotation|,
    rotation alpha3*|rotation| + alpha4*|forward|."""

    alpha1: float = 0.05
    alpha2: float = 0.02
    alpha3: float = 0.05
    alpha4: float = 0.01

    def stds(self, delta: OdometryDelta):
        trans = self.alpha1 * abs(delta.forward) + self.alpha2 * abs(delta.rotation)
        rot = self.alpha3 * abs(delta.rotation) + self.alpha4 * abs(delta.forward)
        return trans, trans, rot

    def scaled(self, factor: float) -> "MotionNoise":
        return MotionNoise(
            self.alpha1 * factor,
            self.alpha2 * factor,
            self.alpha3 * factor,
            self.alpha4 * factor,
        )


def pose_compose(pose: Pose, delta: OdometryDelta) -> Pose:
    x, y, th = pose
    c = math.cos(th)
    s = math.sin(th)
    return (
        x + c * delta.forward - s * delta.lateral,
        y + s * delta.forward + c * delta.lateral,
        th + delta.rotation,
    )


def pose_between(p0: Pose, p1: Pose) -> OdometryDelta:
    """Body-frame increment taking p0 to p1 (inverse of pose_compose)."""
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    c = math.cos(p0[2])
    s = math.sin(p0[2])
    return OdometryDelta(c * dx + s * dy, -s * dx + c * dy, p1[2] - p0[2])


def unicycle_increment(v: float, omega: float, dt: float) -> OdometryDelta:
    """Body-frame increment of a unicycle driving (v, omega) for dt."""
    if abs(omega) < 1e-12:
        return OdometryDelta(v * dt, 0.0, omega * dt)
    dth = omega * dt
    r = v / omega
    return OdometryDelta(r * math.sin(dth), r * (1.0 - math.cos(dth)), dth)


def transform_points(pose: Pose, pts: np.ndarray) -> np.ndarray:
    """Body-frame points -> world frame."""
    x, y, th = pose
    c = math.cos(th)
    s = math.sin(th)
    pts = np.asarray(pts, dtype=float)
    out = np.empty_like(pts)
    out[:, 0] = x + c * pts[:, 0] - s * pts[:, 1]
    out[:, 1] = y + s * pts[:, 0] + c * pts[:, 1]
    return out


def seeded_rng(*keys) -> np.random.Generator:
    """Deterministic generator from a tuple of ints/strings. Separate streams
    are indexed by (seed, step, particle, tag, ...) so per-particle noise does
    not depend on evaluation order."""
    ints = []
    for k in keys:
        if isinstance(k, str):
            ints.append(zlib.crc32(k.encode()))
        else:
            ints.append(int(k) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(ints))
