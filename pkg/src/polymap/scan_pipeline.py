"""One range-finder sweep -> the polygon of locally visible free space.

Hit returns are clustered by consecutive-point distance, each cluster is
segmented at its simplification breakpoints and refit with orthogonal
regression, and the fitted chains are strung together in beam order with the
sensor position closing the loop. Edges along fitted chains are obstacle;
connectors, max-range arcs and the two closing edges at the sensor are
frontier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from polymap import clipping
from polymap.geometry import (
    EdgeKind,
    GeometryError,
    Point2,
    TypedRing,
    rdp_mask,
    ring_area,
)


class ScanError(ValueError):
    """Scan violates its invariants or is unusable."""


@dataclass(frozen=True)
class LaserScan:
    """One sweep: bearings are sensor-frame radians, strictly increasing,
    angular span <= 2*pi; hit_flags[i] False means no return within range
    (ranges[i] then holds max_range)."""

    pose: tuple  # (x, y, heading) the sweep was taken from
    bearings: np.ndarray
    ranges: np.ndarray
    max_range: float
    hit_flags: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.bearings, dtype=float)
        r = np.asarray(self.ranges, dtype=float)
        h = np.asarray(self.hit_flags, dtype=bool)
        if not (len(b) == len(r) == len(h)):
            raise ScanError("bearings, ranges, hit_flags length mismatch")
        if len(b) and np.any(np.diff(b) <= 0):
            raise ScanError("bearings must be strictly increasing")
        if len(b) and b[-1] - b[0] > 2.0 * math.pi + 1e-9:
            raise ScanError("angular span exceeds a full turn")
        if np.any(r <= 0) or np.any(r > self.max_range + 1e-9):
            raise ScanError("ranges must satisfy 0 < r <= max_range")
        object.__setattr__(self, "bearings", b)
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "hit_flags", h)

    def __len__(self) -> int:
        return len(self.bearings)

    def world_points(self) -> np.ndarray:
        """Beam endpoints in the world frame (all beams, hits or not)."""
        x, y, th = self.pose
        ang = th + self.bearings
        return np.c_[
            x + self.ranges * np.cos(ang), y + self.ranges * np.sin(ang)
        ]

    def with_pose(self, pose) -> "LaserScan":
        return LaserScan(tuple(pose), self.bearings, self.ranges, self.max_range, self.hit_flags)


@dataclass(frozen=True)
class ScanCluster:
    """Contiguous run of hit beams belonging to one object."""

    start: int  # first beam index
    stop: int  # one past the last beam index
    points: np.ndarray  # world-frame endpoints, shape (stop - start, 2)

    def __len__(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class FittedLine:
    """Line nx*x + ny*y = d with unit normal; fits cluster points
    [first..last] inclusive. Normal sign: ny > 0, or ny == 0 and nx > 0."""

    nx: float
    ny: float
    d: float
    first: int
    last: int

    def project(self, p) -> Point2:
        t = self.nx * p[0] + self.ny * p[1] - self.d
        return Point2(p[0] - t * self.nx, p[1] - t * self.ny)


@dataclass(frozen=True)
class ScanParams:
    break_distance: float = 0.3
    rdp_epsilon: float = 0.03
    miss_range_scale: float = 0.98  # frontier vertices for no-return beams


def cluster_scan(scan: LaserScan, break_distance: float = 0.3):
    """Split hit returns into clusters: consecutive hit beams stay together
    while their separation is at most break_distance plus the beam-spacing
    chord at the nearer return (distant walls must not fragment just because
    rays diverge). Misses always break; clusters of one point are dropped."""
    if break_distance <= 0:
        raise ScanError("break_distance must be > 0")
    pts = scan.world_points()
    hits = scan.hit_flags
    clusters = []
    start = None

    def close(end: int) -> None:
        nonlocal start
        if start is not None and end - start >= 2:
            clusters.append(ScanCluster(start, end, pts[start:end].copy()))
        start = None

    for i in range(len(scan)):
        if not hits[i]:
            close(i)
            continue
        if start is None:
            start = i
            continue
        db = scan.bearings[i] - scan.bearings[i - 1]
        thresh = break_distance + 2.0 * min(
            scan.ranges[i - 1], scan.ranges[i]
        ) * math.sin(db / 2.0)
        if math.hypot(*(pts[i] - pts[i - 1])) > thresh:
            close(i)
            start = i
    close(len(scan))
    return clusters


def _tls_fit(pts: np.ndarray, first: int, last: int) -> FittedLine:
    """Orthogonal least squares over pts[first..last]; verticals are fine."""
    seg = pts[first : last + 1]
    centroid = seg.mean(axis=0)
    if len(seg) == 2:
        dx, dy = seg[1] - seg[0]
        n = math.hypot(dx, dy)
        nx, ny = -dy / n, dx / n
    else:
        d = seg - centroid
        sxx = float(np.dot(d[:, 0], d[:, 0]))
        syy = float(np.dot(d[:, 1], d[:, 1]))
        sxy = float(np.dot(d[:, 0], d[:, 1]))
        evals, evecs = np.linalg.eigh(np.array([[sxx, sxy], [sxy, syy]]))
        nx, ny = (float(evecs[0, 0]), float(evecs[1, 0]))
    if ny < 0 or (ny == 0 and nx < 0):
        nx, ny = -nx, -ny
    d_off = nx * centroid[0] + ny * centroid[1]
    return FittedLine(float(nx), float(ny), float(d_off), first, last)


def fit_lines(cluster: ScanCluster, rdp_epsilon: float = 0.03):
    """Segment the cluster polyline at simplification breakpoints, then refit
    each sub-chain with total least squares."""
    if len(cluster) < 2:
        raise ScanError("cluster needs >= 2 points")
    keep = rdp_mask(cluster.points, rdp_epsilon)
    breaks = np.flatnonzero(keep)
    return [
        _tls_fit(cluster.points, int(a), int(b))
        for a, b in zip(breaks[:-1], breaks[1:])
    ]


def _chain_vertices(cluster: ScanCluster, lines):
    """Fitted chain vertices in beam order; each sub-chain contributes the
    orthogonal projections of its first/last raw points onto its own line
    (adjacent sub-chains may leave a short corner stitch, kept as obstacle)."""
    verts = []
    for ln in lines:
        verts.append(ln.project(cluster.points[ln.first]))
        verts.append(ln.project(cluster.points[ln.last]))
    return verts


def scan_to_polygon(scan: LaserScan, params: ScanParams = ScanParams()) -> TypedRing:
    """Free-space polygon of one sweep: counterclockwise, grid-snapped,
    sensor position on the boundary. A self-intersecting construction is
    repaired by a self-union keeping the face that contains the sensor."""
    if len(scan) < 2:
        raise ScanError("need at least 2 beams")
    sensor = Point2(scan.pose[0], scan.pose[1])
    pts = scan.world_points()
    clusters = cluster_scan(scan, params.break_distance)
    owner = np.full(len(scan), -1)
    for ci, c in enumerate(clusters):
        owner[c.start : c.stop] = ci

    verts = [sensor]
    kinds = []  # kinds[j] labels edge verts[j] -> verts[j+1]

    def append(v: Point2, kind: EdgeKind) -> None:
        verts.append(v)
        kinds.append(kind)

    x0, y0, th = scan.pose
    for i in range(len(scan)):
        ci = owner[i]
        if ci >= 0:
            c = clusters[ci]
            if i != c.start:
                continue
            chain = _chain_vertices(c, fit_lines(c, params.rdp_epsilon))
            append(chain[0], EdgeKind.FRONTIER)  # connector into the chain
            for v in chain[1:]:
                append(v, EdgeKind.OBSTACLE)
        elif scan.hit_flags[i]:
            # isolated return: free space reaches it, but one point cannot
            # support a fitted obstacle segment
            append(Point2(*pts[i]), EdgeKind.FRONTIER)
        else:
            ang = th + scan.bearings[i]
            r = params.miss_range_scale * scan.max_range
            append(
                Point2(x0 + r * math.cos(ang), y0 + r * math.sin(ang)),
                EdgeKind.FRONTIER,
            )
    if len(verts) < 3:
        raise ScanError("fewer than 2 usable beams")
    kinds.append(EdgeKind.FRONTIER)  # closing edge back to the sensor

    # keep every vertex within sensing distance (projections can overshoot)
    clamped = []
    for v in verts:
        d = v.dist(sensor)
        if d > scan.max_range:
            f = scan.max_range / d
            v = Point2(sensor.x + f * (v.x - sensor.x), sensor.y + f * (v.y - sensor.y))
        clamped.append(v)

    if ring_area(clamped) < 0:
        ring = TypedRing.build(clamped, kinds).reversed()
    else:
        ring = TypedRing.build(clamped, kinds)
    ring = clipping.snap_ring(ring)
    if not clipping.ring_is_simple(ring):
        ring = clipping.repair_ring(ring, sensor)
        if not ring.is_ccw:
            ring = ring.reversed()
    return ring
