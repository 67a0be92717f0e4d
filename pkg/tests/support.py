"""Shared helpers for the test suite: random typed polygons, synthetic scans
and an independent scanline rasterizer used as the boolean-op oracle."""
from __future__ import annotations

import math

import numpy as np

from polymap.geometry import EdgeKind, TypedPolygonSet, TypedRing
from polymap.scan_pipeline import LaserScan


def square_room_scan(n=360, half=2.0, pose=(0.0, 0.0, 0.0), max_range=10.0):
    """Analytic ranges for a square room centered on the origin."""
    bearings = np.linspace(-math.pi, math.pi - 2 * math.pi / n, n)
    ang = pose[2] + bearings
    # distance from pose to the axis-aligned walls x,y = +-half along each ray
    px, py = pose[0], pose[1]
    dx, dy = np.cos(ang), np.sin(ang)
    ts = np.full(n, np.inf)
    for wall, coord, axis in ((half, px, dx), (-half, px, dx), (half, py, dy), (-half, py, dy)):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wall - coord) / axis
        other = (py + t * dy) if axis is dx else (px + t * dx)
        ok = (t > 0) & (np.abs(other) <= half + 1e-12)
        ts = np.where(ok & (t < ts), t, ts)
    ranges = np.minimum(ts, max_range)
    return LaserScan(pose, bearings, ranges, max_range, np.ones(n, bool))


def random_typed_ring(rng, center=(0.0, 0.0), n=None, rmin=0.3, rmax=1.0,
                      frontier_frac=0.3) -> TypedRing:
    """Star-shaped ring around `center`: simple by construction."""
    if n is None:
        n = int(rng.integers(5, 24))
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    # reject near-duplicate angles to keep edges non-degenerate
    keep = np.concatenate([[True], np.diff(angles) > 1e-3])
    angles = angles[keep]
    radii = rng.uniform(rmin, rmax, len(angles))
    xs = center[0] + radii * np.cos(angles)
    ys = center[1] + radii * np.sin(angles)
    kinds = [
        EdgeKind.FRONTIER if rng.random() < frontier_frac else EdgeKind.OBSTACLE
        for _ in range(len(angles))
    ]
    return TypedRing.build(np.c_[xs, ys], kinds)


def random_typed_set(rng, **kw) -> TypedPolygonSet:
    return TypedPolygonSet.single(random_typed_ring(rng, **kw))


def rasterize_rings(ring_coord_arrays, x0, y0, nx, ny, cell):
    """Even-odd scanline fill over cell centers. Rings are (m, 2) arrays;
    holes subtract automatically via parity."""
    marks = np.zeros((ny, nx + 1), dtype=bool)
    yc = y0 + (np.arange(ny) + 0.5) * cell
    for coords in ring_coord_arrays:
        coords = np.asarray(coords, dtype=float)
        m = len(coords)
        for i in range(m):
            x1, y1 = coords[i]
            x2, y2 = coords[(i + 1) % m]
            if y1 == y2:
                continue
            ylo, yhi = (y1, y2) if y1 < y2 else (y2, y1)
            j0 = int(np.searchsorted(yc, ylo, side="left"))
            j1 = int(np.searchsorted(yc, yhi, side="left"))
            if j1 <= j0:
                continue
            rows = np.arange(j0, j1)
            xs = x1 + (yc[rows] - y1) * (x2 - x1) / (y2 - y1)
            cols = np.ceil((xs - x0) / cell - 0.5).astype(int)
            cols = np.clip(cols, 0, nx)
            np.logical_xor.at(marks, (rows, cols), True)
    return np.logical_xor.accumulate(marks, axis=1)[:, :-1]


def rasterize_set(s: TypedPolygonSet, x0, y0, nx, ny, cell):
    rings = [r.coords_array() for r in s.rings()]
    return rasterize_rings(rings, x0, y0, nx, ny, cell)


def raster_frame(sets, cell, pad=0.05):
    """Common grid covering all sets: (x0, y0, nx, ny)."""
    xs, ys = [], []
    for s in sets:
        for r in s.rings():
            c = r.coords_array()
            xs += [c[:, 0].min(), c[:, 0].max()]
            ys += [c[:, 1].min(), c[:, 1].max()]
    x0 = min(xs) - pad
    y0 = min(ys) - pad
    nx = int(np.ceil((max(xs) + pad - x0) / cell))
    ny = int(np.ceil((max(ys) + pad - y0) / cell))
    return x0, y0, nx, ny


def serialize_kinds(s: TypedPolygonSet):
    """Canonical (vertices, kinds) tuple view for exact equality checks.

    Rings are rotated to start at their lexicographically smallest vertex so
    cyclic re-starts compare equal; coordinates are compared exactly."""
    out = []
    for ring in s.rings():
        verts = [(v.x, v.y) for v in ring.vertices]
        kinds = [int(k) for k in ring.kinds]
        j = min(range(len(verts)), key=lambda i: verts[i])
        verts = verts[j:] + verts[:j]
        kinds = kinds[j:] + kinds[:j]
        out.append((tuple(verts), tuple(kinds)))
    return sorted(out)


def grid_aligned(s: TypedPolygonSet) -> TypedPolygonSet:
    """Snap every ring onto the clipping grid (what a pass through the
    boolean machinery would do to the coordinates)."""
    from polymap.clipping import snap_ring
    from polymap.geometry import PolygonFace

    faces = []
    for f in s.faces:
        faces.append(
            PolygonFace.build(snap_ring(f.outer), [snap_ring(h) for h in f.holes])
        )
    return TypedPolygonSet.from_faces(faces)
