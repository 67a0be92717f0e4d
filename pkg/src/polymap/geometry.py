"""Planar primitives: points, kind-labeled edges and rings, polyline simplification.

Coordinates are meters. Every polygon edge carries a label saying whether it
was sensed as a physical surface (obstacle) or merely bounds the explored
region (frontier); the label is the currency the whole mapping stack trades in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple, Sequence

import numpy as np

# Boolean operations run on a fixed-precision integer grid of 0.1 mm; ring
# construction merges vertices closer than half a grid unit so grid-distinct
# points are never collapsed.
SNAP_TOLERANCE_M = 1e-4


class GeometryError(ValueError):
    """Invalid geometric input (degenerate ring, non-finite coordinate, ...)."""


class Point2(NamedTuple):
    x: float
    y: float

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class EdgeKind(IntEnum):
    OBSTACLE = 0
    FRONTIER = 1

    @property
    def char(self) -> str:
        return "O" if self is EdgeKind.OBSTACLE else "F"

    @classmethod
    def from_char(cls, c: str) -> "EdgeKind":
        if c == "O":
            return cls.OBSTACLE
        if c == "F":
            return cls.FRONTIER
        raise GeometryError(f"unknown edge kind code {c!r}")


@dataclass(frozen=True)
class TypedEdge:
    a: Point2
    b: Point2
    kind: EdgeKind

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise GeometryError("zero-length edge")

    @property
    def length(self) -> float:
        return self.a.dist(self.b)


def ring_area(ring) -> float:
    """Signed shoelace area: positive for counterclockwise vertex order.

    Accepts a TypedRing or any sequence of (x, y) pairs.
    """
    vertices = getattr(ring, "vertices", ring)
    n = len(vertices)
    if n < 3:
        raise GeometryError(f"ring needs >= 3 vertices, got {n}")
    area = 0.0
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return 0.5 * area


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from point p to the closest point of segment ab."""
    px, py = p
    ax, ay = a
    bx, by = b
    dx = bx - ax
    dy = by - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        raise GeometryError("degenerate segment")
    t = ((px - ax) * dx + (py - ay) * dy) / den
    if t <= 0.0:
        cx, cy = ax, ay
    elif t >= 1.0:
        cx, cy = bx, by
    else:
        cx, cy = ax + t * dx, ay + t * dy
    return math.hypot(px - cx, py - cy)


def _check_finite(vertices) -> None:
    for v in vertices:
        if not (math.isfinite(v[0]) and math.isfinite(v[1])):
            raise GeometryError(f"non-finite coordinate {v!r}")


@dataclass(frozen=True)
class TypedRing:
    """Closed vertex loop; kinds[i] labels the edge vertices[i] -> vertices[(i+1) % n].

    Construction merges consecutive vertices closer than half the snap
    tolerance and drops interior vertices exactly-collinear between same-kind
    neighbors; it does not flip orientation (orientation encodes the
    outer/hole role: counterclockwise outer, clockwise hole).
    """

    vertices: tuple
    kinds: tuple

    def __post_init__(self) -> None:
        if len(self.vertices) != len(self.kinds):
            raise GeometryError(
                f"{len(self.vertices)} vertices vs {len(self.kinds)} kinds"
            )
        if len(self.vertices) < 3:
            raise GeometryError("ring needs >= 3 vertices")

    @classmethod
    def build(cls, vertices: Sequence, kinds: Sequence) -> "TypedRing":
        """Construct with degeneracy cleanup; raises GeometryError if < 3 survive."""
        if len(vertices) != len(kinds):
            raise GeometryError(
                f"{len(vertices)} vertices vs {len(kinds)} kinds"
            )
        _check_finite(vertices)
        pts = [Point2(float(x), float(y)) for x, y in vertices]
        ks = [EdgeKind(k) for k in kinds]
        pts, ks = _merge_duplicates(pts, ks)
        pts, ks = _drop_collinear(pts, ks)
        if len(pts) < 3:
            raise GeometryError("ring degenerate after cleanup")
        return cls(tuple(pts), tuple(ks))

    @classmethod
    def uniform(cls, vertices: Sequence, kind: EdgeKind) -> "TypedRing":
        return cls.build(vertices, [kind] * len(vertices))

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def signed_area(self) -> float:
        return ring_area(self.vertices)

    @property
    def is_ccw(self) -> bool:
        return self.signed_area > 0.0

    @property
    def perimeter(self) -> float:
        n = len(self.vertices)
        return sum(
            self.vertices[i].dist(self.vertices[(i + 1) % n]) for i in range(n)
        )

    def edges(self) -> Iterator[TypedEdge]:
        n = len(self.vertices)
        for i in range(n):
            yield TypedEdge(self.vertices[i], self.vertices[(i + 1) % n], self.kinds[i])

    def reversed(self) -> "TypedRing":
        n = len(self.vertices)
        verts = tuple(reversed(self.vertices))
        kinds = tuple(self.kinds[(n - 2 - j) % n] for j in range(n))
        return TypedRing(verts, kinds)

    def coords_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)


def _merge_duplicates(pts, ks):
    # Cyclic pass: drop a vertex when it sits within half a snap unit of its
    # predecessor (the dropped edge's kind disappears with it).
    tol2 = (SNAP_TOLERANCE_M / 2.0) ** 2
    out_p, out_k = [], []
    for p, k in zip(pts, ks):
        if out_p:
            dx = p.x - out_p[-1].x
            dy = p.y - out_p[-1].y
            if dx * dx + dy * dy < tol2:
                out_k[-1] = k
                continue
        out_p.append(p)
        out_k.append(k)
    # seam: last duplicating first
    while len(out_p) > 1:
        dx = out_p[-1].x - out_p[0].x
        dy = out_p[-1].y - out_p[0].y
        if dx * dx + dy * dy < tol2:
            out_p.pop()
            out_k.pop()
        else:
            break
    return out_p, out_k


def _drop_collinear(pts, ks):
    # Remove vertex i when edges (i-1, i) share a kind and i lies on the chord
    # of its neighbors within half a snap unit.
    tol = SNAP_TOLERANCE_M / 2.0
    changed = True
    while changed and len(pts) > 3:
        changed = False
        n = len(pts)
        for i in range(n):
            prev = (i - 1) % n
            nxt = (i + 1) % n
            if ks[prev] != ks[i]:
                continue
            a, v, b = pts[prev], pts[i], pts[nxt]
            if a == b:
                continue
            if point_segment_distance(v, a, b) < tol:
                del pts[i]
                del ks[i]
                changed = True
                break
    return pts, ks


@dataclass(frozen=True)
class PolygonFace:
    """One outer ring (counterclockwise) with its holes (clockwise)."""

    outer: TypedRing
    holes: tuple = ()

    @classmethod
    def build(cls, outer: TypedRing, holes: Sequence[TypedRing] = ()) -> "PolygonFace":
        if not outer.is_ccw:
            outer = outer.reversed()
        fixed = tuple(h if not h.is_ccw else h.reversed() for h in holes)
        return cls(outer, fixed)

    @property
    def area(self) -> float:
        return self.outer.signed_area + sum(h.signed_area for h in self.holes)

    def rings(self) -> Iterator[TypedRing]:
        yield self.outer
        yield from self.holes


@dataclass(frozen=True)
class TypedPolygonSet:
    """A region as disjoint faces, each an outer ring with zero or more holes."""

    faces: tuple = ()

    @classmethod
    def empty(cls) -> "TypedPolygonSet":
        return cls(())

    @classmethod
    def from_faces(cls, faces: Sequence[PolygonFace]) -> "TypedPolygonSet":
        return cls(tuple(faces))

    @classmethod
    def single(cls, ring: TypedRing) -> "TypedPolygonSet":
        return cls((PolygonFace.build(ring),))

    @classmethod
    def from_rings(cls, rings: Sequence[TypedRing]) -> "TypedPolygonSet":
        """Group a flat ring list into faces by containment; orientation gives roles."""
        outers = [r if r.is_ccw else None for r in rings]
        outer_rings = [r for r in rings if r.is_ccw]
        hole_rings = [r for r in rings if not r.is_ccw]
        del outers
        holes_for: dict[int, list[TypedRing]] = {i: [] for i in range(len(outer_rings))}
        for h in hole_rings:
            probe = h.vertices[0]
            best = None
            best_area = math.inf
            for i, o in enumerate(outer_rings):
                a = o.signed_area
                if a < best_area and _point_in_ring(probe, o):
                    best = i
                    best_area = a
            if best is None:
                raise GeometryError("hole ring not contained in any outer ring")
            holes_for[best].append(h)
        faces = [
            PolygonFace.build(o, holes_for[i]) for i, o in enumerate(outer_rings)
        ]
        return cls(tuple(faces))

    def is_empty(self) -> bool:
        return not self.faces

    @property
    def area(self) -> float:
        return sum(f.area for f in self.faces)

    @property
    def vertex_count(self) -> int:
        return sum(len(r) for r in self.rings())

    def rings(self) -> Iterator[TypedRing]:
        for f in self.faces:
            yield from f.rings()

    def edges(self) -> Iterator[TypedEdge]:
        for r in self.rings():
            yield from r.edges()


def _point_in_ring(p: Point2, ring: TypedRing) -> bool:
    # Even-odd crossing test; boundary points count as inside, which is
    # adequate for hole-to-outer grouping.
    x, y = p
    inside = False
    verts = ring.vertices
    n = len(verts)
    j = n - 1
    for i in range(n):
        xi, yi = verts[i]
        xj, yj = verts[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


def simplify_polyline(points, epsilon: float, kinds=None):
    """Ramer-Douglas-Peucker reduction of an open polyline.

    Returns (points, kinds) with the same container flavor as the input
    (kinds is None when no kinds were given). The output is a subsequence of
    the input keeping the first and last point, and every dropped point lies
    within epsilon of the kept chain. When kinds are given (one per edge),
    points where the kind changes are pinned so edges of different kinds are
    never merged.
    """
    if epsilon <= 0.0:
        raise GeometryError("epsilon must be > 0")
    pts = [Point2(float(p[0]), float(p[1])) for p in points]
    if kinds is not None and len(kinds) != max(len(pts) - 1, 0):
        raise GeometryError("need exactly one kind per edge")
    if len(pts) <= 2:
        return pts, (list(kinds) if kinds is not None else None)
    if kinds is None:
        keep = _rdp_mask(pts, 0, len(pts) - 1, epsilon)
        return [p for p, k in zip(pts, keep) if k], None

    ks = [EdgeKind(k) for k in kinds]
    keep = [False] * len(pts)
    keep[0] = keep[-1] = True
    start = 0
    for i in range(1, len(pts)):
        if i == len(pts) - 1 or ks[i] != ks[i - 1]:
            seg_keep = _rdp_mask(pts, start, i, epsilon)
            for j in range(start, i + 1):
                keep[j] = keep[j] or seg_keep[j - start]
            start = i
    out_p, out_k = [], []
    for i, p in enumerate(pts):
        if keep[i]:
            if out_p:
                out_k.append(ks[i - 1])
            out_p.append(p)
    return out_p, out_k


def rdp_mask(points, epsilon: float) -> np.ndarray:
    """Boolean keep-mask of the Ramer-Douglas-Peucker reduction, for callers
    that need the surviving indices rather than the points."""
    pts = [Point2(float(p[0]), float(p[1])) for p in points]
    if len(pts) <= 2:
        return np.ones(len(pts), dtype=bool)
    return np.asarray(_rdp_mask(pts, 0, len(pts) - 1, epsilon), dtype=bool)


def _rdp_mask(pts, lo: int, hi: int, epsilon: float):
    """Keep-mask for pts[lo..hi] inclusive; recursion via explicit stack."""
    keep = [False] * (hi - lo + 1)
    keep[0] = keep[-1] = True
    stack = [(lo, hi)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        a, b = pts[i], pts[j]
        best = -1.0
        best_idx = -1
        same = a == b
        for m in range(i + 1, j):
            if same:
                d = pts[m].dist(a)
            else:
                d = point_segment_distance(pts[m], a, b)
            if d > best:
                best = d
                best_idx = m
        if best > epsilon:
            keep[best_idx - lo] = True
            stack.append((i, best_idx))
            stack.append((best_idx, j))
    return keep
