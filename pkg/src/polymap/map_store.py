"""Dual free-space/obstacle map and the combined planning view.

Every scan polygon is unioned into the free-space set as-is; its obstacle
chains are inflated into thin capsules and unioned into the obstacle set.
Planning sees the difference of the two, where an edge whose best match comes
from the obstacle set is an obstacle and everything else is frontier. Keeping
the two sets apart means sensor noise cannot punch frontier slivers into
walls. Rings are re-simplified after every insert to keep vertex counts flat.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from polymap import clipping
from polymap.geometry import (
    EdgeKind,
    GeometryError,
    Point2,
    PolygonFace,
    TypedPolygonSet,
    TypedRing,
    simplify_polyline,
)

_ZERO_AREA = 1e-8


@dataclass(frozen=True)
class MapParams:
    robot_radius: float = 0.18
    obstacle_inflation: float = 0.05
    map_simplify_epsilon: float = 0.02
    min_frontier_length: float | None = None  # default: 2 * robot_radius
    match_mode: str = "pruned"

    @property
    def frontier_threshold(self) -> float:
        if self.min_frontier_length is not None:
            return self.min_frontier_length
        return 2.0 * self.robot_radius

    @property
    def chain_width(self) -> float:
        return self.obstacle_inflation + self.robot_radius


@dataclass(frozen=True)
class FrontierChain:
    """Maximal run of consecutive frontier edges on one combined-map ring."""

    points: tuple  # Point2 polyline; closed loops repeat the first point last
    length: float
    ring_id: int


def obstacle_chains(ring: TypedRing):
    """Maximal cyclic runs of obstacle edges, as vertex polylines."""
    n = len(ring)
    kinds = ring.kinds
    if all(k == EdgeKind.OBSTACLE for k in kinds):
        pts = list(ring.vertices) + [ring.vertices[0]]
        return [pts]
    if all(k == EdgeKind.FRONTIER for k in kinds):
        return []
    # start right after a non-obstacle edge so runs never wrap
    start = next(i for i in range(n) if kinds[i] != EdgeKind.OBSTACLE)
    chains = []
    run = None
    for j in range(1, n + 1):
        i = (start + j) % n
        if kinds[i] == EdgeKind.OBSTACLE:
            if run is None:
                run = [ring.vertices[i]]
            run.append(ring.vertices[(i + 1) % n])
        elif run is not None:
            chains.append(run)
            run = None
    if run is not None:
        chains.append(run)
    return chains


def _simplify_ring(ring: TypedRing, epsilon: float) -> TypedRing:
    """Kind-pinned reduction of a closed ring; falls back to the input when
    the result would be degenerate or self-intersecting."""
    n = len(ring)
    kinds = list(ring.kinds)
    verts = list(ring.vertices)
    transitions = [i for i in range(n) if kinds[i] != kinds[i - 1]]
    if transitions:
        anchors = transitions
    else:
        # uniform ring: anchor at two extreme vertices to open the loop
        lo = min(range(n), key=lambda i: verts[i])
        hi = max(range(n), key=lambda i: verts[i])
        if lo == hi:
            return ring
        anchors = sorted([lo, hi])
    out_v, out_k = [], []
    m = len(anchors)
    for a in range(m):
        i = anchors[a]
        j = anchors[(a + 1) % m]
        span = (j - i) % n or n
        chain = [verts[(i + t) % n] for t in range(span + 1)]
        chain_kinds = [kinds[(i + t) % n] for t in range(span)]
        sp, sk = simplify_polyline(chain, epsilon, chain_kinds)
        out_v.extend(sp[:-1])
        out_k.extend(sk)
    try:
        slim = TypedRing.build(out_v, out_k)
    except GeometryError:
        return ring
    if len(slim) >= n:
        return ring
    if slim.is_ccw != ring.is_ccw or not clipping.ring_is_simple(slim):
        return ring
    return slim


def simplify_set(s: TypedPolygonSet, epsilon: float) -> TypedPolygonSet:
    faces = []
    for f in s.faces:
        outer = _simplify_ring(f.outer, epsilon)
        holes = []
        for h in f.holes:
            try:
                holes.append(_simplify_ring(h, epsilon))
            except GeometryError:
                continue
        faces.append(PolygonFace.build(outer, holes))
    return TypedPolygonSet.from_faces(faces)


class ExplorationMap:
    """Single-writer map store; the polygon sets themselves are immutable, so
    snapshots and per-particle copies share structure safely."""

    def __init__(self, params: MapParams = MapParams()):
        self.params = params
        self.free_space = TypedPolygonSet.empty()
        self.obstacles = TypedPolygonSet.empty()
        self._combined: TypedPolygonSet | None = None
        self._dirty = True

    def copy(self) -> "ExplorationMap":
        dup = ExplorationMap(self.params)
        dup.free_space = self.free_space
        dup.obstacles = self.obstacles
        dup._combined = self._combined
        dup._dirty = self._dirty
        return dup

    def insert_scan(self, scan_poly: TypedRing) -> None:
        if abs(scan_poly.signed_area) < _ZERO_AREA:
            return
        mode = self.params.match_mode
        addition = TypedPolygonSet.single(scan_poly)
        self.free_space = clipping.union(self.free_space, addition, mode=mode)
        chains = obstacle_chains(scan_poly)
        if chains:
            grown = self.obstacles
            for chain in chains:
                capsule = clipping.inflate_chain(chain, self.params.chain_width)
                grown = clipping.union(grown, capsule, mode=mode)
            self.obstacles = grown
        eps = self.params.map_simplify_epsilon
        self.free_space = simplify_set(self.free_space, eps)
        self.obstacles = simplify_set(self.obstacles, eps)
        self._dirty = True

    def combined_map(self) -> TypedPolygonSet:
        """difference(free_space, obstacles); edges matching the obstacle set
        come back obstacle, everything else frontier. Cached until the next
        insert."""
        if not self._dirty and self._combined is not None:
            return self._combined
        if self.free_space.is_empty():
            self._combined = TypedPolygonSet.empty()
        else:
            self._combined = clipping.difference(
                self.free_space,
                self.obstacles,
                mode=self.params.match_mode,
                override_kinds=[EdgeKind.FRONTIER, EdgeKind.OBSTACLE],
            )
        self._dirty = False
        return self._combined

    def frontier_chains(self):
        return frontier_chains_of(self.combined_map(), self.params.frontier_threshold)


def frontier_chains_of(combined: TypedPolygonSet, threshold: float = 0.0):
    """Maximal frontier runs over all rings; chains shorter than `threshold`
    are dropped. An all-frontier ring is one closed chain."""
    chains = []
    for rid, ring in enumerate(combined.rings()):
        n = len(ring)
        kinds = ring.kinds
        if all(k == EdgeKind.FRONTIER for k in kinds):
            pts = tuple(list(ring.vertices) + [ring.vertices[0]])
            chains.append(FrontierChain(pts, ring.perimeter, rid))
            continue
        if all(k == EdgeKind.OBSTACLE for k in kinds):
            continue
        start = next(i for i in range(n) if kinds[i] != EdgeKind.FRONTIER)
        run = None
        for j in range(1, n + 1):
            i = (start + j) % n
            if kinds[i] == EdgeKind.FRONTIER:
                if run is None:
                    run = [ring.vertices[i]]
                run.append(ring.vertices[(i + 1) % n])
            elif run is not None:
                chains.append(_chain_of(run, rid))
                run = None
        if run is not None:
            chains.append(_chain_of(run, rid))
    return [c for c in chains if c.length >= threshold]


def _chain_of(points, rid: int) -> FrontierChain:
    length = sum(points[i].dist(points[i + 1]) for i in range(len(points) - 1))
    return FrontierChain(tuple(points), length, rid)


# ---------------------------------------------------------------------------
# serialization: {"rings": [{"outer": bool, "vertices": [[x, y]...],
#                            "kinds": ["O"|"F"...]}], "meta": {...}}
# ---------------------------------------------------------------------------

def polygon_set_to_dict(s: TypedPolygonSet, meta: dict | None = None) -> dict:
    rings = []
    for f in s.faces:
        for ring, outer in [(f.outer, True)] + [(h, False) for h in f.holes]:
            rings.append(
                {
                    "outer": outer,
                    "vertices": [
                        [round(v.x, 6), round(v.y, 6)] for v in ring.vertices
                    ],
                    "kinds": [k.char for k in ring.kinds],
                }
            )
    return {"rings": rings, "meta": dict(meta or {})}


def polygon_set_from_dict(doc: dict) -> TypedPolygonSet:
    rings = []
    for entry in doc["rings"]:
        ring = TypedRing.build(
            entry["vertices"], [EdgeKind.from_char(c) for c in entry["kinds"]]
        )
        want_ccw = bool(entry["outer"])
        if ring.is_ccw != want_ccw:
            ring = ring.reversed()
        rings.append(ring)
    return TypedPolygonSet.from_rings(rings)


def dump_polygon_set(s: TypedPolygonSet, path, meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(polygon_set_to_dict(s, meta), fh, separators=(",", ":"))
        fh.write("\n")


def load_polygon_set(path) -> TypedPolygonSet:
    with open(path) as fh:
        return polygon_set_from_dict(json.load(fh))
