"""Boolean operations and offsetting on kind-labeled polygon sets.

The raw sweep (union, difference, buffering) is delegated to GEOS on a fixed
0.1 mm integer grid. Edge labels do not survive a black-box sweep, so they are
restored afterwards: every output edge is compared against the input edges
and copies the label of the one with the lowest penalty

    P = p1 + p2 + |d1| + |d2|

where p1, p2 are the perpendicular distances of the input edge's endpoints to
the output edge's supporting line, d1 is the amount the output edge's bottom
vertex lies below the input edge's bottom vertex (counted only then), and d2
the amount its top vertex lies above the input edge's top vertex. Horizontal
input edges have no vertical extent and are compared by p1 + p2 alone.

Matching all pairs is quadratic, so a pruned matcher exploits vertical
ordering: input edges are grouped into bounds (maximal monotone chains in y
running from a local minimum to a local maximum), bounds are sorted by the y
of their local minimum and edges inside a bound by their bottom y. For an
input edge lying entirely above the output edge the d1 term alone is at least
the vertical gap, which gives a lower bound that lets whole bound suffixes be
skipped once a better match is known, and stops all further work when a
zero-penalty match exists. The pruned matcher evaluates every edge whose
lower bound could still win or tie, so its result - including tie-breaking -
is identical to brute force by construction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon

from polymap.geometry import (
    SNAP_TOLERANCE_M,
    EdgeKind,
    GeometryError,
    Point2,
    PolygonFace,
    TypedPolygonSet,
    TypedRing,
)

log = logging.getLogger(__name__)

SCALE = 1.0 / SNAP_TOLERANCE_M  # integer grid units per meter
_MIN_RING_AREA = 1.0  # one grid cell, scaled units²
DEFAULT_ARC_TOLERANCE_M = 0.01


# ---------------------------------------------------------------------------
# shapely bridge (scaled integer space)
# ---------------------------------------------------------------------------

def _scale_coords(coords) -> np.ndarray:
    return np.round(np.asarray(coords, dtype=float) * SCALE)


def to_shapely(s: TypedPolygonSet, scaled: bool = False):
    """Polygon/MultiPolygon for a set; `scaled` puts it on the integer grid."""
    polys = []
    for face in s.faces:
        shell = face.outer.coords_array()
        holes = [h.coords_array() for h in face.holes]
        if scaled:
            shell = _scale_coords(shell)
            holes = [_scale_coords(h) for h in holes]
        polys.append(Polygon(shell, holes))
    if not polys:
        geom = Polygon()
    elif len(polys) == 1:
        geom = polys[0]
    else:
        geom = shapely.multipolygons(np.array(polys, dtype=object))
    if scaled:
        geom = shapely.set_precision(geom, 1.0)
    return geom


def _extract_scaled_faces(geom) -> list:
    """(shell, holes) coordinate arrays per polygon; shell CCW, holes CW,
    closing vertex stripped. Non-polygonal parts and sub-grid slivers drop."""

    def ring_coords(lr, want_ccw: bool) -> np.ndarray:
        c = np.asarray(lr.coords, dtype=float)[:-1]
        x, y = c[:, 0], c[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if (area > 0) != want_ccw:
            c = c[::-1]
        return c

    def polygons_of(g):
        if g.is_empty:
            return
        if g.geom_type == "Polygon":
            yield g
        elif g.geom_type in ("MultiPolygon", "GeometryCollection"):
            for part in shapely.get_parts(g):
                yield from polygons_of(part)

    faces = []
    for part in polygons_of(geom):
        if part.area < _MIN_RING_AREA:
            continue
        shell = ring_coords(part.exterior, want_ccw=True)
        holes = [
            ring_coords(h, want_ccw=False)
            for h in part.interiors
            if Polygon(h).area >= _MIN_RING_AREA
        ]
        faces.append((shell, holes))
    return faces


# ---------------------------------------------------------------------------
# penalty
# ---------------------------------------------------------------------------

def edge_penalty(e_out, e_orig) -> float:
    """Penalty of matching output edge e_out to input edge e_orig, meters.

    Edges are TypedEdge or ((x, y), (x, y)) pairs. Horizontal e_orig is
    scored by the perpendicular terms only.
    """
    oa, ob = (e_out.a, e_out.b) if hasattr(e_out, "a") else e_out
    ia, ib = (e_orig.a, e_orig.b) if hasattr(e_orig, "a") else e_orig
    dx = ob[0] - oa[0]
    dy = ob[1] - oa[1]
    length = math.hypot(dx, dy)
    if length == 0.0:
        raise GeometryError("degenerate output edge")
    p1 = abs(dx * (ia[1] - oa[1]) - dy * (ia[0] - oa[0])) / length
    p2 = abs(dx * (ib[1] - oa[1]) - dy * (ib[0] - oa[0])) / length
    if ia[1] == ib[1]:  # horizontal input edge: no vertical extent
        return p1 + p2
    orig_bot, orig_top = min(ia[1], ib[1]), max(ia[1], ib[1])
    out_bot, out_top = min(oa[1], ob[1]), max(oa[1], ob[1])
    d1 = orig_bot - out_bot if out_bot < orig_bot else 0.0
    d2 = out_top - orig_top if out_top > orig_top else 0.0
    return p1 + p2 + d1 + d2


# ---------------------------------------------------------------------------
# edge table and bound index
# ---------------------------------------------------------------------------

class _EdgeTable:
    """Flat arrays (scaled space) of the input edges offered to the matcher."""

    def __init__(self, edges):
        # edges: iterable of (ax, ay, bx, by, kind, input_idx, edge_idx, ring_id);
        # edges degenerate after grid rounding are dropped here
        rows = [e for e in edges if (e[0], e[1]) != (e[2], e[3])]
        n = len(rows)
        self.n = n
        arr = np.array(rows, dtype=float).reshape(n, 8)
        self.ax, self.ay = arr[:, 0], arr[:, 1]
        self.bx, self.by = arr[:, 2], arr[:, 3]
        self.kind = arr[:, 4].astype(np.int64)
        self.input_idx = arr[:, 5].astype(np.int64)
        self.edge_idx = arr[:, 6].astype(np.int64)
        self.ring_id = arr[:, 7].astype(np.int64)
        self.bot = np.minimum(self.ay, self.by)
        self.top = np.maximum(self.ay, self.by)
        self.horizontal = self.ay == self.by


def _iter_set_edges(sets, override_kinds=None):
    rid = 0
    for si, s in enumerate(sets):
        override = None if override_kinds is None else override_kinds[si]
        ei = 0
        for ring in s.rings():
            coords = _scale_coords(ring.coords_array())
            m = len(coords)
            for i in range(m):
                a = coords[i]
                b = coords[(i + 1) % m]
                kind = ring.kinds[i] if override is None else override
                yield (a[0], a[1], b[0], b[1], int(kind), si, ei, rid)
                ei += 1
            rid += 1


@dataclass
class Bound:
    """Maximal monotone chain in y, local minimum to local maximum."""

    edges: list  # flat table indices, ordered by ascending bottom y
    min_y: float
    max_y: float


@dataclass
class BoundIndex:
    bounds: list
    num_edges: int

    def flat_order(self) -> np.ndarray:
        if not self.bounds:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.asarray(b.edges, dtype=np.int64) for b in self.bounds])


def _ring_bounds(table: _EdgeTable, idxs) -> list:
    """Split one ring's edge indices (traversal order) into bounds."""
    n = len(idxs)
    dirs = np.sign(table.by[idxs] - table.ay[idxs]).astype(int)
    nz = np.flatnonzero(dirs)
    if len(nz) == 0:
        # fully horizontal ring (degenerate); single flat bound
        ys = table.ay[idxs]
        return [Bound(list(idxs), float(ys.min()), float(ys.max()))]
    # rotate so the walk starts right after a direction change
    eff = dirs.copy()
    last = dirs[nz[-1]]
    for i in range(n):
        if eff[i] == 0:
            eff[i] = last
        else:
            last = eff[i]
    start = 0
    for i in range(n):
        if eff[i] != eff[i - 1]:
            start = i
            break
    order = [idxs[(start + i) % n] for i in range(n)]
    runs = []
    run = [order[0]]
    run_dir = eff[start]
    for k in range(1, n):
        i = order[k]
        d = eff[(start + k) % n]
        if d != run_dir:
            runs.append((run, run_dir))
            run = [i]
            run_dir = d
        else:
            run.append(i)
    runs.append((run, run_dir))
    bounds = []
    for run, d in runs:
        if d < 0:
            run = run[::-1]  # store bottom-to-top
        run.sort(key=lambda j: table.bot[j])  # flat steps keep y order exact
        bounds.append(
            Bound(run, float(table.bot[run[0]]), float(np.max(table.top[run])))
        )
    return bounds


def build_bound_index(inputs, override_kinds=None):
    """Group the inputs' edges into y-sorted bounds; returns (index, table)."""
    table = _EdgeTable(_iter_set_edges(inputs, override_kinds))
    bounds = []
    if table.n:
        # edges are emitted ring by ring, so ring runs are contiguous
        ring_breaks = np.flatnonzero(np.diff(table.ring_id)) + 1
        start = 0
        for stop in list(ring_breaks) + [table.n]:
            bounds.extend(_ring_bounds(table, list(range(start, stop))))
            start = stop
    bounds.sort(key=lambda b: b.min_y)
    return BoundIndex(bounds, table.n), table


# ---------------------------------------------------------------------------
# matchers
# ---------------------------------------------------------------------------

class EdgeMatcher:
    """Assigns each output edge the kind of its lowest-penalty input edge.

    Ties break toward obstacle, then lower input index, then lower edge
    index. `pruned` and `brute` return identical results; `pruned` skips
    edges whose vertical-gap lower bound already exceeds the best penalty.
    """

    def __init__(self, index: BoundIndex, table: _EdgeTable):
        self.table = table
        t = table
        flat = index.flat_order()
        vmask = ~t.horizontal[flat] if len(flat) else np.zeros(0, dtype=bool)
        v = flat[vmask]
        # stable sort keeps the bound order among equal bottoms
        v = v[np.argsort(t.bot[v], kind="stable")]
        self.v = v
        self.h = flat[~vmask] if len(flat) else flat
        self.vbot = t.bot[v]
        # contiguous copies of the sloped-edge columns for fast prefix slicing
        self.vax, self.vay = t.ax[v].copy(), t.ay[v].copy()
        self.vbx, self.vby = t.bx[v].copy(), t.by[v].copy()
        self.vtop = t.top[v].copy()
        self.hax, self.hay = t.ax[self.h].copy(), t.ay[self.h].copy()
        self.hbx, self.hby = t.bx[self.h].copy(), t.by[self.h].copy()

    @classmethod
    def from_sets(cls, inputs, override_kinds=None) -> "EdgeMatcher":
        index, table = build_bound_index(inputs, override_kinds)
        return cls(index, table)

    @property
    def empty(self) -> bool:
        return self.table.n == 0

    def _pen_sloped(self, lo, hi, oax, oay, obx, oby, length, obot, otop):
        ax, ay = self.vax[lo:hi], self.vay[lo:hi]
        bx, by = self.vbx[lo:hi], self.vby[lo:hi]
        p1 = np.abs((obx - oax) * (ay - oay) - (oby - oay) * (ax - oax))
        p2 = np.abs((obx - oax) * (by - oay) - (oby - oay) * (bx - oax))
        pen = (p1 + p2) / length
        pen += np.maximum(self.vbot[lo:hi] - obot, 0.0)
        pen += np.maximum(otop - self.vtop[lo:hi], 0.0)
        return pen

    def _pen_horizontal(self, oax, oay, obx, oby, length):
        p1 = np.abs((obx - oax) * (self.hay - oay) - (oby - oay) * (self.hax - oax))
        p2 = np.abs((obx - oax) * (self.hby - oay) - (oby - oay) * (self.hbx - oax))
        return (p1 + p2) / length

    def _select(self, parts):
        pmin = math.inf
        for pen, _ in parts:
            if len(pen):
                m = float(pen.min())
                if m < pmin:
                    pmin = m
        best_key = None
        best_edge = -1
        t = self.table
        for pen, idxs in parts:
            if not len(pen):
                continue
            for k in np.flatnonzero(pen == pmin):
                i = int(idxs[k])
                key = (t.kind[i] != EdgeKind.OBSTACLE, t.input_idx[i], t.edge_idx[i])
                if best_key is None or key < best_key:
                    best_key = key
                    best_edge = i
        return best_edge

    def _edge_frame(self, oax, oay, obx, oby):
        length = math.hypot(obx - oax, oby - oay)
        return length, min(oay, oby), max(oay, oby)

    def match_brute(self, oax, oay, obx, oby) -> int:
        length, obot, otop = self._edge_frame(oax, oay, obx, oby)
        parts = [
            (self._pen_sloped(0, len(self.v), oax, oay, obx, oby, length, obot, otop), self.v),
            (self._pen_horizontal(oax, oay, obx, oby, length), self.h),
        ]
        return self._select(parts)

    def match_pruned(self, oax, oay, obx, oby) -> int:
        length, obot, otop = self._edge_frame(oax, oay, obx, oby)
        k1 = int(np.searchsorted(self.vbot, otop, side="right"))
        parts = [
            (self._pen_sloped(0, k1, oax, oay, obx, oby, length, obot, otop), self.v[:k1]),
            (self._pen_horizontal(oax, oay, obx, oby, length), self.h),
        ]
        p1min = math.inf
        for pen, _ in parts:
            if len(pen):
                p1min = min(p1min, float(pen.min()))
        if k1 < len(self.v) and p1min > 0.0:
            hi = (
                len(self.v)
                if math.isinf(p1min)
                else int(np.searchsorted(self.vbot, otop + p1min, side="right"))
            )
            if hi > k1:
                parts.append(
                    (
                        self._pen_sloped(k1, hi, oax, oay, obx, oby, length, obot, otop),
                        self.v[k1:hi],
                    )
                )
        return self._select(parts)

    def kinds_for_ring(self, coords_scaled: np.ndarray, mode: str):
        n = len(coords_scaled)
        x, y = coords_scaled[:, 0], coords_scaled[:, 1]
        match = self.match_pruned if mode == "pruned" else self.match_brute
        kinds = []
        for i in range(n):
            j = (i + 1) % n
            if x[i] == x[j] and y[i] == y[j]:
                kinds.append(EdgeKind.FRONTIER)  # degenerate, dropped at build
                continue
            e = match(x[i], y[i], x[j], y[j])
            kinds.append(EdgeKind(self.table.kind[e]) if e >= 0 else EdgeKind.FRONTIER)
        return kinds


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _faces_to_set(scaled_faces, kinds_fn) -> TypedPolygonSet:
    faces = []
    for shell, holes in scaled_faces:
        try:
            outer = TypedRing.build(shell / SCALE, kinds_fn(shell))
        except GeometryError:
            continue
        built_holes = []
        for h in holes:
            try:
                built_holes.append(TypedRing.build(h / SCALE, kinds_fn(h)))
            except GeometryError:
                continue
        faces.append(PolygonFace.build(outer, built_holes))
    return TypedPolygonSet.from_faces(faces)


def assign_edge_types(
    output,
    inputs,
    mode: str = "pruned",
    override_kinds=None,
) -> TypedPolygonSet:
    """Label the edges of `output` (shapely geometry in meters, or a polygon
    set whose kinds are ignored) from the closest edges of `inputs`.

    With no input edges at all every output edge defaults to frontier and a
    diagnostic is logged. `override_kinds` relabels each input set wholesale
    before matching (used when attribution is by source map, not edge kind).
    """
    if isinstance(output, TypedPolygonSet):
        geom = to_shapely(output, scaled=True)
    else:
        geom = shapely.set_precision(
            shapely.transform(output, lambda c: np.round(c * SCALE)), 1.0
        )
    scaled_faces = _extract_scaled_faces(geom)
    matcher = EdgeMatcher.from_sets(inputs, override_kinds)
    if matcher.empty:
        log.warning("assign_edge_types: no input edges; defaulting to frontier")
        return _faces_to_set(
            scaled_faces, lambda c: [EdgeKind.FRONTIER] * len(c)
        )
    if mode == "geometry":
        return _faces_to_set(scaled_faces, lambda c: [EdgeKind.FRONTIER] * len(c))
    return _faces_to_set(scaled_faces, lambda c: matcher.kinds_for_ring(c, mode))


def boolean_op(
    a: TypedPolygonSet,
    b: TypedPolygonSet,
    op: str,
    mode: str = "pruned",
    override_kinds=None,
) -> TypedPolygonSet:
    """union or difference of two sets with edge kinds reassigned.

    mode: "pruned" (default) or "brute" select the matcher; "geometry" skips
    attribution entirely (bench baseline; all kinds come back frontier).
    """
    if op not in ("union", "difference"):
        raise ValueError(f"unsupported op {op!r}")
    if a.is_empty():
        return b if op == "union" else TypedPolygonSet.empty()
    if b.is_empty():
        return a
    ga = to_shapely(a, scaled=True)
    gb = to_shapely(b, scaled=True)
    g = shapely.union(ga, gb) if op == "union" else shapely.difference(ga, gb)
    scaled_faces = _extract_scaled_faces(g)
    if mode == "geometry":
        return _faces_to_set(scaled_faces, lambda c: [EdgeKind.FRONTIER] * len(c))
    matcher = EdgeMatcher.from_sets([a, b], override_kinds)
    if matcher.empty:
        log.warning("boolean_op: no input edges; defaulting to frontier")
        return _faces_to_set(scaled_faces, lambda c: [EdgeKind.FRONTIER] * len(c))
    return _faces_to_set(scaled_faces, lambda c: matcher.kinds_for_ring(c, mode))


def union(a, b, mode="pruned"):
    return boolean_op(a, b, "union", mode)


def difference(a, b, mode="pruned", override_kinds=None):
    return boolean_op(a, b, "difference", mode, override_kinds)


def _arc_quad_segs(radius: float, tolerance: float) -> int:
    if radius <= tolerance:
        return 4
    theta = 2.0 * math.acos(max(-1.0, 1.0 - tolerance / radius))
    return max(4, int(math.ceil((math.pi / 2.0) / theta)))


def offset_set(
    s: TypedPolygonSet,
    radius: float,
    arc_tolerance: float = DEFAULT_ARC_TOLERANCE_M,
    mode: str = "pruned",
) -> TypedPolygonSet:
    """Inflate the set by a disc of `radius`; convex corners become arcs with
    chord deviation below `arc_tolerance`. Edge kinds are reassigned against
    the pre-offset input. Holes shrink and may vanish."""
    if radius < 0:
        raise GeometryError("radius must be >= 0")
    if s.is_empty() or radius == 0.0:
        return s
    g = to_shapely(s, scaled=True)
    buf = g.buffer(radius * SCALE, quad_segs=_arc_quad_segs(radius, arc_tolerance))
    buf = shapely.set_precision(buf, 1.0)
    scaled_faces = _extract_scaled_faces(buf)
    matcher = EdgeMatcher.from_sets([s])
    return _faces_to_set(scaled_faces, lambda c: matcher.kinds_for_ring(c, mode))


def inflate_chain(
    points,
    width: float,
    arc_tolerance: float = DEFAULT_ARC_TOLERANCE_M,
) -> TypedPolygonSet:
    """Thin capsule around an open polyline (both sides + round caps), all
    edges obstacle. Used to turn sensed surface chains into obstacle area."""
    pts = _scale_coords(points)
    if len(pts) < 2 or width <= 0:
        return TypedPolygonSet.empty()
    line = LineString(pts)
    if line.length == 0:
        return TypedPolygonSet.empty()
    buf = line.buffer(width * SCALE, quad_segs=_arc_quad_segs(width, arc_tolerance))
    buf = shapely.set_precision(buf, 1.0)
    scaled_faces = _extract_scaled_faces(buf)
    return _faces_to_set(
        scaled_faces, lambda c: [EdgeKind.OBSTACLE] * len(c)
    )


def snap_ring(ring: TypedRing) -> TypedRing:
    """Round a ring's vertices onto the integer grid (kinds kept positionally)."""
    coords = _scale_coords(ring.coords_array()) / SCALE
    return TypedRing.build(coords, list(ring.kinds))


def ring_is_simple(ring: TypedRing) -> bool:
    return Polygon(_scale_coords(ring.coords_array())).is_valid


def repair_ring(ring: TypedRing, anchor: Point2) -> TypedRing:
    """Resolve a self-intersecting ring by a self-union, keeping the face that
    contains (or is nearest to) `anchor`; kinds are re-matched from the
    original edges. Holes produced by the repair are dropped."""
    poly = Polygon(_scale_coords(ring.coords_array()))
    fixed = shapely.set_precision(shapely.make_valid(poly), 1.0)
    fixed = shapely.unary_union(fixed)
    scaled_faces = _extract_scaled_faces(fixed)
    if not scaled_faces:
        raise GeometryError("ring vanished during repair")
    pt = Point(anchor.x * SCALE, anchor.y * SCALE)
    best = None
    for shell, holes in scaled_faces:
        p = Polygon(shell)
        if p.covers(pt):
            best = shell
            break
    if best is None:
        best = max(scaled_faces, key=lambda f: Polygon(f[0]).area)[0]
    matcher = EdgeMatcher.from_sets([_ring_as_set(ring)])
    kinds = matcher.kinds_for_ring(best, "pruned")
    return TypedRing.build(best / SCALE, kinds)


def _ring_as_set(ring: TypedRing) -> TypedPolygonSet:
    # Wrap without orientation normalization side effects on kinds
    r = ring if ring.is_ccw else ring.reversed()
    return TypedPolygonSet((PolygonFace(r, ()),))
