import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymap import clipping
from polymap.clipping import (
    boolean_op,
    build_bound_index,
    difference,
    edge_penalty,
    inflate_chain,
    offset_set,
    repair_ring,
    ring_is_simple,
    union,
)
from polymap.geometry import EdgeKind, Point2, TypedPolygonSet, TypedRing

from support import (
    grid_aligned,
    random_typed_set,
    raster_frame,
    rasterize_set,
    serialize_kinds,
)

O = EdgeKind.OBSTACLE
F = EdgeKind.FRONTIER


def square(x0, y0, side, kind=O) -> TypedPolygonSet:
    ring = TypedRing.uniform(
        [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)], kind
    )
    return TypedPolygonSet.single(ring)


class TestEdgePenalty:
    def test_identical_edges_zero(self):
        e = ((0.3, 0.7), (1.1, 2.4))
        assert edge_penalty(e, e) == 0.0

    def test_parallel_offset(self):
        # orig (0,0)-(0,2) against out (1,0)-(1,2): p1=p2=1, no d terms
        assert edge_penalty(((1, 0), (1, 2)), ((0, 0), (0, 2))) == pytest.approx(2.0)

    def test_vertical_overshoot(self):
        # out extends one unit past orig on both ends: d1=d2=1
        assert edge_penalty(((0, -1), (0, 3)), ((0, 0), (0, 2))) == pytest.approx(2.0)

    def test_horizontal_orig_ignores_d_terms(self):
        # horizontal orig far below: only perpendicular terms count
        p = edge_penalty(((0, 5), (0, 7)), ((-1, 0), (1, 0)))
        assert p == pytest.approx(1.0 + 1.0)

    @given(
        st.tuples(
            st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10)
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_self_penalty_zero(self, coords):
        ax, ay, bx, by = coords
        if (ax, ay) == (bx, by):
            return
        assert edge_penalty(((ax, ay), (bx, by)), ((ax, ay), (bx, by))) == 0.0


class TestBooleanOp:
    def test_overlapping_rectangles(self):
        a = square(0, 0, 1)
        b = TypedPolygonSet.single(
            TypedRing.uniform([(0.5, 0), (1.5, 0), (1.5, 1), (0.5, 1)], O)
        )
        u = union(a, b)
        assert len(list(u.rings())) == 1
        assert u.area == pytest.approx(1.5, abs=1e-6)

    def test_disjoint_squares(self):
        u = union(square(0, 0, 1), square(3, 0, 1))
        assert len(list(u.rings())) == 2
        assert u.area == pytest.approx(2.0, abs=1e-6)

    def test_union_with_empty_is_identity(self):
        rng = np.random.default_rng(0)
        a = random_typed_set(rng)
        for u in (union(a, TypedPolygonSet.empty()), union(TypedPolygonSet.empty(), a)):
            assert serialize_kinds(u) == serialize_kinds(a)

    def test_difference_from_empty(self):
        a = square(0, 0, 1)
        assert difference(TypedPolygonSet.empty(), a).is_empty()
        assert serialize_kinds(difference(a, TypedPolygonSet.empty())) == serialize_kinds(a)

    def test_difference_creates_hole(self):
        outer = square(0, 0, 4, O)
        inner = square(1.5, 1.5, 1, O)
        d = difference(outer, inner)
        assert d.area == pytest.approx(15.0, abs=1e-6)
        assert len(d.faces) == 1
        assert len(d.faces[0].holes) == 1

    def test_identity_union_copies_types_verbatim(self):
        rng = np.random.default_rng(5)
        a = grid_aligned(random_typed_set(rng))
        u = union(a, a)
        assert serialize_kinds(u) == serialize_kinds(a)

    def test_random_pairs_vs_raster_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            a = random_typed_set(rng, center=(0.0, 0.0))
            b = random_typed_set(rng, center=tuple(rng.uniform(-0.8, 0.8, 2)))
            u = union(a, b)
            frame = raster_frame([a, b], 0.001)
            ra = rasterize_set(a, *frame, 0.001)
            rb = rasterize_set(b, *frame, 0.001)
            ru = rasterize_set(u, *frame, 0.001)
            sym = np.logical_xor(ra | rb, ru).sum() * 0.001**2
            assert sym <= 0.005 * u.area

            d = difference(a, b)
            if not d.is_empty():
                rd = rasterize_set(d, *frame, 0.001)
                sym_d = np.logical_xor(ra & ~rb, rd).sum() * 0.001**2
                assert sym_d <= 0.005 * max(u.area, 1e-9)

    def test_union_commutes_geometrically(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            a = random_typed_set(rng)
            b = random_typed_set(rng, center=(0.5, 0.2))
            ab = union(a, b)
            ba = union(b, a)
            assert ab.area == pytest.approx(ba.area, abs=1e-6)

    def test_area_bounds(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            a = random_typed_set(rng)
            b = random_typed_set(rng, center=(0.3, -0.4))
            tol = 1e-6
            assert union(a, b).area >= max(a.area, b.area) - tol
            assert difference(a, b).area <= a.area + tol


class TestAssignEdgeTypes:
    def test_shared_local_minimum_vertex(self):
        # two diamonds touching at the origin; the upper one is frontier, the
        # lower obstacle; edges incident to the shared vertex keep their own kind
        up = TypedPolygonSet.single(
            TypedRing.uniform([(0, 0), (1, 1), (0, 2), (-1, 1)], F)
        )
        down = TypedPolygonSet.single(
            TypedRing.uniform([(0, -2), (1, -1), (0, 0), (-1, -1)], O)
        )
        for mode in ("pruned", "brute"):
            u = boolean_op(up, down, "union", mode=mode)
            for e in u.edges():
                mid_y = 0.5 * (e.a.y + e.b.y)
                assert e.kind == (F if mid_y > 0 else O)

    def test_pruned_equals_brute_on_random_unions(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            a = random_typed_set(rng)
            b = random_typed_set(rng, center=tuple(rng.uniform(-0.7, 0.7, 2)))
            up = boolean_op(a, b, "union", mode="pruned")
            ub = boolean_op(a, b, "union", mode="brute")
            assert serialize_kinds(up) == serialize_kinds(ub)
            dp = boolean_op(a, b, "difference", mode="pruned")
            db = boolean_op(a, b, "difference", mode="brute")
            assert serialize_kinds(dp) == serialize_kinds(db)

    def test_no_inputs_defaults_frontier(self):
        sq = square(0, 0, 1)
        out = clipping.assign_edge_types(sq, [TypedPolygonSet.empty()])
        assert all(e.kind == F for e in out.edges())

    def test_override_kinds_relabel_by_source(self):
        free = square(0, 0, 4, F)
        obs = square(1, 1, 1, F)  # input kinds deliberately wrong
        d = boolean_op(free, obs, "difference", override_kinds=[F, O])
        for face in d.faces:
            assert all(k == F for k in face.outer.kinds)
            for h in face.holes:
                assert all(k == O for k in h.kinds)


class TestBoundIndex:
    def test_every_edge_in_exactly_one_bound(self):
        rng = np.random.default_rng(3)
        s = random_typed_set(rng, n=17)
        idx, table = build_bound_index([s])
        seen = sorted(i for b in idx.bounds for i in b.edges)
        assert seen == list(range(table.n))

    def test_bounds_sorted_and_monotone(self):
        rng = np.random.default_rng(4)
        s = random_typed_set(rng, n=23)
        idx, table = build_bound_index([s])
        mins = [b.min_y for b in idx.bounds]
        assert mins == sorted(mins)
        for b in idx.bounds:
            bots = [table.bot[i] for i in b.edges]
            assert bots == sorted(bots)
            assert b.min_y == pytest.approx(min(bots))

    def test_convex_ring_has_two_bounds(self):
        # a lens-like convex quad: one ascending chain per side
        s = TypedPolygonSet.single(
            TypedRing.uniform([(0, 0), (1, 1), (0, 3), (-1, 1)], O)
        )
        idx, _ = build_bound_index([s])
        assert len(idx.bounds) == 2

    def test_coincident_output_edge_matches_zero_penalty(self):
        s = square(0, 0, 2, O)
        u = union(s, s)
        assert serialize_kinds(u) == serialize_kinds(s)


class TestOffsetSet:
    def test_radius_zero_identity(self):
        rng = np.random.default_rng(8)
        s = random_typed_set(rng)
        assert serialize_kinds(offset_set(s, 0.0)) == serialize_kinds(s)

    @pytest.mark.parametrize("r", [0.1, 0.25, 0.5])
    def test_square_matches_minkowski_area(self, r):
        s = square(0, 0, 2, O)
        inflated = offset_set(s, r)
        expected = 4.0 + 8.0 * r + math.pi * r * r
        assert inflated.area == pytest.approx(expected, rel=0.01)
        assert all(e.kind == O for e in inflated.edges())

    def test_gap_smaller_than_diameter_merges(self):
        a = square(0, 0, 1)
        b = square(1.4, 0, 1)  # gap 0.4 < 2 * 0.25
        merged = offset_set(union(a, b), 0.25)
        assert len(merged.faces) == 1

    def test_monotone_in_radius(self):
        rng = np.random.default_rng(15)
        s = random_typed_set(rng)
        areas = [offset_set(s, r).area for r in (0.0, 0.1, 0.2, 0.4)]
        assert all(a2 >= a1 - 1e-9 for a1, a2 in zip(areas, areas[1:]))

    def test_hole_vanishes_at_large_radius(self):
        d = difference(square(0, 0, 4, O), square(1.8, 1.8, 0.4, O))
        assert len(d.faces[0].holes) == 1
        out = offset_set(d, 0.5)
        assert all(len(f.holes) == 0 for f in out.faces)


class TestChainAndRepair:
    def test_inflate_chain_capsule(self):
        w = 0.1
        caps = inflate_chain([(0, 0), (2, 0)], w)
        expected = 2 * 2 * w / 2 * 2 + math.pi * w * w  # rect + two half-discs
        expected = 2 * (2 * w) + math.pi * w * w
        assert caps.area == pytest.approx(2 * 2 * w + math.pi * w * w, rel=0.02)
        assert all(e.kind == O for e in caps.edges())

    def test_repair_bowtie(self):
        bow = TypedRing(
            tuple(Point2(*p) for p in [(0, 0), (2, 2), (2, 0), (0, 2)]),
            (O, O, O, O),
        )
        assert not ring_is_simple(bow)
        fixed = repair_ring(bow, Point2(0.5, 0.75))
        assert ring_is_simple(fixed)
        # the kept face is the one containing the anchor (left triangle)
        assert fixed.signed_area == pytest.approx(1.0, abs=1e-3)
