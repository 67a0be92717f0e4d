"""Polygonal environment modeling for autonomous exploration."""

from polymap.geometry import (
    EdgeKind,
    Point2,
    PolygonFace,
    TypedEdge,
    TypedPolygonSet,
    TypedRing,
)

__all__ = [
    "EdgeKind",
    "Point2",
    "PolygonFace",
    "TypedEdge",
    "TypedPolygonSet",
    "TypedRing",
]
