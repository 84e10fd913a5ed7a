"""Axis-aligned rectangle arithmetic and qualitative spatial predicates.

Boxes follow the (x, y, w, h) convention with a top-left origin and y
growing downward.  Rectangles are treated as half-open pixel regions, so
the intersection width of two boxes is ``max(0, min(x1+w1, x2+w2) -
max(x1, x2))``.  Coordinates may be negative (partially off-screen boxes
are legal); widths and heights must be strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "BBox2D",
    "IntervalRelation",
    "RectRelation",
    "iou",
    "iou_matrix",
    "scaled_iou",
    "interval_relation",
    "rect_relation",
    "overlapping_top",
    "proper_part",
    "in_front_region",
]

IOU_SCALE = 100_000


@dataclass(frozen=True, slots=True)
class BBox2D:
    """Axis-aligned box: left edge, top edge, width, height (pixels)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate box: w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def translated(self, dx: float, dy: float) -> "BBox2D":
        return BBox2D(self.x + dx, self.y + dy, self.w, self.h)


class IntervalRelation(Enum):
    """The 13 Allen relations between two non-degenerate intervals."""

    BEFORE = "before"
    AFTER = "after"
    MEETS = "meets"
    MET_BY = "met_by"
    OVERLAPS = "overlaps"
    OVERLAPPED_BY = "overlapped_by"
    STARTS = "starts"
    STARTED_BY = "started_by"
    DURING = "during"
    CONTAINS = "contains"
    FINISHES = "finishes"
    FINISHED_BY = "finished_by"
    EQUAL = "equal"


_INVERSE = {
    IntervalRelation.BEFORE: IntervalRelation.AFTER,
    IntervalRelation.AFTER: IntervalRelation.BEFORE,
    IntervalRelation.MEETS: IntervalRelation.MET_BY,
    IntervalRelation.MET_BY: IntervalRelation.MEETS,
    IntervalRelation.OVERLAPS: IntervalRelation.OVERLAPPED_BY,
    IntervalRelation.OVERLAPPED_BY: IntervalRelation.OVERLAPS,
    IntervalRelation.STARTS: IntervalRelation.STARTED_BY,
    IntervalRelation.STARTED_BY: IntervalRelation.STARTS,
    IntervalRelation.DURING: IntervalRelation.CONTAINS,
    IntervalRelation.CONTAINS: IntervalRelation.DURING,
    IntervalRelation.FINISHES: IntervalRelation.FINISHED_BY,
    IntervalRelation.FINISHED_BY: IntervalRelation.FINISHES,
    IntervalRelation.EQUAL: IntervalRelation.EQUAL,
}


def invert(rel: IntervalRelation) -> IntervalRelation:
    """Relation of (b, a) given the relation of (a, b)."""
    return _INVERSE[rel]


@dataclass(frozen=True, slots=True)
class RectRelation:
    """Pair of Allen relations: x-axis projections and y-axis projections."""

    horizontal: IntervalRelation
    vertical: IntervalRelation


def interval_relation(a1: float, a2: float, b1: float, b2: float) -> IntervalRelation:
    """Allen relation of interval [a1, a2) relative to [b1, b2).

    Exactly one of the 13 relations holds for any pair of non-degenerate
    intervals (a1 < a2, b1 < b2).
    """
    if a2 < b1:
        return IntervalRelation.BEFORE
    if a2 == b1:
        return IntervalRelation.MEETS
    if b2 < a1:
        return IntervalRelation.AFTER
    if b2 == a1:
        return IntervalRelation.MET_BY
    if a1 == b1:
        if a2 == b2:
            return IntervalRelation.EQUAL
        return IntervalRelation.STARTS if a2 < b2 else IntervalRelation.STARTED_BY
    if a2 == b2:
        return IntervalRelation.FINISHES if a1 > b1 else IntervalRelation.FINISHED_BY
    if a1 > b1 and a2 < b2:
        return IntervalRelation.DURING
    if a1 < b1 and a2 > b2:
        return IntervalRelation.CONTAINS
    return IntervalRelation.OVERLAPS if a1 < b1 else IntervalRelation.OVERLAPPED_BY


def rect_relation(a: BBox2D, b: BBox2D) -> RectRelation:
    """Rectangle-algebra relation: Allen relation per projected axis."""
    return RectRelation(
        horizontal=interval_relation(a.x, a.x2, b.x, b.x2),
        vertical=interval_relation(a.y, a.y2, b.y, b.y2),
    )


def iou(a: BBox2D, b: BBox2D) -> float:
    """Intersection over union in [0, 1]; 0 for disjoint boxes.

    For integer-valued boxes the intersection and union areas are exact
    in double precision and the result is one correctly-rounded division.
    """
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def scaled_iou(a: BBox2D, b: BBox2D) -> int:
    """IoU scaled by 100000 and rounded to the nearest integer (ties to even)."""
    return int(round(IOU_SCALE * iou(a, b)))


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (N, 4) / (M, 4) arrays of (x, y, w, h) rows."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    ax1, ay1 = a[:, 0:1], a[:, 1:2]
    ax2, ay2 = ax1 + a[:, 2:3], ay1 + a[:, 3:4]
    bx1, by1 = b[None, :, 0], b[None, :, 1]
    bx2, by2 = bx1 + b[None, :, 2], by1 + b[None, :, 3]
    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] * a[:, 3])[:, None]
    area_b = (b[:, 2] * b[:, 3])[None, :]
    union = area_a + area_b - inter
    with np.errstate(invalid="ignore"):
        out = np.where(inter > 0, inter / union, 0.0)
    return out


def overlapping_top(a: BBox2D, b: BBox2D) -> bool:
    """True iff a overlaps b and b's bottom edge is at or below a's.

    Under the ground-plane assumption a lower bottom edge means b is
    nearer the camera, i.e. a could hide behind b.
    """
    return iou(a, b) > 0 and b.y2 >= a.y2


def proper_part(a: BBox2D, b: BBox2D) -> bool:
    """True iff a lies strictly inside b (no shared or crossed edges)."""
    return b.x < a.x and b.y < a.y and a.x2 < b.x2 and a.y2 < b.y2


def in_front_region(
    p: tuple[float, float],
    frame_geom: tuple[float, float],
    x_band: tuple[float, float] = (1.0 / 3.0, 2.0 / 3.0),
    y_min_frac: float = 0.5,
) -> bool:
    """True iff point p falls in the ego corridor of the image.

    Default corridor: central third of the width, lower half of the
    height (inclusive boundaries).  The band fractions are configuration.
    """
    w, h = frame_geom
    x, y = p
    return (x_band[0] * w <= x <= x_band[1] * w) and (y >= y_min_frac * h)
