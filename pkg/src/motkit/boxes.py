"""Axis-aligned boxes in normalized center/size form, and their IoU."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    """Normalized (cx, cy, w, h); clamped to the unit square on output."""

    cx: float
    cy: float
    w: float
    h: float

    def clamped(self) -> "BoundingBox":
        cx = min(max(self.cx, 0.0), 1.0)
        cy = min(max(self.cy, 0.0), 1.0)
        return BoundingBox(cx, cy, max(self.w, 0.0), max(self.h, 0.0))

    def corners(self) -> tuple:
        """(x0, y0, x1, y1)"""
        return (self.cx - self.w / 2.0, self.cy - self.h / 2.0,
                self.cx + self.w / 2.0, self.cy + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when the union has zero area."""
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union
