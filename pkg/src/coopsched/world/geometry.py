"""Planar rectangles.

Everything that blocks or reflects a ray is an oriented rectangle stored as
a row ``(cx, cy, heading, length, width)``; buildings are the heading-0
special case.
"""

import math

import numpy as np


def rects_from_boxes(boxes) -> np.ndarray:
    """Axis-aligned ``(x_min, y_min, x_max, y_max)`` rows -> oriented-rect rows."""
    b = np.asarray(boxes, dtype=float).reshape(-1, 4)
    out = np.empty((b.shape[0], 5))
    out[:, 0] = (b[:, 0] + b[:, 2]) / 2
    out[:, 1] = (b[:, 1] + b[:, 3]) / 2
    out[:, 2] = 0.0
    out[:, 3] = b[:, 2] - b[:, 0]
    out[:, 4] = b[:, 3] - b[:, 1]
    return out


def rect_corners(rect) -> np.ndarray:
    cx, cy, h, length, width = rect
    c, s = math.cos(h), math.sin(h)
    hl, hw = length / 2, width / 2
    local = ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))
    return np.array([(cx + c * u - s * v, cy + s * u + c * v) for u, v in local])


def segment_hits_rect(p0, p1, rect) -> bool:
    """Does the closed segment p0-p1 touch the rectangle's interior or boundary?"""
    cx, cy, h, length, width = rect
    c, s = math.cos(h), math.sin(h)
    ox, oy = p0[0] - cx, p0[1] - cy
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    o = (c * ox + s * oy, -s * ox + c * oy)
    d = (c * dx + s * dy, -s * dx + c * dy)
    half = (length / 2, width / 2)
    lo, hi = 0.0, 1.0
    for k in range(2):
        if abs(d[k]) < 1e-12:
            if abs(o[k]) > half[k]:
                return False
            continue
        t1 = (-half[k] - o[k]) / d[k]
        t2 = (half[k] - o[k]) / d[k]
        if t1 > t2:
            t1, t2 = t2, t1
        lo, hi = max(lo, t1), min(hi, t2)
        if lo > hi:
            return False
    return True
