"""2D LiDAR scanning with occlusion.

The azimuth sweep is a fixed fan of rays at multiples of the angular
resolution. The number of points on a target is

    (# azimuth rays whose first hit is the target) * (# laser channels whose
    beam height at the target's distance lies on the object)

The fast path z-buffers every occluder over only the rays inside its angular
span (compiled with numba). :func:`raycast_points_bruteforce` is an
independent slow path, one ray at a time against every edge, used to check
it.

A rectangle that contains the sensor (overlapping footprints) neither
blocks rays nor receives points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .geometry import rect_corners


@dataclass(frozen=True)
class LidarSpec:
    channels: int = 64
    vfov_deg: float = 26.8
    max_range_m: float = 100.0
    azimuth_res_deg: float = 0.09
    mount_height_m: float = 1.9
    object_height_m: float = 1.7
    rate_bps_64ch: float = 33.27e6

    def __post_init__(self):
        if self.channels not in (16, 32, 64):
            raise ValueError(f"channels must be 16, 32 or 64, got {self.channels}")

    @property
    def n_rays(self) -> int:
        return int(round(360.0 / self.azimuth_res_deg))

    @property
    def res_rad(self) -> float:
        return 2 * math.pi / self.n_rays

    def full_frame_bits(self, delta_t_s: float = 0.1) -> float:
        return self.rate_bps_64ch * self.channels / 64.0 * delta_t_s

    def elevations_rad(self) -> np.ndarray:
        half = self.vfov_deg / 2
        return np.radians(np.linspace(-half, half, self.channels))

    def vertical_hits(self, distance_m: float) -> int:
        """Channels whose beam height at ``distance_m`` falls within [0, object height]."""
        z = self.mount_height_m + distance_m * np.tan(self.elevations_rad())
        return int(np.count_nonzero((z >= 0.0) & (z <= self.object_height_m)))


@lru_cache(maxsize=8)
def _ray_dirs(n_rays: int):
    ang = np.arange(n_rays) * (2 * math.pi / n_rays)
    return np.cos(ang), np.sin(ang)


@njit(cache=True)
def _slab(ox, oy, dx, dy, hl, hw):
    # ray origin/direction already in the rectangle frame; returns entry distance or -1
    t_lo = -1e300
    t_hi = 1e300
    if abs(dx) < 1e-15:
        if abs(ox) > hl:
            return -1.0
    else:
        t1 = (-hl - ox) / dx
        t2 = (hl - ox) / dx
        if t1 > t2:
            t1, t2 = t2, t1
        t_lo = max(t_lo, t1)
        t_hi = min(t_hi, t2)
    if abs(dy) < 1e-15:
        if abs(oy) > hw:
            return -1.0
    else:
        t1 = (-hw - oy) / dy
        t2 = (hw - oy) / dy
        if t1 > t2:
            t1, t2 = t2, t1
        t_lo = max(t_lo, t1)
        t_hi = min(t_hi, t2)
    if t_lo > t_hi or t_lo < 0.0:
        return -1.0
    return t_lo


@njit(cache=True)
def _span(px, py, cx, cy, c, s, hl, hw, res, n_rays):
    # ray index range [k_lo, k_hi] (possibly negative / > n_rays, wrap with %) covering the rect
    a_ref = math.atan2(cy - py, cx - px)
    lo = 0.0
    hi = 0.0
    for i in range(4):
        u = hl if i == 0 or i == 3 else -hl
        v = hw if i < 2 else -hw
        x = cx + c * u - s * v
        y = cy + s * u + c * v
        d = math.atan2(y - py, x - px) - a_ref
        while d > math.pi:
            d -= 2 * math.pi
        while d <= -math.pi:
            d += 2 * math.pi
        lo = min(lo, d)
        hi = max(hi, d)
    k_lo = int(math.floor((a_ref + lo) / res)) - 1
    k_hi = int(math.ceil((a_ref + hi) / res)) + 1
    if k_hi - k_lo >= n_rays:
        k_hi = k_lo + n_rays - 1
    return k_lo, k_hi


@njit(cache=True)
def _zbuffer(px, py, rects, cosr, sinr, res, max_range, depth, owner):
    n_rays = cosr.shape[0]
    for m in range(rects.shape[0]):
        cx, cy, h, length, width = rects[m, 0], rects[m, 1], rects[m, 2], rects[m, 3], rects[m, 4]
        hl = length / 2
        hw = width / 2
        c = math.cos(h)
        s = math.sin(h)
        ox = c * (px - cx) + s * (py - cy)
        oy = -s * (px - cx) + c * (py - cy)
        if abs(ox) <= hl and abs(oy) <= hw:
            continue
        # closest possible distance beyond range -> invisible
        qx = max(abs(ox) - hl, 0.0)
        qy = max(abs(oy) - hw, 0.0)
        if qx * qx + qy * qy >= max_range * max_range:
            continue
        k_lo, k_hi = _span(px, py, cx, cy, c, s, hl, hw, res, n_rays)
        for k in range(k_lo, k_hi + 1):
            idx = k % n_rays
            dx = c * cosr[idx] + s * sinr[idx]
            dy = -s * cosr[idx] + c * sinr[idx]
            t = _slab(ox, oy, dx, dy, hl, hw)
            if t >= 0.0 and t < depth[idx]:
                depth[idx] = t
                owner[idx] = m


@njit(cache=True)
def _first_hits(px, py, rects, cosr, sinr, res, max_range, depth, out):
    # per target: rays that reach it before depth[] (targets do not occlude each other)
    n_rays = cosr.shape[0]
    for m in range(rects.shape[0]):
        cx, cy, h, length, width = rects[m, 0], rects[m, 1], rects[m, 2], rects[m, 3], rects[m, 4]
        hl = length / 2
        hw = width / 2
        c = math.cos(h)
        s = math.sin(h)
        ox = c * (px - cx) + s * (py - cy)
        oy = -s * (px - cx) + c * (py - cy)
        out[m] = 0
        if abs(ox) <= hl and abs(oy) <= hw:
            continue
        k_lo, k_hi = _span(px, py, cx, cy, c, s, hl, hw, res, n_rays)
        cnt = 0
        for k in range(k_lo, k_hi + 1):
            idx = k % n_rays
            dx = c * cosr[idx] + s * sinr[idx]
            dy = -s * cosr[idx] + c * sinr[idx]
            t = _slab(ox, oy, dx, dy, hl, hw)
            if t >= 0.0 and t < max_range and t < depth[idx]:
                cnt += 1
        out[m] = cnt


def azimuth_counts(sensor_xy, lidar: LidarSpec, occluders: np.ndarray, passive: np.ndarray = None):
    """Azimuth ray counts seen from ``sensor_xy``.

    ``occluders`` are rect rows that both block rays and are counted as
    targets (vehicles, buildings). ``passive`` rect rows (pedestrians) are
    counted but block nothing. Returns ``(occluder_counts, passive_counts)``.
    """
    cosr, sinr = _ray_dirs(lidar.n_rays)
    occ = np.ascontiguousarray(occluders, dtype=float).reshape(-1, 5)
    depth = np.full(lidar.n_rays, lidar.max_range_m)
    owner = np.full(lidar.n_rays, -1, dtype=np.int64)
    px, py = float(sensor_xy[0]), float(sensor_xy[1])
    _zbuffer(px, py, occ, cosr, sinr, lidar.res_rad, lidar.max_range_m, depth, owner)
    occ_counts = np.bincount(owner[owner >= 0], minlength=occ.shape[0])[: occ.shape[0]]
    if passive is None or len(passive) == 0:
        return occ_counts, np.zeros(0, dtype=np.int64)
    pas = np.ascontiguousarray(passive, dtype=float).reshape(-1, 5)
    pas_counts = np.zeros(pas.shape[0], dtype=np.int64)
    _first_hits(px, py, pas, cosr, sinr, lidar.res_rad, lidar.max_range_m, depth, pas_counts)
    return occ_counts, pas_counts


def raycast_points(sensor_xy, lidar: LidarSpec, blockers, target, target_blocks: bool = True) -> int:
    """Points on one target rect given the rects that can occlude it.

    ``blockers`` must already exclude the sensor's own footprint and the target.
    """
    target = np.asarray(target, dtype=float).reshape(1, 5)
    blk = np.asarray(blockers, dtype=float).reshape(-1, 5)
    cosr, sinr = _ray_dirs(lidar.n_rays)
    depth = np.full(lidar.n_rays, lidar.max_range_m)
    owner = np.full(lidar.n_rays, -1, dtype=np.int64)
    px, py = float(sensor_xy[0]), float(sensor_xy[1])
    _zbuffer(px, py, np.ascontiguousarray(blk), cosr, sinr, lidar.res_rad, lidar.max_range_m, depth, owner)
    out = np.zeros(1, dtype=np.int64)
    _first_hits(px, py, np.ascontiguousarray(target), cosr, sinr, lidar.res_rad, lidar.max_range_m, depth, out)
    dist = math.hypot(target[0, 0] - px, target[0, 1] - py)
    return int(out[0]) * lidar.vertical_hits(dist)


def _ray_segment_hits(px, py, dx, dy, a, b):
    """Distances along the ray to each segment a[i]-b[i] (inf where missed)."""
    ex = b[:, 0] - a[:, 0]
    ey = b[:, 1] - a[:, 1]
    wx = a[:, 0] - px
    wy = a[:, 1] - py
    den = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wx * ey - wy * ex) / den
        u = (wx * dy - wy * dx) / den
    ok = (np.abs(den) > 1e-15) & (t >= 0) & (u >= 0) & (u <= 1)
    return np.where(ok, t, np.inf)


def _contains(corners, px, py) -> bool:
    # convex polygon: the point is on the inner side of all four edges
    cross = [(corners[(i + 1) % 4][0] - corners[i][0]) * (py - corners[i][1])
             - (corners[(i + 1) % 4][1] - corners[i][1]) * (px - corners[i][0]) for i in range(4)]
    return all(c >= 0 for c in cross) or all(c <= 0 for c in cross)


def _edges(rects, px, py):
    a, b = [], []
    for r in np.asarray(rects, dtype=float).reshape(-1, 5):
        c = rect_corners(r)
        if _contains(c, px, py):
            continue
        for i in range(4):
            a.append(c[i])
            b.append(c[(i + 1) % 4])
    if not a:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.array(a), np.array(b)


def raycast_points_bruteforce(sensor_xy, lidar: LidarSpec, blockers, target) -> int:
    """Reference count: every ray of the fan tested against every edge, no pruning."""
    px, py = float(sensor_xy[0]), float(sensor_xy[1])
    ta, tb = _edges(target, px, py)
    ba, bb = _edges(blockers, px, py)
    res = 2 * math.pi / lidar.n_rays
    n_az = 0
    for k in range(lidar.n_rays):
        dx, dy = math.cos(k * res), math.sin(k * res)
        if not len(ta):
            break
        t_hit = _ray_segment_hits(px, py, dx, dy, ta, tb).min()
        if not t_hit < lidar.max_range_m:
            continue
        if len(ba) and _ray_segment_hits(px, py, dx, dy, ba, bb).min() <= t_hit:
            continue
        n_az += 1
    tgt = np.asarray(target, dtype=float).reshape(5)
    dist = math.hypot(tgt[0] - px, tgt[1] - py)
    return n_az * lidar.vertical_hits(dist)
