"""Manhattan-grid mobility generator.

A square grid of building blocks separated by bidirectional streets (two
lanes per direction plus a sidewalk on each side). Cars drive on lanes,
follow the car ahead, stop at fixed-cycle traffic lights and pick a turn
when they enter a street segment. Pedestrians appear at sidewalk endpoints
and walk to the other end.

This is a queueing/occlusion generator, not a traffic-engineering model:
cars turn instantly at intersection centres and conflicts inside
intersections are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..rng import substream
from .trace import PED_SIZE_M, WorldFrame

KMH = 1.0 / 3.6

# E, N, W, S
_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


@dataclass(frozen=True)
class ManhattanMap:
    n_blocks: int = 4
    block_m: float = 200.0
    lanes_per_dir: int = 2
    lane_w: float = 3.5
    sidewalk_w: float = 3.0

    @property
    def street_w(self) -> float:
        return 2 * (self.lanes_per_dir * self.lane_w + self.sidewalk_w)

    @property
    def pitch(self) -> float:
        return self.block_m + self.street_w

    @property
    def n_nodes(self) -> int:
        return self.n_blocks + 1

    def node_xy(self, i, j):
        return i * self.pitch, j * self.pitch

    def has_node(self, i, j):
        return 0 <= i < self.n_nodes and 0 <= j < self.n_nodes

    def buildings(self) -> np.ndarray:
        h = self.street_w / 2
        out = []
        for bi in range(self.n_blocks):
            for bj in range(self.n_blocks):
                x0, y0 = bi * self.pitch, bj * self.pitch
                out.append((x0 + h, y0 + h, x0 + self.pitch - h, y0 + self.pitch - h))
        return np.array(out, dtype=float)

    def sidewalks(self) -> np.ndarray:
        """(start_xy, end_xy) per block side, shape (4 * n_blocks**2, 2, 2)."""
        off = self.sidewalk_w / 2
        segs = []
        for x0, y0, x1, y1 in self.buildings():
            segs.append(((x0, y0 - off), (x1, y0 - off)))
            segs.append(((x1 + off, y0), (x1 + off, y1)))
            segs.append(((x1, y1 + off), (x0, y1 + off)))
            segs.append(((x0 - off, y1), (x0 - off, y0)))
        return np.array(segs, dtype=float)


@dataclass
class TrafficParams:
    n_cars: int = 200
    cov_ratio: float = 0.3
    speed_limit_kmh: float = 50.0
    min_speed_frac: float = 0.8
    p_left: float = 0.25
    p_right: float = 0.25
    ped_rate_per_s: float = 0.2
    ped_rate_scope: str = "sidewalk"  # "sidewalk": rate per sidewalk, "global": whole map
    ped_speed: float = 1.2
    light_half_cycle_s: float = 30.0
    lights: bool = True
    car_length: float = 4.5
    car_width: float = 1.8
    accel: float = 2.0
    headway_s: float = 1.0
    min_gap: float = 2.0
    delta_t_s: float = 0.1

    def validate(self):
        if self.n_cars < 1:
            raise ValueError("n_cars must be >= 1")
        if not 0.0 <= self.cov_ratio <= 1.0:
            raise ValueError("cov_ratio must lie in [0, 1]")
        if self.p_left < 0 or self.p_right < 0 or self.p_left + self.p_right > 1:
            raise ValueError("turn probabilities must be >= 0 and sum to <= 1")
        if self.ped_rate_scope not in ("sidewalk", "global"):
            raise ValueError("ped_rate_scope must be 'sidewalk' or 'global'")
        if self.ped_rate_per_s < 0 or self.ped_speed <= 0:
            raise ValueError("pedestrian rate must be >= 0 and speed > 0")
        if self.speed_limit_kmh <= 0 or self.delta_t_s <= 0:
            raise ValueError("speed limit and slot length must be positive")


class _Car:
    __slots__ = ("id", "i", "j", "d", "s", "lane", "v", "v_des", "next_d")

    def __init__(self, cid, i, j, d, s, lane, v_des):
        self.id = cid
        self.i, self.j, self.d = i, j, d
        self.s = s
        self.lane = lane
        self.v = v_des
        self.v_des = v_des
        self.next_d = None

    def edge(self):
        return self.i, self.j, self.d


class ManhattanTraffic:
    """Stateful simulator; :meth:`frame` renders the current state."""

    def __init__(self, params: TrafficParams, seed: int, grid: ManhattanMap = ManhattanMap()):
        params.validate()
        self.p = params
        self.grid = grid
        self.rng = substream(seed, "mobility")
        self.ped_rng = substream(seed, "pedestrians")
        self.time_s = 0.0
        self._buildings = grid.buildings()
        self._sidewalks = grid.sidewalks()
        self.cars: List[_Car] = []
        # pedestrian state as parallel arrays: id, start xy, unit direction, position, path length
        self.ped_ids = np.zeros(0, dtype=np.int64)
        self.ped_start = np.zeros((0, 2))
        self.ped_dir = np.zeros((0, 2))
        self.ped_pos = np.zeros(0)
        self.ped_len = np.zeros(0)
        self._next_ped = 1
        self._place_cars()
        n_cov = int(math.floor(params.cov_ratio * params.n_cars + 1e-9))
        order = self.rng.permutation(params.n_cars)
        self.cov_ids = set(int(self.cars[k].id) for k in order[:n_cov])
        # order[0] is a CoV whenever any exist; with none it is still forced to be the ego
        self.ego_id = int(self.cars[order[0]].id)
        self._seed_pedestrians()

    # --- geometry -------------------------------------------------------
    def _edge_ok(self, i, j, d):
        di, dj = _DIRS[d]
        return self.grid.has_node(i, j) and self.grid.has_node(i + di, j + dj)

    def _choose_next(self, i, j, d):
        """Direction taken at the downstream node of edge (i, j, d)."""
        di, dj = _DIRS[d]
        ni, nj = i + di, j + dj
        options = [((d + 1) % 4, self.p.p_left), ((d + 3) % 4, self.p.p_right),
                   (d, 1.0 - self.p.p_left - self.p.p_right)]
        feas = [(nd, w) for nd, w in options if self._edge_ok(ni, nj, nd)]
        total = sum(w for _, w in feas)
        if total <= 0:
            # forced turn at the boundary: right if possible, else left, else back
            for nd in ((d + 3) % 4, (d + 1) % 4, (d + 2) % 4):
                if self._edge_ok(ni, nj, nd):
                    return nd
        u = self.rng.uniform() * total
        acc = 0.0
        for nd, w in feas:
            acc += w
            if u < acc:
                return nd
        return feas[-1][0]

    def _pose(self, car: _Car):
        x0, y0 = self.grid.node_xy(car.i, car.j)
        ux, uy = _DIRS[car.d]
        lat = self.grid.lane_w * (car.lane + 0.5)
        # right-hand traffic: lanes sit to the right of the direction of travel
        return (x0 + ux * car.s + uy * lat, y0 + uy * car.s - ux * lat,
                math.atan2(uy, ux))

    # --- setup ----------------------------------------------------------
    def _place_cars(self):
        g = self.grid
        edges = [(i, j, d) for i in range(g.n_nodes) for j in range(g.n_nodes)
                 for d in range(4) if self._edge_ok(i, j, d)]
        occupied = {}
        spacing = self.p.car_length + self.p.min_gap + 1.0
        vmax = self.p.speed_limit_kmh * KMH
        for cid in range(1, self.p.n_cars + 1):
            for _ in range(1000):
                e = edges[int(self.rng.integers(len(edges)))]
                lane = int(self.rng.integers(g.lanes_per_dir))
                s = float(self.rng.uniform(0, g.pitch))
                taken = occupied.setdefault((e, lane), [])
                if all(abs(s - o) > spacing for o in taken):
                    taken.append(s)
                    break
            else:
                raise ValueError("could not place all cars; network too small")
            v_des = float(self.rng.uniform(self.p.min_speed_frac, 1.0)) * vmax
            car = _Car(cid, e[0], e[1], e[2], s, lane, v_des)
            car.next_d = self._choose_next(*e)
            self.cars.append(car)

    def _ped_rate(self) -> float:
        """Total spawn rate over the map, persons/s."""
        r = self.p.ped_rate_per_s
        return r * len(self._sidewalks) if self.p.ped_rate_scope == "sidewalk" else r

    def _spawn_peds(self, n: int, random_progress: bool):
        if n <= 0:
            return
        rng = self.ped_rng
        k = rng.integers(len(self._sidewalks), size=n)
        flip = rng.uniform(size=n) < 0.5
        a = np.where(flip[:, None], self._sidewalks[k, 1], self._sidewalks[k, 0])
        b = np.where(flip[:, None], self._sidewalks[k, 0], self._sidewalks[k, 1])
        length = np.hypot(*(b - a).T)
        pos = rng.uniform(size=n) * length if random_progress else np.zeros(n)
        ids = np.arange(self._next_ped, self._next_ped + n, dtype=np.int64)
        self._next_ped += n
        self.ped_ids = np.concatenate([self.ped_ids, ids])
        self.ped_start = np.vstack([self.ped_start, a])
        self.ped_dir = np.vstack([self.ped_dir, (b - a) / length[:, None]])
        self.ped_pos = np.concatenate([self.ped_pos, pos])
        self.ped_len = np.concatenate([self.ped_len, length])

    def _seed_pedestrians(self):
        # start near the stationary count: rate * mean walking time
        rate = self._ped_rate()
        if rate > 0:
            walk_s = self.grid.block_m / self.p.ped_speed
            self._spawn_peds(int(self.ped_rng.poisson(rate * walk_s)), random_progress=True)

    # --- dynamics -------------------------------------------------------
    def _green(self, i, j, d):
        if not self.p.lights:
            return True
        phase = int(self.time_s // self.p.light_half_cycle_s) % 2
        return (d % 2) == phase  # phase 0: E/W green, phase 1: N/S green

    def step(self):
        p, g = self.p, self.grid
        dt = p.delta_t_s
        lanes = {}
        for car in self.cars:
            lanes.setdefault((car.i, car.j, car.d, car.lane), []).append(car)
        for key in lanes:
            lanes[key].sort(key=lambda c: c.s)
        stop_s = g.pitch - g.street_w / 2
        new_v = {}
        for key, queue in lanes.items():
            for k, car in enumerate(queue):
                gap = math.inf
                if k + 1 < len(queue):
                    lead = queue[k + 1]
                    gap = lead.s - car.s - p.car_length
                else:
                    di, dj = _DIRS[car.d]
                    nxt = lanes.get((car.i + di, car.j + dj, car.next_d, car.lane))
                    if nxt:
                        gap = g.pitch - car.s + nxt[0].s - p.car_length
                front = car.s + p.car_length / 2
                if front <= stop_s and not self._green(car.i + _DIRS[car.d][0], car.j + _DIRS[car.d][1], car.d):
                    gap = min(gap, stop_s - front + p.min_gap - 0.5)
                v_safe = max(0.0, (gap - p.min_gap) / p.headway_s)
                new_v[id(car)] = min(car.v + p.accel * dt, car.v_des, v_safe)
        for car in self.cars:
            car.v = new_v[id(car)]
            car.s += car.v * dt
            while car.s >= g.pitch:
                car.s -= g.pitch
                di, dj = _DIRS[car.d]
                car.i, car.j, car.d = car.i + di, car.j + dj, car.next_d
                car.next_d = self._choose_next(car.i, car.j, car.d)
        self._step_peds(dt)
        self.time_s += dt

    def _step_peds(self, dt):
        self.ped_pos = self.ped_pos + self.p.ped_speed * dt
        alive = self.ped_pos < self.ped_len
        if not alive.all():
            self.ped_ids, self.ped_start, self.ped_dir = self.ped_ids[alive], self.ped_start[alive], self.ped_dir[alive]
            self.ped_pos, self.ped_len = self.ped_pos[alive], self.ped_len[alive]
        rate = self._ped_rate()
        if rate > 0:
            self._spawn_peds(int(self.ped_rng.poisson(rate * dt)), random_progress=False)

    # --- output ---------------------------------------------------------
    def frame(self, slot: int) -> WorldFrame:
        p = self.p
        cars = sorted(self.cars, key=lambda c: c.id)
        veh = np.array([(*self._pose(c), p.car_length, p.car_width) for c in cars], dtype=float)
        xy = self.ped_start + self.ped_dir * self.ped_pos[:, None]
        heading = np.arctan2(self.ped_dir[:, 1], self.ped_dir[:, 0])
        n = len(self.ped_ids)
        prow = np.column_stack([xy, heading, np.full(n, PED_SIZE_M), np.full(n, PED_SIZE_M)])
        return WorldFrame(
            slot=slot,
            vehicle_ids=np.array([c.id for c in cars], dtype=np.int64),
            vehicles=veh.reshape(-1, 5),
            is_cov=np.array([c.id in self.cov_ids for c in cars], dtype=bool),
            ego_id=self.ego_id,
            pedestrian_ids=self.ped_ids.copy(),
            pedestrians=prow.reshape(-1, 5),
            buildings=self._buildings,
        )


def generate_manhattan_trace(n_cars: int = 200, cov_ratio: float = 0.3, T: int = 10_000,
                             seed: int = 0, grid: Optional[ManhattanMap] = None,
                             **params) -> List[WorldFrame]:
    """Frames for slots 1..T. Extra keyword arguments go to :class:`TrafficParams`."""
    tp = TrafficParams(n_cars=n_cars, cov_ratio=cov_ratio, **params)
    sim = ManhattanTraffic(tp, seed, grid or ManhattanMap())
    frames = []
    for t in range(1, T + 1):
        sim.step()
        frames.append(sim.frame(t))
    return frames


def iter_manhattan_frames(params: TrafficParams, T: int, seed: int, grid: Optional[ManhattanMap] = None):
    """Lazy version of :func:`generate_manhattan_trace`."""
    sim = ManhattanTraffic(params, seed, grid or ManhattanMap())
    for t in range(1, T + 1):
        sim.step()
        yield sim.frame(t)
