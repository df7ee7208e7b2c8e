"""World frames and the trace / building CSV formats.

Trace rows (one per entity per slot, header required)::

    slot,entity_kind,entity_id,x_m,y_m,heading_rad,length_m,width_m,is_cov,is_ego

``entity_kind`` is ``car`` or ``pedestrian``; flags are 0/1. Building rows
are ``x_min,y_min,x_max,y_max``. Meters and radians throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

TRACE_COLUMNS = ("slot", "entity_kind", "entity_id", "x_m", "y_m", "heading_rad",
                 "length_m", "width_m", "is_cov", "is_ego")
BUILDING_COLUMNS = ("x_min", "y_min", "x_max", "y_max")

PED_SIZE_M = 0.5


class TraceError(ValueError):
    def __init__(self, msg, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + msg)
        self.line = line


@dataclass
class WorldFrame:
    """One slot of bird's-eye-view state.

    ``vehicles`` / ``pedestrians`` are (n, 5) rect rows
    ``(x, y, heading, length, width)``; ``buildings`` are
    ``(x_min, y_min, x_max, y_max)`` rows.
    """

    slot: int
    vehicle_ids: np.ndarray
    vehicles: np.ndarray
    is_cov: np.ndarray
    ego_id: int
    pedestrian_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    pedestrians: np.ndarray = field(default_factory=lambda: np.zeros((0, 5)))
    buildings: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def validate(self):
        ids = self.vehicle_ids.tolist()
        if len(set(ids)) != len(ids):
            raise TraceError(f"duplicate vehicle id in slot {self.slot}")
        pids = self.pedestrian_ids.tolist()
        if len(set(pids)) != len(pids):
            raise TraceError(f"duplicate pedestrian id in slot {self.slot}")
        if ids.count(self.ego_id) != 1:
            raise TraceError(f"slot {self.slot} has no ego vehicle")
        if len(self.vehicles) and np.any(self.vehicles[:, 3:5] <= 0):
            raise TraceError(f"degenerate vehicle rectangle in slot {self.slot}")
        for arr in (self.vehicles, self.pedestrians, self.buildings):
            if arr.size and not np.all(np.isfinite(arr)):
                raise TraceError(f"non-finite coordinate in slot {self.slot}")

    @property
    def ego_index(self) -> int:
        return int(np.nonzero(self.vehicle_ids == self.ego_id)[0][0])

    @property
    def ego_xy(self):
        return self.vehicles[self.ego_index, :2]

    def same_as(self, other: "WorldFrame") -> bool:
        return (
            self.slot == other.slot
            and self.ego_id == other.ego_id
            and np.array_equal(self.vehicle_ids, other.vehicle_ids)
            and np.array_equal(self.vehicles, other.vehicles)
            and np.array_equal(self.is_cov, other.is_cov)
            and np.array_equal(self.pedestrian_ids, other.pedestrian_ids)
            and np.array_equal(self.pedestrians, other.pedestrians)
            and np.array_equal(self.buildings, other.buildings)
        )


def _fmt(x: float) -> str:
    return repr(float(x))


def save_trace(path, frames: Iterable[WorldFrame]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for f in frames:
            for vid, row, cov in zip(f.vehicle_ids.tolist(), f.vehicles, f.is_cov.tolist()):
                w.writerow([f.slot, "car", vid, *map(_fmt, row), int(cov), int(vid == f.ego_id)])
            for pid, row in zip(f.pedestrian_ids.tolist(), f.pedestrians):
                w.writerow([f.slot, "pedestrian", pid, *map(_fmt, row), 0, 0])


def save_buildings(path, buildings) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BUILDING_COLUMNS)
        for row in np.asarray(buildings, dtype=float).reshape(-1, 4):
            w.writerow(list(map(_fmt, row)))


def load_buildings(path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != BUILDING_COLUMNS:
            raise TraceError(f"expected header {','.join(BUILDING_COLUMNS)}", line=1, path=path)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                vals = [float(v) for v in rec]
            except ValueError:
                raise TraceError("non-numeric building field", line=lineno, path=path) from None
            if len(vals) != 4 or not all(map(math.isfinite, vals)):
                raise TraceError("malformed building row", line=lineno, path=path)
            if vals[2] <= vals[0] or vals[3] <= vals[1]:
                raise TraceError("degenerate building rectangle", line=lineno, path=path)
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, 4)


def load_trace(path, buildings=None) -> List[WorldFrame]:
    """Parse a trace CSV into frames ordered by slot.

    ``buildings`` is an array or a path to a building CSV; it is attached to
    every frame.
    """
    if buildings is None:
        bld = np.zeros((0, 4))
    elif isinstance(buildings, np.ndarray):
        bld = buildings
    else:
        bld = load_buildings(buildings)
    per_slot = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_COLUMNS:
            raise TraceError(f"expected header {','.join(TRACE_COLUMNS)}", line=1, path=path)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(TRACE_COLUMNS):
                raise TraceError(f"expected {len(TRACE_COLUMNS)} fields, got {len(rec)}", line=lineno, path=path)
            try:
                slot = int(rec[0])
                kind = rec[1].strip()
                eid = int(rec[2])
                nums = [float(v) for v in rec[3:8]]
                is_cov = int(rec[8])
                is_ego = int(rec[9])
            except ValueError as e:
                raise TraceError(f"malformed field ({e})", line=lineno, path=path) from None
            if kind not in ("car", "pedestrian"):
                raise TraceError(f"unknown entity_kind {kind!r}", line=lineno, path=path)
            if is_cov not in (0, 1) or is_ego not in (0, 1):
                raise TraceError("is_cov/is_ego must be 0 or 1", line=lineno, path=path)
            if not all(map(math.isfinite, nums)):
                raise TraceError("non-finite coordinate", line=lineno, path=path)
            if nums[3] <= 0 or nums[4] <= 0:
                raise TraceError("non-positive length/width", line=lineno, path=path)
            if kind == "pedestrian" and is_ego:
                raise TraceError("a pedestrian cannot be the ego", line=lineno, path=path)
            d = per_slot.setdefault(slot, {"car": {}, "pedestrian": {}, "ego": [], "line": lineno})
            if eid in d[kind]:
                raise TraceError(f"duplicate {kind} id {eid} in slot {slot}", line=lineno, path=path)
            d[kind][eid] = (nums, is_cov)
            if is_ego:
                d["ego"].append(eid)
    if not per_slot:
        raise TraceError("trace has no rows", path=path)
    slots = sorted(per_slot)
    frames = []
    for expected, slot in enumerate(slots, start=slots[0]):
        d = per_slot[slot]
        if slot != expected:
            raise TraceError(f"non-contiguous slots: {expected} missing", line=d["line"], path=path)
        if len(d["ego"]) != 1:
            raise TraceError(f"slot {slot} must have exactly one ego, found {len(d['ego'])}",
                             line=d["line"], path=path)
        cars = sorted(d["car"].items())
        peds = sorted(d["pedestrian"].items())
        frame = WorldFrame(
            slot=slot,
            vehicle_ids=np.array([k for k, _ in cars], dtype=np.int64),
            vehicles=np.array([v[0] for _, v in cars], dtype=float).reshape(-1, 5),
            is_cov=np.array([bool(v[1]) for _, v in cars], dtype=bool),
            ego_id=d["ego"][0],
            pedestrian_ids=np.array([k for k, _ in peds], dtype=np.int64),
            pedestrians=np.array([v[0] for _, v in peds], dtype=float).reshape(-1, 5),
            buildings=bld,
        )
        try:
            frame.validate()
        except TraceError as e:
            raise TraceError(str(e), line=d["line"], path=path) from None
        frames.append(frame)
    return frames
