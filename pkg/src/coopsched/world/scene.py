"""Per-slot cooperative-perception evaluation on world frames.

For every slot: find candidate CoVs, scan the ego and every candidate LiDAR,
draw each candidate's link (class, shadowing, blockage, resource ratio),
down-sample the candidate's points to fit the rate, and score the gain of
every candidate. The full per-candidate gain table only feeds the regret
ledger; :func:`coopsched.env.play` hands a policy nothing but the scheduled
candidate's gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..channel import (LinkClass, LinkGeometry, RadioParams, ResourceRatioChain,
                       classify_link, downsample_ratio, pathloss_db, shannon_rate)
from ..env import Realization, SlotSample
from ..policies import CandidateView
from ..rng import substream
from .detection import PerceptionOutcome, evaluate_perception, sample_difficulty
from .geometry import rects_from_boxes, segment_hits_rect
from .lidar import LidarSpec, azimuth_counts, raycast_points_bruteforce
from .trace import WorldFrame

CANDIDATE_RANGE_M = 100.0
LIDAR_CHANNELS = (16, 32, 64)


def importance_weights(d) -> np.ndarray:
    """Vectorised importance weight: 1 up to 10 m, 2 - log10(d) until 100 m, then 0."""
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        w = np.where(d <= 10.0, 1.0, 2.0 - np.log10(np.maximum(d, 1e-12)))
    return np.where(d >= 100.0, 0.0, w)


def candidates(frame: WorldFrame, v_max: Optional[int] = None,
               range_m: float = CANDIDATE_RANGE_M) -> List[CandidateView]:
    """CoVs other than the ego within ``range_m`` of it, nearest first, at most ``v_max``."""
    ego = frame.ego_xy
    d = np.hypot(frame.vehicles[:, 0] - ego[0], frame.vehicles[:, 1] - ego[1])
    mask = frame.is_cov & (frame.vehicle_ids != frame.ego_id) & (d <= range_m)
    idx = np.nonzero(mask)[0]
    order = sorted(idx.tolist(), key=lambda k: (d[k], int(frame.vehicle_ids[k])))
    if v_max is not None:
        order = order[:v_max]
    views = [CandidateView(int(frame.vehicle_ids[k]), float(d[k]), frame.slot) for k in order]
    return sorted(views, key=lambda c: c.cov_id)


@dataclass
class LinkState:
    cov_id: int
    link_class: LinkClass
    distance_m: float
    blockers: int
    pathloss_db: float
    eta: float
    rate_bps: float
    rho: float


@dataclass
class SlotEvaluation:
    slot: int
    candidates: List[CandidateView]
    object_keys: List[Tuple[str, int]]
    weights: np.ndarray
    difficulties: np.ndarray
    ego_points: np.ndarray
    links: Dict[int, LinkState] = field(default_factory=dict)
    outcomes: Dict[int, PerceptionOutcome] = field(default_factory=dict)
    recall_standalone: float = 1.0

    def gains(self) -> Dict[int, float]:
        return {k: o.gain for k, o in self.outcomes.items()}


class WorldPerception:
    """Stateful per-run evaluator (difficulties, resource-ratio chains, channel stream)."""

    def __init__(self, seed: int, lidar: LidarSpec = LidarSpec(), radio: RadioParams = RadioParams(),
                 delta_t_s: float = 0.1, v_max: Optional[int] = 10, eta_dwell_s: float = 10.0,
                 bruteforce: bool = False, lidar_channels="mixed"):
        """``lidar_channels``: ``"mixed"`` draws 16, 32 or 64 per vehicle; an int fixes it."""
        self.seed = seed
        self.lidar = lidar
        if lidar_channels != "mixed" and int(lidar_channels) not in LIDAR_CHANNELS:
            raise ValueError(f"lidar_channels must be 'mixed' or one of {LIDAR_CHANNELS}")
        self.lidar_channels = lidar_channels
        self._specs = {c: replace(lidar, channels=c) for c in LIDAR_CHANNELS}
        self._tans = {c: np.tan(spec.elevations_rad()) for c, spec in self._specs.items()}
        self._vehicle_channels: Dict[int, int] = {}
        self.radio = radio
        self.delta_t_s = delta_t_s
        self.v_max = v_max
        self.eta_p = delta_t_s / eta_dwell_s
        self.bruteforce = bruteforce
        self.channel_rng = substream(seed, "channel")
        self._difficulty: Dict[Tuple[str, int], int] = {}
        self._chains: Dict[int, Tuple[ResourceRatioChain, int]] = {}
        self._bld_cache = (None, None)

    # --- helpers --------------------------------------------------------
    def difficulty(self, kind: str, oid: int) -> int:
        key = (kind, oid)
        if key not in self._difficulty:
            self._difficulty[key] = sample_difficulty(substream(self.seed, "difficulty", kind, oid))
        return self._difficulty[key]

    def eta(self, cov_id: int, slot: int) -> float:
        if cov_id not in self._chains:
            chain = ResourceRatioChain(substream(self.seed, "eta", cov_id), p=self.eta_p)
            self._chains[cov_id] = (chain, 0)
        chain, last = self._chains[cov_id]
        for _ in range(max(0, slot - last)):
            chain.step()
        self._chains[cov_id] = (chain, max(last, slot))
        return chain.eta

    def channels(self, vehicle_id: int) -> int:
        """LiDAR channel count of a vehicle (fixed for its lifetime)."""
        if self.lidar_channels != "mixed":
            return int(self.lidar_channels)
        if vehicle_id not in self._vehicle_channels:
            rng = substream(self.seed, "lidar", vehicle_id)
            self._vehicle_channels[vehicle_id] = int(rng.choice(LIDAR_CHANNELS))
        return self._vehicle_channels[vehicle_id]

    def spec_of(self, vehicle_id: int) -> LidarSpec:
        return self._specs[self.channels(vehicle_id)]

    def _buildings(self, frame):
        if self._bld_cache[0] is not frame.buildings:
            self._bld_cache = (frame.buildings, rects_from_boxes(frame.buildings))
        return self._bld_cache[1]

    def vertical_hits(self, dist, channels: int) -> np.ndarray:
        z = self.lidar.mount_height_m + np.asarray(dist, dtype=float)[:, None] * self._tans[channels][None, :]
        return np.count_nonzero((z >= 0.0) & (z <= self.lidar.object_height_m), axis=1)

    def scan(self, frame: WorldFrame, sensor_index: int, obj_veh: np.ndarray, obj_ped: np.ndarray,
             buildings: np.ndarray) -> np.ndarray:
        """Points on each object (vehicles first, then pedestrians) seen by one vehicle's LiDAR."""
        sx, sy = frame.vehicles[sensor_index, :2]
        reach = self.lidar.max_range_m + 5.0
        veh = frame.vehicles
        dv = np.hypot(veh[:, 0] - sx, veh[:, 1] - sy)
        near = np.nonzero((dv <= reach) & (np.arange(len(veh)) != sensor_index))[0]
        peds = frame.pedestrians[obj_ped] if len(obj_ped) else np.zeros((0, 5))
        targets_v = veh[obj_veh]
        spec = self.spec_of(int(frame.vehicle_ids[sensor_index]))
        if self.bruteforce:
            counts = []
            for k in obj_veh.tolist():
                if k == sensor_index:
                    counts.append(0)
                    continue
                others = [j for j in near.tolist() if j != k]
                blk = np.vstack([veh[others].reshape(-1, 5), buildings])
                counts.append(raycast_points_bruteforce((sx, sy), spec, blk, veh[k]))
            blk = np.vstack([veh[near].reshape(-1, 5), buildings])
            for row in peds:
                counts.append(raycast_points_bruteforce((sx, sy), spec, blk, row))
            return np.array(counts, dtype=np.int64)
        occ = np.vstack([veh[near].reshape(-1, 5), buildings])
        occ_counts, ped_counts = azimuth_counts((sx, sy), spec, occ, peds)
        pos = {int(k): n for n, k in enumerate(near.tolist())}
        az_v = np.array([occ_counts[pos[k]] if k in pos else 0 for k in obj_veh.tolist()], dtype=np.int64)
        az = np.concatenate([az_v, ped_counts]).astype(np.int64)
        tgt = np.vstack([targets_v.reshape(-1, 5), peds])
        if len(tgt) == 0:
            return az
        dist = np.hypot(tgt[:, 0] - sx, tgt[:, 1] - sy)
        return az * self.vertical_hits(dist, spec.channels)

    def link(self, frame: WorldFrame, ego_index: int, cov_index: int, buildings: np.ndarray) -> LinkState:
        veh = frame.vehicles
        p0, p1 = veh[ego_index, :2], veh[cov_index, :2]
        d = max(float(np.hypot(*(p1 - p0))), 1e-3)
        bb = any(segment_hits_rect(p0, p1, b) for b in buildings)
        mid = (p0 + p1) / 2
        dm = np.hypot(veh[:, 0] - mid[0], veh[:, 1] - mid[1])
        blockers = 0
        for k in np.nonzero(dm <= d / 2 + 5.0)[0].tolist():
            if k != ego_index and k != cov_index and segment_hits_rect(p0, p1, veh[k]):
                blockers += 1
        geom = LinkGeometry(d, blockers, bb)
        cls = classify_link(geom)
        pl = pathloss_db(cls, geom, self.channel_rng, self.radio)
        cov_id = int(frame.vehicle_ids[cov_index])
        eta = self.eta(cov_id, frame.slot)
        rate = shannon_rate(eta, pl, self.radio)
        rho = downsample_ratio(rate, self.delta_t_s, self.spec_of(cov_id).full_frame_bits(self.delta_t_s))
        return LinkState(cov_id, cls, d, blockers, pl, eta, rate, rho)

    # --- main entry -----------------------------------------------------
    def evaluate(self, frame: WorldFrame) -> SlotEvaluation:
        buildings = self._buildings(frame)
        ego_i = frame.ego_index
        ego = frame.vehicles[ego_i, :2]
        veh, ped = frame.vehicles, frame.pedestrians
        dv = np.hypot(veh[:, 0] - ego[0], veh[:, 1] - ego[1])
        obj_veh = np.nonzero((dv < 100.0) & (np.arange(len(veh)) != ego_i))[0]
        if len(ped):
            dp = np.hypot(ped[:, 0] - ego[0], ped[:, 1] - ego[1])
            obj_ped = np.nonzero(dp < 100.0)[0]
        else:
            dp = np.zeros(0)
            obj_ped = np.zeros(0, dtype=np.int64)
        keys = [("car", int(frame.vehicle_ids[k])) for k in obj_veh] + \
               [("pedestrian", int(frame.pedestrian_ids[k])) for k in obj_ped]
        dist = np.concatenate([dv[obj_veh], dp[obj_ped]])
        w = importance_weights(dist)
        keep = w > 0
        diff = np.array([self.difficulty(*k) for k in keys], dtype=np.int64)
        ego_pts = self.scan(frame, ego_i, obj_veh, obj_ped, buildings)
        cands = candidates(frame, self.v_max)
        ev = SlotEvaluation(frame.slot, cands, [k for k, m in zip(keys, keep) if m],
                            w[keep], diff[keep], ego_pts[keep])
        index_of = {int(v): k for k, v in enumerate(frame.vehicle_ids.tolist())}
        for c in cands:
            ci = index_of[c.cov_id]
            pts = self.scan(frame, ci, obj_veh, obj_ped, buildings)
            ls = self.link(frame, ego_i, ci, buildings)
            shared = np.rint(pts * ls.rho).astype(np.int64)
            ev.links[c.cov_id] = ls
            ev.outcomes[c.cov_id] = evaluate_perception(ev.weights, ev.difficulties, ev.ego_points,
                                                        shared[keep], ev.object_keys)
        if ev.outcomes:
            ev.recall_standalone = next(iter(ev.outcomes.values())).recall_standalone
        else:
            n = int(keep.sum())
            ev.recall_standalone = float(np.mean(ev.ego_points >= ev.difficulties)) if n else 1.0
        return ev

    def oracle_gains(self, frame: WorldFrame) -> Dict[int, float]:
        return self.evaluate(frame).gains()


def realize_world(frames: Iterable[WorldFrame], seed: int, **kwargs) -> Realization:
    """Evaluate every frame and pack the result for :func:`coopsched.env.play`."""
    wp = WorldPerception(seed, **kwargs)
    slots = []
    n_cands = 0
    for frame in frames:
        ev = wp.evaluate(frame)
        n_cands += len(ev.candidates)
        slots.append(SlotSample(
            t=frame.slot,
            candidates=tuple(ev.candidates),
            gains=ev.gains(),
            recall_standalone=ev.recall_standalone,
            recall_cp={k: o.recall for k, o in ev.outcomes.items()},
        ))
    meta = {"seed": seed, "mean_candidates": n_cands / len(slots) if slots else 0.0}
    return Realization(slots, env="world", gain_scale="raw", meta=meta)
