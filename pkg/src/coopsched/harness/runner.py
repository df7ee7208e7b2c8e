"""Seeded single runs: build (or reuse) a realization, play one policy, summarize."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

from ..channel import RadioParams
from ..env import Realization, SlotMetrics, play, summarize
from ..policies import make_policy
from ..synthetic import SyntheticConfig, normalize_gain, realize_synthetic
from ..world.lidar import LidarSpec
from ..world.mobility import ManhattanMap, TrafficParams, iter_manhattan_frames
from ..world.scene import realize_world
from ..world.trace import load_trace
from .config import ExperimentConfig

_SYNTH_KEYS = ("T", "sigma", "arrival_rate", "mean_lifetime", "v_max", "initial_arms")
_WORLD_KEYS = ("T", "delta_t_s", "v_max", "n_cars", "cov_ratio", "speed_limit_kmh", "turn_left_prob",
               "turn_right_prob", "ped_rate_per_s", "ped_rate_scope", "ped_speed_mps",
               "light_half_cycle_s", "n_blocks", "block_m", "lidar_channels", "vfov_deg",
               "max_range_m", "object_height_m", "azimuth_res_deg", "rate_bps_64ch", "mount_height_m",
               "fc_ghz", "tx_power_dbm", "noise_psd_dbm_hz", "noise_figure_db", "bandwidth_hz",
               "shadow_std_los_db", "shadow_std_nlos_db", "blockage_mean_db", "blockage_std_db",
               "eta_dwell_s")
_TRACE_KEYS = tuple(k for k in _WORLD_KEYS if k in (
    "T", "delta_t_s", "v_max", "lidar_channels", "vfov_deg", "max_range_m", "object_height_m",
    "azimuth_res_deg", "rate_bps_64ch", "mount_height_m", "fc_ghz", "tx_power_dbm",
    "noise_psd_dbm_hz", "noise_figure_db", "bandwidth_hz", "shadow_std_los_db",
    "shadow_std_nlos_db", "blockage_mean_db", "blockage_std_db", "eta_dwell_s",
)) + ("trace_path", "buildings_path")


def environment_key(cfg: ExperimentConfig, seed: int) -> tuple:
    """Everything that determines a realization; policies are not part of it."""
    keys = {"synthetic": _SYNTH_KEYS, "world": _WORLD_KEYS, "trace": _TRACE_KEYS}[cfg.env]
    return (cfg.env, seed) + tuple(getattr(cfg, k) for k in keys)


def _lidar(cfg):
    return LidarSpec(vfov_deg=cfg.vfov_deg, max_range_m=cfg.max_range_m,
                     azimuth_res_deg=cfg.azimuth_res_deg, mount_height_m=cfg.mount_height_m,
                     object_height_m=cfg.object_height_m, rate_bps_64ch=cfg.rate_bps_64ch)


def _radio(cfg):
    return RadioParams(fc_ghz=cfg.fc_ghz, tx_power_dbm=cfg.tx_power_dbm,
                       noise_psd_dbm_hz=cfg.noise_psd_dbm_hz, noise_figure_db=cfg.noise_figure_db,
                       bandwidth_hz=cfg.bandwidth_hz, shadow_std_los_db=cfg.shadow_std_los_db,
                       shadow_std_nlos_db=cfg.shadow_std_nlos_db,
                       blockage_mean_db=cfg.blockage_mean_db, blockage_std_db=cfg.blockage_std_db)


def _perception_kwargs(cfg):
    return dict(lidar=_lidar(cfg), radio=_radio(cfg), delta_t_s=cfg.delta_t_s, v_max=cfg.v_max,
                eta_dwell_s=cfg.eta_dwell_s, lidar_channels=cfg.lidar_channels)


def traffic_params(cfg: ExperimentConfig) -> TrafficParams:
    return TrafficParams(n_cars=cfg.n_cars, cov_ratio=cfg.cov_ratio, speed_limit_kmh=cfg.speed_limit_kmh,
                         p_left=cfg.turn_left_prob, p_right=cfg.turn_right_prob,
                         ped_rate_per_s=cfg.ped_rate_per_s, ped_rate_scope=cfg.ped_rate_scope,
                         ped_speed=cfg.ped_speed_mps, light_half_cycle_s=cfg.light_half_cycle_s,
                         delta_t_s=cfg.delta_t_s)


def build_realization(cfg: ExperimentConfig, seed: int) -> Realization:
    if cfg.env == "synthetic":
        sc = SyntheticConfig(sigma=cfg.sigma, arrival_rate=cfg.arrival_rate,
                             mean_lifetime=cfg.mean_lifetime, v_max=cfg.v_max,
                             initial_arms=cfg.initial_arms, T=cfg.T)
        return realize_synthetic(sc, seed)
    if cfg.env == "world":
        grid = ManhattanMap(n_blocks=cfg.n_blocks, block_m=cfg.block_m)
        frames = iter_manhattan_frames(traffic_params(cfg), cfg.T, seed, grid)
        return realize_world(frames, seed, **_perception_kwargs(cfg))
    frames = load_trace(cfg.trace_path, cfg.buildings_path or None)
    return realize_world(frames[: cfg.T], seed, **_perception_kwargs(cfg))


class RealizationCache:
    """Memoizes realizations by environment key so a sweep realizes each seed once."""

    def __init__(self, max_items: int = 4):
        self.max_items = max_items
        self._items: Dict[tuple, Realization] = {}

    def get(self, cfg: ExperimentConfig, seed: int) -> Realization:
        key = environment_key(cfg, seed)
        if key not in self._items:
            if len(self._items) >= self.max_items:
                self._items.pop(next(iter(self._items)))
            self._items[key] = build_realization(cfg, seed)
        return self._items[key]


@dataclass
class RunResult:
    seed: int
    policy: str
    params: Dict[str, float]
    metrics: List[SlotMetrics]
    summary: dict


def normalized_summary(metrics, g_max: float) -> dict:
    n = len(metrics)
    obs = [normalize_gain(m.observed_gain, g_max) for m in metrics]
    opt = [normalize_gain(m.optimal_gain, g_max) for m in metrics]
    return {
        "g_max": g_max,
        "avg_regret_normalized": (sum(opt) - sum(obs)) / n if n else 0.0,
        "mean_gain_normalized": sum(obs) / n if n else 0.0,
    }


def run_experiment(cfg: ExperimentConfig, seed: int, policy: Optional[str] = None,
                   params: Optional[Dict[str, float]] = None,
                   cache: Optional[RealizationCache] = None) -> RunResult:
    """One (environment, policy, seed) run.

    ``policy``/``params`` default to the config's policy and its parameters.
    """
    name = policy or cfg.policy
    if params is None:
        params = cfg.policy_params(name)
    real = cache.get(cfg, seed) if cache is not None else build_realization(cfg, seed)
    pol = "oracle" if name == "oracle" else make_policy(name, **params)
    metrics = play(real, pol)
    summary = summarize(metrics)
    summary["gain_scale"] = real.gain_scale
    if cfg.report_normalized and real.gain_scale == "raw":
        summary.update(normalized_summary(metrics, cfg.g_max))
    return RunResult(seed, name, dict(params), metrics, summary)
