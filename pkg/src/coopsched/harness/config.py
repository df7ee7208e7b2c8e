"""Experiment configuration and its flat ``key = value`` file format.

One setting per line, ``#`` starts a comment, blank lines are ignored::

    env = world
    policy = mass
    beta = 0.6
    T = 5000
    seeds = 1..20          # inclusive range, or a comma list: 1,4,9
    n_cars = 50
    sweep_mass_beta_log10 = -0.9:0.6:5   # lo:hi:n in log10 units

Every simulation parameter of the world and channel models has a key; the
defaults are the reference values (0.1 s slots, 200 cars, 30% CoVs, 5.9 GHz,
23 dBm, and so on). Unknown keys and malformed values raise
:class:`ConfigError` naming the key.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..policies import POLICY_NAMES

ENVS = ("synthetic", "world", "trace")

# inclusive bounds of the default sweep ranges
SWEEP_BOUNDS = {
    "sweep_mass_beta_log10": (-0.9, 0.6),
    "sweep_ea_beta_log10": (-1.0, 0.5),
    "sweep_swucb_beta_log10": (-1.0, 1.0),
    "sweep_swucb_window": (5, 40),
    "sweep_etc_epoch": (2, 101),
}


class ConfigError(ValueError):
    def __init__(self, key, msg):
        super().__init__(f"config key {key!r}: {msg}")
        self.key = key


def parse_seeds(text) -> Tuple[int, ...]:
    """``"3"``, ``"1..20"`` (inclusive) or ``"1,5,7"``."""
    if isinstance(text, int):
        return (text,)
    if isinstance(text, (list, tuple)):
        return tuple(int(s) for s in text)
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(s) for s in text.split(",") if s.strip())


def parse_log_grid(text) -> Tuple[float, float, int]:
    if isinstance(text, (list, tuple)):
        lo, hi, n = text
    else:
        lo, hi, n = str(text).split(":")
    lo, hi, n = float(lo), float(hi), int(n)
    if n < 1 or hi < lo:
        raise ValueError("expected lo:hi:n with lo <= hi and n >= 1")
    return lo, hi, n


def parse_int_list(text) -> Tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        vals = tuple(int(v) for v in text)
    else:
        vals = tuple(int(v) for v in str(text).split(",") if v.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_channels(text):
    t = str(text).strip()
    if t == "mixed":
        return t
    v = int(t)
    if v not in (16, 32, 64):
        raise ValueError("expected mixed, 16, 32 or 64")
    return v


@dataclass
class ExperimentConfig:
    # run
    env: str = "synthetic"
    trace_path: str = ""
    buildings_path: str = ""
    policy: str = "mass"
    beta: float = 0.6
    epoch_len: int = 10
    window_len: int = 20
    T: int = 10_000
    delta_t_s: float = 0.1
    seeds: Tuple[int, ...] = (1,)
    out: str = "results"
    workers: int = 1
    # synthetic environment
    sigma: float = 0.02
    arrival_rate: float = 0.0
    mean_lifetime: float = math.inf
    initial_arms: int = 2
    g_max: float = 1.0
    report_normalized: bool = False
    # candidate discovery (both environments)
    v_max: int = 10
    # mobility
    n_cars: int = 200
    cov_ratio: float = 0.3
    speed_limit_kmh: float = 50.0
    turn_left_prob: float = 0.25
    turn_right_prob: float = 0.25
    ped_rate_per_s: float = 0.2
    ped_rate_scope: str = "sidewalk"
    ped_speed_mps: float = 1.2
    light_half_cycle_s: float = 30.0
    n_blocks: int = 4
    block_m: float = 200.0
    # lidar
    lidar_channels: object = "mixed"
    vfov_deg: float = 26.8
    max_range_m: float = 100.0
    object_height_m: float = 1.7
    azimuth_res_deg: float = 0.09
    rate_bps_64ch: float = 33.27e6
    mount_height_m: float = 1.9
    # v2x
    fc_ghz: float = 5.9
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    bandwidth_hz: float = 30e6
    shadow_std_los_db: float = 3.0
    shadow_std_nlos_db: float = 4.0
    blockage_mean_db: float = 5.0
    blockage_std_db: float = 4.0
    eta_dwell_s: float = 10.0
    # sweeps
    sweep_policies: Tuple[str, ...] = POLICY_NAMES
    sweep_mass_beta_log10: Tuple[float, float, int] = (-0.9, 0.6, 5)
    sweep_ea_beta_log10: Tuple[float, float, int] = (-1.0, 0.5, 5)
    sweep_swucb_beta_log10: Tuple[float, float, int] = (-1.0, 1.0, 5)
    sweep_swucb_window: Tuple[int, ...] = (5, 10, 20, 30, 40)
    sweep_etc_epoch: Tuple[int, ...] = (2, 5, 14, 38, 101)
    sweep_unbounded: bool = False

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------------
    def validate(self):
        if self.env not in ENVS:
            raise ConfigError("env", f"must be one of {ENVS}, got {self.env!r}")
        if self.env == "trace" and not self.trace_path:
            raise ConfigError("trace_path", "required when env = trace")
        if self.policy != "oracle" and self.policy not in POLICY_NAMES:
            raise ConfigError("policy", f"unknown policy {self.policy!r}")
        if self.T < 1:
            raise ConfigError("T", "must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds", "must be nonempty")
        if self.delta_t_s <= 0:
            raise ConfigError("delta_t_s", "must be positive")
        if self.beta <= 0:
            raise ConfigError("beta", "must be positive")
        if self.epoch_len < 2:
            raise ConfigError("epoch_len", "must be >= 2")
        if self.window_len < 1:
            raise ConfigError("window_len", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if not 0 < self.sigma < 1:
            raise ConfigError("sigma", "must lie in (0, 1)")
        if self.arrival_rate < 0:
            raise ConfigError("arrival_rate", "must be >= 0")
        if self.mean_lifetime < 1:
            raise ConfigError("mean_lifetime", "must be >= 1 slot")
        if self.g_max <= 0:
            raise ConfigError("g_max", "must be positive")
        if self.v_max < 1:
            raise ConfigError("v_max", "must be >= 1")
        if self.n_cars < 1:
            raise ConfigError("n_cars", "must be >= 1")
        if not 0 <= self.cov_ratio <= 1:
            raise ConfigError("cov_ratio", "must lie in [0, 1]")
        if self.ped_rate_scope not in ("sidewalk", "global"):
            raise ConfigError("ped_rate_scope", "must be sidewalk or global")
        for name in self.sweep_policies:
            if name not in POLICY_NAMES:
                raise ConfigError("sweep_policies", f"unknown policy {name!r}")
        if not self.sweep_unbounded:
            for key, (lo, hi) in SWEEP_BOUNDS.items():
                val = getattr(self, key)
                pts = val[:2] if key.endswith("log10") else val
                if min(pts) < lo - 1e-12 or max(pts) > hi + 1e-12:
                    raise ConfigError(key, f"outside the default range [{lo}, {hi}] "
                                           "(set sweep_unbounded = true to allow)")

    # ------------------------------------------------------------------
    @classmethod
    def from_mapping(cls, values: Dict[str, object]) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(key, "unknown key")
            try:
                kwargs[key] = _convert(key, raw, cls)
            except ConfigError:
                raise
            except (TypeError, ValueError) as e:
                raise ConfigError(key, f"bad value {raw!r} ({e})") from None
        return cls(**kwargs)

    def replace(self, **changes) -> "ExperimentConfig":
        merged = self.to_dict()
        merged.update(changes)
        return type(self).from_mapping(merged)

    def to_dict(self) -> Dict[str, object]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def dumps(self) -> str:
        """Render in the file format (round-trips through :func:`loads_config`)."""
        lines = []
        for k, v in self.to_dict().items():
            if k == "seeds":
                v = ",".join(map(str, v))
            elif k.endswith("_log10"):
                v = ":".join(map(str, v))
            elif isinstance(v, list):
                v = ",".join(map(str, v))
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------
    def policy_params(self, name: str = None) -> Dict[str, float]:
        name = name or self.policy
        if name in ("mass", "earliest-activated"):
            return {"beta": self.beta}
        if name == "sw-ucb":
            return {"beta": self.beta, "window_len": self.window_len}
        if name == "etc":
            return {"epoch_len": self.epoch_len}
        return {}

    def sweep_grid(self, name: str) -> List[Dict[str, float]]:
        """Parameter points of one policy's sweep."""
        def logspace(spec):
            lo, hi, n = spec
            return [float(b) for b in np.logspace(lo, hi, n)]

        if name == "mass":
            return [{"beta": b} for b in logspace(self.sweep_mass_beta_log10)]
        if name == "earliest-activated":
            return [{"beta": b} for b in logspace(self.sweep_ea_beta_log10)]
        if name == "sw-ucb":
            return [{"beta": b, "window_len": L} for b in logspace(self.sweep_swucb_beta_log10)
                    for L in self.sweep_swucb_window]
        if name == "etc":
            return [{"epoch_len": e} for e in self.sweep_etc_epoch]
        if name == "closest":
            return [{}]
        raise ConfigError("sweep_policies", f"unknown policy {name!r}")


_SPECIAL = {
    "seeds": parse_seeds,
    "sweep_mass_beta_log10": parse_log_grid,
    "sweep_ea_beta_log10": parse_log_grid,
    "sweep_swucb_beta_log10": parse_log_grid,
    "sweep_swucb_window": parse_int_list,
    "sweep_etc_epoch": parse_int_list,
    "lidar_channels": _parse_channels,
}


def _convert(key, raw, cls):
    if key in _SPECIAL:
        return _SPECIAL[key](raw)
    if key == "sweep_policies":
        items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
        return tuple(s.strip() for s in items if str(s).strip())
    default = getattr(cls, key, None)
    if isinstance(default, bool):
        return _parse_bool(raw)
    if isinstance(default, int):
        f = float(raw)
        if not f.is_integer():
            raise ValueError("expected an integer")
        return int(f)
    if isinstance(default, float):
        return float(raw)
    return str(raw).strip()


def loads_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(key, f"line {lineno}: duplicate key")
        values[key] = val
    return ExperimentConfig.from_mapping(values)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read())
