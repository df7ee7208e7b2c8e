"""V2V sidelink channel: 3GPP TR 37.885 urban pathloss, shadowing, vehicle
blockage, the resource-ratio Markov chain, Shannon rate and the resulting
point-cloud down-sampling ratio."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinkClass",
    "LinkGeometry",
    "RadioParams",
    "classify_link",
    "pathloss_db",
    "mean_pathloss_db",
    "ResourceRatioChain",
    "step_resource_ratio",
    "ETA_STATES",
    "shannon_rate",
    "downsample_ratio",
]


class LinkClass(enum.Enum):
    LOS = "LOS"
    NLOSV = "NLOSv"
    NLOS = "NLOS"


@dataclass(frozen=True)
class LinkGeometry:
    distance_m: float
    blockers: int = 0
    building_blocked: bool = False

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"link distance must be > 0, got {self.distance_m}")
        if self.blockers < 0:
            raise ValueError("blockers must be >= 0")


@dataclass(frozen=True)
class RadioParams:
    fc_ghz: float = 5.9
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    bandwidth_hz: float = 30e6
    shadow_std_los_db: float = 3.0
    shadow_std_nlos_db: float = 4.0
    blockage_mean_db: float = 5.0
    blockage_std_db: float = 4.0


def classify_link(geometry: LinkGeometry) -> LinkClass:
    if geometry.building_blocked:
        return LinkClass.NLOS
    if geometry.blockers >= 1:
        return LinkClass.NLOSV
    return LinkClass.LOS


def mean_pathloss_db(link_class: LinkClass, d: float, fc_ghz: float = 5.9) -> float:
    """Deterministic part of the pathloss (no shadowing, no blockage)."""
    if not d > 0:
        raise ValueError(f"pathloss needs d > 0, got {d}")
    if link_class is LinkClass.NLOS:
        return 36.85 + 30.0 * math.log10(d) + 18.9 * math.log10(fc_ghz)
    return 38.77 + 16.7 * math.log10(d) + 18.2 * math.log10(fc_ghz)


def pathloss_db(link_class: LinkClass, geometry: LinkGeometry, rng=None,
                radio: RadioParams = RadioParams()) -> float:
    """Pathloss in dB including shadowing and, for NLOSv, per-blocker loss.

    With ``rng=None`` the random terms are zero.
    """
    pl = mean_pathloss_db(link_class, geometry.distance_m, radio.fc_ghz)
    if rng is None:
        return pl
    std = radio.shadow_std_nlos_db if link_class is LinkClass.NLOS else radio.shadow_std_los_db
    pl += rng.normal(0.0, std)
    if link_class is LinkClass.NLOSV and geometry.blockers:
        losses = rng.normal(radio.blockage_mean_db, radio.blockage_std_db, geometry.blockers)
        pl += float(np.maximum(losses, 0.0).sum())
    return pl


ETA_STATES = (0.04, 0.2, 1.0)


class ResourceRatioChain:
    """Three-state resource ratio; switches with prob ``p`` to one of the other two states."""

    def __init__(self, rng: np.random.Generator, p: float = 0.01, state=None,
                 states=ETA_STATES):
        if not 0 <= p <= 1:
            raise ValueError(f"switch probability must lie in [0, 1], got {p}")
        self.rng = rng
        self.p = float(p)
        self.states = tuple(states)
        self.index = int(rng.integers(len(self.states))) if state is None else self.states.index(state)

    @classmethod
    def from_dwell(cls, rng, delta_t_s=0.1, dwell_s=10.0, **kw):
        return cls(rng, p=delta_t_s / dwell_s, **kw)

    @property
    def eta(self):
        return self.states[self.index]

    def step(self):
        if self.rng.uniform() < self.p:
            shift = 1 + int(self.rng.integers(len(self.states) - 1))
            self.index = (self.index + shift) % len(self.states)
        return self.eta


def step_resource_ratio(chain: ResourceRatioChain) -> ResourceRatioChain:
    chain.step()
    return chain


def shannon_rate(eta: float, pathloss_total_db: float, radio: RadioParams = RadioParams()) -> float:
    """Achievable rate in bit/s over the allocated share ``eta * W``; noise is filtered to that share."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    bw = eta * radio.bandwidth_hz
    noise_dbm = radio.noise_psd_dbm_hz + 10.0 * math.log10(bw) + radio.noise_figure_db
    snr_db = radio.tx_power_dbm - pathloss_total_db - noise_dbm
    return bw * math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def downsample_ratio(rate_bps: float, delta_t_s: float, frame_bits: float) -> float:
    if frame_bits <= 0 or delta_t_s <= 0:
        raise ValueError("delta_t_s and frame_bits must be positive")
    return min(1.0, max(rate_bps, 0.0) * delta_t_s / frame_bits)
