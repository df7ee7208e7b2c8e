"""Synthetic restless-bandit environment.

Normalized gains follow a Gaussian random walk folded back into [0, 1],
whose stationary law is Uniform[0, 1]. Candidates may arrive (at most one per
slot) and depart (geometric lifetimes). Also holds the offline optimum,
regret ledger and the well-behavedness predicate used by the analysis
checks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .env import Realization, RegretInconsistencyError, SlotSample
from .policies import CandidateView
from .rng import substream

__all__ = [
    "reflect",
    "reflect_array",
    "GainProcess",
    "step_gain",
    "reflected_walk",
    "ArmPopulation",
    "step_population",
    "offline_optimal",
    "RegretLedger",
    "accumulate_regret",
    "well_behaved",
    "near_well_behaved",
    "theoretical_beta",
    "well_behaved_constant",
    "AnalysisConstants",
    "normalize_gain",
    "SyntheticConfig",
    "realize_synthetic",
    "fixed_arm_paths",
    "dump_gain_csv",
]


def reflect(x: float) -> float:
    xp = x % 2.0
    return xp if xp < 1.0 else 2.0 - xp


def reflect_array(x):
    xp = np.mod(x, 2.0)
    return np.where(xp < 1.0, xp, 2.0 - xp)


class GainProcess:
    """One arm's normalized gain. Increments are drawn in blocks from its own stream."""

    _BLOCK = 1024

    def __init__(self, G: float, sigma: float, rng: np.random.Generator):
        if not sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        if not 0.0 <= G <= 1.0:
            raise ValueError(f"G must lie in [0, 1], got {G}")
        self.G = float(G)
        self.sigma = float(sigma)
        self.rng = rng
        self._buf = np.empty(0)
        self._pos = 0

    def draw(self) -> float:
        if self._pos >= self._buf.size:
            self._buf = self.rng.normal(0.0, self.sigma, self._BLOCK) if self.sigma > 0 else np.zeros(self._BLOCK)
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return float(x)

    def step(self, x: Optional[float] = None) -> float:
        if x is None:
            x = self.draw()
        self.G = reflect(self.G + x)
        return self.G


def step_gain(process: GainProcess, x: Optional[float] = None) -> GainProcess:
    """Advance one slot: ``G <- reflect(G + x)``, ``x ~ N(0, sigma^2)`` unless given."""
    process.step(x)
    return process


def reflected_walk(g0, increments) -> np.ndarray:
    """Iterate the folded walk. ``increments`` has shape (T,) or (T, K); returns T+1 rows."""
    inc = np.asarray(increments, dtype=float)
    g = np.empty((inc.shape[0] + 1,) + inc.shape[1:])
    g[0] = g0
    if inc.ndim == 1:
        cur = float(g0)
        for t, x in enumerate(inc.tolist(), start=1):
            cur = reflect(cur + x)
            g[t] = cur
        return g
    for t in range(inc.shape[0]):
        g[t + 1] = reflect_array(g[t] + inc[t])
    return g


@dataclass
class ArmPopulation:
    sigma: float
    arrival_rate: float = 0.0
    mean_lifetime: float = math.inf
    v_max: int = 2
    seed: int = 0
    arms: Dict[int, GainProcess] = field(default_factory=dict)
    distance: Dict[int, float] = field(default_factory=dict)
    next_id: int = 1

    def __post_init__(self):
        if self.v_max < 1:
            raise ValueError("v_max must be >= 1")
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be >= 0")
        if not self.mean_lifetime > 0:
            raise ValueError("mean_lifetime must be > 0")
        self.rng = substream(self.seed, "population")

    def spawn(self, g0: Optional[float] = None) -> Optional[int]:
        if len(self.arms) >= self.v_max:
            return None
        cov = self.next_id
        self.next_id += 1
        arm_rng = substream(self.seed, "arm", cov)
        if g0 is None:
            g0 = float(arm_rng.uniform())
        self.arms[cov] = GainProcess(g0, self.sigma, arm_rng)
        # only the distance-based policy reads this; it is unrelated to the gain
        self.distance[cov] = float(arm_rng.uniform(0.0, 100.0))
        return cov


def step_population(pop: ArmPopulation, t: int) -> Tuple[ArmPopulation, List[int], List[int]]:
    """Step gains, then departures (prob 1/mean_lifetime each), then at most one arrival."""
    for arm in pop.arms.values():
        arm.step()
    departures = []
    if math.isfinite(pop.mean_lifetime):
        p_leave = 1.0 / pop.mean_lifetime
        for cov in sorted(pop.arms):
            if pop.rng.uniform() < p_leave:
                departures.append(cov)
        for cov in departures:
            del pop.arms[cov]
            del pop.distance[cov]
    arrivals = []
    if pop.arrival_rate > 0 and pop.rng.uniform() < min(1.0, pop.arrival_rate):
        cov = pop.spawn()
        if cov is not None:
            arrivals.append(cov)
    return pop, arrivals, departures


def offline_optimal(gain_matrix, ids: Optional[Sequence[int]] = None):
    """Per-slot argmax (ties to the lowest id).

    ``gain_matrix`` is either a sequence of ``{cov_id: gain}`` mappings or a
    2-D array whose columns are arms ``ids`` (default ``1..K``).
    """
    if isinstance(gain_matrix, np.ndarray) or (
        len(gain_matrix) and not isinstance(gain_matrix[0], Mapping)
    ):
        arr = np.asarray(gain_matrix, dtype=float)
        if arr.ndim != 2:
            raise ValueError("gain matrix must be 2-D")
        if arr.shape[1] == 0:
            raise ValueError("slot 1 has no candidates")
        cols = list(ids) if ids is not None else list(range(1, arr.shape[1] + 1))
        order = np.argsort(cols, kind="stable")
        sorted_arr = arr[:, order]
        j = np.argmax(sorted_arr, axis=1)
        a_star = [cols[order[k]] for k in j]
        return a_star, sorted_arr[np.arange(arr.shape[0]), j].tolist()
    a_star, g_star = [], []
    for t, gains in enumerate(gain_matrix, start=1):
        if not gains:
            raise ValueError(f"slot {t} has no candidates")
        best = min(gains)
        for cov in sorted(gains):
            if gains[cov] > gains[best]:
                best = cov
        a_star.append(best)
        g_star.append(float(gains[best]))
    return a_star, g_star


@dataclass
class RegretLedger:
    optimal: List[float] = field(default_factory=list)
    achieved: List[float] = field(default_factory=list)
    total: float = 0.0

    @property
    def T(self):
        return len(self.optimal)

    @property
    def average(self):
        return self.total / self.T if self.T else 0.0

    def increments(self):
        return [o - a for o, a in zip(self.optimal, self.achieved)]


def accumulate_regret(ledger: RegretLedger, g_star: float, achieved: float) -> RegretLedger:
    inc = g_star - achieved
    if inc < 0:
        raise RegretInconsistencyError(
            f"achieved gain {achieved} exceeds offline optimum {g_star} at slot {ledger.T + 1}"
        )
    ledger.optimal.append(float(g_star))
    ledger.achieved.append(float(achieved))
    ledger.total += inc
    return ledger


def _max_useful_lag(seg, bound_per_sqrt_lag):
    # no pair at lag k can violate once bound*sqrt(k) exceeds the value range
    spread = float(np.max(seg) - np.min(seg)) if seg.size else 0.0
    if bound_per_sqrt_lag <= 0:
        return seg.shape[0] - 1
    return min(seg.shape[0] - 1, int((spread / bound_per_sqrt_lag) ** 2) + 1)


def well_behaved(segment, c_f: float, sigma: float) -> bool:
    """True iff every arm satisfies ``|G(t') - G(t'')| <= c_f*sigma*sqrt|t'-t''|`` on the segment.

    ``segment`` has shape (n_slots,) or (n_slots, n_arms).
    """
    seg = np.asarray(segment, dtype=float)
    if seg.ndim == 1:
        seg = seg[:, None]
    bound = c_f * sigma
    for k in range(1, _max_useful_lag(seg, bound) + 1):
        if np.any(np.abs(seg[k:] - seg[:-k]) > bound * math.sqrt(k)):
            return False
    return True


def near_well_behaved(paths, sigma: float, c_f: float) -> np.ndarray:
    """Well-behavedness near every slot of a path.

    ``paths`` has shape (T+1, n_arms) indexed by slot 0..T. Entry ``t`` of the
    result is ``well_behaved`` on the integer slots within ``sigma**-2`` of
    ``t``, clipped to [0, T]. Each violating pair marks the range of centres
    whose window contains it, so the cost is O(T * useful lags).
    """
    g = np.asarray(paths, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    n = g.shape[0]
    half = int(math.floor(sigma ** -2 + 1e-9))
    bound = c_f * sigma
    diff = np.zeros(n + 1, dtype=np.int64)
    max_lag = min(2 * half, _max_useful_lag(g, bound))
    for k in range(1, max_lag + 1):
        bad = np.nonzero(np.any(np.abs(g[k:] - g[:-k]) > bound * math.sqrt(k), axis=1))[0]
        if bad.size == 0:
            continue
        lo = np.maximum(bad + k - half, 0)
        hi = np.minimum(bad + half, n - 1)
        keep = lo <= hi
        np.add.at(diff, lo[keep], 1)
        np.add.at(diff, hi[keep] + 1, -1)
    return np.cumsum(diff)[:n] == 0


def theoretical_beta(sigma: float) -> float:
    """Confidence scale ``15 * sigma * ln(1/sigma)`` for the two-arm regret bound."""
    if not 0 < sigma < 1:
        raise ValueError(f"theoretical beta needs 0 < sigma < 1, got {sigma}")
    return 15.0 * sigma * math.log(1.0 / sigma)


def well_behaved_constant(sigma: float) -> float:
    """``c_f = 3 * sqrt(ln(1/sigma))``."""
    if not 0 < sigma < 1:
        raise ValueError(f"c_f needs 0 < sigma < 1, got {sigma}")
    return 3.0 * math.sqrt(math.log(1.0 / sigma))


@dataclass(frozen=True)
class AnalysisConstants:
    sigma: float
    g_max: float = 1.0

    @property
    def c_f(self):
        return well_behaved_constant(self.sigma)

    @property
    def beta_theory(self):
        return theoretical_beta(self.sigma)


def normalize_gain(g: float, g_max: float) -> float:
    if g_max <= 0:
        raise ValueError("g_max must be > 0")
    return min(g / g_max, 1.0)


@dataclass
class SyntheticConfig:
    sigma: float = 0.02
    arrival_rate: float = 0.0
    mean_lifetime: float = math.inf
    v_max: int = 2
    initial_arms: int = 2
    T: int = 10_000


def realize_synthetic(cfg: SyntheticConfig, seed: int) -> Realization:
    pop = ArmPopulation(cfg.sigma, cfg.arrival_rate, cfg.mean_lifetime, cfg.v_max, seed)
    for _ in range(min(cfg.initial_arms, cfg.v_max)):
        pop.spawn()
    slots = []
    n_arrivals = 0
    for t in range(1, cfg.T + 1):
        _, arr, _ = step_population(pop, t)
        n_arrivals += len(arr)
        ids = sorted(pop.arms)
        cands = tuple(CandidateView(i, pop.distance[i], t) for i in ids)
        slots.append(SlotSample(t, cands, {i: pop.arms[i].G for i in ids}))
    return Realization(slots, env="synthetic", gain_scale="normalized",
                       meta={"seed": seed, "arrivals": n_arrivals})


def fixed_arm_paths(sigma: float, T: int, seed: int, n_arms: int = 2) -> np.ndarray:
    """Gain paths of ``n_arms`` fixed arms for slots 0..T, shape (T+1, n_arms).

    Uses the same per-arm streams as :func:`realize_synthetic` with a fixed
    population, so rows 1..T match that realization exactly.
    """
    pop = ArmPopulation(sigma, 0.0, math.inf, n_arms, seed)
    for _ in range(n_arms):
        pop.spawn()
    out = np.empty((T + 1, n_arms))
    arms = [pop.arms[i] for i in sorted(pop.arms)]
    out[0] = [a.G for a in arms]
    for t in range(1, T + 1):
        for k, a in enumerate(arms):
            out[t, k] = a.step()
    return out


def dump_gain_csv(path, realization: Realization) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "cov_id", "gain"])
        for row in realization.gain_rows():
            w.writerow([row[0], row[1], repr(float(row[2]))])
