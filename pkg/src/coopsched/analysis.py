"""Empirical checks of the regret analysis and statistical helpers.

Everything here runs on the synthetic reflected walk: stationarity of the
gain process, violation frequency of well-behavedness, the "scheduled within
one slot" properties of MASS on well-behaved slots, and the two-arm regret
scaling. ``paired_test`` compares two policies on common seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from scipy import stats

from .policies import CandidateView, MassPolicy, Policy
from .rng import substream
from .synthetic import (fixed_arm_paths, near_well_behaved, reflected_walk,
                        theoretical_beta, well_behaved_constant)


def stationarity_ks(sigma: float, n_steps: int, seed: int = 0) -> float:
    """KS distance between a long single-arm path and Uniform[0, 1]."""
    rng = substream(seed, "stationarity")
    g0 = rng.uniform()
    path = reflected_walk(g0, rng.normal(0.0, sigma, n_steps))
    return float(stats.kstest(path, "uniform").statistic)


def regret_anchor(sigma: float) -> float:
    """``sigma**2 * ln(1/sigma)**3``, the two-arm regret scaling."""
    return sigma ** 2 * math.log(1.0 / sigma) ** 3


def play_fixed_arms(paths: np.ndarray, policy: Policy):
    """Run ``policy`` on fixed arms (columns, ids 1..K) for slots 1..T of ``paths`` (rows 0..T).

    Returns ``(choices, regret_increments)`` for slots 1..T.
    """
    g = np.asarray(paths, dtype=float)
    T, K = g.shape[0] - 1, g.shape[1]
    views = tuple(CandidateView(k + 1) for k in range(K))
    choices = np.empty(T, dtype=np.int64)
    for t in range(1, T + 1):
        a = policy.select(views, t)
        policy.observe(a, float(g[t, a - 1]), t)
        choices[t - 1] = a
    rows = g[1:]
    regret = rows.max(axis=1) - rows[np.arange(T), choices - 1]
    return choices, regret


def two_arm_regret(sigma: float, T: int, seed: int, beta: float = None) -> float:
    """Average regret of MASS on two fixed arms (default ``beta = theoretical_beta(sigma)``)."""
    beta = theoretical_beta(sigma) if beta is None else beta
    paths = fixed_arm_paths(sigma, T, seed)
    _, regret = play_fixed_arms(paths, MassPolicy(beta))
    return float(regret.mean())


def well_behaved_violation_rate(sigma: float, n_windows: int, seed: int, n_paths: int = 10,
                                path_len: int = 100_000, c_f: float = None) -> Dict[str, float]:
    """Violation frequency of well-behavedness near sampled slots.

    Window centres are drawn uniformly from the interior (unclipped) slots of
    ``n_paths`` independent two-arm paths. Also returns the frequency over
    every interior slot, a lower-variance estimate of the same quantity.
    """
    c_f = well_behaved_constant(sigma) if c_f is None else c_f
    half = int(math.floor(sigma ** -2 + 1e-9))
    if path_len <= 2 * half:
        raise ValueError("paths are shorter than one window")
    rng = substream(seed, "wb-windows")
    masks = []
    for k in range(n_paths):
        paths = fixed_arm_paths(sigma, path_len, seed * 1000 + k)
        masks.append(near_well_behaved(paths, sigma, c_f)[half: path_len + 1 - half])
    inner = np.stack(masks)
    which = rng.integers(n_paths, size=n_windows)
    where = rng.integers(inner.shape[1], size=n_windows)
    sampled = ~inner[which, where]
    return {
        "sigma": sigma,
        "c_f": c_f,
        "sampled_rate": float(sampled.mean()),
        "sampled_violations": int(sampled.sum()),
        "all_slots_rate": float((~inner).mean()),
    }


@dataclass
class ScheduleCheck:
    well_behaved_slots: int
    optimal_late: int
    leader_late: int

    @property
    def violations(self) -> int:
        return self.optimal_late + self.leader_late


def schedule_within_one_slot(paths: np.ndarray, sigma: float, beta: float, c_f: float = None) -> ScheduleCheck:
    """Run MASS on fixed arms; on every slot well-behaved nearby, check that the
    optimal arm and the leader at ``t`` are scheduled at ``t`` or ``t + 1``.

    The leader is the arm with the largest last-seen gain before slot ``t``'s
    decision. Slot ``T`` is skipped since ``T + 1`` is not simulated.
    """
    c_f = well_behaved_constant(sigma) if c_f is None else c_f
    g = np.asarray(paths, dtype=float)
    T, K = g.shape[0] - 1, g.shape[1]
    ok = near_well_behaved(g, sigma, c_f)
    policy = MassPolicy(beta)
    views = tuple(CandidateView(k + 1) for k in range(K))
    choices = np.zeros(T + 2, dtype=np.int64)
    leaders = np.zeros(T + 2, dtype=np.int64)
    for t in range(1, T + 1):
        last = policy.last_gain
        if len(last) == K:
            best = None
            for cov in sorted(last):
                if best is None or last[cov] > last[best]:
                    best = cov
            leaders[t] = best
        a = policy.select(views, t)
        policy.observe(a, float(g[t, a - 1]), t)
        choices[t] = a
    opt = np.argmax(g, axis=1) + 1  # ties to the lowest id
    n_ok = opt_late = lead_late = 0
    for t in range(1, T):
        if not ok[t] or leaders[t] == 0:
            continue
        n_ok += 1
        if opt[t] not in (choices[t], choices[t + 1]):
            opt_late += 1
        if leaders[t] not in (choices[t], choices[t + 1]):
            lead_late += 1
    return ScheduleCheck(n_ok, opt_late, lead_late)


@dataclass
class PairedComparison:
    mean_diff: float
    std_diff: float
    n: int
    t_stat: float
    p_value: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.mean_diff < 0 and self.p_value < alpha


def paired_test(a: Sequence[float], b: Sequence[float]) -> PairedComparison:
    """One-sided paired t-test of ``mean(a - b) < 0`` over common seeds."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equally long samples of size >= 2")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        mean = float(d.mean())
        return PairedComparison(mean, 0.0, d.size, -math.inf if mean < 0 else math.inf,
                                0.0 if mean < 0 else 1.0)
    res = stats.ttest_rel(a, b, alternative="less")
    return PairedComparison(float(d.mean()), sd, d.size, float(res.statistic), float(res.pvalue))


def loglog_miss_slope(difficulties: np.ndarray, points: Sequence[int] = None) -> float:
    """Slope of log(miss rate) vs log(point count), miss meaning ``N_j > n``."""
    d = np.asarray(difficulties)
    if points is None:
        points = np.unique(np.round(np.logspace(0.3, 3, 20)).astype(int))
    points = np.asarray(points)
    miss = np.array([(d > n).mean() for n in points])
    keep = miss > 0
    slope, _ = np.polyfit(np.log(points[keep]), np.log(miss[keep]), 1)
    return float(slope)


__all__ = [
    "stationarity_ks",
    "regret_anchor",
    "play_fixed_arms",
    "two_arm_regret",
    "well_behaved_violation_rate",
    "ScheduleCheck",
    "schedule_within_one_slot",
    "PairedComparison",
    "paired_test",
    "loglog_miss_slope",
]
