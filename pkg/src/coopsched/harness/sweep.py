"""Parameter sweeps over (policy parameters x seeds).

Each seed's realization is built once and every parameter point of every
policy is played against it. Seeds can be spread over a process pool; the
results are merged by (policy, point, seed) so the output does not depend
on completion order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig
from .runner import RealizationCache, run_experiment


@dataclass
class SweepPoint:
    policy: str
    params: Dict[str, float]
    seeds: List[int] = field(default_factory=list)
    avg_regret: List[float] = field(default_factory=list)
    mean_gain: List[float] = field(default_factory=list)
    mean_recall: List[Optional[float]] = field(default_factory=list)

    @property
    def mean_regret(self) -> float:
        return float(np.mean(self.avg_regret))

    @property
    def std_regret(self) -> float:
        return float(np.std(self.avg_regret, ddof=1)) if len(self.avg_regret) > 1 else 0.0

    @property
    def gain(self) -> float:
        return float(np.mean(self.mean_gain))

    @property
    def std_gain(self) -> float:
        return float(np.std(self.mean_gain, ddof=1)) if len(self.mean_gain) > 1 else 0.0

    @property
    def recall(self) -> Optional[float]:
        vals = [r for r in self.mean_recall if r is not None]
        return float(np.mean(vals)) if vals else None


@dataclass
class SweepResult:
    points: List[SweepPoint]
    objective: str = "regret"

    def for_policy(self, policy: str) -> List[SweepPoint]:
        return [p for p in self.points if p.policy == policy]

    def best(self, policy: str) -> SweepPoint:
        """Point with the lowest mean regret (or highest mean gain); first one on ties."""
        pts = self.for_policy(policy)
        if not pts:
            raise KeyError(f"no sweep points for {policy!r}")
        if self.objective == "gain":
            return max(pts, key=lambda p: (p.gain, -pts.index(p)))
        return min(pts, key=lambda p: (p.mean_regret, pts.index(p)))

    def policies(self) -> List[str]:
        seen = []
        for p in self.points:
            if p.policy not in seen:
                seen.append(p.policy)
        return seen


def _plan(cfg: ExperimentConfig, policies: Sequence[str]) -> List[Tuple[str, Dict[str, float]]]:
    return [(name, params) for name in policies for params in cfg.sweep_grid(name)]


def _seed_task(args):
    cfg_dict, seed, plan = args
    cfg = ExperimentConfig.from_mapping(cfg_dict)
    cache = RealizationCache(max_items=1)
    out = []
    for name, params in plan:
        s = run_experiment(cfg, seed, name, params, cache=cache).summary
        out.append((s["avg_regret"], s["mean_gain"], s["mean_recall"]))
    return seed, out


def sweep(cfg: ExperimentConfig, policies: Optional[Sequence[str]] = None,
          objective: str = "regret", workers: Optional[int] = None) -> SweepResult:
    if objective not in ("regret", "gain"):
        raise ValueError("objective must be 'regret' or 'gain'")
    policies = tuple(policies or cfg.sweep_policies)
    plan = _plan(cfg, policies)
    if not plan:
        raise ValueError("empty sweep grid")
    workers = workers or cfg.workers
    tasks = [(cfg.to_dict(), seed, plan) for seed in cfg.seeds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_seed_task, tasks))
    else:
        results = [_seed_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    points = [SweepPoint(name, dict(params)) for name, params in plan]
    for seed, rows in results:
        for pt, (reg, gain, rec) in zip(points, rows):
            pt.seeds.append(seed)
            pt.avg_regret.append(reg)
            pt.mean_gain.append(gain)
            pt.mean_recall.append(rec)
    return SweepResult(points, objective)
