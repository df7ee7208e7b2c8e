"""Environment realizations and the scheduling loop.

Both environments are restless and uncontrolled: what a policy schedules
never changes how the world evolves. An environment is therefore realized
once per seed into a :class:`Realization` (candidate views plus the full
per-candidate gains), and any number of policies can then be played against
it. :func:`play` is the only place where gains cross over to a policy, and
only the scheduled CoV's gain does.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .policies import CandidateView, Policy, make_policy


class RegretInconsistencyError(RuntimeError):
    """The offline optimum was beaten, which means the oracle is wrong."""


@dataclass
class SlotSample:
    t: int
    candidates: Tuple[CandidateView, ...]
    gains: Dict[int, float]
    recall_standalone: Optional[float] = None
    recall_cp: Optional[Dict[int, float]] = None


@dataclass
class Realization:
    slots: List[SlotSample]
    env: str = "synthetic"
    gain_scale: str = "normalized"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.slots)

    def gain_rows(self):
        """(slot, cov_id, gain) rows in slot/id order."""
        for s in self.slots:
            for cov in sorted(s.gains):
                yield s.t, cov, s.gains[cov]


SLOT_COLUMNS = (
    "slot",
    "candidate_count",
    "scheduled_cov",
    "observed_gain",
    "optimal_gain",
    "regret_increment",
    "recall_standalone",
    "recall_cp",
)


@dataclass
class SlotMetrics:
    slot: int
    candidate_count: int
    scheduled_cov: Optional[int]
    observed_gain: float
    optimal_gain: float
    regret_increment: float
    recall_standalone: Optional[float] = None
    recall_cp: Optional[float] = None

    def row(self):
        return [getattr(self, c) for c in SLOT_COLUMNS]


def best_candidate(gains: Dict[int, float]) -> Tuple[int, float]:
    best = None
    for cov in sorted(gains):
        if best is None or gains[cov] > gains[best]:
            best = cov
    return best, gains[best]


def play(realization: Realization, policy: Union[Policy, str]) -> List[SlotMetrics]:
    """Run one policy over a realization.

    ``policy="oracle"`` schedules the per-slot offline optimum. Slots with no
    candidates record standalone metrics and zero gain on both sides.
    """
    oracle = policy == "oracle"
    if isinstance(policy, str) and not oracle:
        policy = make_policy(policy)
    out = []
    for s in realization.slots:
        if not s.candidates:
            out.append(SlotMetrics(s.t, 0, None, 0.0, 0.0, 0.0,
                                   s.recall_standalone, s.recall_standalone))
            continue
        a_star, g_star = best_candidate(s.gains)
        if oracle:
            a = a_star
        else:
            a = policy.select(s.candidates, s.t)
            if a not in s.gains:
                raise RuntimeError(f"policy returned {a!r}, not a candidate at slot {s.t}")
        g = s.gains[a]
        if not oracle:
            policy.observe(a, g, s.t)
        inc = g_star - g
        if inc < 0:
            raise RegretInconsistencyError(f"negative regret {inc} at slot {s.t}")
        rc = s.recall_cp[a] if s.recall_cp is not None else None
        out.append(SlotMetrics(s.t, len(s.candidates), a, g, g_star, inc,
                               s.recall_standalone, rc))
    return out


def summarize(metrics: Sequence[SlotMetrics]) -> dict:
    n = len(metrics)
    regret = sum(m.regret_increment for m in metrics)
    gain = sum(m.observed_gain for m in metrics)
    out = {
        "slots": n,
        "total_regret": regret,
        "avg_regret": regret / n if n else 0.0,
        "mean_gain": gain / n if n else 0.0,
        "mean_optimal_gain": sum(m.optimal_gain for m in metrics) / n if n else 0.0,
    }
    rs = [m.recall_standalone for m in metrics if m.recall_standalone is not None]
    rc = [m.recall_cp for m in metrics if m.recall_cp is not None]
    out["mean_recall_standalone"] = sum(rs) / len(rs) if rs else None
    out["mean_recall"] = sum(rc) / len(rc) if rc else None
    return out
