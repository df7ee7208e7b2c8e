"""Online sensor-scheduling policies.

Every policy exposes the same two calls used by the experiment loop:

    cov = policy.select(candidates, t)
    policy.observe(cov, gain, t)

``candidates`` is a sequence of :class:`CandidateView`; a policy only ever
sees the gain of the CoV it scheduled. All argmax/argmin ties go to the
lowest ``cov_id``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Sequence, Tuple

__all__ = [
    "CandidateView",
    "NoCandidatesError",
    "Policy",
    "MassPolicy",
    "ClosestPolicy",
    "PeriodicEtcPolicy",
    "SwUcbPolicy",
    "EarliestActivatedPolicy",
    "POLICY_NAMES",
    "make_policy",
    "closest_select",
]


class NoCandidatesError(ValueError):
    """Raised when a policy is asked to choose from an empty candidate set."""

    def __init__(self, t=None):
        msg = "no candidates" if t is None else f"no candidates at slot {t}"
        super().__init__(msg)


@dataclass(frozen=True)
class CandidateView:
    cov_id: int
    distance_m: float = 0.0
    slot: int = 0

    def __post_init__(self):
        if not self.distance_m >= 0:
            raise ValueError(f"distance_m must be >= 0, got {self.distance_m}")


def _ids(candidates: Sequence[CandidateView], t) -> List[int]:
    if not candidates:
        raise NoCandidatesError(t)
    ids = sorted(c.cov_id for c in candidates)
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate cov_id in candidate set at slot {t}")
    return ids


def _argmax(ids: Sequence[int], score) -> int:
    # ids sorted ascending; strict '>' keeps the lowest id on ties
    best = ids[0]
    best_val = score(best)
    for i in ids[1:]:
        v = score(i)
        if v > best_val:
            best, best_val = i, v
    return best


class Policy:
    """Base class. Subclasses override :meth:`select` and usually :meth:`observe`."""

    name = "base"

    def select(self, candidates: Sequence[CandidateView], t: int) -> int:
        raise NotImplementedError

    def observe(self, cov_id: int, gain: float, t: int) -> None:
        pass

    def params(self) -> Dict[str, float]:
        return {}


class _LastSeen:
    """Last-seen gain / last-seen time bookkeeping shared by MASS and Earliest Activated."""

    def __init__(self):
        self.last_gain: Dict[int, float] = {}
        self.last_time: Dict[int, int] = {}

    def record(self, cov_id, gain, t):
        self.last_gain[cov_id] = float(gain)
        self.last_time[cov_id] = int(t)

    def unseen(self, ids):
        for i in ids:
            if i not in self.last_gain:
                return i
        return None

    def ucb(self, cov_id, t, beta):
        return self.last_gain[cov_id] + beta * math.sqrt(t - self.last_time[cov_id])


class MassPolicy(Policy):
    """Mobility-aware sensor scheduling.

    A never-scheduled candidate is explored first (lowest id). Otherwise the
    candidate maximising ``last_gain + beta * sqrt(t - last_time)`` is picked.
    A CoV that leaves and later re-enters keeps its old entry.
    """

    name = "mass"

    def __init__(self, beta: float = 0.6):
        if not beta > 0:
            raise ValueError(f"beta must be > 0, got {beta}")
        self.beta = float(beta)
        self.seen = _LastSeen()

    @property
    def last_gain(self):
        return self.seen.last_gain

    @property
    def last_time(self):
        return self.seen.last_time

    def select(self, candidates, t):
        ids = _ids(candidates, t)
        new = self.seen.unseen(ids)
        if new is not None:
            return new
        return _argmax(ids, lambda i: self.seen.ucb(i, t, self.beta))

    def observe(self, cov_id, gain, t):
        self.seen.record(cov_id, gain, t)

    def params(self):
        return {"beta": self.beta}


def closest_select(candidates: Sequence[CandidateView]) -> int:
    if not candidates:
        raise NoCandidatesError()
    best = min(candidates, key=lambda c: (c.distance_m, c.cov_id))
    return best.cov_id


class ClosestPolicy(Policy):
    name = "closest"

    def select(self, candidates, t):
        if not candidates:
            raise NoCandidatesError(t)
        return closest_select(candidates)


class SwUcbPolicy(Policy):
    """Sliding-window UCB over the last ``window_len`` slots.

    Padding is ``beta * sqrt(log(min(t, L)) / N_i)`` with ``N_i`` the number of
    times ``i`` was scheduled inside the window. Candidates absent from the
    window are explored first.
    """

    name = "sw-ucb"

    def __init__(self, beta: float = 1.0, window_len: int = 20):
        if beta < 0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        if int(window_len) < 1:
            raise ValueError(f"window_len must be > 0, got {window_len}")
        self.beta = float(beta)
        self.window_len = int(window_len)
        self.history: Deque[Tuple[int, int, float]] = deque()

    def _evict(self, t):
        cutoff = t - self.window_len
        while self.history and self.history[0][0] <= cutoff:
            self.history.popleft()

    def window_stats(self) -> Dict[int, Tuple[int, float]]:
        stats: Dict[int, List[float]] = {}
        for _, cov, g in self.history:
            s = stats.setdefault(cov, [0, 0.0])
            s[0] += 1
            s[1] += g
        return {k: (n, tot / n) for k, (n, tot) in stats.items()}

    def select(self, candidates, t):
        ids = _ids(candidates, t)
        self._evict(t)
        stats = self.window_stats()
        for i in ids:
            if i not in stats:
                return i
        log_term = math.log(min(t, self.window_len)) if t >= 1 else 0.0

        def score(i):
            n, mean = stats[i]
            return mean + self.beta * math.sqrt(log_term / n)

        return _argmax(ids, score)

    def observe(self, cov_id, gain, t):
        self.history.append((int(t), cov_id, float(gain)))
        self._evict(t)

    def params(self):
        return {"beta": self.beta, "window_len": self.window_len}


class PeriodicEtcPolicy(Policy):
    """Periodic explore-then-commit.

    Epochs are aligned to the absolute slot index: epoch ``k`` covers slots
    ``(k-1)*epoch_len + 1 .. k*epoch_len``. On the first call of an epoch the
    exploration queue is filled with the current candidates in id order; once
    it drains, the candidate with the best mean gain observed this epoch is
    scheduled.
    """

    name = "etc"

    def __init__(self, epoch_len: int = 10):
        if int(epoch_len) < 2:
            raise ValueError(f"epoch_len must be >= 2, got {epoch_len}")
        self.epoch_len = int(epoch_len)
        self.epoch: Optional[int] = None
        self.queue: Deque[int] = deque()
        self.epoch_obs: Dict[int, List[float]] = {}
        self.ever_scheduled: set = set()

    @property
    def phase(self):
        return "explore" if self.queue else "commit"

    def epoch_of(self, t):
        return (t - 1) // self.epoch_len

    def best_empirical(self, ids=None):
        pool = self.epoch_obs if ids is None else {i: self.epoch_obs[i] for i in ids if i in self.epoch_obs}
        if not pool:
            return None
        order = sorted(pool)
        return _argmax(order, lambda i: sum(pool[i]) / len(pool[i]))

    def select(self, candidates, t):
        ids = _ids(candidates, t)
        e = self.epoch_of(t)
        if e != self.epoch:
            self.epoch = e
            self.queue = deque(ids)
            self.epoch_obs = {}
        for i in ids:
            if i not in self.ever_scheduled:
                if i in self.queue:
                    self.queue.remove(i)
                return i
        present = set(ids)
        while self.queue:
            head = self.queue.popleft()
            if head in present:
                return head
        best = self.best_empirical(ids)
        return ids[0] if best is None else best

    def observe(self, cov_id, gain, t):
        self.ever_scheduled.add(cov_id)
        if self.epoch is not None and self.epoch_of(t) == self.epoch:
            self.epoch_obs.setdefault(cov_id, []).append(float(gain))

    def params(self):
        return {"epoch_len": self.epoch_len}


class EarliestActivatedPolicy(Policy):
    """Activation-based restless-bandit policy.

    A non-leader candidate is activated once its UCB exceeds the leader's
    last-seen gain and stays activated until scheduled. Odd slots serve the
    earliest activation, even slots exploit the leader.
    """

    name = "earliest-activated"

    def __init__(self, beta: float = 0.6):
        if not beta > 0:
            raise ValueError(f"beta must be > 0, got {beta}")
        self.beta = float(beta)
        self.seen = _LastSeen()
        # (cov_id, activation slot), ascending by slot
        self.activation_queue: List[Tuple[int, int]] = []

    def queued_ids(self):
        return [c for c, _ in self.activation_queue]

    def leader(self, ids):
        return _argmax(ids, lambda i: self.seen.last_gain[i])

    def _dequeue(self, cov_id):
        self.activation_queue = [(c, s) for c, s in self.activation_queue if c != cov_id]

    def select(self, candidates, t):
        ids = _ids(candidates, t)
        new = self.seen.unseen(ids)
        if new is not None:
            self._dequeue(new)
            return new
        lead = self.leader(ids)
        lead_gain = self.seen.last_gain[lead]
        queued = set(self.queued_ids())
        for i in ids:
            if i != lead and i not in queued and self.seen.ucb(i, t, self.beta) > lead_gain:
                self.activation_queue.append((i, t))
        choice = lead
        if t % 2 == 1:
            present = set(ids)
            for c, _ in self.activation_queue:
                if c in present:
                    choice = c
                    break
        self._dequeue(choice)
        return choice

    def observe(self, cov_id, gain, t):
        self.seen.record(cov_id, gain, t)

    def params(self):
        return {"beta": self.beta}


POLICY_NAMES = ("mass", "closest", "etc", "sw-ucb", "earliest-activated")

_FACTORY = {
    "mass": (MassPolicy, ("beta",)),
    "closest": (ClosestPolicy, ()),
    "etc": (PeriodicEtcPolicy, ("epoch_len",)),
    "sw-ucb": (SwUcbPolicy, ("beta", "window_len")),
    "earliest-activated": (EarliestActivatedPolicy, ("beta",)),
}


def make_policy(name: str, **params) -> Policy:
    """Build a policy by name; parameters not used by that policy are ignored."""
    try:
        cls, accepted = _FACTORY[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}") from None
    kwargs = {k: params[k] for k in accepted if params.get(k) is not None}
    return cls(**kwargs)
