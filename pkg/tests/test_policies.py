import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopsched.policies import (CandidateView, ClosestPolicy, EarliestActivatedPolicy, MassPolicy,
                                NoCandidatesError, PeriodicEtcPolicy, SwUcbPolicy, closest_select,
                                make_policy, POLICY_NAMES)


def views(*ids, dist=None):
    dist = dist or {}
    return [CandidateView(i, dist.get(i, 0.0)) for i in ids]


def seeded_mass(beta, entries):
    p = MassPolicy(beta)
    for cov, (g, tau) in entries.items():
        p.observe(cov, g, tau)
    return p


# ---------------------------------------------------------------- CandidateView

def test_candidate_view_rejects_negative_distance():
    with pytest.raises(ValueError):
        CandidateView(1, -1.0)


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        MassPolicy().select([CandidateView(1), CandidateView(1)], 1)


# ---------------------------------------------------------------- MASS

def test_mass_ucb_example():
    p = seeded_mass(0.6, {1: (0.3, 5), 2: (0.6, 9)})
    ucb1 = 0.3 + 0.6 * math.sqrt(5)
    assert ucb1 == pytest.approx(1.642, abs=1e-3)
    assert p.select(views(1, 2), 10) == 1


def test_mass_explores_never_scheduled_first():
    p = seeded_mass(0.6, {1: (0.9, 9), 2: (0.9, 9)})
    assert p.select(views(1, 2, 3), 10) == 3


def test_mass_multiple_new_candidates_lowest_first():
    p = MassPolicy(0.6)
    assert p.select(views(7, 4, 9), 1) == 4


def test_mass_tie_goes_to_lowest_id():
    p = seeded_mass(0.6, {5: (0.4, 8), 2: (0.4, 8)})
    assert p.select(views(5, 2), 10) == 2


def test_mass_observe_updates_only_scheduled():
    p = seeded_mass(0.6, {1: (0.3, 5), 2: (0.6, 9)})
    p.observe(2, 0.8, 10)
    assert p.last_gain == {1: 0.3, 2: 0.8}
    assert p.last_time == {1: 5, 2: 10}


def test_mass_observe_zero_gain_stored():
    p = MassPolicy()
    p.observe(4, 0.0, 3)
    assert p.last_gain[4] == 0.0 and p.last_time[4] == 3


def test_mass_requires_positive_beta():
    with pytest.raises(ValueError):
        MassPolicy(0.0)


def test_mass_returning_cov_keeps_state():
    p = seeded_mass(0.6, {1: (0.5, 3)})
    p.select(views(2), 4)
    p.observe(2, 0.1, 4)
    # 1 was away for a while; its stale entry is retained and its padding has grown
    assert p.last_gain[1] == 0.5
    assert p.select(views(1, 2), 30) == 1


@pytest.mark.parametrize("name", POLICY_NAMES)
def test_empty_candidates_error(name):
    with pytest.raises(NoCandidatesError):
        make_policy(name).select([], 1)


# ---------------------------------------------------------------- Closest

def test_closest_examples():
    assert closest_select(views(1, 2, dist={1: 40.0, 2: 12.0})) == 2
    assert closest_select(views(1, 2, dist={1: 10.0, 2: 10.0})) == 1
    assert closest_select(views(6, dist={6: 33.0})) == 6
    with pytest.raises(NoCandidatesError):
        closest_select([])
    assert ClosestPolicy().select(views(3, 1, dist={3: 1.0, 1: 2.0}), 1) == 3


# ---------------------------------------------------------------- SW-UCB

def test_sw_ucb_hand_example():
    p = SwUcbPolicy(beta=1.0, window_len=5)
    p.observe(1, 0.4, 16)
    p.observe(1, 0.6, 17)
    p.observe(2, 0.5, 18)
    ucb1 = 0.5 + math.sqrt(math.log(5) / 2)
    ucb2 = 0.5 + math.sqrt(math.log(5))
    assert ucb1 == pytest.approx(1.397, abs=1e-3)
    assert ucb2 == pytest.approx(1.769, abs=1e-3)
    assert p.select(views(1, 2), 20) == 2


def test_sw_ucb_unseen_in_window_first():
    p = SwUcbPolicy(beta=1.0, window_len=5)
    p.observe(1, 0.9, 9)
    p.observe(2, 0.9, 10)
    assert p.select(views(1, 2, 3), 11) == 3


def test_sw_ucb_eviction():
    p = SwUcbPolicy(beta=1.0, window_len=5)
    for t in range(1, 13):
        p.observe(1 + t % 2, 0.5, t)
    p.select(views(1, 2), 12)
    assert min(s for s, _, _ in p.history) == 8
    assert all(s > 12 - 5 for s, _, _ in p.history)


def test_sw_ucb_beta_zero_is_greedy():
    p = SwUcbPolicy(beta=0.0, window_len=10)
    p.observe(1, 0.2, 1)
    p.observe(2, 0.7, 2)
    p.observe(1, 0.3, 3)
    assert p.select(views(1, 2), 4) == 2


# ---------------------------------------------------------------- Earliest Activated

def test_ea_even_slot_returns_leader():
    p = EarliestActivatedPolicy(beta=0.6)
    p.observe(1, 0.2, 1)
    p.observe(2, 0.7, 2)
    assert p.select(views(1, 2), 4) == 2


def test_ea_odd_slot_returns_queue_head():
    p = EarliestActivatedPolicy(beta=0.01)
    for cov, g in ((1, 0.1), (2, 0.9), (3, 0.2)):
        p.observe(cov, g, 1)
    p.activation_queue = [(3, 2), (1, 3)]
    assert p.select(views(1, 2, 3), 5) == 3
    assert p.queued_ids() == [1]


def test_ea_odd_slot_empty_queue_returns_leader():
    p = EarliestActivatedPolicy(beta=0.01)
    p.observe(1, 0.1, 4)
    p.observe(2, 0.9, 4)
    assert p.activation_queue == []
    assert p.select(views(1, 2), 5) == 2


def test_ea_activation_rule():
    p = EarliestActivatedPolicy(beta=0.6)
    p.observe(1, 0.5, 1)
    p.observe(2, 0.4, 2)
    # even slot: 2's UCB 0.4 + 0.6*sqrt(2) > 0.5 gets it activated, but the leader is served
    assert p.select(views(1, 2), 4) == 1
    assert p.queued_ids() == [2]
    assert p.select(views(1, 2), 5) == 2
    assert p.queued_ids() == []


def test_ea_queue_unique_and_ordered():
    p = EarliestActivatedPolicy(beta=0.6)
    for cov in (1, 2, 3):
        p.observe(cov, 0.1 * cov, 1)
    for t in range(2, 40):
        a = p.select(views(1, 2, 3), t)
        p.observe(a, 0.1 * a, t)
        ids = p.queued_ids()
        assert len(ids) == len(set(ids))
        slots = [s for _, s in p.activation_queue]
        assert slots == sorted(slots)


# ---------------------------------------------------------------- Periodic ETC

def test_etc_round_robin_then_commit():
    p = PeriodicEtcPolicy(epoch_len=6)
    gains = {1: 0.2, 2: 0.7}
    picks = []
    for t in range(1, 7):
        a = p.select(views(1, 2), t)
        p.observe(a, gains[a], t)
        picks.append(a)
    assert picks == [1, 2, 2, 2, 2, 2]


def test_etc_explores_each_epoch():
    p = PeriodicEtcPolicy(epoch_len=4)
    gains = {1: 0.2, 2: 0.7}
    picks = []
    for t in range(1, 9):
        a = p.select(views(1, 2), t)
        p.observe(a, gains[a], t)
        picks.append(a)
    assert picks == [1, 2, 2, 2, 1, 2, 2, 2]


def test_etc_best_departs_mid_commit():
    p = PeriodicEtcPolicy(epoch_len=10)
    gains = {1: 0.2, 2: 0.7, 3: 0.5}
    for t in range(1, 5):
        a = p.select(views(1, 2, 3), t)
        p.observe(a, gains[a], t)
    assert p.phase == "commit"
    assert p.select(views(1, 3), 5) == 3


def test_etc_new_arrival_explored_immediately():
    p = PeriodicEtcPolicy(epoch_len=10)
    for t in range(1, 4):
        a = p.select(views(1, 2), t)
        p.observe(a, 0.5, t)
    assert p.select(views(1, 2, 9), 4) == 9


def test_etc_rejects_short_epoch():
    with pytest.raises(ValueError):
        PeriodicEtcPolicy(epoch_len=1)


# ---------------------------------------------------------------- factory

def test_make_policy_names_and_params():
    assert isinstance(make_policy("mass", beta=0.3, window_len=7), MassPolicy)
    assert make_policy("sw-ucb", beta=0.2, window_len=7).params() == {"beta": 0.2, "window_len": 7}
    assert make_policy("etc", epoch_len=14).params() == {"epoch_len": 14}
    with pytest.raises(ValueError):
        make_policy("greedy")


# ---------------------------------------------------------------- properties

cand_sets = st.lists(st.integers(1, 30), min_size=1, max_size=6, unique=True)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(POLICY_NAMES), st.lists(cand_sets, min_size=1, max_size=40),
       st.integers(0, 2 ** 31 - 1))
def test_select_returns_a_candidate(name, sets, seed):
    rng = np.random.default_rng(seed)
    p = make_policy(name)
    for t, ids in enumerate(sets, start=1):
        cands = [CandidateView(i, float(rng.uniform(0, 100))) for i in ids]
        a = p.select(cands, t)
        assert a in ids
        p.observe(a, float(rng.uniform()), t)


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.integers(1, 10), st.tuples(st.floats(0, 1), st.integers(1, 50)),
                       min_size=1, max_size=6),
       st.floats(0.01, 5), st.floats(0.01, 100))
def test_mass_scale_invariance(entries, beta, scale):
    t = 60
    a = seeded_mass(beta, entries).select(views(*entries), t)
    scaled = {k: (g * scale, tau) for k, (g, tau) in entries.items()}
    b = seeded_mass(beta * scale, scaled).select(views(*entries), t)
    # exact ties can flip under rounding; compare UCB values instead of ids in that case
    if a != b:
        ucb = {k: g + beta * math.sqrt(t - tau) for k, (g, tau) in entries.items()}
        assert ucb[a] == pytest.approx(ucb[b], rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.integers(1, 8), st.tuples(st.floats(0, 1), st.integers(1, 9)),
                       min_size=2, max_size=5),
       st.floats(0, 1))
def test_observe_touches_one_entry(entries, gain):
    p = seeded_mass(0.6, entries)
    before_g, before_t = dict(p.last_gain), dict(p.last_time)
    target = sorted(entries)[0]
    p.observe(target, gain, 10)
    for k in entries:
        if k != target:
            assert p.last_gain[k] == before_g[k] and p.last_time[k] == before_t[k]


def test_mass_idle_time_bound():
    # gains in [0, 1]: a candidate idle for d slots has UCB >= beta*sqrt(d), so d stays bounded
    beta, T, K = 0.5, 100_000, 3
    rng = np.random.default_rng(11)
    gains = rng.uniform(size=(T + 1, K))
    p = MassPolicy(beta)
    cands = views(*range(1, K + 1))
    last = {i: 0 for i in range(1, K + 1)}
    worst = 0
    for t in range(1, T + 1):
        a = p.select(cands, t)
        worst = max(worst, t - last[a] - 1)
        last[a] = t
        p.observe(a, gains[t, a - 1], t)
    assert worst <= (1 / beta * (1 + 1.0)) ** 2 + 2
