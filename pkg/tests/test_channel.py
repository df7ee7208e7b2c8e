import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from coopsched.channel import (ETA_STATES, LinkClass, LinkGeometry, RadioParams, ResourceRatioChain,
                               classify_link, downsample_ratio, mean_pathloss_db, pathloss_db,
                               shannon_rate, step_resource_ratio)
from coopsched.rng import substream
from coopsched.world.lidar import LidarSpec


def test_classify_link():
    assert classify_link(LinkGeometry(50.0)) is LinkClass.LOS
    assert classify_link(LinkGeometry(50.0, blockers=1)) is LinkClass.NLOSV
    assert classify_link(LinkGeometry(50.0, blockers=2, building_blocked=True)) is LinkClass.NLOS


def test_geometry_validation():
    with pytest.raises(ValueError):
        LinkGeometry(0.0)
    with pytest.raises(ValueError):
        LinkGeometry(10.0, blockers=-1)


def test_pathloss_anchors():
    los = pathloss_db(LinkClass.LOS, LinkGeometry(100.0))
    nlos = pathloss_db(LinkClass.NLOS, LinkGeometry(100.0, building_blocked=True))
    # independent evaluation of the two formulas
    assert los == pytest.approx(38.77 + 16.7 * 2 + 18.2 * math.log10(5.9), abs=1e-9)
    assert los == pytest.approx(86.20, abs=0.01)
    assert nlos == pytest.approx(111.42, abs=0.01)


def test_nlosv_mean_extra_loss():
    # E[max(0, N(5, 4))] = mu*Phi(mu/s) + s*phi(mu/s) = 5.20 dB (std 4)
    mu, s = 5.0, 4.0
    exact = mu * stats.norm.cdf(mu / s) + s * stats.norm.pdf(mu / s)
    assert exact == pytest.approx(5.20, abs=0.005)
    rng = substream(0, "blockage-mc")
    geom = LinkGeometry(100.0, blockers=1)
    radio = RadioParams(shadow_std_los_db=0.0)
    base = mean_pathloss_db(LinkClass.NLOSV, 100.0)
    extra = np.array([pathloss_db(LinkClass.NLOSV, geom, rng, radio) - base for _ in range(200_000)])
    assert extra.min() >= 0.0
    assert extra.mean() == pytest.approx(exact, abs=0.03)


def test_shadowing_std():
    rng = substream(1, "shadow-mc")
    los = [pathloss_db(LinkClass.LOS, LinkGeometry(80.0), rng) for _ in range(50_000)]
    nlos = [pathloss_db(LinkClass.NLOS, LinkGeometry(80.0, building_blocked=True), rng) for _ in range(50_000)]
    assert np.std(los) == pytest.approx(3.0, rel=0.03)
    assert np.std(nlos) == pytest.approx(4.0, rel=0.03)


def test_pathloss_domain():
    with pytest.raises(ValueError):
        mean_pathloss_db(LinkClass.LOS, 0.0)


@given(st.floats(1.0, 500.0), st.floats(1.001, 2.0))
def test_pathloss_increasing_in_distance(d, k):
    for cls in (LinkClass.LOS, LinkClass.NLOS):
        assert mean_pathloss_db(cls, d * k) > mean_pathloss_db(cls, d)


@given(st.floats(2.0, 1000.0))
def test_nlos_exceeds_los(d):
    assert mean_pathloss_db(LinkClass.NLOS, d) > mean_pathloss_db(LinkClass.LOS, d)


# ---------------------------------------------------------------- resource ratio chain

def test_chain_p_zero_constant():
    chain = ResourceRatioChain(np.random.default_rng(0), p=0.0)
    start = chain.eta
    for _ in range(1000):
        step_resource_ratio(chain)
    assert chain.eta == start


def test_chain_switch_prob_from_dwell():
    chain = ResourceRatioChain.from_dwell(np.random.default_rng(0), delta_t_s=0.1, dwell_s=10.0)
    assert chain.p == pytest.approx(0.01)


def test_chain_occupancy_and_jumps():
    chain = ResourceRatioChain(substream(2, "eta-occupancy"), p=0.01)
    counts = dict.fromkeys(ETA_STATES, 0)
    prev = chain.eta
    for _ in range(1_000_000):
        cur = chain.step()
        counts[cur] += 1
        prev = cur
    for s in ETA_STATES:
        assert counts[s] / 1e6 == pytest.approx(1 / 3, abs=0.02)


def test_chain_jump_targets_uniform():
    chain = ResourceRatioChain(substream(3, "eta-jumps"), p=1.0, state=0.2)
    targets = {0.04: 0, 1.0: 0}
    for _ in range(20_000):
        chain.index = ETA_STATES.index(0.2)
        targets[chain.step()] += 1
    assert targets[0.04] / 20_000 == pytest.approx(0.5, abs=0.02)


def test_chains_independent():
    a = ResourceRatioChain(substream(5, "eta", 1), p=0.05)
    b = ResourceRatioChain(substream(5, "eta", 2), p=0.05)
    xa = np.array([a.step() for _ in range(100_000)])
    xb = np.array([b.step() for _ in range(100_000)])
    assert abs(np.corrcoef(xa, xb)[0, 1]) < 0.05


def test_chain_validates_p():
    with pytest.raises(ValueError):
        ResourceRatioChain(np.random.default_rng(0), p=1.5)


# ---------------------------------------------------------------- rate and down-sampling

def test_shannon_rate_anchor():
    noise = -174 + 10 * math.log10(30e6) + 9
    assert noise == pytest.approx(-90.23, abs=0.01)
    snr_db = 23 - 86.20 - noise
    assert snr_db == pytest.approx(27.03, abs=0.01)
    want = 30e6 * math.log2(1 + 10 ** (snr_db / 10))
    assert shannon_rate(1.0, 86.20) == pytest.approx(want, rel=1e-12)
    assert shannon_rate(1.0, 86.20) == pytest.approx(2.695e8, rel=0.01)


def test_shannon_rate_limits():
    assert shannon_rate(1.0, 400.0) < 1e-3
    with pytest.raises(ValueError):
        shannon_rate(0.0, 80.0)


@given(st.floats(60.0, 140.0))
def test_rate_half_eta_more_than_half_rate(pl):
    assert shannon_rate(0.5, pl) > shannon_rate(1.0, pl) / 2


@given(st.sampled_from(ETA_STATES), st.sampled_from(ETA_STATES), st.floats(60.0, 140.0), st.floats(0.1, 20))
def test_rate_monotone(e1, e2, pl, dpl):
    if e1 < e2:
        assert shannon_rate(e1, pl) < shannon_rate(e2, pl)
    assert shannon_rate(e1, pl + dpl) < shannon_rate(e1, pl)


def test_downsample_examples():
    frame = LidarSpec(channels=64).full_frame_bits(0.1)
    assert frame == pytest.approx(3.327e6)
    assert downsample_ratio(1.6635e6 / 0.1, 0.1, frame) == pytest.approx(0.5)
    assert downsample_ratio(1e9, 0.1, frame) == 1.0
    assert downsample_ratio(0.0, 0.1, frame) == 0.0


@given(st.floats(0, 1e9), st.floats(1e3, 1e8), st.floats(1.0, 10.0))
def test_downsample_monotone(rate, frame, k):
    r = downsample_ratio(rate, 0.1, frame)
    assert 0.0 <= r <= 1.0
    assert downsample_ratio(rate, 0.1, frame * k) <= r
    assert downsample_ratio(rate * k, 0.1, frame) >= r
