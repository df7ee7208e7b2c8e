import dataclasses
import json
import os

import pytest

from coopsched.env import play
from coopsched.harness.cli import main
from coopsched.harness.config import (ConfigError, ExperimentConfig, load_config, loads_config,
                                      parse_int_list, parse_log_grid, parse_seeds)
from coopsched.harness.report import (EmptyResultsError, read_slot_csv, read_summary_json, slot_csv_text,
                                      summary_document, write_slot_csv, write_summary_json, write_sweep_csv)
from coopsched.harness.runner import RealizationCache, build_realization, run_experiment
from coopsched.harness.sweep import SweepResult, sweep
from coopsched.policies import CandidateView, MassPolicy

SYN = dict(env="synthetic", sigma=0.05, arrival_rate=0.02, mean_lifetime=200, v_max=4, T=400)


def cfg(**kw):
    return ExperimentConfig.from_mapping({**SYN, **kw})


# ---------------------------------------------------------------- config

def test_parse_helpers():
    assert parse_seeds("3") == (3,)
    assert parse_seeds("1..4") == (1, 2, 3, 4)
    assert parse_seeds("1, 5,7") == (1, 5, 7)
    with pytest.raises(ValueError):
        parse_seeds("5..1")
    assert parse_log_grid("-1:0.5:4") == (-1.0, 0.5, 4)
    assert parse_int_list("2,5") == (2, 5)


def test_loads_config_and_round_trip(tmp_path):
    c = loads_config("# comment\nenv = synthetic\nsigma = 0.1\nseeds = 1..3\npolicy = sw-ucb\n")
    assert c.sigma == 0.1 and c.seeds == (1, 2, 3) and c.policy == "sw-ucb"
    p = tmp_path / "c.cfg"
    p.write_text(c.dumps())
    assert load_config(p) == c


@pytest.mark.parametrize("text, key", [
    ("sigmaa = 0.1\n", "sigmaa"),
    ("sigma = abc\n", "sigma"),
    ("sigma = 1.5\n", "sigma"),
    ("policy = greedy\n", "policy"),
    ("env = trace\n", "trace_path"),
    ("sigma = 0.1\nsigma = 0.2\n", "sigma"),
    ("sweep_mass_beta_log10 = -3:0.6:5\n", "sweep_mass_beta_log10"),
    ("sweep_etc_epoch = 1,5\n", "sweep_etc_epoch"),
])
def test_config_errors_name_key(text, key):
    with pytest.raises(ConfigError) as e:
        loads_config(text)
    assert e.value.key == key
    assert key in str(e.value)


def test_sweep_unbounded_allows_wide_grid():
    c = loads_config("sweep_unbounded = true\nsweep_mass_beta_log10 = -3:1:3\n")
    assert len(c.sweep_grid("mass")) == 3


def test_default_sweep_grids():
    c = ExperimentConfig()
    want = [10 ** (-0.9 + 0.375 * k) for k in range(5)]
    assert [p["beta"] for p in c.sweep_grid("mass")] == pytest.approx(want)
    assert len(c.sweep_grid("sw-ucb")) == 25
    assert c.sweep_grid("etc") == [{"epoch_len": e} for e in (2, 5, 14, 38, 101)]
    assert c.sweep_grid("closest") == [{}]


# ---------------------------------------------------------------- runner

def test_determinism_byte_identical(tmp_path):
    c = cfg(policy="mass", beta=0.3)
    a = slot_csv_text(run_experiment(c, 5).metrics)
    b = slot_csv_text(run_experiment(c, 5).metrics)
    assert a == b
    assert a != slot_csv_text(run_experiment(c, 6).metrics)


def test_cache_reuses_realization():
    cache = RealizationCache(max_items=2)
    c = cfg()
    r1 = cache.get(c, 1)
    assert cache.get(c.replace(policy="etc", beta=2.0), 1) is r1
    assert cache.get(c.replace(sigma=0.06), 1) is not r1


def test_oracle_run_zero_regret():
    assert run_experiment(cfg(), 2, policy="oracle").summary["total_regret"] == 0.0


class SpyPolicy(MassPolicy):
    """Records everything the scheduler hands over."""

    def __init__(self):
        super().__init__(0.3)
        self.seen_candidates = []
        self.observed = []

    def select(self, candidates, t):
        self.seen_candidates.append(tuple(candidates))
        return super().select(candidates, t)

    def observe(self, cov_id, gain, t):
        self.observed.append((t, cov_id, gain))
        super().observe(cov_id, gain, t)


def test_policy_sees_only_scheduled_gain():
    real = build_realization(cfg(), 3)
    spy = SpyPolicy()
    metrics = play(real, spy)
    by_slot = {s.t: s for s in real.slots}
    assert len(spy.observed) == sum(1 for s in real.slots if s.candidates)
    for t, cov, g in spy.observed:
        assert g == by_slot[t].gains[cov]
    scheduled = {m.slot: m.scheduled_cov for m in metrics}
    assert all(scheduled[t] == cov for t, cov, _ in spy.observed)
    field_names = {f.name for f in dataclasses.fields(CandidateView)}
    assert field_names == {"cov_id", "distance_m", "slot"}
    for cands in spy.seen_candidates:
        assert all(type(c) is CandidateView for c in cands)


# ---------------------------------------------------------------- sweep

def test_single_point_sweep_equals_run():
    c = cfg(seeds=(1, 2), sweep_mass_beta_log10=(-0.5, -0.5, 1))
    res = sweep(c, policies=["mass"])
    assert len(res.points) == 1
    pt = res.points[0]
    for seed, reg in zip(pt.seeds, pt.avg_regret):
        run = run_experiment(c, seed, "mass", {"beta": 10 ** -0.5})
        assert reg == run.summary["avg_regret"]


def test_sweep_parallel_matches_serial():
    c = cfg(seeds=(1, 2, 3), T=200, sweep_etc_epoch=(2, 14))
    a = sweep(c, policies=["etc", "closest"], workers=1)
    b = sweep(c, policies=["etc", "closest"], workers=2)
    assert [p.avg_regret for p in a.points] == [p.avg_regret for p in b.points]
    assert a.best("etc").params["epoch_len"] in (2, 14)
    assert set(a.policies()) == {"etc", "closest"}


# ---------------------------------------------------------------- report

def test_slot_csv_round_trip(tmp_path):
    m = run_experiment(cfg(), 1).metrics
    p = tmp_path / "s.csv"
    write_slot_csv(p, m)
    back = read_slot_csv(p)
    assert len(back) == len(m)
    assert [x.scheduled_cov for x in back] == [x.scheduled_cov for x in m]
    assert [x.regret_increment for x in back] == pytest.approx([x.regret_increment for x in m])


def test_summary_json_round_trip(tmp_path):
    c = cfg(seeds=(1, 2))
    per = {s: run_experiment(c, s).summary for s in c.seeds}
    doc = summary_document(c, "mass", {"beta": 0.6}, per)
    p = tmp_path / "sum.json"
    write_summary_json(p, doc)
    back = read_summary_json(p)
    assert back["seeds"] == [1, 2]
    assert back["aggregate"]["avg_regret"]["mean"] == pytest.approx(doc["aggregate"]["avg_regret"]["mean"])
    assert ExperimentConfig.from_mapping(back["config"]) == c


def test_empty_results_write_nothing(tmp_path):
    with pytest.raises(EmptyResultsError):
        summary_document(cfg(), "mass", {}, {})
    with pytest.raises(EmptyResultsError):
        write_summary_json(tmp_path / "x.json", {})
    with pytest.raises(EmptyResultsError):
        write_sweep_csv(tmp_path / "x.csv", SweepResult([], "regret"))
    assert os.listdir(tmp_path) == []


# ---------------------------------------------------------------- CLI

def test_cli_synth_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["synth", "--seeds", "1..2", "--slots", "200", "--policy", "mass", "--beta", "0.4",
               "--out", str(out), "--set", "sigma=0.05", "--set", "v_max=3"])
    assert rc == 0
    names = sorted(os.listdir(out))
    assert names == ["synthetic_mass_seed1.csv", "synthetic_mass_seed2.csv", "synthetic_mass_summary.json"]
    doc = json.loads((out / "synthetic_mass_summary.json").read_text())
    assert doc["params"] == {"beta": 0.4} and doc["config"]["T"] == 200
    capsys.readouterr()
    assert main(["report", str(out / "synthetic_mass_summary.json")]) == 0
    assert "avg_regret" in capsys.readouterr().out


def test_cli_sweep(tmp_path, capsys):
    cfgfile = tmp_path / "s.cfg"
    cfgfile.write_text("T = 150\nsweep_policies = closest,etc\nsweep_etc_epoch = 2,5\n")
    rc = main(["sweep", "--env", "synthetic", "--config", str(cfgfile), "--seeds", "1,2", "--out", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "synthetic_sweep.csv").read_text().splitlines()
    assert rows[0].startswith("policy,beta,window_len,epoch_len")
    assert len(rows) == 1 + 3
    assert main(["report", str(tmp_path / "synthetic_sweep.csv")]) == 0


def test_cli_trace(tmp_path):
    from coopsched.world.mobility import ManhattanMap, generate_manhattan_trace
    from coopsched.world.trace import save_buildings, save_trace
    frames = generate_manhattan_trace(n_cars=20, cov_ratio=0.5, T=3, seed=1, grid=ManhattanMap(n_blocks=1),
                                      ped_rate_per_s=0.01)
    save_trace(tmp_path / "t.csv", frames)
    save_buildings(tmp_path / "b.csv", frames[0].buildings)
    rc = main(["trace", str(tmp_path / "t.csv"), "--buildings", str(tmp_path / "b.csv"),
               "--policy", "closest", "--out", str(tmp_path / "o")])
    assert rc == 0
    assert (tmp_path / "o" / "trace_closest_summary.json").exists()


def test_cli_errors_exit_2(tmp_path, capsys):
    assert main(["synth", "--set", "bogus=1", "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert main(["trace", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    assert main(["synth", "--set", "sigma=2", "--out", str(tmp_path)]) == 2
