import csv
import json

import numpy as np
import pytest
from scipy import stats

from nsim.harness import (
    CSV_COLUMNS, ConfigError, ExperimentConfig, build_environment, compute_benchmarks, make_policy, report,
    results_csv, run_experiment, worker_count, write_results,
)
from nsim.rng import derive_int, derive_stream


def small_config(**kw):
    base = dict(n_nodes=30, edge_prob=0.1, rewire_per_stage=3, model="FR", horizon=8, seeds_per_stage=2,
                replicas=2, master_seed=7, policies=["rsb", "random", "ucb"], oracle_repetitions=10,
                final_repetitions=40)
    base.update(kw)
    return ExperimentConfig(**base)


def test_streams_are_deterministic_and_tag_separated():
    a = derive_stream(123, "env", 0).random(1000)
    assert np.array_equal(a, derive_stream(123, "env", 0).random(1000))
    assert not np.array_equal(a[:5], derive_stream(123, "policy", 0).random(5))
    assert not np.array_equal(a[:5], derive_stream(123, "env", 1).random(5))
    assert not np.array_equal(a[:5], derive_stream(124, "env", 0).random(5))
    assert derive_int(2**64 - 1, "coins", 3) == derive_int(2**64 - 1, "coins", 3)


def test_stream_uniformity():
    draws = derive_stream(99, "env", 0).integers(0, 256, size=1_000_000)
    assert stats.chisquare(np.bincount(draws, minlength=256)).pvalue > 1e-6


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# small run\n"
        "graph.n_nodes = 40\n"
        "graph.edge_prob = 0.05\n"
        "graph.rewire_per_stage = 4\n"
        "model.kind = tr   # case-insensitive\n"
        "run.horizon = 12\n"
        "run.policies = rsb, rsb:gamma=0.5, random\n"
        "run.master_seed = 18446744073709551615\n"
        "rsb.gamma = 0.3\n"
    )
    cfg = ExperimentConfig.from_file(path)
    assert (cfg.n_nodes, cfg.model, cfg.horizon, cfg.gamma) == (40, "TR", 12, 0.3)
    assert cfg.policies == ["rsb", "rsb:gamma=0.5", "random"]
    assert cfg.master_seed == 2**64 - 1
    assert ExperimentConfig.from_mapping(cfg.to_mapping()) == cfg


@pytest.mark.parametrize("text, match", [
    ("graph.nodes = 3\n", "unknown config key"),
    ("run.horizon = ten\n", "run.horizon"),
    ("run.horizon 10\n", ":1:"),
    ("run.horizon = 1\nrun.horizon = 2\n", "duplicate"),
    ("rsb.gamma = 1.5\n", "gamma"),
    ("run.policies = rsb:gamma=2\n", "gamma"),
    ("run.policies = exp3\n", "unknown policy"),
    ("run.policies = ucb:gamma=0.1\n", "bad policy option"),
    ("model.kind = LT\n", "model.kind"),
    ("graph.source = trace\n", "graph.path"),
    ("run.seeds_per_stage = 6000\n", "seeds_per_stage"),
])
def test_config_errors(tmp_path, text, match):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.cfg"):
        ExperimentConfig.from_file(tmp_path / "nope.cfg")


def test_policy_specs():
    cfg = small_config()
    assert make_policy("rsb:gamma=0.5", cfg, 30).state.params.gamma == 0.5
    assert make_policy("rsb", cfg, 30).state.params.gamma == 0.2
    assert make_policy("ucb:reward_cap=10", cfg, 30).state.reward_cap == 10


def test_paired_environments_within_replica():
    cfg = small_config()
    a, b = build_environment(cfg, 0), build_environment(cfg, 0)
    other = build_environment(cfg, 1)
    for t in range(1, cfg.horizon + 1):
        assert np.array_equal(a.probs(t), b.probs(t))
        assert np.array_equal(a.begin_stage(t).live_edges, b.begin_stage(t).live_edges)
    assert a.snapshot(1) != other.snapshot(1)


def test_csv_shape_and_columns(tmp_path):
    cfg = small_config()
    result = run_experiment(cfg, threads=1)
    path = write_results(result, tmp_path)
    rows = list(csv.DictReader(open(path)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == cfg.replicas * len(cfg.policies) * cfg.horizon
    for rec in result.records:
        assert len(rec.stage_rewards) == cfg.horizon
        assert np.all(np.diff(rec.cum_rewards) >= 0)
        assert np.all(rec.stage_rewards >= cfg.seeds_per_stage)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["mean_final_regret_ratio"]) == set(cfg.policies)
    assert len(summary["benchmarks"]) == cfg.replicas


def test_rerun_is_byte_identical():
    cfg = small_config()
    assert results_csv(run_experiment(cfg, threads=1)) == results_csv(run_experiment(cfg, threads=1))
    changed = results_csv(run_experiment(small_config(master_seed=8), threads=1))
    assert changed != results_csv(run_experiment(cfg, threads=1))


def test_adding_a_policy_does_not_perturb_others():
    one = run_experiment(small_config(policies=["rsb"]), threads=1)
    two = run_experiment(small_config(policies=["random", "rsb"]), threads=1)
    a = [r for r in one.records if r.policy == "rsb"]
    b = [r for r in two.records if r.policy == "rsb"]
    assert all(np.array_equal(x.seeds, y.seeds) for x, y in zip(a, b))


def test_saved_benchmarks_reproduce_inline_ratios(tmp_path):
    cfg = small_config()
    docs = compute_benchmarks(cfg, tmp_path, threads=1)
    assert [d["replica"] for d in docs] == [0, 1]
    assert (tmp_path / "benchmark_r1.json").is_file()
    inline = results_csv(run_experiment(cfg, threads=1))
    loaded = results_csv(run_experiment(small_config(benchmark_dir=str(tmp_path)), threads=1))
    assert inline == loaded
    with pytest.raises(ConfigError, match="mode"):
        run_experiment(small_config(benchmark_dir=str(tmp_path), oracle_mode="exact"), threads=1)


def test_trace_source(tmp_path):
    from nsim.dyngraph import generate_er_rewire, write_trace

    g = generate_er_rewire(25, 0.1, 2, 3, np.random.default_rng(0))
    write_trace(tmp_path / "trace.txt", g)
    cfg = small_config(graph_source="trace", graph_path=str(tmp_path / "trace.txt"), horizon=7,
                       replicas=1, model="WC")
    result = run_experiment(cfg, threads=1)
    assert len(result.records[0].stage_rewards) == 7
    with pytest.raises(ConfigError, match="not found"):
        run_experiment(small_config(graph_source="trace", graph_path=str(tmp_path / "gone.txt")), threads=1)


def test_exact_mode_uses_scaled_benchmark():
    cfg = small_config(n_nodes=8, edge_prob=0.3, rewire_per_stage=1, oracle_mode="exact", replicas=1)
    rep = run_experiment(cfg, threads=1).replicas[0]
    assert rep.benchmark["mode"] == "exact"
    bench = rep.series.benchmark_cum * (1 - 1 / np.e)
    cum = rep.series.cum_rewards["rsb"]
    assert rep.series.ratios()["rsb"][-1] == pytest.approx((bench[-1] - cum[-1]) / bench[-1])


def test_worker_count(monkeypatch):
    monkeypatch.setenv("NSIM_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(5) == 5
    monkeypatch.setenv("NSIM_THREADS", "0")
    assert worker_count() >= 1


def test_report_rows(tmp_path):
    cfg = small_config()
    path = write_results(run_experiment(cfg, threads=1), tmp_path)
    rows = report(path, checkpoints=4)
    assert len(rows) == len(cfg.policies) * 4
    assert {r["t"] for r in rows} == {2, 4, 6, 8}
    assert all(r["replicas"] == cfg.replicas for r in rows)
    assert len(report(path, checkpoints=0)) == len(cfg.policies) * cfg.horizon
