"""Experiment configuration, orchestration and result files.

Within a replica every policy faces the same environment: the same graph,
the same recorded probabilities and the same live-edge coins per stage.
Replicas are independent and may run in parallel; every random stream is
derived from ``(master_seed, tag, index)`` so results do not depend on the
degree of parallelism.
"""

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import oracle
from .dyngraph import generate_er_rewire, load_trace
from .policies import RandomPolicy, RsbPolicy, UcbPolicy
from .propagation import Environment, InfluenceModel
from .rng import derive_int, derive_stream

__all__ = [
    "ConfigError", "ExperimentConfig", "RunRecord", "ExperimentResult", "derive_stream",
    "run_experiment", "compute_benchmarks", "write_results", "report", "CSV_COLUMNS",
]

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("replica", "policy", "t", "stage_reward", "cum_reward", "benchmark_cum", "regret_ratio")


class ConfigError(ValueError):
    pass


def _parse_bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(text):
    if isinstance(text, (list, tuple)):
        return list(text)
    return [p.strip() for p in str(text).split(",") if p.strip()]


# dotted config key -> (attribute, parser)
_SCHEMA = {
    "graph.source": ("graph_source", str),
    "graph.path": ("graph_path", str),
    "graph.cycle": ("graph_cycle", _parse_bool),
    "graph.n_nodes": ("n_nodes", int),
    "graph.edge_prob": ("edge_prob", float),
    "graph.rewire_per_stage": ("rewire_per_stage", int),
    "model.kind": ("model", str),
    "run.horizon": ("horizon", int),
    "run.seeds_per_stage": ("seeds_per_stage", int),
    "run.replicas": ("replicas", int),
    "run.master_seed": ("master_seed", int),
    "run.policies": ("policies", _parse_list),
    "rsb.gamma": ("gamma", float),
    "rsb.scale_c": ("scale_c", float),
    "ucb.reward_cap": ("reward_cap", float),
    "ucb.exploration_coeff": ("exploration_coeff", float),
    "oracle.mode": ("oracle_mode", str),
    "oracle.repetitions": ("oracle_repetitions", int),
    "oracle.final_repetitions": ("final_repetitions", int),
    "oracle.load": ("benchmark_dir", str),
    "output.dir": ("out_dir", str),
}


@dataclass
class ExperimentConfig:
    graph_source: str = "generate"
    graph_path: str = None
    graph_cycle: bool = True
    n_nodes: int = 5000
    edge_prob: float = 0.005
    rewire_per_stage: int = 1000
    model: str = "WC"
    horizon: int = 100
    seeds_per_stage: int = 5
    replicas: int = 1
    master_seed: int = 0
    policies: list = field(default_factory=lambda: ["rsb", "random", "ucb"])
    gamma: float = 0.2
    scale_c: float = 1.0
    reward_cap: float = 120.0
    exploration_coeff: float = math.sqrt(1.5)
    oracle_mode: str = oracle.EXPERIMENT
    oracle_repetitions: int = 200
    final_repetitions: int = 2000
    benchmark_dir: str = None
    out_dir: str = "out"

    def __post_init__(self):
        self.model = self.model.upper()
        self.validate()

    def validate(self):
        if self.graph_source not in ("generate", "trace"):
            raise ConfigError(f"graph.source must be 'generate' or 'trace', got {self.graph_source!r}")
        if self.graph_source == "trace" and not self.graph_path:
            raise ConfigError("graph.path is required when graph.source = trace")
        if self.model not in ("WC", "TR", "FR"):
            raise ConfigError(f"model.kind must be WC, TR or FR, got {self.model!r}")
        if self.horizon < 1 or self.replicas < 1 or self.seeds_per_stage < 1:
            raise ConfigError("horizon, replicas and seeds_per_stage must be >= 1")
        if self.graph_source == "generate" and self.seeds_per_stage > self.n_nodes:
            raise ConfigError("seeds_per_stage exceeds n_nodes")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"rsb.gamma must lie in [0, 1], got {self.gamma}")
        if self.scale_c <= 0 or self.reward_cap <= 0 or self.exploration_coeff <= 0:
            raise ConfigError("scale_c, reward_cap and exploration_coeff must be positive")
        if self.oracle_mode not in (oracle.EXPERIMENT, oracle.EXACT):
            raise ConfigError(f"oracle.mode must be 'experiment' or 'exact', got {self.oracle_mode!r}")
        if self.master_seed < 0 or self.master_seed >= 2 ** 64:
            raise ConfigError("run.master_seed must be an unsigned 64-bit integer")
        if not self.policies:
            raise ConfigError("run.policies is empty")
        for spec in self.policies:
            _policy_params(spec, self)

    @classmethod
    def from_mapping(cls, mapping):
        kwargs = {}
        for key, value in mapping.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            attr, parse = _SCHEMA[key]
            try:
                kwargs[attr] = parse(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path):
        """Read a flat ``section.key = value`` document (``#`` starts a comment)."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        mapping = {}
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if key in mapping:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            mapping[key] = value
        cfg = cls.from_mapping(mapping)
        if cfg.graph_path and not Path(cfg.graph_path).is_absolute():
            cfg.graph_path = str(path.parent / cfg.graph_path)
        return cfg

    def to_mapping(self):
        attrs = {attr: key for key, (attr, _) in _SCHEMA.items()}
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            out[attrs[f.name]] = ",".join(value) if isinstance(value, list) else value
        return out


def _policy_params(spec, cfg):
    """Split ``name:key=value:...`` into a name and constructor kwargs."""
    name, *opts = spec.split(":")
    defaults = {
        "rsb": {"gamma": cfg.gamma, "scale_c": cfg.scale_c},
        "ucb": {"reward_cap": cfg.reward_cap, "exploration_coeff": cfg.exploration_coeff},
        "random": {},
    }
    if name not in defaults:
        raise ConfigError(f"unknown policy {name!r} in {spec!r}")
    params = dict(defaults[name])
    for opt in opts:
        key, sep, value = opt.partition("=")
        if not sep or key not in params:
            raise ConfigError(f"bad policy option {opt!r} in {spec!r}")
        params[key] = float(value)
    if name == "rsb" and not 0.0 <= params["gamma"] <= 1.0:
        raise ConfigError(f"gamma out of range in {spec!r}")
    if any(v <= 0 for k, v in params.items() if k != "gamma"):
        raise ConfigError(f"non-positive parameter in {spec!r}")
    return name, params


def make_policy(spec, cfg, n_nodes):
    name, params = _policy_params(spec, cfg)
    cls = {"rsb": RsbPolicy, "ucb": UcbPolicy, "random": RandomPolicy}[name]
    return cls(n_nodes, cfg.seeds_per_stage, **params)


@dataclass
class RunRecord:
    replica: int
    policy: str
    stage_rewards: np.ndarray
    cum_rewards: np.ndarray
    seeds: np.ndarray
    wall_time: np.ndarray = field(repr=False)


@dataclass
class ReplicaResult:
    replica: int
    series: oracle.RegretSeries
    records: list
    benchmark: dict


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replicas: list

    @property
    def records(self):
        return [rec for rep in self.replicas for rec in rep.records]

    def final_ratios(self):
        """Per-policy array of final regret ratios, one entry per replica."""
        out = {}
        for rep in self.replicas:
            for name, ratio in rep.series.ratios().items():
                out.setdefault(name, []).append(ratio[-1])
        return {k: np.array(v) for k, v in out.items()}

    def ratios_at(self, t):
        out = {}
        for rep in self.replicas:
            for name, ratio in rep.series.ratios().items():
                out.setdefault(name, []).append(ratio[t - 1])
        return {k: np.array(v) for k, v in out.items()}


def build_graph(cfg, replica):
    if cfg.graph_source == "trace":
        path = Path(cfg.graph_path)
        if not path.is_file():
            raise ConfigError(f"trace file not found: {path}")
        return load_trace(path, cfg.horizon, cycle=cfg.graph_cycle)
    rng = derive_stream(cfg.master_seed, "graph", replica)
    return generate_er_rewire(cfg.n_nodes, cfg.edge_prob, cfg.rewire_per_stage, cfg.horizon, rng)


def build_environment(cfg, replica):
    graph = build_graph(cfg, replica)
    if cfg.seeds_per_stage > graph.n_nodes:
        raise ConfigError("seeds_per_stage exceeds the graph's node count")
    model = InfluenceModel(cfg.model, cfg.horizon, derive_stream(cfg.master_seed, "model", replica))
    return Environment(graph, model, derive_int(cfg.master_seed, "coins", replica))


def compute_benchmark(cfg, env, replica):
    """Offline fixed-seed-set benchmark for one replica's environment."""
    if cfg.oracle_mode == oracle.EXACT:
        seeds, _ = oracle.exhaustive_opt(env, cfg.seeds_per_stage, cfg.oracle_repetitions,
                                         derive_stream(cfg.master_seed, "oracle", replica))
    else:
        seeds = oracle.greedy_offline(env, cfg.seeds_per_stage, cfg.oracle_repetitions,
                                      derive_stream(cfg.master_seed, "oracle", replica)).seeds
    est = oracle.estimate_overall_spread(env, seeds, cfg.final_repetitions,
                                         derive_stream(cfg.master_seed, "benchmark", replica))
    return oracle.benchmark_document(cfg.oracle_mode, seeds, est, cfg.master_seed, replica=replica)


def benchmark_path(directory, replica):
    return Path(directory) / f"benchmark_r{replica}.json"


def run_policy(env, spec, cfg, replica):
    policy = make_policy(spec, cfg, env.n_nodes)
    rng = derive_stream(cfg.master_seed, "policy:" + spec, replica)
    rewards = np.zeros(env.horizon, dtype=np.int64)
    seeds = np.zeros((env.horizon, cfg.seeds_per_stage), dtype=np.int64)
    wall = np.zeros(env.horizon)
    for t in range(1, env.horizon + 1):
        stage = env.begin_stage(t)
        start = time.perf_counter()
        selection = policy.select_stage(stage, rng)
        wall[t - 1] = time.perf_counter() - start
        rewards[t - 1] = stage.total_spread()
        seeds[t - 1] = selection.seeds
    return RunRecord(replica, spec, rewards, np.cumsum(rewards), seeds, wall)


def run_replica(cfg, replica):
    env = build_environment(cfg, replica)
    if cfg.benchmark_dir:
        bench = oracle.load_benchmark(benchmark_path(cfg.benchmark_dir, replica))
        if bench["mode"] != cfg.oracle_mode:
            raise ConfigError(f"benchmark mode {bench['mode']!r} does not match oracle.mode")
    else:
        bench = compute_benchmark(cfg, env, replica)
    records = [run_policy(env, spec, cfg, replica) for spec in cfg.policies]
    series = oracle.RegretSeries(np.cumsum(bench["per_stage"]),
                                 {rec.policy: rec.cum_rewards for rec in records},
                                 mode=bench["mode"])
    return ReplicaResult(replica, series, records, bench)


def worker_count(threads=None):
    if threads is None:
        threads = int(os.environ.get("NSIM_THREADS", "0") or 0)
    return threads if threads > 0 else (os.cpu_count() or 1)


def _map_replicas(fn, cfg, threads):
    replicas = range(cfg.replicas)
    workers = min(worker_count(threads), cfg.replicas)
    if workers <= 1:
        return [fn(cfg, r) for r in replicas]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [cfg] * cfg.replicas, replicas))


def run_experiment(cfg, threads=None):
    """Run every policy on every replica; results sorted by replica."""
    results = _map_replicas(run_replica, cfg, threads)
    return ExperimentResult(cfg, sorted(results, key=lambda r: r.replica))


def _benchmark_for(cfg, replica):
    return compute_benchmark(cfg, build_environment(cfg, replica), replica)


def compute_benchmarks(cfg, out_dir=None, threads=None):
    docs = _map_replicas(_benchmark_for, cfg, threads)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        for doc in docs:
            oracle.save_benchmark(benchmark_path(out_dir, doc["replica"]), doc)
    return docs


def _fmt(x):
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def results_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in result.replicas:
        ratios = rep.series.ratios()
        bench = rep.series.benchmark_cum
        for rec in sorted(rep.records, key=lambda r: r.policy):
            ratio = ratios[rec.policy]
            for t in range(len(rec.stage_rewards)):
                writer.writerow((rep.replica, rec.policy, t + 1, int(rec.stage_rewards[t]),
                                 int(rec.cum_rewards[t]), _fmt(bench[t]), _fmt(ratio[t])))
    return buf.getvalue()


def write_results(result, out_dir):
    """Write ``results.csv`` and ``summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    csv_path.write_text(results_csv(result))
    finals = result.final_ratios()
    summary = {
        "config": result.config.to_mapping(),
        "benchmarks": [rep.benchmark for rep in result.replicas],
        "mean_final_regret_ratio": {k: float(np.nanmean(v)) for k, v in sorted(finals.items())},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return csv_path


def _checkpoints(horizon, count):
    if count <= 0 or count >= horizon:
        return list(range(1, horizon + 1))
    return sorted({int(round(x)) for x in np.linspace(horizon / count, horizon, count)})


def report(csv_path, checkpoints=10, plot=None):
    """Mean regret ratio per (policy, checkpoint stage) across replicas.

    Returns a list of row dicts; writes a line chart to ``plot`` if given.
    """
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise FileNotFoundError(f"results file not found: {csv_path}")
    table = {}
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{csv_path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            ratio = float(row["regret_ratio"]) if row["regret_ratio"] else math.nan
            table.setdefault(row["policy"], {}).setdefault(int(row["t"]), []).append(
                (ratio, float(row["cum_reward"])))
    if not table:
        raise ValueError(f"{csv_path}: no result rows")
    horizon = max(max(ts) for ts in table.values())
    points = _checkpoints(horizon, checkpoints)
    rows = []
    for policy in sorted(table):
        for t in points:
            vals = np.array(table[policy][t])
            rows.append({
                "policy": policy,
                "t": t,
                "replicas": len(vals),
                "mean_regret_ratio": float(np.nanmean(vals[:, 0])),
                "std_regret_ratio": float(np.nanstd(vals[:, 0])),
                "mean_cum_reward": float(vals[:, 1].mean()),
            })
    if plot is not None:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.5))
        for policy in sorted(table):
            ts = sorted(table[policy])
            ax.plot(ts, [np.nanmean([r for r, _ in table[policy][t]]) for t in ts], label=policy)
        ax.set_xlabel("T")
        ax.set_ylabel("regret ratio")
        ax.legend()
        fig.tight_layout()
        fig.savefig(plot)
        plt.close(fig)
    return rows


def format_report(rows):
    lines = [f"{'policy':<20} {'t':>6} {'reps':>5} {'ratio':>10} {'std':>10} {'cum_reward':>12}"]
    for r in rows:
        lines.append(f"{r['policy']:<20} {r['t']:>6d} {r['replicas']:>5d} {r['mean_regret_ratio']:>10.4f} "
                     f"{r['std_regret_ratio']:>10.4f} {r['mean_cum_reward']:>12.1f}")
    return "\n".join(lines)
