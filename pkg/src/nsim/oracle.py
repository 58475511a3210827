"""Offline benchmarks and regret metrics.

Expected spreads are Monte-Carlo estimates over fresh live-edge samples of
an environment's recorded probabilities. Comparisons between seed sets use
common random numbers: every candidate is scored on the same samples.
"""

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

GREEDY_FACTOR = 1.0 - 1.0 / math.e
EXPERIMENT, EXACT = "experiment", "exact"


class EnumerationCapError(ValueError):
    pass


@dataclass
class SpreadEstimate:
    mean: float
    stderr: float
    repetitions: int
    per_stage: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.repetitions < 1 or self.stderr < 0:
            raise ValueError("need repetitions >= 1 and stderr >= 0")


@dataclass
class OfflineGreedyResult:
    seeds: tuple
    f_estimate: SpreadEstimate
    per_position_gain: tuple


def _estimate(totals_per_rep, per_stage=None):
    totals = np.asarray(totals_per_rep, dtype=float)
    r = totals.size
    stderr = float(totals.std(ddof=1) / math.sqrt(r)) if r > 1 else 0.0
    return SpreadEstimate(float(totals.mean()), stderr, r, per_stage)


def _sample_live(snap, probs, repetitions, rng):
    """Live edges of ``repetitions`` coin draws as global (row, col) ids.

    Sample ``r`` occupies ids ``r * N .. r * N + N - 1``; rows come out
    sorted.
    """
    n = snap.n_nodes
    live = rng.random((repetitions, snap.n_edges)) < probs
    reps, edges = np.nonzero(live)
    return reps * n + snap.src[edges], reps * n + snap.dst[edges]


def _popcount(words):
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def _reach_bitsets(n_nodes, repetitions, rows, cols):
    """Packed reachability sets ``(R, N, W)`` for block-diagonal live edges.

    Iterates reach[u] |= reach[v] over live edges (u, v) to a fixpoint;
    the number of sweeps is bounded by the longest shortest path.
    """
    words = (n_nodes + 63) // 64
    size = repetitions * n_nodes
    reach = np.zeros((size, words), dtype=np.uint64)
    local = np.arange(size) % n_nodes
    reach[np.arange(size), local // 64] = np.left_shift(np.uint64(1), (local % 64).astype(np.uint64))
    if rows.size:
        heads, starts = np.unique(rows, return_index=True)
        while True:
            merged = reach[heads] | np.bitwise_or.reduceat(reach[cols], starts, axis=0)
            if np.array_equal(merged, reach[heads]):
                break
            reach[heads] = merged
    return reach.reshape(repetitions, n_nodes, words)


class Realizations:
    """``repetitions`` live-edge samples per stage with node reachability.

    Reachable sets are packed bitsets of shape ``(T, R, N, W)``; coverage
    state is ``(T, R, W)``: which nodes sample ``r`` of stage ``t`` has
    activated. Gains are integer counts summed over samples; divide by
    ``R`` for expected values. Memory grows as ``T * R * N**2 / 8`` bytes.
    """

    def __init__(self, env, repetitions, rng):
        if repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        self.horizon = env.horizon
        self.n_nodes = env.n_nodes
        self.repetitions = int(repetitions)
        self.words = (self.n_nodes + 63) // 64
        self.reach = np.empty((self.horizon, repetitions, self.n_nodes, self.words), dtype=np.uint64)
        for t in range(1, env.horizon + 1):
            rows, cols = _sample_live(env.snapshot(t), env.probs(t), repetitions, rng)
            self.reach[t - 1] = _reach_bitsets(self.n_nodes, repetitions, rows, cols)

    def empty(self):
        return np.zeros((self.horizon, self.repetitions, self.words), dtype=np.uint64)

    def gains(self, covered, t):
        """Newly covered counts ``(R, N)`` for every candidate at stage index ``t``."""
        return _popcount(self.reach[t] & ~covered[t][:, None, :])

    def total_gains(self, covered):
        """Candidate gains summed over all samples and stages, shape ``(N,)``."""
        return sum(self.gains(covered, t).sum(axis=0) for t in range(self.horizon)).astype(float)

    def node_gain(self, covered, node):
        """Summed gain of a single candidate (cheaper than all of them)."""
        return float(_popcount(self.reach[:, :, node, :] & ~covered).sum())

    def cover(self, covered, nodes):
        """Activate ``nodes`` in place: one node overall, or one per stage (-1 skips)."""
        nodes = np.asarray(nodes)
        if nodes.ndim == 0:
            covered |= self.reach[:, :, int(nodes), :]
            return covered
        for t, node in enumerate(nodes):
            if node >= 0:
                covered[t] |= self.reach[t, :, int(node), :]
        return covered

    def spread(self, covered):
        """Activated counts per stage and sample, shape ``(T, R)``."""
        return _popcount(covered)

    def cover_log(self, log, upto=None):
        """Coverage of each stage's logged seeds (first ``upto`` positions)."""
        log = np.asarray(log)
        covered = self.empty()
        for k in range(log.shape[1] if upto is None else upto):
            self.cover(covered, log[:, k])
        return covered


def estimate_overall_spread(env, seeds, repetitions, rng):
    """Monte-Carlo estimate of the expected spread summed over all stages.

    Each repetition replays every stage with fresh coins; ``per_stage``
    holds the stage-wise mean spreads.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    seeds = sorted({int(s) for s in seeds})
    n = env.n_nodes
    per_rep = np.zeros(repetitions)
    per_stage = np.zeros(env.horizon)
    if not seeds:
        return SpreadEstimate(0.0, 0.0, repetitions, per_stage)
    hub_cols = (np.arange(repetitions)[:, None] * n + np.array(seeds)[None, :]).ravel()
    size = repetitions * n
    for t in range(1, env.horizon + 1):
        rows, cols = _sample_live(env.snapshot(t), env.probs(t), repetitions, rng)
        # a super-source (id ``size``) wired to the seeds of every sample: one BFS covers all
        rows = np.concatenate([rows, np.full(hub_cols.size, size)])
        cols = np.concatenate([cols, hub_cols])
        graph = sp.csr_matrix((np.ones(rows.size, np.int8), (rows, cols)), shape=(size + 1, size + 1))
        order = breadth_first_order(graph, size, directed=True, return_predecessors=False)
        counts = np.bincount(order[order < size] // n, minlength=repetitions)
        per_rep += counts
        per_stage[t - 1] = counts.mean()
    return _estimate(per_rep, per_stage)


def _result_from_cover(real, covered, seeds, gains):
    spread = real.spread(covered)
    est = _estimate(spread.sum(axis=0), spread.mean(axis=1))
    per_position = tuple(g / real.repetitions for g in gains)
    return OfflineGreedyResult(tuple(seeds), est, per_position)


def greedy_offline(env, seeds_per_stage, repetitions, rng, lazy=True, realizations=None):
    """Greedy fixed seed set maximizing estimated overall spread.

    Each position adds the candidate with the largest estimated marginal
    overall spread, lowest node index on ties. ``lazy`` reuses stale
    marginals as upper bounds, which is exact because gains on a fixed set
    of samples are submodular.
    """
    k_total = int(seeds_per_stage)
    if k_total > env.n_nodes:
        raise ValueError("seeds_per_stage exceeds node count")
    real = realizations or Realizations(env, repetitions, rng)
    covered = real.empty()
    seeds, gains = [], []

    if not lazy:
        for _ in range(k_total):
            g = real.total_gains(covered)
            g[seeds] = -np.inf
            best = int(np.argmax(g))
            seeds.append(best)
            gains.append(float(g[best]))
            real.cover(covered, best)
        return _result_from_cover(real, covered, seeds, gains)

    initial = real.total_gains(covered)
    heap = [(-float(g), n, 0) for n, g in enumerate(initial)]
    heapq.heapify(heap)
    for position in range(k_total):
        while True:
            neg, node, stamp = heapq.heappop(heap)
            if stamp == position:
                break
            heapq.heappush(heap, (-real.node_gain(covered, node), node, position))
        seeds.append(node)
        gains.append(-neg)
        real.cover(covered, node)
    return _result_from_cover(real, covered, seeds, gains)


def exhaustive_opt(env, seeds_per_stage, repetitions, rng, cap=100_000, realizations=None):
    """Best fixed K-subset by enumeration (tiny instances only)."""
    k = int(seeds_per_stage)
    n_subsets = math.comb(env.n_nodes, k)
    if n_subsets > cap:
        raise EnumerationCapError(
            f"{n_subsets} subsets exceed the enumeration cap {cap}; use greedy_offline"
        )
    real = realizations or Realizations(env, repetitions, rng)
    best_total, best_set, best_cover = -1, None, None
    for subset in itertools.combinations(range(env.n_nodes), k):
        covered = real.empty()
        for node in subset:
            real.cover(covered, node)
        total = int(real.spread(covered).sum())
        if total > best_total:
            best_total, best_set, best_cover = total, subset, covered
    spread = real.spread(best_cover)
    return best_set, _estimate(spread.sum(axis=0), spread.mean(axis=1))


def greedy_weak_regret(benchmark, achieved_total, use_factor=False):
    """Benchmark minus achieved reward.

    ``use_factor`` treats the benchmark as OPT and scales it by (1 - 1/e);
    otherwise the greedy estimate is used directly.
    """
    value = benchmark.mean if isinstance(benchmark, SpreadEstimate) else float(benchmark)
    if use_factor:
        value *= GREEDY_FACTOR
    return value - float(achieved_total)


@dataclass
class PositionRegret:
    position: int
    value: float
    stderr: float
    best_node: int
    best_total: float
    achieved_total: float


def position_weak_regret(env, log, position, repetitions, rng, realizations=None):
    """Regret of one seed position against the best fixed node for it.

    ``log`` is the ``(T, K)`` array of seeds a policy chose, in selection
    order; ``position`` is 0-based. Expected marginals given each stage's
    logged prefix are re-estimated on fresh samples.
    """
    if log is None:
        raise ValueError("a decision log is required")
    log = np.asarray(log)
    if log.ndim != 2 or log.shape[0] != env.horizon:
        raise ValueError(f"decision log must have shape (T={env.horizon}, K)")
    real = realizations or Realizations(env, repetitions, rng)
    covered = real.cover_log(log, upto=position)
    r = real.repetitions
    per_stage = [real.gains(covered, t) for t in range(real.horizon)]
    totals = sum(g.sum(axis=0, dtype=np.float64) for g in per_stage) / r
    best = int(np.argmax(totals))
    chosen = log[:, position]
    achieved = sum(float(g[:, a].mean()) for g, a in zip(per_stage, chosen))
    var = sum(float(np.var(g[:, best] - g[:, a], ddof=1)) / r if r > 1 else 0.0
              for g, a in zip(per_stage, chosen))
    return PositionRegret(position, float(totals[best]) - achieved, math.sqrt(var), best,
                          float(totals[best]), achieved)


def regret_ratio_series(benchmark_cum, achieved_cum):
    """(benchmark - achieved) / benchmark per prefix; NaN where benchmark <= 0."""
    b = np.asarray(benchmark_cum, dtype=float)
    a = np.asarray(achieved_cum, dtype=float)
    out = np.full(b.shape, np.nan)
    ok = b > 0
    out[ok] = (b[ok] - a[ok]) / b[ok]
    return out


@dataclass
class RegretSeries:
    benchmark_cum: np.ndarray
    cum_rewards: dict
    mode: str = EXPERIMENT

    def ratios(self):
        bench = self.benchmark_cum
        if self.mode == EXACT:
            bench = bench * GREEDY_FACTOR
        return {name: regret_ratio_series(bench, cum) for name, cum in self.cum_rewards.items()}


def benchmark_document(mode, seeds, estimate, master_seed, **extra):
    doc = {
        "mode": mode,
        "seeds": [int(s) for s in seeds],
        "estimate": estimate.mean,
        "stderr": estimate.stderr,
        "repetitions": estimate.repetitions,
        "master_seed": int(master_seed),
    }
    if estimate.per_stage is not None:
        doc["per_stage"] = [float(x) for x in estimate.per_stage]
    doc.update(extra)
    return doc


def save_benchmark(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_benchmark(path):
    with open(path) as fh:
        doc = json.load(fh)
    missing = {"mode", "seeds", "estimate", "stderr", "repetitions", "master_seed"} - doc.keys()
    if missing:
        raise ValueError(f"{path}: benchmark document missing keys {sorted(missing)}")
    return doc
