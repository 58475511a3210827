import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import breadth_first_order

from nsim.dyngraph import DynamicGraph, GraphSnapshot, generate_er_rewire
from nsim.propagation import (
    FR, TR, TR_LEVELS, WC, Environment, InfluenceModel, StageOutcome, add_seed, begin_stage, edge_prob,
    total_spread,
)


def reach_live(outcome, seeds):
    """Reachable set from ``seeds`` over live edges, via scipy's BFS."""
    snap = outcome.snap
    live = outcome.live_edges
    n = snap.n_nodes
    adj = sp.csr_matrix((np.ones(live.sum()), (snap.src[live], snap.dst[live])), shape=(n, n))
    found = set()
    for s in seeds:
        found.update(breadth_first_order(adj, s, directed=True, return_predecessors=False).tolist())
    return found


def random_snapshot(n, p, seed):
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    return GraphSnapshot(n, *np.nonzero(adj))


def test_wc_probabilities_are_inverse_indegree():
    snap = GraphSnapshot(6, [0, 1, 2, 3, 4], [5, 5, 5, 5, 0])
    model = InfluenceModel(WC, horizon=1)
    assert edge_prob(model, snap, 1, (0, 5)) == 0.25
    assert edge_prob(model, snap, 1, (4, 0)) == 1.0
    with pytest.raises(KeyError):
        edge_prob(model, snap, 1, (5, 0))


def test_tr_levels_are_uniform_and_stable_within_stage():
    snap = random_snapshot(400, 0.7, 1)
    assert snap.n_edges > 100_000
    model = InfluenceModel(TR, horizon=2, rng=np.random.default_rng(0))
    probs = model.stage_probs(snap, 1)
    assert set(np.unique(probs)) <= set(TR_LEVELS)
    for level in TR_LEVELS:
        assert abs(np.mean(probs[:100_000] == level) - 1 / 3) < 0.02
    assert model.stage_probs(snap, 1) is probs
    assert edge_prob(model, snap, 1, (int(snap.src[5]), int(snap.dst[5]))) == probs[5]
    # a new stage draws new tiers
    assert not np.array_equal(model.stage_probs(snap, 2), probs)


def _fr_model(p, direction, horizon=100):
    snap = GraphSnapshot(2, [0], [1])
    model = InfluenceModel(FR, horizon, rng=np.random.default_rng(0))
    model.stage_probs(snap, 1)
    model.fr_p[:] = p
    model.fr_dir[:] = direction
    return model


def test_fr_step_and_reflection():
    model = _fr_model(0.05, 1).advance_fr()
    assert model.fr_p[0] == pytest.approx(0.053, abs=1e-15)
    model = _fr_model(0.099, 1).advance_fr()
    assert model.fr_p[0] == 0.1
    assert model.fr_dir[0] == -1
    model = _fr_model(0.001, -1).advance_fr()
    assert model.fr_p[0] == 0.0
    assert model.fr_dir[0] == 1


def test_fr_stays_in_range_over_two_horizons():
    snap = random_snapshot(60, 0.2, 2)
    horizon = 100
    model = InfluenceModel(FR, horizon, rng=np.random.default_rng(5))
    model.stage_probs(snap, 1)
    for _ in range(2 * horizon):
        model.advance_fr()
        assert model.fr_p.min() >= 0.0 and model.fr_p.max() <= 0.1


def test_fr_initial_state_distribution():
    snap = random_snapshot(200, 0.5, 3)
    model = InfluenceModel(FR, 100, rng=np.random.default_rng(1))
    p = model.stage_probs(snap, 1)
    assert p.min() >= 0 and p.max() <= 0.1
    assert abs(p.mean() - 0.05) < 0.001
    assert abs(np.mean(model.fr_dir == 1) - 0.5) < 0.01


def test_fr_misuse():
    with pytest.raises(TypeError):
        InfluenceModel(WC, 10).advance_fr()
    with pytest.raises(TypeError):
        InfluenceModel(TR, 10, rng=np.random.default_rng(0)).advance_fr()
    model = InfluenceModel(FR, 10, rng=np.random.default_rng(0))
    snap = GraphSnapshot(2, [0], [1])
    model.stage_probs(snap, 1)
    with pytest.raises(ValueError):
        model.stage_probs(snap, 3)


def test_fr_state_follows_edge_churn():
    a = GraphSnapshot(3, [0, 1], [1, 2])
    b = GraphSnapshot(3, [0, 2], [1, 0])
    model = InfluenceModel(FR, 10, rng=np.random.default_rng(4))
    p1 = model.stage_probs(a, 1)
    before, direction = p1[0], int(model.fr_dir[0])
    p2 = model.stage_probs(b, 2)
    # (0,1) persisted and moved one step; (1,2) dropped; (2,0) is fresh
    assert p2[0] == pytest.approx(min(max(before + direction * 0.03, 0.0), 0.1))
    assert model.fr_keys.tolist() == b.keys.tolist()
    assert 0 <= p2[1] <= 0.1


def test_begin_stage_extremes():
    snap = random_snapshot(30, 0.2, 4)
    rng = np.random.default_rng(0)

    class Fixed:
        def __init__(self, value):
            self.value = value

        def stage_probs(self, snap, t):
            return np.full(snap.n_edges, self.value)

    assert begin_stage(Fixed(1.0), snap, 1, rng).live_edges.all()
    assert not begin_stage(Fixed(0.0), snap, 1, rng).live_edges.any()
    out = begin_stage(Fixed(0.5), snap, 1, rng)
    assert out.reached.sum() == 0 and out.per_seed_marginals == []


def test_live_edge_count_mean():
    rng = np.random.default_rng(12)
    snap = GraphSnapshot(101, np.arange(100), np.arange(1, 101))
    probs = np.full(100, 0.5)
    counts = [StageOutcome(snap, rng.random(100) < probs).n_live for _ in range(10_000)]
    assert abs(np.mean(counts) - 50) < 1.5


def test_add_seed_chain():
    snap = GraphSnapshot(3, [0], [1])
    out = StageOutcome(snap, [True])
    marginal, out = add_seed(out, 0)
    assert marginal == 2
    assert add_seed(out, 1)[0] == 0
    assert total_spread(out) == 2
    with pytest.raises(ValueError):
        out.add_seed(0)


def test_seed_without_live_edges_counts_itself():
    out = StageOutcome(GraphSnapshot(3, [0], [1]), [False])
    assert total_spread(out) == 0
    assert out.add_seed(0) == 1
    assert total_spread(out) == 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0.02, 0.3), k=st.integers(1, 10))
def test_marginals_sum_to_independent_reach(seed, p, k):
    rng = np.random.default_rng(seed)
    snap = random_snapshot(50, p, seed)
    out = StageOutcome(snap, rng.random(snap.n_edges) < 0.5)
    seeds = rng.choice(50, size=k, replace=False).tolist()
    sizes = []
    for s in seeds:
        gained = out.add_seed(s)
        assert gained >= 0
        sizes.append(out.total_spread())
        assert gained >= 1 or s in reach_live(out, seeds[:len(sizes) - 1])
    assert sum(out.per_seed_marginals) == len(reach_live(out, seeds)) == total_spread(out)
    assert sizes == sorted(sizes)
    assert set(np.flatnonzero(out.reached).tolist()) == reach_live(out, seeds)


def test_submodular_on_realizations_by_enumeration():
    rng = np.random.default_rng(3)
    for trial in range(10):
        snap = random_snapshot(8, 0.3, trial)
        live = rng.random(snap.n_edges) < 0.6

        def f(nodes):
            out = StageOutcome(snap, live)
            for s in nodes:
                out.add_seed(s)
            return out.total_spread()

        nodes = range(8)
        subsets = [set(c) for r in range(4) for c in itertools.combinations(nodes, r)]
        for a in subsets:
            for extra in nodes:
                b = a | {extra}
                for v in set(nodes) - b:
                    assert f(a | {v}) - f(a) >= f(b | {v}) - f(b)


def test_spread_standard_error_scales_with_repetitions():
    snap = random_snapshot(60, 0.05, 8)
    probs = np.full(snap.n_edges, 0.3)
    rng = np.random.default_rng(0)

    def stderr(r):
        vals = []
        for _ in range(r):
            out = StageOutcome(snap, rng.random(snap.n_edges) < probs)
            out.add_seed(0)
            vals.append(out.total_spread())
        return np.std(vals, ddof=1) / np.sqrt(r)

    ratio = stderr(400) / stderr(1600)
    assert 1.6 < ratio < 2.4


def test_environment_replays_identical_coins():
    g = generate_er_rewire(40, 0.1, 5, 6, np.random.default_rng(0))
    env = Environment(g, InfluenceModel(FR, 6, rng=np.random.default_rng(1)), coin_seed=9)
    for t in range(1, 7):
        a, b = env.begin_stage(t), env.begin_stage(t)
        assert np.array_equal(a.live_edges, b.live_edges)
        assert env.probs(t).shape == (env.snapshot(t).n_edges,)
    assert not np.array_equal(env.begin_stage(1).live_edges, env.begin_stage(2).live_edges)
    with pytest.raises(IndexError):
        env.probs(7)


def test_cycled_trace_under_fr_keeps_drifting():
    snap = random_snapshot(20, 0.3, 5)
    g = DynamicGraph([snap], horizon=10, cycle=True)
    env = Environment(g, InfluenceModel(FR, 10, rng=np.random.default_rng(2)))
    assert not np.array_equal(env.probs(1), env.probs(2))
    assert np.allclose(np.abs(env.probs(2) - env.probs(1))[(env.probs(2) > 0) & (env.probs(2) < 0.1)
                                                          & (env.probs(1) > 0) & (env.probs(1) < 0.1)], 0.03)
