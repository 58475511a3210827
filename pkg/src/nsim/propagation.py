"""Time-varying influence probabilities and independent-cascade stages.

A stage is simulated by flipping every edge's coin once up front (the
live-edge realization) and then answering seed additions by forward
reachability over the live edges. Marginal rewards of sequentially added
seeds therefore sum exactly to the stage's total spread.
"""

import numpy as np

from .dyngraph import snapshot
from .rng import derive_seed

WC, TR, FR = "WC", "TR", "FR"
TR_LEVELS = (0.1, 0.01, 0.001)
FR_MAX = 0.1
FR_SWING = 0.3


class InfluenceModel:
    """Per-stage edge probabilities under the WC, TR or FR model.

    Probabilities are cached per stage, so a stage's values stay fixed once
    drawn and can be replayed. FR drift state is keyed by edge and must be
    visited in increasing stage order; edges that appear are initialised
    with a uniform probability in ``[0, 0.1]`` and a random direction,
    edges that vanish lose their state.
    """

    def __init__(self, kind, horizon, rng=None):
        kind = kind.upper()
        if kind not in (WC, TR, FR):
            raise ValueError(f"unknown influence model {kind!r}")
        if kind != WC and rng is None:
            raise ValueError(f"{kind} model needs a random stream")
        self.kind = kind
        self.horizon = int(horizon)
        self.rng = rng
        self._cache = {}
        # FR state, aligned with sorted edge keys
        self.fr_keys = None
        self.fr_p = None
        self.fr_dir = None
        self._fr_stage = None

    @property
    def fr_rate(self):
        return FR_SWING / self.horizon

    def advance_fr(self):
        """Move every tracked FR probability one step, reflecting at 0 and 0.1."""
        if self.kind != FR:
            raise TypeError(f"advance_fr called on a {self.kind} model")
        if self.fr_p is None:
            raise RuntimeError("FR state not initialised")
        p = self.fr_p + self.fr_dir * self.fr_rate
        high = p > FR_MAX
        low = p < 0.0
        p[high] = FR_MAX
        p[low] = 0.0
        self.fr_dir[high | low] *= -1
        self.fr_p = p
        return self

    def _sync_fr(self, snap):
        keys = snap.keys
        p = self.rng.uniform(0.0, FR_MAX, size=keys.size)
        d = self.rng.choice(np.array([-1, 1], dtype=np.int8), size=keys.size)
        if self.fr_keys is not None and self.fr_keys.size:
            pos = np.minimum(np.searchsorted(self.fr_keys, keys), self.fr_keys.size - 1)
            old = self.fr_keys[pos] == keys
            p[old] = self.fr_p[pos[old]]
            d[old] = self.fr_dir[pos[old]]
        self.fr_keys, self.fr_p, self.fr_dir = keys, p, d

    def stage_probs(self, snap, t):
        """Probability of every edge of ``snap`` at stage ``t`` (edge order)."""
        if t in self._cache:
            return self._cache[t]
        if self.kind == WC:
            probs = 1.0 / snap.indegree[snap.dst]
        elif self.kind == TR:
            probs = self.rng.choice(np.array(TR_LEVELS), size=snap.n_edges)
        else:
            if self._fr_stage is not None:
                if t != self._fr_stage + 1:
                    raise ValueError(f"FR stages must be visited in order (at {self._fr_stage}, asked {t})")
                self.advance_fr()
            self._sync_fr(snap)
            self._fr_stage = t
            probs = self.fr_p.copy()
        probs = np.asarray(probs, dtype=float)
        probs.setflags(write=False)
        self._cache[t] = probs
        return probs


def edge_prob(model, snap, t, edge):
    """Probability of a single edge ``(n, m)``; KeyError if it is absent."""
    i = snap.edge_index(*edge)
    return float(model.stage_probs(snap, t)[i])


def _live_csr(snap, live):
    src = snap.src[live]
    indptr = np.concatenate(([0], np.cumsum(np.bincount(src, minlength=snap.n_nodes))))
    return indptr, snap.dst[live]


class StageOutcome:
    """One stage's live-edge realization plus the seeds added so far."""

    def __init__(self, snap, live):
        self.snap = snap
        self.live_edges = np.asarray(live, dtype=bool)
        indptr, indices = _live_csr(snap, self.live_edges)
        self._indptr = indptr.tolist()
        self._indices = indices.tolist()
        self.reached = np.zeros(snap.n_nodes, dtype=bool)
        self.seeds = []
        self.per_seed_marginals = []

    @property
    def n_live(self):
        return int(self.live_edges.sum())

    def add_seed(self, seed):
        """Activate ``seed`` and return the number of newly reached nodes."""
        seed = int(seed)
        if not 0 <= seed < self.snap.n_nodes:
            raise IndexError(f"seed {seed} out of range")
        if seed in self.seeds:
            raise ValueError(f"seed {seed} already added this stage")
        reached = self.reached
        gained = 0
        if not reached[seed]:
            indptr, indices = self._indptr, self._indices
            reached[seed] = True
            gained = 1
            stack = [seed]
            while stack:
                n = stack.pop()
                for m in indices[indptr[n]:indptr[n + 1]]:
                    if not reached[m]:
                        reached[m] = True
                        gained += 1
                        stack.append(m)
        self.seeds.append(seed)
        self.per_seed_marginals.append(gained)
        return gained

    def total_spread(self):
        return int(self.reached.sum())


def begin_stage(model, snap, t, rng):
    """Flip every edge coin once and return a fresh stage outcome."""
    probs = model.stage_probs(snap, t)
    return StageOutcome(snap, rng.random(snap.n_edges) < probs)


def add_seed(outcome, seed):
    marginal = outcome.add_seed(seed)
    return marginal, outcome


def total_spread(outcome):
    return outcome.total_spread()


class Environment:
    """A replayable dynamic network: graph, recorded probabilities, coins.

    All stage probabilities are drawn at construction. ``begin_stage(t)``
    always derives its coins from ``(coin_seed, t)``, so every policy run
    against the same environment sees identical live edges at stage ``t``.
    """

    def __init__(self, graph, model, coin_seed=0):
        self.graph = graph
        self.model = model
        self.coin_seed = int(coin_seed)
        self.horizon = graph.horizon
        self.n_nodes = graph.n_nodes
        self._probs = [model.stage_probs(snapshot(graph, t), t) for t in range(1, self.horizon + 1)]

    def snapshot(self, t):
        return snapshot(self.graph, t)

    def probs(self, t):
        if not 1 <= t <= self.horizon:
            raise IndexError(f"stage {t} outside [1, {self.horizon}]")
        return self._probs[t - 1]

    def begin_stage(self, t):
        rng = np.random.Generator(np.random.PCG64(derive_seed(self.coin_seed, "coins", t)))
        snap = self.snapshot(t)
        return StageOutcome(snap, rng.random(snap.n_edges) < self.probs(t))
