"""Online seed-selection policies.

Every policy fills a stage with ``K`` distinct seeds one at a time. The
stage handle only needs ``add_seed(node) -> int`` returning the realized
marginal reward, so the live-edge realization stays hidden from policies.
"""

import math
from dataclasses import dataclass, field

import numpy as np

# rows of log-weights are shifted down once their maximum passes this
_LOG_RESCALE = 600.0


class StateCorruptionError(ValueError):
    pass


@dataclass(frozen=True)
class StageSelection:
    seeds: tuple
    draw_probs: tuple
    rewards: tuple = ()

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seed in selection")
        if any(not 0.0 < q <= 1.0 for q in self.draw_probs):
            raise ValueError("draw probabilities must lie in (0, 1]")


# --- RSB ---------------------------------------------------------------------

@dataclass(frozen=True)
class RsbParams:
    gamma: float
    scale_c: float
    seeds_per_stage: int
    n_nodes: int

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.scale_c <= 0:
            raise ValueError("scale_c must be positive")
        if not 1 <= self.seeds_per_stage <= self.n_nodes:
            raise ValueError("need 1 <= seeds_per_stage <= n_nodes")

    @property
    def degenerate(self):
        """gamma = 0: no exploration floor and no weight updates."""
        return self.gamma == 0.0


class RsbState:
    """The K x N weight table, one row per seed position.

    Weights are kept as logarithms; ``v`` exposes them as positive reals.
    Only ratios within a row matter, so shifting a row never changes any
    weight, probability or draw.
    """

    def __init__(self, params):
        self.params = params
        self.log_v = np.zeros((params.seeds_per_stage, params.n_nodes))

    @property
    def v(self):
        return np.exp(self.log_v)

    def row(self, k):
        """Row ``k`` of ``v`` scaled so its largest entry is exactly 1."""
        lv = self.log_v[k]
        return np.exp(lv - lv.max())


def rsb_weights(v_row, gamma, n_nodes=None):
    """Mix normalized weights with the uniform exploration term gamma / N."""
    v = np.asarray(v_row, dtype=float)
    n = v.size if n_nodes is None else n_nodes
    if v.size != n:
        raise ValueError("v_row length does not match n_nodes")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise StateCorruptionError("weights must be finite and positive")
    u = v / v.max()
    p = u / u.sum()
    # (1-g)(p - 1/N) + 1/N keeps uniform rows at exactly 1/N
    return (1.0 - gamma) * (p - 1.0 / n) + 1.0 / n


def rsb_probs(w, excluded=()):
    """Renormalize ``w`` over the nodes not yet selected.

    ``excluded`` is an iterable of node ids or a boolean mask. Returns a
    length-N array that is zero on excluded nodes.
    """
    w = np.asarray(w, dtype=float)
    if isinstance(excluded, np.ndarray) and excluded.dtype == bool:
        mask = excluded
    else:
        mask = np.zeros(w.size, dtype=bool)
        mask[list(excluded)] = True
    if mask.all():
        raise ValueError("no candidate nodes left")
    q = np.where(mask, 0.0, w)
    total = q.sum()
    if not total > 0:
        raise StateCorruptionError("candidate weights sum to zero")
    return q / total


def rsb_draw(q, rng, size=None):
    """Inverse-CDF draw over ascending node index.

    With ``size`` returns an array of independent draws instead of an int.
    """
    q = np.asarray(q, dtype=float)
    cdf = np.cumsum(q)
    u = rng.random(size) * cdf[-1]
    i = np.searchsorted(cdf, u, side="right")
    # rounding can land past the end or on a zero-probability entry
    bad = (i >= q.size) | (q[np.minimum(i, q.size - 1)] <= 0)
    if np.any(bad):
        i = np.where(bad, np.flatnonzero(q > 0)[-1], i)
    return int(i) if size is None else i


def rsb_update(state, position, chosen, reward, draw_prob):
    """Importance-weighted exponential update of one weight."""
    if not 0.0 < draw_prob <= 1.0:
        raise ValueError(f"draw_prob must lie in (0, 1], got {draw_prob}")
    if reward < 0:
        raise ValueError("reward must be non-negative")
    p = state.params
    estimate = reward / draw_prob
    row = state.log_v[position]
    row[chosen] += p.gamma * estimate / (p.n_nodes * p.scale_c)
    if row[chosen] > _LOG_RESCALE:
        row -= row[chosen]
    return state


def rsb_select_stage(state, stage, rng):
    p = state.params
    excluded = np.zeros(p.n_nodes, dtype=bool)
    seeds, probs, rewards = [], [], []
    for k in range(p.seeds_per_stage):
        w = rsb_weights(state.row(k), p.gamma, p.n_nodes)
        q = rsb_probs(w, excluded)
        a = rsb_draw(q, rng)
        r = stage.add_seed(a)
        excluded[a] = True
        rsb_update(state, k, a, r, q[a])
        seeds.append(a)
        probs.append(float(q[a]))
        rewards.append(r)
    return StageSelection(tuple(seeds), tuple(probs), tuple(rewards)), state


def compute_gamma_star(n_nodes, scale_c, reward_cap, reward_scale):
    """Exploration rate minimising the position-regret upper bound.

    ``reward_scale`` (g) must bound the best achievable overall reward at
    every position.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be >= 2 (ln N must be positive)")
    if min(scale_c, reward_cap, reward_scale) <= 0:
        raise ValueError("scale_c, reward_cap and reward_scale must be positive")
    c = scale_c
    radicand = n_nodes * c * math.log(n_nodes) / ((1.0 + (math.e - 2.0) * reward_cap / c) * reward_scale)
    return min(1.0, math.sqrt(radicand))


# --- UCB baseline ---------------------------------------------------------------

@dataclass
class UcbState:
    n_nodes: int
    seeds_per_stage: int
    reward_cap: float = 120.0
    exploration_coeff: float = math.sqrt(1.5)
    t: int = 0
    mean: np.ndarray = field(default=None, repr=False)
    count: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.reward_cap <= 0 or self.exploration_coeff <= 0:
            raise ValueError("reward_cap and exploration_coeff must be positive")
        shape = (self.seeds_per_stage, self.n_nodes)
        if self.mean is None:
            self.mean = np.zeros(shape)
        if self.count is None:
            self.count = np.zeros(shape, dtype=np.int64)


def ucb_select_stage(state, stage, rng=None):
    """Per-position UCB1: untried arms first, then the largest index."""
    state.t += 1
    log_t = math.log(state.t)
    excluded = np.zeros(state.n_nodes, dtype=bool)
    seeds, rewards = [], []
    for k in range(state.seeds_per_stage):
        count = state.count[k]
        untried = np.flatnonzero((count == 0) & ~excluded)
        if untried.size:
            a = int(untried[0])
        else:
            index = state.mean[k] + state.exploration_coeff * np.sqrt(log_t / np.maximum(count, 1))
            index[excluded] = -np.inf
            a = int(np.argmax(index))
        r = stage.add_seed(a)
        excluded[a] = True
        x = min(r / state.reward_cap, 1.0)
        count[a] += 1
        state.mean[k, a] += (x - state.mean[k, a]) / count[a]
        seeds.append(a)
        rewards.append(r)
    return StageSelection(tuple(seeds), (1.0,) * len(seeds), tuple(rewards)), state


# --- uniform random baseline --------------------------------------------------

def random_select_stage(n_nodes, seeds_per_stage, rng):
    if seeds_per_stage > n_nodes:
        raise ValueError(f"cannot pick {seeds_per_stage} distinct seeds from {n_nodes} nodes")
    seeds = rng.choice(n_nodes, size=seeds_per_stage, replace=False)
    probs = tuple(1.0 / (n_nodes - k) for k in range(seeds_per_stage))
    return StageSelection(tuple(int(s) for s in seeds), probs)


# --- uniform interface for the harness -------------------------------------------

class RsbPolicy:
    def __init__(self, n_nodes, seeds_per_stage, gamma=0.2, scale_c=1.0):
        self.state = RsbState(RsbParams(gamma, scale_c, seeds_per_stage, n_nodes))

    def select_stage(self, stage, rng):
        selection, self.state = rsb_select_stage(self.state, stage, rng)
        return selection


class UcbPolicy:
    def __init__(self, n_nodes, seeds_per_stage, reward_cap=120.0, exploration_coeff=math.sqrt(1.5)):
        self.state = UcbState(n_nodes, seeds_per_stage, reward_cap, exploration_coeff)

    def select_stage(self, stage, rng):
        selection, self.state = ucb_select_stage(self.state, stage, rng)
        return selection


class RandomPolicy:
    def __init__(self, n_nodes, seeds_per_stage):
        self.n_nodes = n_nodes
        self.seeds_per_stage = seeds_per_stage

    def select_stage(self, stage, rng):
        sel = random_select_stage(self.n_nodes, self.seeds_per_stage, rng)
        rewards = tuple(stage.add_seed(a) for a in sel.seeds)
        return StageSelection(sel.seeds, sel.draw_probs, rewards)
