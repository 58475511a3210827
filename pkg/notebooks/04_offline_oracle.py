"""
Offline benchmarks and regret
=============================

The benchmark is the best single seed set kept for every stage, found
greedily from Monte-Carlo samples.
"""

# %%
import numpy as np

from nsim.dyngraph import generate_er_rewire
from nsim.oracle import (
    GREEDY_FACTOR, Realizations, estimate_overall_spread, exhaustive_opt, greedy_offline, position_weak_regret,
)
from nsim.propagation import FR, Environment, InfluenceModel

g = generate_er_rewire(12, 0.25, 2, 30, np.random.default_rng(4))
env = Environment(g, InfluenceModel(FR, 30, rng=np.random.default_rng(5)))

# %%
# Greedy and exhaustive search on one shared set of samples.
real = Realizations(env, 1000, np.random.default_rng(6))
greedy = greedy_offline(env, 2, 1000, None, realizations=real)
best, opt = exhaustive_opt(env, 2, 1000, None, realizations=real)
print("greedy", greedy.seeds, round(greedy.f_estimate.mean, 2))
print("exhaustive", best, round(opt.mean, 2), "ratio", round(greedy.f_estimate.mean / opt.mean, 3),
      ">=", round(GREEDY_FACTOR, 3))

# %%
# An independent estimate with fresh samples.
est = estimate_overall_spread(env, greedy.seeds, 2000, np.random.default_rng(7))
print(f"F(greedy) = {est.mean:.2f} +/- {est.stderr:.2f}")

# %%
# Position regret of a policy that always plays nodes 0 and 1.
log = np.tile([0, 1], (30, 1))
for k in range(2):
    r = position_weak_regret(env, log, k, 1000, None, realizations=real)
    print(f"position {k}: regret {r.value:.2f} (best fixed node {r.best_node})")
