"""
Cascades under the three probability models
===========================================

Each stage draws one live-edge graph; seeds activate everything they reach.
"""

# %%
import numpy as np

from nsim.dyngraph import generate_er_rewire
from nsim.propagation import FR, TR, WC, Environment, InfluenceModel

g = generate_er_rewire(300, 0.03, 20, 50, np.random.default_rng(1))

# %%
# WC uses 1/indegree, TR redraws a tier per edge every stage, and FR lets
# each edge's probability drift up and down between 0 and 0.1.
for kind in (WC, TR, FR):
    env = Environment(g, InfluenceModel(kind, 50, rng=np.random.default_rng(2)), coin_seed=3)
    spreads = []
    for t in range(1, 51):
        stage = env.begin_stage(t)
        for seed in (0, 1, 2, 3, 4):
            stage.add_seed(seed)
        spreads.append(stage.total_spread())
    print(f"{kind}: mean edge prob {env.probs(1).mean():.4f}, mean spread of 5 seeds {np.mean(spreads):.1f}")

# %%
# Marginal gains of successive seeds add up to the total spread.
stage = env.begin_stage(1)
gains = [stage.add_seed(s) for s in (10, 20, 30)]
print("marginals", gains, "sum", sum(gains), "spread", stage.total_spread())
