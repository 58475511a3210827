"""
Sequential bandit policies
==========================

RSB keeps exponential weights per seed position; UCB and random choice are
baselines. All three see only the marginal reward of each seed they place.
"""

# %%
import numpy as np

from nsim.policies import RandomPolicy, RsbPolicy, UcbPolicy, compute_gamma_star, rsb_probs, rsb_weights

# %%
# Mixing with the uniform distribution keeps every node drawable.
w = rsb_weights([3.0, 1.0], gamma=0.2)
print("weights", w)
print("renormalized without node 0:", rsb_probs(np.array([0.5, 0.3, 0.2]), {0}))
print("gamma*, N=4257 C=1 D=120 g=12597:", round(compute_gamma_star(4257, 1.0, 120.0, 12597.0), 4))


# %%
# A toy stage where node 13 pays 20 and everything else pays 1.
class Stage:
    def add_seed(self, node):
        return 20 if node == 13 else 1


rng = np.random.default_rng(0)
for policy in (RsbPolicy(50, 1), UcbPolicy(50, 1, reward_cap=20), RandomPolicy(50, 1)):
    picks = [policy.select_stage(Stage(), rng).seeds[0] for _ in range(300)]
    print(f"{type(policy).__name__:<13} share of node 13 in last 100 stages: {np.mean(np.array(picks[-100:]) == 13):.2f}")
