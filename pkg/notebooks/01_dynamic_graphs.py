"""
Dynamic graphs: traces, cycling and synthetic rewiring
======================================================

A dynamic network is a list of directed snapshots, one per time stage.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from nsim.dyngraph import generate_er_rewire, load_trace, snapshot, write_trace

# %%
# A random graph whose edge heads drift toward popular nodes. Tails and
# out-degrees never change, only where edges point.
g = generate_er_rewire(n_nodes=500, edge_prob=0.01, rewire_per_stage=50, horizon=20,
                       rng=np.random.default_rng(0))
first, last = snapshot(g, 1), snapshot(g, 20)
print("edges per stage:", first.n_edges, last.n_edges)
print("edges that moved over 20 stages:", np.setdiff1d(first.keys, last.keys).size)
print("max indegree, first vs last stage:", first.indegree.max(), last.indegree.max())

# %%
# Round trip through the text trace format ("t src dst" per line). A
# seven-stage trace can be stretched over a longer horizon by cycling.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "week.txt"
    write_trace(path, g, stages=range(1, 8))
    print(path.read_text().splitlines()[:3])
    week = load_trace(path, horizon=100, cycle=True)
    print("stage 8 repeats stage 1:", snapshot(week, 8) == snapshot(week, 1))
