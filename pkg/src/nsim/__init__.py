"""Online influence maximization on non-stationary dynamic networks.

Modules: ``dyngraph`` (snapshot graphs), ``propagation`` (influence models
and cascades), ``policies`` (RSB and baselines), ``oracle`` (offline
benchmarks and regret), ``harness`` (experiments and result files).
"""

from .dyngraph import DynamicGraph, GraphSnapshot, generate_er_rewire, load_trace, snapshot
from .propagation import Environment, InfluenceModel, StageOutcome
from .policies import RandomPolicy, RsbPolicy, UcbPolicy, compute_gamma_star
from .rng import derive_stream

__version__ = "0.1.0"
