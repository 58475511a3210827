"""Directed graph snapshots and dynamic (time-indexed) social graphs.

Stages are 1-based throughout: ``snapshot(g, 1)`` is the first stage.
"""

import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class TraceFormatError(ValueError):
    """Raised for unparseable or inconsistent trace files."""


class GraphSnapshot:
    """Immutable directed simple graph stored as sorted edge arrays (CSR).

    Edges are sorted by ``(src, dst)``; ``indptr[n]:indptr[n+1]`` slices the
    out-edges of node ``n``. Per-edge arrays elsewhere in the package
    (probabilities, live-edge masks) are aligned with this order.
    """

    def __init__(self, n_nodes, src, dst):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise ValueError("src and dst must be 1-d arrays of equal length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n_nodes):
            raise IndexError(f"node id out of range [0, {n_nodes})")
        if np.any(src == dst):
            raise ValueError("self-loops are not allowed")
        keys = src * n_nodes + dst
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise ValueError("duplicate directed edge")

        self.n_nodes = int(n_nodes)
        self.src = src[order]
        self.dst = dst[order]
        self.keys = keys
        self.indptr = np.concatenate(([0], np.cumsum(np.bincount(self.src, minlength=n_nodes))))
        self.indegree = np.bincount(self.dst, minlength=n_nodes)
        for arr in (self.src, self.dst, self.keys, self.indptr, self.indegree):
            arr.setflags(write=False)

    @property
    def n_edges(self):
        return int(self.src.size)

    @property
    def out_adj(self):
        return [self.dst[self.indptr[n]:self.indptr[n + 1]] for n in range(self.n_nodes)]

    def edge_index(self, n, m):
        """Position of edge ``(n, m)`` in the edge arrays; KeyError if absent."""
        key = n * self.n_nodes + m
        i = int(np.searchsorted(self.keys, key))
        if i >= self.keys.size or self.keys[i] != key:
            raise KeyError(f"edge ({n}, {m}) not in snapshot")
        return i

    def has_edge(self, n, m):
        try:
            self.edge_index(n, m)
        except KeyError:
            return False
        return True

    def __eq__(self, other):
        if not isinstance(other, GraphSnapshot):
            return NotImplemented
        return self.n_nodes == other.n_nodes and np.array_equal(self.keys, other.keys)

    def __hash__(self):
        return hash((self.n_nodes, self.keys.tobytes()))

    def __repr__(self):
        return f"GraphSnapshot(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


class DynamicGraph:
    """A sequence of snapshots over ``horizon`` stages, optionally cycled."""

    def __init__(self, base_snapshots, horizon, cycle=False, node_ids=None):
        base_snapshots = list(base_snapshots)
        if not base_snapshots:
            raise ValueError("at least one snapshot is required")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        n = base_snapshots[0].n_nodes
        if any(s.n_nodes != n for s in base_snapshots):
            raise ValueError("all snapshots must share n_nodes")
        if not cycle and len(base_snapshots) < horizon:
            raise ValueError(
                f"{len(base_snapshots)} snapshots cannot cover horizon {horizon} without cycling"
            )
        self.base_snapshots = tuple(base_snapshots)
        self.horizon = int(horizon)
        self.cycle = bool(cycle)
        # original trace ids for each dense node index; None when ids were already dense
        self.node_ids = node_ids

    @property
    def n_nodes(self):
        return self.base_snapshots[0].n_nodes

    def snapshot(self, t):
        return snapshot(self, t)

    def __iter__(self):
        for t in range(1, self.horizon + 1):
            yield snapshot(self, t)


def snapshot(g, t):
    """Snapshot of dynamic graph ``g`` at 1-based stage ``t``."""
    if not 1 <= t <= g.horizon:
        raise IndexError(f"stage {t} outside [1, {g.horizon}]")
    if g.cycle:
        return g.base_snapshots[(t - 1) % len(g.base_snapshots)]
    return g.base_snapshots[t - 1]


def _simple_edges(src, dst):
    """Drop self-loops and duplicate edges, keeping first occurrences."""
    keep = src != dst
    pairs = np.stack([src[keep], dst[keep]], axis=1)
    _, first = np.unique(pairs, axis=0, return_index=True)
    return pairs[np.sort(first), 0], pairs[np.sort(first), 1]


def load_trace(path, horizon, cycle=False, mapping_out=None):
    """Load a snapshot edge-list trace.

    Each non-comment line is ``t src dst`` with a 1-based stage label.
    An optional ``#nodes N`` header fixes the node count, in which case ids
    must already be dense in ``[0, N)``. Without a header, ids are remapped
    to dense indices in ascending id order; pass ``mapping_out`` to write
    the ``index original_id`` mapping next to the trace.

    Every distinct stage label becomes one snapshot, in ascending label
    order. Nodes absent from a stage are kept as isolated nodes.
    """
    path = Path(path)
    declared_n = None
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts and parts[0] == "nodes":
                    if len(parts) != 2 or not parts[1].isdigit():
                        raise TraceFormatError(f"{path}:{lineno}: bad header {line!r}")
                    declared_n = int(parts[1])
                continue
            parts = line.split()
            if len(parts) != 3:
                raise TraceFormatError(f"{path}:{lineno}: expected 't src dst', got {line!r}")
            try:
                t, a, b = (int(p) for p in parts)
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if t < 1 or a < 0 or b < 0:
                raise TraceFormatError(f"{path}:{lineno}: negative id or stage label < 1")
            if declared_n is not None and max(a, b) >= declared_n:
                raise IndexError(f"{path}:{lineno}: node id {max(a, b)} >= declared {declared_n} nodes")
            rows.append((t, a, b))
    if not rows:
        raise TraceFormatError(f"{path}: trace contains no edges")

    data = np.array(rows, dtype=np.int64)
    node_ids = None
    if declared_n is None:
        node_ids, dense = np.unique(data[:, 1:], return_inverse=True)
        data[:, 1:] = dense.reshape(-1, 2)
        n_nodes = int(node_ids.size)
        if mapping_out is not None:
            np.savetxt(mapping_out, np.column_stack([np.arange(n_nodes), node_ids]), fmt="%d",
                       header="index original_id")
    else:
        n_nodes = declared_n

    snaps = []
    for label in np.unique(data[:, 0]):
        block = data[data[:, 0] == label]
        src, dst = _simple_edges(block[:, 1], block[:, 2])
        dropped = len(block) - len(src)
        if dropped:
            logger.warning("stage %d: dropped %d self-loop/duplicate edges", label, dropped)
        snaps.append(GraphSnapshot(n_nodes, src, dst))
    return DynamicGraph(snaps, horizon, cycle=cycle, node_ids=node_ids)


def write_trace(path, graph, stages=None):
    """Write ``graph`` in the snapshot edge-list format (one line per edge)."""
    stages = range(1, graph.horizon + 1) if stages is None else stages
    with open(path, "w") as fh:
        fh.write(f"#nodes {graph.n_nodes}\n")
        for t in stages:
            snap = snapshot(graph, t)
            block = np.column_stack([np.full(snap.n_edges, t), snap.src, snap.dst])
            np.savetxt(fh, block, fmt="%d")


def generate_er_rewire(n_nodes, edge_prob, rewire_per_stage, horizon, rng):
    """Erdos-Renyi directed graph evolved by preferential head rewiring.

    Stage 1 connects every ordered pair with probability ``edge_prob``.
    Each later stage picks ``rewire_per_stage`` distinct edges uniformly and
    moves each head to a new node drawn with probability proportional to
    ``indegree + 1`` (indegrees frozen at the start of the stage). Draws
    that would create a self-loop, a duplicate edge, or keep the old head
    are rejected and redrawn.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be >= 2")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    if rewire_per_stage < 0:
        raise ValueError("rewire_per_stage must be non-negative")

    srcs, dsts = [], []
    for lo in range(0, n_nodes, 512):
        hi = min(lo + 512, n_nodes)
        adj = rng.random((hi - lo, n_nodes)) < edge_prob
        adj[np.arange(hi - lo), np.arange(lo, hi)] = False
        s, d = np.nonzero(adj)
        srcs.append(s + lo)
        dsts.append(d)
    src, dst = np.concatenate(srcs), np.concatenate(dsts)
    first = GraphSnapshot(n_nodes, src, dst)
    if rewire_per_stage > first.n_edges:
        raise ValueError(
            f"rewire_per_stage={rewire_per_stage} exceeds edge count {first.n_edges}"
        )
    # a node with out-degree N-1 has no valid alternative head
    if rewire_per_stage and first.n_edges and np.bincount(src, minlength=n_nodes).max() >= n_nodes - 1:
        raise ValueError("graph too dense for rewiring without duplicate edges")

    snaps = [first]
    src = first.src.copy()
    dst = first.dst.copy()
    present = set(first.keys.tolist())
    for _ in range(2, horizon + 1):
        if rewire_per_stage:
            weights = np.bincount(dst, minlength=n_nodes) + 1.0
            cdf = np.cumsum(weights)
            cdf /= cdf[-1]
            picks = rng.choice(src.size, size=rewire_per_stage, replace=False)
            for e in picks:
                a, old = int(src[e]), int(dst[e])
                while True:
                    m = min(int(np.searchsorted(cdf, rng.random(), side="right")), n_nodes - 1)
                    if m != a and m != old and a * n_nodes + m not in present:
                        break
                present.discard(a * n_nodes + old)
                present.add(a * n_nodes + m)
                dst[e] = m
            snaps.append(GraphSnapshot(n_nodes, src, dst))
        else:
            snaps.append(first)
    return DynamicGraph(snaps, horizon, cycle=False)
