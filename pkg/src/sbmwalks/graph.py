"""Sampling of block-model graphs, connectivity, and degree concentration.

Graphs are stored densely (desk scale, n up to a few thousand).  Loops are
allowed: a loop contributes 1 to its vertex degree and counts as one element
of the edge set, so ``sum(degrees) == 2 * edge_count - loop_count``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import BlockModelConfig, DerivedParams

__all__ = [
    "Graph",
    "GraphConnectivityError",
    "sample",
    "is_connected",
    "degree_concentration",
    "DegreeConcentrationReport",
    "replicate_seed",
    "write_edge_list",
    "read_edge_list",
]


class GraphConnectivityError(ValueError):
    """Raised when an operation requires a connected graph and the input is not."""


@dataclass(frozen=True, eq=False)
class Graph:
    """A realized graph: symmetric 0/1 adjacency with optional loops.

    ``edge_count`` counts unordered vertex pairs carrying an edge, each loop
    counted once.  Arrays are marked read-only; instances are safe to share.
    """

    n: int
    n_blocks: int
    block_of: np.ndarray
    adjacency: np.ndarray
    degrees: np.ndarray
    edge_count: int
    loop_count: int

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray, block_of: np.ndarray) -> "Graph":
        adjacency = np.asarray(adjacency, dtype=np.uint8)
        block_of = np.asarray(block_of, dtype=np.int64)
        n = adjacency.shape[0]
        if adjacency.shape != (n, n):
            raise ValueError("adjacency must be square")
        if block_of.shape != (n,):
            raise ValueError("block_of must have one entry per vertex")
        if not np.array_equal(adjacency, adjacency.T):
            raise ValueError("adjacency must be symmetric")
        if adjacency.max(initial=0) > 1:
            raise ValueError("adjacency entries must be 0 or 1")
        n_blocks = int(block_of.max()) + 1
        sizes = np.bincount(block_of, minlength=n_blocks)
        if len(set(sizes.tolist())) != 1:
            raise ValueError(f"blocks must have equal size, got sizes {sizes.tolist()}")
        degrees = adjacency.sum(axis=1).astype(np.int64)
        loop_count = int(np.trace(adjacency))
        edge_count = (int(adjacency.sum()) + loop_count) // 2
        for arr in (adjacency, block_of, degrees):
            arr.setflags(write=False)
        return cls(
            n=n,
            n_blocks=n_blocks,
            block_of=block_of,
            adjacency=adjacency,
            degrees=degrees,
            edge_count=edge_count,
            loop_count=loop_count,
        )

    @property
    def degree_sum(self) -> int:
        """Equals ``2 * edge_count - loop_count``."""
        return int(self.degrees.sum())


def sample(config: BlockModelConfig) -> Graph:
    """Draw one realization of the block model.

    Vertices ``0 .. n-1`` are assigned to blocks contiguously (vertex ``v``
    belongs to block ``v // (n // m)``).  A full ``n x n`` matrix of uniforms
    is drawn from ``numpy.random.default_rng(config.seed)`` (PCG64) and only
    the upper triangle is consumed, so the same seed yields the same
    off-diagonal edges whether or not loops are enabled.  The generator is
    platform-independent; identical seeds give identical graphs.
    """
    n, m = config.n, config.m
    block_of = np.repeat(np.arange(m, dtype=np.int64), config.block_size)
    p_of = np.asarray(config.p, dtype=np.float64)[block_of]
    prob = np.where(block_of[:, None] == block_of[None, :], p_of[:, None], config.q)

    rng = np.random.default_rng(config.seed)
    hit = rng.random((n, n)) < prob
    upper = np.triu(hit, k=1)
    adjacency = (upper | upper.T).astype(np.uint8)
    if config.allow_loops:
        adjacency[np.diag_indices(n)] = np.diagonal(hit)
    return Graph.from_adjacency(adjacency, block_of)


def is_connected(graph: Graph) -> bool:
    """True iff a single component spans all vertices (loops are irrelevant)."""
    if graph.n == 1:
        return True
    n_comp, _ = connected_components(csr_matrix(graph.adjacency), directed=False)
    return n_comp == 1


@dataclass(frozen=True)
class DegreeConcentrationReport:
    """Outcome of the per-vertex degree concentration check.

    ``violations`` counts vertices with ``|d_v - gamma| > c * sqrt(gamma)``
    where ``gamma`` is the expected degree of the vertex's block.
    ``reference_bound`` is the per-vertex two-sided exponential tail bound
    ``exp(-c^2/2) + exp(-c^2 / (2 (1 + c / (3 sqrt(gamma_min)))))`` to
    compare the violation fraction against.
    """

    c: float
    violations: int
    fraction: float
    reference_bound: float


def degree_concentration(graph: Graph, params: DerivedParams, c: float) -> DegreeConcentrationReport:
    if c <= 0:
        raise ValueError("c must be positive")
    gamma = np.asarray(params.gamma)[graph.block_of]
    dev = np.abs(graph.degrees - gamma)
    violations = int(np.count_nonzero(dev > c * np.sqrt(gamma)))
    gmin = params.gamma_min
    lower = math.exp(-c * c / 2.0)
    upper = math.exp(-c * c / (2.0 * (1.0 + c / (3.0 * math.sqrt(gmin))))) if gmin > 0 else 1.0
    return DegreeConcentrationReport(
        c=float(c),
        violations=violations,
        fraction=violations / graph.n,
        reference_bound=min(1.0, lower + upper),
    )


def replicate_seed(base_seed: int, replicate: int, attempt: int = 0) -> int:
    """Derive an independent 64-bit seed for one replicate.

    Splitting rule: the stream for replicate ``i`` (resampling attempt ``a``)
    is seeded with the first 64-bit word of
    ``numpy.random.SeedSequence([base_seed, i, a])``.  This is the documented
    rule used by the experiment drivers for parallel-safe replicates.
    """
    ss = np.random.SeedSequence([int(base_seed), int(replicate), int(attempt)])
    return int(ss.generate_state(1, np.uint64)[0])


def write_edge_list(graph: Graph, path) -> None:
    """Write the text edge-list format.

    Line 1: ``n n_blocks``.  Then one ``block vertex`` line per vertex (in
    vertex order), then one ``v w`` line per edge with ``v <= w`` (loops as
    ``v v``).  Vertices are 0-based.  Round-trips bit-exactly.
    """
    iu, ju = np.triu_indices(graph.n, k=0)
    mask = graph.adjacency[iu, ju] > 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{graph.n} {graph.n_blocks}\n")
        for v in range(graph.n):
            fh.write(f"{graph.block_of[v]} {v}\n")
        for v, w in zip(iu[mask], ju[mask]):
            fh.write(f"{v} {w}\n")


def read_edge_list(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"edge list {path}: header must be 'n n_blocks'")
        n, n_blocks = int(header[0]), int(header[1])
        block_of = np.full(n, -1, dtype=np.int64)
        for _ in range(n):
            parts = fh.readline().split()
            if len(parts) != 2:
                raise ValueError(f"edge list {path}: expected {n} 'block vertex' lines after the header")
            b, v = int(parts[0]), int(parts[1])
            if not 0 <= v < n or not 0 <= b < n_blocks:
                raise ValueError(f"edge list {path}: block line '{b} {v}' out of range")
            block_of[v] = b
        if (block_of < 0).any():
            raise ValueError(f"edge list {path}: some vertices have no block assignment")
        adjacency = np.zeros((n, n), dtype=np.uint8)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"edge list {path}: malformed edge line {line!r}")
            v, w = int(parts[0]), int(parts[1])
            if not 0 <= v < n or not 0 <= w < n:
                raise ValueError(f"edge list {path}: edge '{v} {w}' out of range")
            adjacency[v, w] = 1
            adjacency[w, v] = 1
    return Graph.from_adjacency(adjacency, block_of)
