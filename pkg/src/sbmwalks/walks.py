"""Kernel selection for the Monte Carlo walk simulator.

The compiled Cython kernel is used when available; otherwise the pure-Python
twin takes over.  Both consume randomness identically, so results do not
depend on the choice.  Set the environment variable ``SBMWALKS_PURE=1`` to
force the pure kernel (used by the benchmark and the equivalence tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import _walk_pure

try:
    from . import _walk_core
except ImportError:  # extension not built; fall back to the reference kernel
    _walk_core = None

__all__ = ["active_kernel", "first_passage_steps", "graph_csr", "HAVE_COMPILED"]

HAVE_COMPILED = _walk_core is not None


def active_kernel() -> str:
    """Name of the kernel that will run: "compiled" or "pure"."""
    if HAVE_COMPILED and not os.environ.get("SBMWALKS_PURE"):
        return "compiled"
    return "pure"


def graph_csr(graph) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor lists in CSR form (int64 indptr, indices); loops appear once."""
    rows, cols = np.nonzero(graph.adjacency)
    indptr = np.zeros(graph.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=graph.n), out=indptr[1:])
    return indptr, cols.astype(np.int64)


def first_passage_steps(indptr, indices, start, target, n_walks, max_steps, seed) -> np.ndarray:
    impl = _walk_core if active_kernel() == "compiled" else _walk_pure
    return impl.first_passage_steps(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        int(start),
        int(target),
        int(n_walks),
        int(max_steps),
        int(seed),
    )
