"""Pure-Python first-passage walk kernel.

Reference implementation of the compiled kernel in ``_walk_core``: it
consumes one PCG64 double per step in the same order, so for a given seed
both kernels return bit-identical step counts.  Roughly two orders of
magnitude slower; kept as the fallback when the extension is not built and
as the ground truth the compiled kernel is tested against.
"""

from __future__ import annotations

import numpy as np


def first_passage_steps(indptr, indices, start, target, n_walks, max_steps, seed):
    """Simulate walks from ``start`` until ``target``; -1 marks truncation."""
    gen = np.random.Generator(np.random.PCG64(seed))
    random = gen.random
    indptr = indptr.tolist()
    indices = indices.tolist()
    out = np.empty(n_walks, dtype=np.int64)
    for w in range(n_walks):
        cur = start
        steps = 0
        while cur != target and steps < max_steps:
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            cur = indices[lo + int(random() * deg)]
            steps += 1
        out[w] = steps if cur == target else -1
    return out
