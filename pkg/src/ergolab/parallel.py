"""Deterministic sample-parallel execution.

Monte-Carlo work is split into a fixed number of chunks that does not
depend on the worker count; each chunk derives its random stream from the
root seed and its chunk index, and chunk results are combined in chunk
order.  Consequently the output of a run is a function of (seed, config)
alone: byte-identical whether it ran on 1 worker or 16.

Worker functions must be module-level (picklable); payloads should be
plain tuples of primitives and small arrays.
"""

from __future__ import annotations

from multiprocessing import get_context

import numpy as np

N_CHUNKS = 32


def rng_for(*keys) -> np.random.Generator:
    """Generator keyed by a tuple of integers, stable across processes."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def chunk_bounds(n_items: int, n_chunks: int = N_CHUNKS):
    """Even [start, stop) split of range(n_items) into n_chunks pieces."""
    if n_items < 0:
        raise ValueError("n_items must be >= 0")
    n_chunks = max(1, min(n_chunks, n_items)) if n_items else 1
    edges = np.linspace(0, n_items, n_chunks + 1).astype(np.int64)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(n_chunks)]


def map_chunked(fn, payload, n_items: int, n_chunks: int = N_CHUNKS,
                workers: int = 1):
    """Run fn(chunk_index, start, stop, payload) over every chunk, in order.

    Results come back as a list indexed by chunk, so any reduction the
    caller performs is in fixed chunk order regardless of scheduling.
    """
    bounds = chunk_bounds(n_items, n_chunks)
    tasks = [(i, s, e, payload) for i, (s, e) in enumerate(bounds)]
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with get_context("fork").Pool(processes=min(workers, len(tasks))) as pool:
        return pool.starmap(fn, tasks)
