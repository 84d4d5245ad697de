"""Union-find labeling kernels, the performance core of cluster analysis.

The default backend compiles the kernel with numba's @njit; setting the
environment variable HYPERPERC_BACKEND=numpy selects the pure-Python/numpy
fallback (same source function, no compilation). HYPERPERC_BACKEND=numba
forces numba and fails loudly if it is unavailable. benchmarks/bench_kernels.py
compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_VAR = "HYPERPERC_BACKEND"


def _label_instances_impl(n_vertices, flat, ptr):
    """Merge the vertex groups flat[ptr[e]:ptr[e+1]] and return canonical roots.

    Union by rank with path halving; the returned label of every vertex is the
    smallest vertex index in its cluster, so equal partitions give equal
    arrays regardless of merge order.
    """
    parent = np.arange(n_vertices, dtype=np.int64)
    rank = np.zeros(n_vertices, dtype=np.int8)
    for e in range(ptr.shape[0] - 1):
        s = ptr[e]
        t = ptr[e + 1]
        if t - s < 2:
            continue
        a = flat[s]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        for j in range(s + 1, t):
            b = flat[j]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a == b:
                continue
            if rank[a] < rank[b]:
                parent[a] = b
                a = b
            elif rank[a] > rank[b]:
                parent[b] = a
            else:
                parent[b] = a
                rank[a] += 1
    roots = np.empty(n_vertices, dtype=np.int64)
    for v in range(n_vertices):
        r = v
        while parent[r] != r:
            r = parent[r]
        x = v
        while parent[x] != r:
            nxt = parent[x]
            parent[x] = r
            x = nxt
        roots[v] = r
    # canonicalize: label = min vertex index of the cluster
    rep = np.full(n_vertices, n_vertices, dtype=np.int64)
    for v in range(n_vertices):
        r = roots[v]
        if v < rep[r]:
            rep[r] = v
    for v in range(n_vertices):
        roots[v] = rep[roots[v]]
    return roots


def _pick_backend():
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise RuntimeError(f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy", _label_instances_impl
    try:
        from numba import njit
    except ImportError:
        if choice == "numba":
            raise
        return "numpy", _label_instances_impl
    return "numba", njit(cache=True)(_label_instances_impl)


BACKEND, label_instances = _pick_backend()


def label_instances_python(n_vertices, flat, ptr):
    """Fallback path, always available; used by tests and the benchmark."""
    return _label_instances_impl(n_vertices, flat, ptr)


def available_impls():
    """(name, callable) pairs for every importable backend."""
    out = [("numpy", _label_instances_impl)]
    try:
        from numba import njit
    except ImportError:
        return out
    out.append(("numba", njit(cache=True)(_label_instances_impl)))
    return out
