"""Benchmark the union-find labeling kernel: numba backend vs numpy fallback.

The kernel dominates cluster analysis, which in turn dominates every Monte
Carlo experiment, so this is the number that decides whether a run takes
seconds or minutes. Usage:

    python3 benchmarks/bench_kernels.py [--side 256] [--u 0.55] [--repeat 5]

The same comparison can be forced onto any entry point by setting
HYPERPERC_BACKEND=numpy (fallback) or =numba (default when importable).
"""

import argparse
import time

import numpy as np

from hyperperc._kernels import available_impls
from hyperperc.measure import nearest_neighbor_measure
from hyperperc.sampler import Window, configuration_at, draw_arrivals


def build_workload(side, u, seed=7):
    measure = nearest_neighbor_measure(2)
    window = Window.centered(side // 2, 2)
    sample = draw_arrivals(measure, window, seed)
    config = configuration_at(sample, u)
    cands = sample.candidates
    starts = cands.block_starts
    block_of = np.searchsorted(starts, config.open_idx, side="right") - 1
    flat_parts, ptr_parts, running = [], [np.zeros(1, dtype=np.int64)], 0
    for b in range(len(cands.shapes)):
        sel = block_of == b
        anchors = cands.anchors[b][config.open_idx[sel] - starts[b]]
        offsets = np.asarray(cands.shapes[b].offsets, dtype=np.int64)
        idx = window.ravel(anchors[:, None, :] + offsets[None, :, :]).reshape(-1)
        k = offsets.shape[0]
        flat_parts.append(idx)
        ptr_parts.append(running + np.arange(1, anchors.shape[0] + 1, dtype=np.int64) * k)
        running += anchors.shape[0] * k
    return window.volume(), np.concatenate(flat_parts), np.concatenate(ptr_parts)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--side", type=int, default=256)
    parser.add_argument("--u", type=float, default=0.55)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    n_vertices, flat, ptr = build_workload(args.side, args.u)
    n_groups = ptr.size - 1
    print(f"window {args.side}^2: {n_vertices} vertices, "
          f"{n_groups} open instances, {flat.size} merge entries")

    results = {}
    reference = None
    for name, impl in available_impls():
        impl(n_vertices, flat, ptr)  # warm up (JIT compile / cache load)
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            roots = impl(n_vertices, flat, ptr)
            best = min(best, time.perf_counter() - t0)
        results[name] = best
        if reference is None:
            reference = roots
        elif not np.array_equal(reference, roots):
            raise SystemExit(f"backend {name} disagrees with the first backend")
        rate = flat.size / best / 1e6
        print(f"{name:>6}: {best * 1e3:9.3f} ms  ({rate:8.1f} M merge-entries/s)")

    if len(results) == 2:
        print(f"speedup numba vs numpy: {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
