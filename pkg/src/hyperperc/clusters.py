"""Cluster labeling of window vertices under open hyper-edges.

Two vertices belong to the same cluster iff a chain of open instances with
pairwise non-empty intersections joins them; merging every open instance's
in-window vertex set into a union-find realizes exactly that relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import label_instances
from .lattice import GeometryError
from .sampler import CLIPPED, Configuration, Window

DEFAULT_GIANT_FRACTION = 0.01


@dataclass
class ClusterLabeling:
    window: Window
    roots: np.ndarray          # canonical label per vertex (min vertex index in cluster)
    sizes: np.ndarray          # cluster size indexed by canonical label
    _bbox: tuple = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return self.roots.size

    def n_clusters(self) -> int:
        return int(np.unique(self.roots).size)

    def cluster_size_of(self, label: int) -> int:
        return int(self.sizes[label])

    def boundary_labels(self) -> np.ndarray:
        return np.unique(self.roots[self.window.boundary_indices()])

    def cluster_bounding_boxes(self):
        """(labels, lo, hi): per-cluster axis-aligned bounding boxes (lazy)."""
        if self._bbox is None:
            d = self.window.dimension
            shape = self.window.shape
            idx = np.arange(self.n_vertices, dtype=np.int64)
            coords = np.empty((self.n_vertices, d), dtype=np.int64)
            rem = idx
            for a in range(d - 1, -1, -1):
                coords[:, a] = rem % shape[a] + self.window.lo[a]
                rem = rem // shape[a]
            labels = np.unique(self.roots)
            pos = np.searchsorted(labels, self.roots)
            lo = np.full((labels.size, d), np.iinfo(np.int64).max)
            hi = np.full((labels.size, d), np.iinfo(np.int64).min)
            np.minimum.at(lo, pos, coords)
            np.maximum.at(hi, pos, coords)
            self._bbox = (labels, lo, hi)
        return self._bbox


def build(c: Configuration, w: Window = None) -> ClusterLabeling:
    """Label the window partition induced by the open instances.

    In CLIPPED mode out-of-window vertices of an open instance are dropped and
    only the in-window remainder is merged.
    """
    if w is None:
        w = c.window
    elif w != c.window:
        raise GeometryError("configuration was sampled on a different window")
    cands = c.sample.candidates
    d = w.dimension
    n_vertices = w.volume()

    flat_parts = []
    ptr_parts = [np.zeros(1, dtype=np.int64)]
    starts = cands.block_starts
    block_of = np.searchsorted(starts, c.open_idx, side="right") - 1
    running = 0
    for b in range(len(cands.shapes)):
        sel = block_of == b
        if not sel.any():
            continue
        anchors = cands.anchors[b][c.open_idx[sel] - starts[b]]     # (m, d)
        offsets = np.asarray(cands.shapes[b].offsets, dtype=np.int64)  # (k, d)
        verts = anchors[:, None, :] + offsets[None, :, :]            # (m, k, d)
        if w.mode == CLIPPED:
            lo = np.asarray(w.lo, dtype=np.int64)
            hi = np.asarray(w.hi, dtype=np.int64)
            inside = np.all((verts >= lo) & (verts <= hi), axis=2)   # (m, k)
            idx = w.ravel(verts)
            counts = inside.sum(axis=1)
            flat_parts.append(idx[inside])
            ptr_parts.append(running + np.cumsum(counts, dtype=np.int64))
            running += int(counts.sum())
        else:
            idx = w.ravel(verts).reshape(-1)
            k = offsets.shape[0]
            m_cnt = anchors.shape[0]
            flat_parts.append(idx)
            ptr_parts.append(running + np.arange(1, m_cnt + 1, dtype=np.int64) * k)
            running += m_cnt * k

    if flat_parts:
        flat = np.concatenate(flat_parts)
        ptr = np.concatenate(ptr_parts)
    else:
        flat = np.empty(0, dtype=np.int64)
        ptr = np.zeros(1, dtype=np.int64)

    roots = label_instances(n_vertices, flat, ptr)
    sizes = np.bincount(roots, minlength=n_vertices)
    return ClusterLabeling(window=w, roots=roots, sizes=sizes)


def connected(l: ClusterLabeling, x, y) -> bool:
    ix = l.window.vertex_index(x)
    iy = l.window.vertex_index(y)
    return bool(l.roots[ix] == l.roots[iy])


@dataclass(frozen=True)
class CrossingReport:
    axis_crossing: tuple       # bool per axis: one cluster touches both opposite faces
    origin_to_boundary: bool   # None when the origin is outside the window
    largest_cluster: int
    giant_count: int           # boundary-touching clusters above the size fraction
    size_fraction: float


def axis_crossings(l: ClusterLabeling) -> tuple:
    w = l.window
    out = []
    for axis in range(w.dimension):
        lo_roots = np.unique(l.roots[w.face_indices(axis, 0)])
        hi_roots = np.unique(l.roots[w.face_indices(axis, 1)])
        out.append(bool(np.intersect1d(lo_roots, hi_roots, assume_unique=True).size))
    return tuple(out)


def giant_census(l: ClusterLabeling, w: Window = None, size_fraction: float = 0.05) -> int:
    """Boundary-touching clusters holding at least the given fraction of vertices."""
    if w is None:
        w = l.window
    if not 0.0 < size_fraction < 1.0:
        raise ValueError(f"size fraction must be in (0, 1), got {size_fraction}")
    labels = l.boundary_labels()
    threshold = size_fraction * l.n_vertices
    return int((l.sizes[labels] >= threshold).sum())


def crossing_events(l: ClusterLabeling, w: Window = None,
                    size_fraction: float = DEFAULT_GIANT_FRACTION) -> CrossingReport:
    if w is None:
        w = l.window
    origin = (0,) * w.dimension
    if w.contains_vertex(origin):
        o = l.roots[w.vertex_index(origin)]
        boundary = l.boundary_labels()
        origin_touch = bool(np.isin(o, boundary))
    else:
        origin_touch = None
    return CrossingReport(
        axis_crossing=axis_crossings(l),
        origin_to_boundary=origin_touch,
        largest_cluster=int(l.sizes.max()) if l.sizes.size else 0,
        giant_count=giant_census(l, w, size_fraction),
        size_fraction=size_fraction,
    )


def stats_row(l: ClusterLabeling, replicate: int, u: float, slab_thickness=None,
              size_fraction: float = DEFAULT_GIANT_FRACTION) -> dict:
    """Per-replicate CSV/JSONL record of cluster statistics."""
    report = crossing_events(l, size_fraction=size_fraction)
    row = {
        "replicate": replicate,
        "u": u,
        "L": slab_thickness,
        "largest_size": report.largest_cluster,
        "giant_count": report.giant_count,
    }
    for a, flag in enumerate(report.axis_crossing):
        row[f"cross_axis{a}"] = int(flag)
    row["origin_to_boundary"] = (
        None if report.origin_to_boundary is None else int(report.origin_to_boundary)
    )
    return row
