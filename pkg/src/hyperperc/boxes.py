"""Axis-aligned integer box algebra.

Used for exact anchor counting: the set of anchors whose translate of a shape
meets a box (or a box boundary face) is a union of axis-aligned boxes, so
annulus crossing masses reduce to cardinalities of unions of integer boxes.
Boxes are (lo, hi) pairs of d-tuples with inclusive bounds.
"""

from __future__ import annotations

import bisect
from itertools import product

import numpy as np


def box_volume(box) -> int:
    lo, hi = box
    vol = 1
    for a, b in zip(lo, hi):
        if b < a:
            return 0
        vol *= b - a + 1
    return vol


def box_intersection(b1, b2):
    """Intersection box, or None when empty."""
    lo = tuple(max(a, b) for a, b in zip(b1[0], b2[0]))
    hi = tuple(min(a, b) for a, b in zip(b1[1], b2[1]))
    if any(a > b for a, b in zip(lo, hi)):
        return None
    return (lo, hi)


def anchor_box(target, shape_box):
    """Anchors a such that (a + shape_box) intersects target: target - shape_box."""
    (tlo, thi), (slo, shi) = target, shape_box
    return (tuple(a - b for a, b in zip(tlo, shi)),
            tuple(a - b for a, b in zip(thi, slo)))


def centered_box(n: int, d: int):
    return (tuple([-n] * d), tuple([n] * d))


def boundary_face_boxes(n: int, d: int) -> list:
    """The 2d faces whose union is the sup-norm sphere of radius n."""
    out = []
    for ax in range(d):
        for s in (-n, n):
            lo = [-n] * d
            hi = [n] * d
            lo[ax] = s
            hi[ax] = s
            out.append((tuple(lo), tuple(hi)))
    return out


def union_cardinality(boxes, d: int) -> int:
    """Exact number of lattice points covered by a union of integer boxes.

    Coordinate compression: cut each axis at every box edge, mark covered
    cells on the compressed grid, and sum cell volumes.
    """
    boxes = [b for b in boxes if box_volume(b) > 0]
    if not boxes:
        return 0
    cuts = []
    for a in range(d):
        cs = sorted({b[0][a] for b in boxes} | {b[1][a] + 1 for b in boxes})
        cuts.append(cs)
    mask = np.zeros(tuple(len(c) - 1 for c in cuts), dtype=bool)
    for lo, hi in boxes:
        idx = tuple(
            slice(bisect.bisect_left(cuts[a], lo[a]), bisect.bisect_left(cuts[a], hi[a] + 1))
            for a in range(d)
        )
        mask[idx] = True
    vol = np.diff(np.asarray(cuts[0], dtype=np.int64))
    for a in range(1, d):
        vol = np.multiply.outer(vol, np.diff(np.asarray(cuts[a], dtype=np.int64)))
    return int((mask * vol).sum())


def decompose_offsets(offsets, d: int) -> list:
    """Greedy disjoint box cover of a finite offset set.

    Boxes are grown from each uncovered lex-minimal cell, extending along the
    last axis first. Square rings decompose into 4 boxes, segments into 1;
    worst case is one box per cell.
    """
    cells = set(tuple(int(c) for c in o) for o in offsets)
    boxes = []
    for start in sorted(cells):
        if start not in cells:
            continue
        lo = list(start)
        hi = list(start)
        cells.discard(start)
        for ax in range(d - 1, -1, -1):
            while True:
                layer = []
                complete = True
                other = [range(lo[a], hi[a] + 1) for a in range(d) if a != ax]
                for rest in product(*other):
                    q = rest[:ax] + (hi[ax] + 1,) + rest[ax:]
                    if q not in cells:
                        complete = False
                        break
                    layer.append(q)
                if not complete:
                    break
                hi[ax] += 1
                for q in layer:
                    cells.discard(q)
        boxes.append((tuple(lo), tuple(hi)))
    return boxes


def meets_both_count(shape_boxes, n: int, outer: int, d: int) -> int:
    """Number of anchors a with (a + shape) meeting B(n) and the boundary of B(outer).

    Both anchor sets are unions of boxes (shape boxes against the center box,
    resp. against each boundary face); the result is the exact cardinality of
    their intersection.
    """
    inner = centered_box(n, d)
    a1 = [anchor_box(inner, sb) for sb in shape_boxes]
    a2 = [anchor_box(face, sb) for face in boundary_face_boxes(outer, d) for sb in shape_boxes]
    both = []
    for b1 in a1:
        for b2 in a2:
            iv = box_intersection(b1, b2)
            if iv is not None:
                both.append(iv)
    return union_cardinality(both, d)
