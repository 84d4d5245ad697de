"""Integer-lattice geometry: boxes, boundaries, faces, octants, modified boxes,
and the hypercubic point symmetry group.

All vertex collections are returned as lists sorted in lexicographic order so
that downstream iteration (candidate enumeration, summation, output files) is
bit-reproducible. Values are immutable after construction and safe to share
between workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product

Vertex = tuple  # d-tuple of ints

# Coordinates and window extents must stay well inside int64 so that offset
# arithmetic (anchor + offset, Minkowski sums) can never overflow silently.
COORD_LIMIT = 2 ** 31


class GeometryError(ValueError):
    """Invalid lattice geometry (bad radius, corner cut, coordinates...)."""


def _check_vertex(v, d=None):
    v = tuple(int(c) for c in v)
    if d is not None and len(v) != d:
        raise GeometryError(f"expected a {d}-dimensional vertex, got {v}")
    if len(v) < 2:
        raise GeometryError(f"lattice dimension must be >= 2, got vertex {v}")
    for c in v:
        if abs(c) >= COORD_LIMIT:
            raise GeometryError(f"coordinate {c} outside +-2^31 window limit")
    return v


@dataclass(frozen=True)
class BoxRegion:
    """Box of side 2n centered at a vertex: center + [-n, n]^d."""

    center: Vertex
    radius: int

    def __post_init__(self):
        object.__setattr__(self, "center", _check_vertex(self.center))
        if self.radius < 0:
            raise GeometryError(f"box radius must be >= 0, got {self.radius}")
        if abs(self.radius) + max(abs(c) for c in self.center) >= COORD_LIMIT:
            raise GeometryError("box extends beyond the +-2^31 window limit")

    @property
    def dimension(self):
        return len(self.center)

    def volume(self):
        return (2 * self.radius + 1) ** self.dimension

    def contains(self, v) -> bool:
        return max(abs(a - b) for a, b in zip(v, self.center)) <= self.radius


@dataclass(frozen=True)
class ModifiedBox:
    """Box of radius m with the 2^d corner blocks of side c removed.

    A vertex y belongs iff some coordinate of y - center lies in
    [-(m - c), m - c]; exactly (2c)^d corner vertices are removed.
    """

    center: Vertex
    radius: int
    corner_cut: int

    def __post_init__(self):
        object.__setattr__(self, "center", _check_vertex(self.center))
        if self.radius < 1:
            raise GeometryError(f"modified box radius must be >= 1, got {self.radius}")
        if not 1 <= self.corner_cut <= self.radius:
            raise GeometryError(
                f"corner cut must satisfy 1 <= c <= m, got c={self.corner_cut} m={self.radius}"
            )

    @property
    def dimension(self):
        return len(self.center)

    def contains(self, v) -> bool:
        band = self.radius - self.corner_cut
        rel = [a - b for a, b in zip(v, self.center)]
        if max(abs(c) for c in rel) > self.radius:
            return False
        return any(abs(c) <= band for c in rel)


@dataclass(frozen=True)
class SlabRegion:
    """Quarter-plane slab Z_{>=0}^2 x {1..L}^(d-2), d >= 3."""

    thickness: int
    dimension: int

    def __post_init__(self):
        if self.dimension < 3:
            raise GeometryError("slab regions need ambient dimension >= 3")
        if self.thickness < 1:
            raise GeometryError(f"slab thickness must be >= 1, got {self.thickness}")

    def contains(self, v) -> bool:
        if len(v) != self.dimension:
            raise GeometryError(f"vertex {v} has wrong dimension for {self}")
        if v[0] < 0 or v[1] < 0:
            return False
        return all(1 <= c <= self.thickness for c in v[2:])


def box_vertices(b: BoxRegion) -> list:
    """All (2n+1)^d vertices of the box, lexicographically sorted."""
    ranges = [range(c - b.radius, c + b.radius + 1) for c in b.center]
    return [tuple(v) for v in product(*ranges)]


def boundary_vertices(b: BoxRegion) -> list:
    """Inner vertex boundary: sup-norm distance from center exactly n.

    Convention: the boundary of a radius-0 box is {center}, keeping the
    function total.
    """
    if b.radius == 0:
        return [b.center]
    c, n = b.center, b.radius
    return [v for v in box_vertices(b) if max(abs(a - b_) for a, b_ in zip(v, c)) == n]


def octant_face(n: int, shift: int = 0, *, dimension: int = 2, nonnegative: bool = True) -> list:
    """Octant face T(n), its e1-shifted union T(m, n), or the full face F(n).

    With nonnegative=True and shift=0 this is T(n) = {x1 = n, 0 <= xj <= n};
    shift=m >= 1 unions the translates j*e1 + T(n) for j = 0..2m. Setting
    nonnegative=False drops the xj >= 0 constraint, yielding F(n) / its union.
    """
    if n < 1:
        raise GeometryError(f"octant face needs n >= 1, got {n}")
    if shift < 0:
        raise GeometryError(f"shift must be >= 0, got {shift}")
    lo = 0 if nonnegative else -n
    side = [range(lo, n + 1)] * (dimension - 1)
    out = []
    for j in range(2 * shift + 1):
        for rest in product(*side):
            out.append((n + j,) + rest)
    return sorted(out)


def modified_box_vertices(mb: ModifiedBox) -> list:
    """Vertices of the corner-cut box; (2m+1)^d - (2c)^d of them."""
    full = box_vertices(BoxRegion(mb.center, mb.radius))
    return [v for v in full if mb.contains(v)]


@dataclass(frozen=True)
class LatticeSymmetry:
    """Point symmetry of Z^d fixing 0: axis permutation composed with sign flips.

    y = phi(x) with y[i] = signs[i] * x[perm[i]].
    """

    perm: tuple
    signs: tuple

    def __post_init__(self):
        d = len(self.perm)
        if sorted(self.perm) != list(range(d)) or len(self.signs) != d:
            raise GeometryError(f"invalid symmetry {self.perm} {self.signs}")
        if any(s not in (-1, 1) for s in self.signs):
            raise GeometryError(f"signs must be +-1, got {self.signs}")

    @property
    def dimension(self):
        return len(self.perm)

    def apply(self, v):
        return tuple(s * v[p] for p, s in zip(self.perm, self.signs))

    def compose(self, other: "LatticeSymmetry") -> "LatticeSymmetry":
        """Symmetry acting as: first `other`, then `self`."""
        perm = tuple(other.perm[p] for p in self.perm)
        signs = tuple(s * other.signs[p] for p, s in zip(self.perm, self.signs))
        return LatticeSymmetry(perm, signs)

    @staticmethod
    def identity(d: int) -> "LatticeSymmetry":
        return LatticeSymmetry(tuple(range(d)), (1,) * d)

    @staticmethod
    def group(d: int) -> list:
        """All 2^d * d! point symmetries, in a fixed deterministic order."""
        out = []
        for perm in permutations(range(d)):
            for signs in product((1, -1), repeat=d):
                out.append(LatticeSymmetry(perm, signs))
        return out
