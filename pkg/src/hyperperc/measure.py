"""Translation-invariant intensity measures on hyper-edges.

A hyper-edge shape is a translation class of finite vertex sets (size >= 2),
stored canonically anchored: the lexicographically minimal offset is the zero
vector, which makes translation invariance hold by construction. A measure is
a finite list of weighted shape atoms plus optional parametric families
(square-loop rings), optionally closed under the hypercubic point symmetries.

Weights are doubles and all mass computations sum in a fixed canonical order
(atoms in sorted order, then family scales ascending), trading exactness for
bit-reproducibility.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .boxes import decompose_offsets, meets_both_count
from .lattice import LatticeSymmetry, _check_vertex


class MeasureSpecError(ValueError):
    """Malformed or inconsistent measure specification."""


@dataclass(frozen=True)
class HyperEdgeShape:
    """Canonically anchored finite offset set, |offsets| >= 2."""

    offsets: tuple  # sorted tuple of d-tuples; offsets[0] == 0

    def __post_init__(self):
        if len(self.offsets) < 2:
            raise MeasureSpecError(
                f"a hyper-edge connects at least two vertices, got {self.offsets}"
            )

    @property
    def dimension(self):
        return len(self.offsets[0])

    @property
    def size(self):
        return len(self.offsets)

    def bounding_box(self):
        lo = tuple(min(o[a] for o in self.offsets) for a in range(self.dimension))
        hi = tuple(max(o[a] for o in self.offsets) for a in range(self.dimension))
        return lo, hi

    def diameter(self):
        """Sup-norm diameter of the vertex set."""
        lo, hi = self.bounding_box()
        return max(h - l for l, h in zip(lo, hi))

    def boxes(self):
        """Disjoint box cover of the offsets (cached)."""
        return _shape_boxes(self.offsets, self.dimension)

    def is_connected(self) -> bool:
        """Whether the offsets form one component under unit lattice steps.

        Along a connected instance the sup-norm changes by at most one per
        step, which makes annulus-crossing events monotone in the outer
        radius; disconnected shapes can skip shells.
        """
        return _shape_connected(self.offsets, self.dimension)

    def transformed(self, phi: LatticeSymmetry) -> "HyperEdgeShape":
        return canonicalize(phi.apply(o) for o in self.offsets)


@lru_cache(maxsize=4096)
def _shape_boxes(offsets, d):
    return tuple(decompose_offsets(offsets, d))


@lru_cache(maxsize=4096)
def _shape_connected(offsets, d):
    cells = set(offsets)
    stack = [offsets[0]]
    seen = {offsets[0]}
    while stack:
        v = stack.pop()
        for a in range(d):
            for s in (-1, 1):
                w = v[:a] + (v[a] + s,) + v[a + 1:]
                if w in cells and w not in seen:
                    seen.add(w)
                    stack.append(w)
    return len(seen) == len(cells)


@dataclass(frozen=True)
class HyperEdgeInstance:
    """A shape translated to a concrete anchor; vertex set = anchor + offsets."""

    shape: HyperEdgeShape
    anchor: tuple

    def vertices(self):
        a = self.anchor
        return [tuple(c + o[i] for i, c in enumerate(a)) for o in self.shape.offsets]


def canonicalize(offsets) -> HyperEdgeShape:
    """Unique translate of an offset set whose lex-minimal offset is 0."""
    pts = sorted({_check_vertex(o) for o in offsets})
    if len(pts) < 2:
        raise MeasureSpecError(f"a hyper-edge needs >= 2 distinct vertices, got {pts}")
    base = pts[0]
    return HyperEdgeShape(tuple(tuple(c - b for c, b in zip(p, base)) for p in pts))


@dataclass(frozen=True)
class SquareLoopFamily:
    """Square rings Q_k (sup-norm circles of radius 2^k) with weight k * 2^(-2k).

    Member k lives in the first two coordinates; remaining coordinates are 0.
    The family is truncated at max_scale, and every member is invariant under
    the hypercubic point symmetries.
    """

    dimension: int = 2
    max_scale: int = 10

    name = "square_loop"

    def __post_init__(self):
        if self.dimension < 2:
            raise MeasureSpecError("square-loop family needs dimension >= 2")
        if not 1 <= self.max_scale <= 30:
            raise MeasureSpecError(f"max_scale out of range: {self.max_scale}")

    def weight(self, k: int) -> float:
        return k * 2.0 ** (-2 * k)

    def shape(self, k: int) -> HyperEdgeShape:
        r = 2 ** k
        ring = []
        for x in range(-r, r + 1):
            for y in (-r, r):
                ring.append((x, y))
        for y in range(-r + 1, r):
            for x in (-r, r):
                ring.append((x, y))
        pad = (0,) * (self.dimension - 2)
        return canonicalize(p + pad for p in ring)

    def scales(self, cutoff=None):
        top = self.max_scale if cutoff is None else min(cutoff, self.max_scale)
        return range(1, top + 1)

    def members(self, cutoff=None):
        return [(self.shape(k), self.weight(k)) for k in self.scales(cutoff)]

    def spec_dict(self):
        return {"name": self.name, "params": {"max_scale": self.max_scale}}


_FAMILY_TYPES = {"square_loop": SquareLoopFamily}


def _shape_sort_key(shape: HyperEdgeShape):
    return (shape.size, shape.offsets)


@dataclass(frozen=True)
class IntensityMeasure:
    """Weighted hyper-edge shape classes plus parametric families."""

    dimension: int
    atoms: tuple = ()        # ((HyperEdgeShape, weight), ...) sorted canonically
    families: tuple = ()     # (SquareLoopFamily, ...)
    symmetry_closed: bool = False

    def __post_init__(self):
        seen = {}
        for shape, w in self.atoms:
            if shape.dimension != self.dimension:
                raise MeasureSpecError(
                    f"shape {shape.offsets} has dimension {shape.dimension}, "
                    f"measure has {self.dimension}"
                )
            if not (w > 0 and w < float("inf")):
                raise MeasureSpecError(f"weights must be positive and finite, got {w}")
            if shape in seen:
                raise MeasureSpecError(f"duplicate canonical shape {shape.offsets}")
            seen[shape] = w
        for fam in self.families:
            if fam.dimension != self.dimension:
                raise MeasureSpecError("family dimension mismatch")
        object.__setattr__(
            self, "atoms", tuple(sorted(self.atoms, key=lambda sw: _shape_sort_key(sw[0])))
        )

    def shape_weights(self, cutoff=None):
        """(shape, weight) pairs in canonical summation order.

        Atoms first in sorted order, then family members by ascending scale.
        Raises on a canonical shape that appears twice with different weights.
        """
        out = list(self.atoms)
        known = dict(self.atoms)
        for fam in self.families:
            for shape, w in fam.members(cutoff):
                if shape in known:
                    if known[shape] != w:
                        raise MeasureSpecError(
                            f"shape {shape.offsets} has conflicting weights "
                            f"{known[shape]} and {w}"
                        )
                    continue
                known[shape] = w
                out.append((shape, w))
        return out

    def spec_dict(self):
        return {
            "dimension": self.dimension,
            "atoms": [
                {"offsets": [list(o) for o in s.offsets], "weight": w} for s, w in self.atoms
            ],
            "families": [f.spec_dict() for f in self.families],
            "symmetry_closed": self.symmetry_closed,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; identifies the measure in outputs."""
        blob = json.dumps(self.spec_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def symmetry_closure(m: IntensityMeasure) -> IntensityMeasure:
    """Close the atom list under the 2^d d! point symmetries.

    Every orbit member receives the weight of its seed atom; two atoms whose
    orbits collide with different weights are an inconsistency and abort.
    Families are symmetric by construction and pass through unchanged.
    """
    group = LatticeSymmetry.group(m.dimension)
    closed = {}
    for shape, w in m.atoms:
        for phi in group:
            img = shape.transformed(phi)
            if img in closed and closed[img] != w:
                raise MeasureSpecError(
                    f"orbit of {shape.offsets} assigns conflicting weights "
                    f"{closed[img]} and {w} to {img.offsets}"
                )
            closed[img] = w
    atoms = tuple(sorted(closed.items(), key=lambda sw: _shape_sort_key(sw[0])))
    return IntensityMeasure(m.dimension, atoms, m.families, symmetry_closed=True)


def is_symmetry_closed(m: IntensityMeasure) -> bool:
    group = LatticeSymmetry.group(m.dimension)
    table = dict(m.atoms)
    for shape, w in m.atoms:
        for phi in group:
            if table.get(shape.transformed(phi)) != w:
                return False
    return True


def local_mass(m: IntensityMeasure, v, cutoff=None) -> float:
    """mu({h : v in h}): each offset of a shape contributes one anchor through v."""
    _check_vertex(v, m.dimension)
    total = 0.0
    for shape, w in m.shape_weights(cutoff):
        total += w * shape.size
    return total


def annulus_mass(m: IntensityMeasure, n: int, outer: int, cutoff=None) -> float:
    """Exact mu-mass of hyper-edges meeting both B(n) and the boundary of B(outer).

    Counts qualifying anchors per shape with integer box algebra; shapes whose
    sup-norm diameter is below outer - n cannot span the annulus and are
    skipped.
    """
    if not outer > n >= 1:
        raise ValueError(f"need outer > n >= 1, got n={n} outer={outer}")
    d = m.dimension
    total = 0.0
    for shape, w in m.shape_weights(cutoff):
        if shape.diameter() < outer - n:
            continue
        total += w * meets_both_count(shape.boxes(), n, outer, d)
    return total


def annulus_decay(m: IntensityMeasure, n: int, cutoff=None, cap: int = 4096):
    """Smallest g(n) > n with annulus_mass(n, g(n)) <= 1/n, searched up to cap.

    Returns None when no radius up to the cap works ("exceeds cap"). When
    every shape is unit-step connected the mass is nonincreasing in outer and
    a binary search applies; disconnected shapes can skip shells, so the
    search falls back to a linear scan (stopping once outer - n exceeds every
    shape diameter, beyond which the mass is identically zero).
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if cap <= n:
        raise ValueError(f"cap must exceed n, got cap={cap} n={n}")
    target = 1.0 / n
    pairs = m.shape_weights(cutoff)
    if all(shape.is_connected() for shape, _ in pairs):
        if annulus_mass(m, n, cap, cutoff) > target:
            return None
        lo, hi = n, cap  # invariant: lo fails (or is n), hi satisfies
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if annulus_mass(m, n, mid, cutoff) <= target:
                hi = mid
            else:
                lo = mid
        return hi
    max_diam = max((shape.diameter() for shape, _ in pairs), default=0)
    for outer in range(n + 1, cap + 1):
        if outer - n > max_diam:
            return outer  # all masses from here on are exactly zero
        if annulus_mass(m, n, outer, cutoff) <= target:
            return outer
    return None


HOLDS = "holds"
FAILS = "fails within R"
UNKNOWN = "unknown beyond R"


@dataclass(frozen=True)
class ValidationReport:
    dimension: int
    search_radius: int
    not_one_dimensional: str
    irreducible: str
    symmetry_closed: bool
    witness_vectors: tuple = None   # two linearly independent displacements, if found
    witness_radius: int = None      # smallest radius at which irreducibility held

    def ok(self) -> bool:
        return self.not_one_dimensional == HOLDS and self.irreducible == HOLDS

    def lines(self):
        yield f"dimension: {self.dimension}"
        yield f"search radius: {self.search_radius}"
        yield f"not essentially one-dimensional: {self.not_one_dimensional}"
        if self.witness_vectors:
            yield f"  witness displacements: {self.witness_vectors[0]} {self.witness_vectors[1]}"
        yield f"irreducible within radius: {self.irreducible}"
        if self.witness_radius is not None:
            yield f"  witness radius: {self.witness_radius}"
        yield f"symmetry closed: {self.symmetry_closed}"


def _lin_independent(x, y) -> bool:
    # rank-2 test via 2x2 minors; exact in ints
    d = len(x)
    for i in range(d):
        for j in range(i + 1, d):
            if x[i] * y[j] - x[j] * y[i] != 0:
                return True
    return False


def _irreducible_within(shapes, radius, d):
    """Union-find over B(radius): does 0 reach every +-e_j using contained instances?"""
    from itertools import product as _prod

    side = 2 * radius + 1
    n_vertices = side ** d

    def vid(v):
        out = 0
        for c in v:
            out = out * side + (c + radius)
        return out

    parent = list(range(n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for shape in shapes:
        lo, hi = shape.bounding_box()
        ranges = [range(-radius - lo[a], radius - hi[a] + 1) for a in range(d)]
        if any(len(r) == 0 for r in ranges):
            continue
        for anchor in _prod(*ranges):
            verts = [tuple(anchor[a] + o[a] for a in range(d)) for o in shape.offsets]
            r0 = find(vid(verts[0]))
            for v in verts[1:]:
                r1 = find(vid(v))
                if r1 != r0:
                    parent[r1] = r0
        # anchors enumerated exhaustively per shape
    origin = find(vid((0,) * d))
    for axis in range(d):
        for s in (1, -1):
            e = tuple(s if a == axis else 0 for a in range(d))
            if find(vid(e)) != origin:
                return False
    return True


def validate(m: IntensityMeasure, search_radius: int) -> ValidationReport:
    """Check the structural hypotheses on a bounded window.

    Verdicts never extrapolate to the infinite lattice: a failed existential
    search is reported as failed within R when the enumeration was exhaustive,
    and as unknown beyond R when family members past the cutoff were skipped.
    """
    if search_radius < 1:
        raise ValueError(f"search radius must be >= 1, got {search_radius}")
    d = m.dimension

    # family members need diameter <= 2R to ever fit inside B(R)
    fitting = []
    truncated_family = False
    for shape, w in m.atoms:
        fitting.append(shape)
    for fam in m.families:
        for k in fam.scales():
            shape = fam.shape(k)
            if shape.diameter() <= 2 * search_radius:
                fitting.append(shape)
            else:
                truncated_family = True

    witness = None
    displacements = []
    for shape in fitting:
        offs = shape.offsets
        for i in range(len(offs)):
            for j in range(len(offs)):
                if i != j:
                    displacements.append(
                        tuple(offs[j][a] - offs[i][a] for a in range(d))
                    )
    for i in range(len(displacements)):
        for j in range(i, len(displacements)):
            if _lin_independent(displacements[i], displacements[j]):
                witness = (displacements[i], displacements[j])
                break
        if witness:
            break
    if witness:
        one_dim = HOLDS
    elif truncated_family:
        one_dim = UNKNOWN
    else:
        one_dim = FAILS

    irreducible = FAILS
    witness_radius = None
    if fitting:
        for r in range(1, search_radius + 1):
            usable = [s for s in fitting if s.diameter() <= 2 * r]
            if usable and _irreducible_within(usable, r, d):
                irreducible = HOLDS
                witness_radius = r
                break

    return ValidationReport(
        dimension=d,
        search_radius=search_radius,
        not_one_dimensional=one_dim,
        irreducible=irreducible,
        symmetry_closed=is_symmetry_closed(m),
        witness_vectors=witness,
        witness_radius=witness_radius,
    )


# ---------------------------------------------------------------------------
# JSON specification files


def parse_measure_spec(spec: dict) -> IntensityMeasure:
    """Build a measure from its JSON dict form; see specs/ for examples."""
    try:
        d = int(spec["dimension"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MeasureSpecError(f"missing or invalid 'dimension': {exc}") from None
    if d < 2:
        raise MeasureSpecError(f"dimension must be >= 2, got {d}")
    atoms = []
    for entry in spec.get("atoms", []):
        try:
            offsets = [tuple(int(c) for c in o) for o in entry["offsets"]]
            weight = float(entry["weight"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MeasureSpecError(f"bad atom entry {entry}: {exc}") from None
        if any(len(o) != d for o in offsets):
            raise MeasureSpecError(f"atom offsets {offsets} do not match dimension {d}")
        atoms.append((canonicalize(offsets), weight))
    families = []
    for entry in spec.get("families", []):
        name = entry.get("name")
        if name not in _FAMILY_TYPES:
            raise MeasureSpecError(f"unknown family name {name!r}")
        params = entry.get("params", {})
        try:
            families.append(_FAMILY_TYPES[name](dimension=d, **params))
        except TypeError as exc:
            raise MeasureSpecError(f"bad params for family {name}: {exc}") from None
    m = IntensityMeasure(d, tuple(atoms), tuple(families), symmetry_closed=False)
    if spec.get("symmetry_closed", False):
        m = symmetry_closure(m)
    return m


def load_measure_spec(path) -> IntensityMeasure:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MeasureSpecError(f"cannot read measure spec {path}: {exc}") from None
    if not isinstance(spec, dict):
        raise MeasureSpecError(f"measure spec {path} must be a JSON object")
    return parse_measure_spec(spec)


def builtin_spec_path(name: str):
    """Path to one of the shipped measure spec files (nn2d, nn3d, ...)."""
    ref = resources.files("hyperperc") / "specs" / f"{name}.json"
    if not ref.is_file():
        raise MeasureSpecError(f"no builtin measure spec named {name!r}")
    return ref


def nearest_neighbor_measure(dimension: int, weight: float = 1.0) -> IntensityMeasure:
    """Unit edges in all axis directions; reduces to bond percolation."""
    edge = canonicalize([(0,) * dimension, (1,) + (0,) * (dimension - 1)])
    return symmetry_closure(IntensityMeasure(dimension, ((edge, weight),)))


def square_loop_measure(dimension: int = 2, max_scale: int = 10) -> IntensityMeasure:
    """The square-ring family alone; the annulus condition counterexample."""
    return IntensityMeasure(
        dimension, (), (SquareLoopFamily(dimension, max_scale),), symmetry_closed=True
    )
