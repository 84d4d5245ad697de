"""Multi-partition combinatorics: compatibility and exhaustive bound checking.

A multi-partition splits a finite ground set into at least three blocks. Two
multi-partitions are compatible when one block of each together cover the
whole ground set; equivalently some block of the first contains the union of
all but one block of the second. A compatible family of distinct
multi-partitions of Y can never exceed |Y| - 2 members, which verify_lemma
confirms exhaustively for small ground sets.

The containment characterization of compatibility can be read strictly or
inclusively; the inclusive reading is the default here and both readings are
exposed (they are verified to satisfy the bound at all checked sizes).
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

MAX_GROUND_SIZE = 7  # combinatorial explosion guard for verify_lemma


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class MultiPartition:
    ground: frozenset
    blocks: frozenset  # frozenset of frozensets

    def __post_init__(self):
        blocks = frozenset(frozenset(b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "ground", frozenset(self.ground))
        if len(blocks) < 3:
            raise PartitionError(f"a multi-partition needs >= 3 blocks, got {len(blocks)}")
        if any(not b for b in blocks):
            raise PartitionError("empty block")
        total = 0
        union = set()
        for b in blocks:
            total += len(b)
            union |= b
        if union != self.ground or total != len(self.ground):
            raise PartitionError("blocks must be disjoint and cover the ground set")

    @staticmethod
    def of(blocks) -> "MultiPartition":
        blocks = [frozenset(b) for b in blocks]
        ground = frozenset().union(*blocks) if blocks else frozenset()
        return MultiPartition(ground, frozenset(blocks))


def is_compatible(p1: MultiPartition, p2: MultiPartition, strict: bool = False) -> bool:
    """Some block of p1 and some block of p2 union to the whole ground set.

    strict=True demands proper containment: the p1 block must strictly contain
    the complement of the p2 block (blocks that exactly complement one another
    no longer qualify).
    """
    if p1.ground != p2.ground:
        raise PartitionError("multi-partitions live on different ground sets")
    Y = p1.ground
    for a in p1.blocks:
        for b in p2.blocks:
            if a | b == Y:
                if strict and a == Y - b:
                    continue
                return True
    return False


def is_compatible_family(ps, strict: bool = False) -> bool:
    """All partitions distinct and pairwise compatible."""
    ps = list(ps)
    if len(set(ps)) != len(ps):
        return False
    for i in range(len(ps)):
        for j in range(i + 1, len(ps)):
            if not is_compatible(ps[i], ps[j], strict):
                return False
    return True


def _set_partitions(items):
    if len(items) == 1:
        yield (frozenset(items),)
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i, block in enumerate(part):
            yield part[:i] + (block | {first},) + part[i + 1:]
        yield part + (frozenset([first]),)


def all_multipartitions(ground) -> list:
    """Every partition of the ground set with at least three blocks."""
    items = sorted(ground)
    if len(items) < 3:
        return []
    out = []
    for part in _set_partitions(items):
        if len(part) >= 3:
            out.append(MultiPartition(frozenset(items), frozenset(part)))
    return out


@dataclass(frozen=True)
class LemmaSizeResult:
    ground_size: int
    n_multipartitions: int
    max_family_size: int
    bound: int

    @property
    def ok(self) -> bool:
        return self.max_family_size <= self.bound


@dataclass(frozen=True)
class LemmaReport:
    max_ground_size: int
    strict: bool
    per_size: tuple

    @property
    def counterexamples(self) -> int:
        return sum(1 for r in self.per_size if not r.ok)

    def lines(self):
        reading = "strict" if self.strict else "inclusive"
        yield f"compatibility reading: {reading} containment"
        for r in self.per_size:
            status = "ok" if r.ok else "COUNTEREXAMPLE"
            yield (
                f"|Y|={r.ground_size}: {r.n_multipartitions} multi-partitions, "
                f"max compatible family {r.max_family_size} <= {r.bound}: {status}"
            )
        yield (
            "no counterexample" if self.counterexamples == 0
            else f"{self.counterexamples} counterexamples"
        )

    def text(self):
        return "\n".join(self.lines()) + "\n"


def verify_lemma(max_ground_size: int, strict: bool = False) -> LemmaReport:
    """Exhaustively check max compatible family size <= |Y| - 2 for |Y| <= k.

    Families are cliques of the pairwise-compatibility graph over all
    multi-partitions; the maximum is taken over all maximal cliques.
    """
    if not 3 <= max_ground_size <= MAX_GROUND_SIZE:
        raise PartitionError(
            f"ground size must lie in [3, {MAX_GROUND_SIZE}], got {max_ground_size}"
        )
    per_size = []
    for n in range(3, max_ground_size + 1):
        mps = all_multipartitions(range(n))
        graph = nx.Graph()
        graph.add_nodes_from(range(len(mps)))
        for i in range(len(mps)):
            for j in range(i + 1, len(mps)):
                if is_compatible(mps[i], mps[j], strict):
                    graph.add_edge(i, j)
        best = 1 if mps else 0
        for clique in nx.find_cliques(graph):
            if len(clique) > best:
                best = len(clique)
        per_size.append(
            LemmaSizeResult(
                ground_size=n,
                n_multipartitions=len(mps),
                max_family_size=best,
                bound=n - 2,
            )
        )
    return LemmaReport(max_ground_size=max_ground_size, strict=strict, per_size=tuple(per_size))
