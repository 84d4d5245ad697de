"""Monte Carlo experiment suite: crossing curves, threshold bracketing,
giant-cluster census, slab percolation, square-loop events, seed scans.

Replicates are independent tasks keyed by (base seed, packed stream id); the
aggregation is an ordered merge, so results are identical for any worker
count. Estimates carry Wilson 95% intervals.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from itertools import product

import numpy as np

from . import clusters
from .lattice import ModifiedBox, modified_box_vertices
from .measure import HOLDS, IntensityMeasure, validate
from .sampler import (
    CONTAINED,
    Configuration,
    Window,
    _philox,
    apply_slab,
    configuration_at,
    draw_arrivals,
    enumerate_candidates,
)

Z95 = 1.959963984540054


class GateError(RuntimeError):
    """A structural precondition of the experiment failed."""


class BracketError(RuntimeError):
    """Threshold bracketing could not produce a bracket; message explains why."""


def wilson_interval(successes: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need n >= 1")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    # rounding at the extremes must not push the point estimate outside
    return min(phat, max(0.0, center - half)), max(phat, min(1.0, center + half))


@dataclass(frozen=True)
class EstimateRecord:
    quantity: str
    estimate: float
    lo: float
    hi: float
    n: int
    params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @staticmethod
    def from_counts(quantity, successes, n, params=None, provenance=None):
        lo, hi = wilson_interval(successes, n)
        return EstimateRecord(
            quantity=quantity,
            estimate=successes / n,
            lo=lo,
            hi=hi,
            n=n,
            params=params or {},
            provenance=provenance or {},
        )


@dataclass(frozen=True)
class SweepPlan:
    """Shared experiment inputs.

    Window sizes are box radii W//2 around the origin (side W+1 for even W);
    slab windows are 4W x W x L with the long axis first.
    """

    measure: IntensityMeasure
    windows: tuple
    replicates: int
    base_seed: int
    u_values: tuple = ()
    bracket: tuple = None        # (u_lo, u_hi, target_width)
    slab_thicknesses: tuple = ()
    boundary_mode: str = CONTAINED
    size_fraction: float = clusters.DEFAULT_GIANT_FRACTION
    workers: int = 1
    gate_radius: int = 3

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if any(not 0.0 <= u <= 1.0 for u in self.u_values):
            raise ValueError(f"u values must lie in [0, 1]: {self.u_values}")
        if list(self.windows) != sorted(self.windows):
            raise ValueError("window sizes must be increasing")

    def centered_window(self, size: int) -> Window:
        return Window.centered(size // 2, self.measure.dimension, self.boundary_mode)

    def slab_window(self, size: int, max_thickness: int) -> Window:
        return Window.slab(4 * size, size, max_thickness,
                           self.measure.dimension, self.boundary_mode)


# experiment ids for stream packing
_EXP_SAMPLE = 0
_EXP_CROSSING = 1
_EXP_UC = 2
_EXP_UNIQUENESS = 3
_EXP_SLAB = 4
_EXP_SEEDS = 5
_EXP_LOOP = 6


def pack_stream(exp_id: int, window_idx: int, probe_idx: int, replicate: int) -> int:
    """Deterministic 64-bit stream id; replicates < 2^28, probes < 2^20."""
    if not (0 <= replicate < 2 ** 28 and 0 <= probe_idx < 2 ** 20 and 0 <= window_idx < 2 ** 8):
        raise ValueError("stream component out of range")
    return (exp_id << 56) | (window_idx << 48) | (probe_idx << 28) | replicate


def _replicate_stats(args, replicate: int):
    """Cluster statistics of one replicate at every u (and slab thickness)."""
    (measure, window, seed, exp_id, window_idx, probe_idx,
     u_values, thicknesses, size_fraction) = args
    stream = pack_stream(exp_id, window_idx, probe_idx, replicate)
    sample = draw_arrivals(measure, window, seed, stream)
    rows = []
    for u in u_values:
        config = configuration_at(sample, u)
        if not thicknesses:
            lab = clusters.build(config)
            rows.append(clusters.stats_row(lab, replicate, u, None, size_fraction))
        else:
            for L in thicknesses:
                lab = clusters.build(apply_slab(config, L))
                rows.append(clusters.stats_row(lab, replicate, u, L, size_fraction))
    return rows


def _run_replicates(args, n: int, workers: int):
    """Ordered per-replicate rows; byte-identical for any worker count."""
    fn = partial(_replicate_stats, args)
    if workers <= 1:
        nested = map(fn, range(n))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(fn, range(n), chunksize=max(1, min(64, n // workers + 1))))
    return [row for rows in nested for row in rows]


def check_gates(measure: IntensityMeasure, radius: int, force: bool = False):
    """Refuse structurally unsuitable measures unless forced."""
    report = validate(measure, radius)
    if force:
        return report
    if report.not_one_dimensional != HOLDS:
        raise GateError(
            "measure is not verifiably multi-dimensional within radius "
            f"{radius} ({report.not_one_dimensional}); phase-transition "
            "experiments refuse it (use force to override)"
        )
    if report.irreducible != HOLDS:
        raise GateError(
            f"measure is not irreducible within radius {radius}; "
            "experiments refuse it (use force to override)"
        )
    return report


# ---------------------------------------------------------------------------
# crossing curves and threshold bracketing


def crossing_curve(plan: SweepPlan, force: bool = False):
    """P[first-axis crossing] and P[0 <-> boundary] per (u, window size).

    Returns (records, per-replicate rows). Crossing indicators evaluated at
    all u on one coupled sample per replicate, so the curve is exactly
    monotone in u.
    """
    check_gates(plan.measure, plan.gate_radius, force)
    u_values = tuple(plan.u_values)
    records, all_rows = [], []
    for w_idx, size in enumerate(plan.windows):
        window = plan.centered_window(size)
        args = (plan.measure, window, plan.base_seed, _EXP_CROSSING, w_idx, 0,
                u_values, (), plan.size_fraction)
        rows = _run_replicates(args, plan.replicates, plan.workers)
        for row in rows:
            row["window"] = size
        all_rows.extend(rows)
        prov = {"seed": plan.base_seed, "measure": plan.measure.digest()}
        for u in u_values:
            sub = [r for r in rows if r["u"] == u]
            cross = sum(r["cross_axis0"] for r in sub)
            origin = sum(r["origin_to_boundary"] or 0 for r in sub)
            records.append(EstimateRecord.from_counts(
                "crossing_axis0", cross, len(sub), {"u": u, "window": size}, prov))
            records.append(EstimateRecord.from_counts(
                "origin_to_boundary", origin, len(sub), {"u": u, "window": size}, prov))
    return records, all_rows


def _crossing_probability(plan: SweepPlan, window: Window, w_idx: int, u: float):
    args = (plan.measure, window, plan.base_seed, _EXP_UC, w_idx, 0,
            (u,), (), plan.size_fraction)
    rows = _run_replicates(args, plan.replicates, plan.workers)
    return sum(r["cross_axis0"] for r in rows), rows


@dataclass(frozen=True)
class BracketResult:
    u_low: float
    u_high: float
    window: int
    per_window: dict            # size -> (u_low, u_high)
    drift: float                # largest-window midpoint minus smallest-window midpoint
    probes: tuple               # EstimateRecord per probe
    rows: tuple = ()


def bracket_uc(plan: SweepPlan, force: bool = False) -> BracketResult:
    """Bisect u until P[crossing] straddles 1/2 within the target width.

    Probes at different u reuse the same replicate streams, so estimates are
    exactly nondecreasing in u; failure to straddle 1/2 at the bracket
    endpoints is reported as a diagnostic error, not a bracket.
    """
    check_gates(plan.measure, plan.gate_radius, force)
    if plan.bracket is None:
        raise ValueError("plan.bracket = (u_lo, u_hi, width) is required")
    u_lo0, u_hi0, width = plan.bracket
    if not (0.0 <= u_lo0 < u_hi0 <= 1.0) or width <= 0:
        raise ValueError(f"bad bracket specification {plan.bracket}")

    probes = []
    per_window = {}
    rows_all = []
    prov = {"seed": plan.base_seed, "measure": plan.measure.digest()}

    for w_idx, size in enumerate(plan.windows):
        window = plan.centered_window(size)
        cache = {}

        def prob(u, w_idx=w_idx, window=window, cache=cache, size=size):
            if u not in cache:
                successes, rows = _crossing_probability(plan, window, w_idx, u)
                rows_all.extend({**r, "window": size} for r in rows)
                probes.append(EstimateRecord.from_counts(
                    "crossing_axis0", successes, plan.replicates,
                    {"u": u, "window": size}, prov))
                cache[u] = successes / plan.replicates
            return cache[u]

        lo, hi = u_lo0, u_hi0
        p_lo, p_hi = prob(lo), prob(hi)
        if p_lo >= 0.5 or p_hi <= 0.5:
            raise BracketError(
                f"crossing probability does not straddle 1/2 on [{lo}, {hi}] "
                f"at window {size}: P({lo})={p_lo:.3f}, P({hi})={p_hi:.3f}"
            )
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            if prob(mid) > 0.5:
                hi = mid
            else:
                lo = mid
        per_window[size] = (lo, hi)

    smallest = plan.windows[0]
    largest = plan.windows[-1]
    drift = (sum(per_window[largest]) - sum(per_window[smallest])) / 2.0
    u_low, u_high = per_window[largest]
    return BracketResult(
        u_low=u_low,
        u_high=u_high,
        window=largest,
        per_window=per_window,
        drift=drift,
        probes=tuple(probes),
        rows=tuple(rows_all),
    )


# ---------------------------------------------------------------------------
# uniqueness census


@dataclass(frozen=True)
class CensusResult:
    u: float
    size_fraction: float
    distributions: dict          # window size -> {giant count: occurrences}
    fraction_one: tuple          # EstimateRecord per window size
    rows: tuple


def uniqueness_census(plan: SweepPlan, u: float, size_fraction: float,
                      force: bool = False) -> CensusResult:
    """Distribution of the giant-cluster count over replicates and windows."""
    check_gates(plan.measure, plan.gate_radius, force)
    distributions = {}
    frac_records = []
    rows_all = []
    prov = {"seed": plan.base_seed, "measure": plan.measure.digest()}
    for w_idx, size in enumerate(plan.windows):
        window = plan.centered_window(size)
        args = (plan.measure, window, plan.base_seed, _EXP_UNIQUENESS, w_idx, 0,
                (u,), (), size_fraction)
        rows = _run_replicates(args, plan.replicates, plan.workers)
        for row in rows:
            row["window"] = size
        rows_all.extend(rows)
        dist = {}
        for r in rows:
            dist[r["giant_count"]] = dist.get(r["giant_count"], 0) + 1
        distributions[size] = dict(sorted(dist.items()))
        ones = dist.get(1, 0)
        frac_records.append(EstimateRecord.from_counts(
            "giant_fraction_one", ones, plan.replicates,
            {"u": u, "window": size, "theta": size_fraction}, prov))
    return CensusResult(
        u=u,
        size_fraction=size_fraction,
        distributions=distributions,
        fraction_one=tuple(frac_records),
        rows=tuple(rows_all),
    )


# ---------------------------------------------------------------------------
# slab percolation


@dataclass(frozen=True)
class SlabResult:
    u: float
    window: tuple                # (long, wide) extents
    thicknesses: tuple
    records: tuple               # EstimateRecord per thickness
    monotone_violations: int     # exact per-replicate check; 0 by the coupling
    crossing_l90: int            # smallest L with estimate >= 0.9, or None
    rows: tuple


def slab_experiment(plan: SweepPlan, u: float, thicknesses, force: bool = False) -> SlabResult:
    """Long-axis crossing of an elongated window under slab truncation.

    One coupled sample per replicate is truncated at every thickness, so the
    per-replicate crossing indicator is nondecreasing in L exactly. No
    convergence rate in L is claimed; the smallest L reaching estimate 0.9 is
    reported as a plain observation.
    """
    if plan.measure.dimension < 3:
        raise GateError("slab percolation is undefined in dimension 2")
    check_gates(plan.measure, plan.gate_radius, force)
    thicknesses = tuple(sorted(thicknesses))
    if not thicknesses:
        raise ValueError("need at least one slab thickness")
    size = plan.windows[-1]
    window = plan.slab_window(size, thicknesses[-1])
    args = (plan.measure, window, plan.base_seed, _EXP_SLAB, 0, 0,
            (u,), thicknesses, plan.size_fraction)
    rows = _run_replicates(args, plan.replicates, plan.workers)

    violations = 0
    for r in range(plan.replicates):
        flags = [row["cross_axis0"] for row in rows if row["replicate"] == r]
        if any(a > b for a, b in zip(flags, flags[1:])):
            violations += 1

    prov = {"seed": plan.base_seed, "measure": plan.measure.digest()}
    records = []
    l90 = None
    for L in thicknesses:
        hits = sum(row["cross_axis0"] for row in rows if row["L"] == L)
        rec = EstimateRecord.from_counts(
            "slab_crossing", hits, plan.replicates,
            {"u": u, "window": size, "L": L}, prov)
        records.append(rec)
        if l90 is None and rec.estimate >= 0.9:
            l90 = L
    return SlabResult(
        u=u,
        window=(4 * size, size),
        thicknesses=thicknesses,
        records=tuple(records),
        monotone_violations=violations,
        crossing_l90=l90,
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# square-loop counterexample


def loop_vertices(corner, scale: int) -> np.ndarray:
    """Packed coordinates of the square ring with the given bottom-left corner.

    Rings at chain scale n are translates of the radius 2^(n+1) square loop:
    the boundary of a box of side 2 * 2^(n+1).
    """
    extent = 2 ** (scale + 2)
    x0, y0 = corner
    xs = np.arange(x0, x0 + extent + 1, dtype=np.int64)
    ys = np.arange(y0 + 1, y0 + extent, dtype=np.int64)
    pts = [
        np.stack([xs, np.full_like(xs, y0)], axis=1),
        np.stack([xs, np.full_like(xs, y0 + extent)], axis=1),
        np.stack([np.full_like(ys, x0), ys], axis=1),
        np.stack([np.full_like(ys, x0 + extent), ys], axis=1),
    ]
    pts = np.concatenate(pts)
    packed = pts[:, 0] * (2 ** 32) + pts[:, 1]
    return np.sort(packed)


def loop_corners(scale: int) -> list:
    lo, hi = 2 ** (scale - 1) + 1, 2 ** scale
    return [(x, y) for x in range(lo, hi + 1) for y in range(lo, hi + 1)]


@dataclass(frozen=True)
class SquareLoopResult:
    u: float
    records: tuple               # EstimateRecord per scale, closed form in params
    adjacency_checked: tuple     # scales n with H_n vs H_{n+1} verified
    adjacency_ok: bool
    longest_chain_max: int
    longest_chain_mean: float


def square_loop_experiment(u: float, n_max: int, replicates: int, seed: int,
                           adjacency_max: int = 4,
                           max_draws: int = 2 ** 31) -> SquareLoopResult:
    """Empirical per-scale probability that some loop of the chain-scale set opens.

    Scale n holds 4^(n-1) loops, each a translate of the radius 2^(n+1) ring,
    open independently with probability 1 - (1-u)^((n+1) 2^(-2(n+1))). The
    event of each scale is sampled directly from per-loop draws instead of
    materializing a lattice window; the exact closed form rides along in the
    record parameters. Also verifies exhaustively that consecutive-scale
    loops always intersect, and reports the longest run of consecutive open
    scales per replicate.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    total_draws = replicates * sum(4 ** (n - 1) for n in range(1, n_max + 1))
    if total_draws > max_draws:
        raise ValueError(
            f"per-loop sampling needs {total_draws} draws, over the {max_draws} budget; "
            "lower n_max or the replicate count"
        )

    events = np.zeros((replicates, n_max), dtype=bool)
    batch = 2048
    for n in range(1, n_max + 1):
        m = 4 ** (n - 1)
        weight = (n + 1) * 2.0 ** (-2 * (n + 1))
        q = 1.0 - (1.0 - u) ** weight
        for b, start in enumerate(range(0, replicates, batch)):
            stop = min(start + batch, replicates)
            gen = _philox(seed, pack_stream(_EXP_LOOP, n, b, 0))
            draws = gen.random((stop - start, m))
            events[start:stop, n - 1] = (draws < q).any(axis=1)

    records = []
    for n in range(1, n_max + 1):
        exponent = (n + 1) * 2.0 ** (-2 * (n + 1)) * 4 ** (n - 1)
        closed = 1.0 - (1.0 - u) ** exponent
        hits = int(events[:, n - 1].sum())
        records.append(EstimateRecord.from_counts(
            "square_loop_event", hits, replicates,
            {"u": u, "n": n, "closed_form": closed, "loops": 4 ** (n - 1)},
            {"seed": seed}))

    checked = []
    adjacency_ok = True
    for n in range(1, min(adjacency_max, n_max - 1 if n_max > 1 else 0) + 1):
        rings_a = [loop_vertices(c, n) for c in loop_corners(n)]
        rings_b = [loop_vertices(c, n + 1) for c in loop_corners(n + 1)]
        for ra in rings_a:
            for rb in rings_b:
                if np.intersect1d(ra, rb, assume_unique=True).size == 0:
                    adjacency_ok = False
        checked.append(n)

    runs = np.zeros(replicates, dtype=np.int64)
    best = np.zeros(replicates, dtype=np.int64)
    for n in range(n_max):
        runs = np.where(events[:, n], runs + 1, 0)
        best = np.maximum(best, runs)
    return SquareLoopResult(
        u=u,
        records=tuple(records),
        adjacency_checked=tuple(checked),
        adjacency_ok=adjacency_ok,
        longest_chain_max=int(best.max()) if replicates else 0,
        longest_chain_mean=float(best.mean()) if replicates else 0.0,
    )


# ---------------------------------------------------------------------------
# seed events


@dataclass(frozen=True)
class SeedScan:
    box_radius: int
    corner_cut: int
    centers: tuple               # seed centers found
    scanned: tuple               # all scanned centers
    instances_per_box: int
    octant_n: int = None
    octant_union: tuple = ()     # union of seed modified boxes within T(m, n)

    def density(self) -> float:
        return len(self.centers) / len(self.scanned) if self.scanned else 0.0


def corner_cut_witness(measure: IntensityMeasure, box_radius: int):
    """Smallest corner cut c such that opening every positive-weight instance
    inside B(m) connects all vertices of the modified box B(0, m, c).

    Returns None when even the largest cut fails; the witness is not claimed
    minimal over other box radii.
    """
    window = Window.centered(box_radius, measure.dimension, CONTAINED)
    cands = enumerate_candidates(measure, window)
    # all instances open: run the cluster builder on a synthetic configuration
    fake = Configuration(
        sample=_AllOpen(cands),
        u=1.0,
        open_idx=np.arange(cands.n_candidates, dtype=np.int64),
    )
    lab = clusters.build(fake, window)
    for cut in range(1, box_radius + 1):
        mb = ModifiedBox((0,) * measure.dimension, box_radius, cut)
        idx = [window.vertex_index(v) for v in modified_box_vertices(mb)]
        if np.unique(lab.roots[idx]).size == 1:
            return cut
    return None


class _AllOpen:
    """Stand-in sample whose candidates are all open (u = 1 diagnostics)."""

    def __init__(self, candidates):
        self.candidates = candidates
        self.times = np.zeros(candidates.n_candidates)
        self.seed = 0
        self.stream = 0
        self.measure_digest = ""


def detect_seeds(config: Configuration, measure: IntensityMeasure, box_radius: int,
                 corner_cut: int, octant_n: int = None,
                 max_instances_per_box: int = 200_000) -> SeedScan:
    """Scan disjoint boxes for seeds: boxes whose contained positive-weight
    instances are all open.

    The scan grid has stride 2m+1 so seed indicators on distinct boxes are
    independent. With octant_n set, only placements tiling the thickened
    octant face T(m, n) are scanned and the union of their modified boxes is
    returned. Boxes whose candidate enumeration would exceed the cap are
    refused outright; subsampling would change the event.
    """
    window = config.window
    d = window.dimension
    m = box_radius
    if not 1 <= corner_cut <= m:
        raise ValueError(f"need 1 <= corner cut <= box radius, got {corner_cut}, {m}")

    if octant_n is None:
        axes = []
        for a in range(d):
            lo = window.lo[a] + m
            hi = window.hi[a] - m
            axes.append(range(lo, hi + 1, 2 * m + 1))
        centers = [c for c in product(*axes)]
    else:
        n = octant_n
        if n < 2 * m + 1:
            raise ValueError("octant face requires n > 2m")
        axes = [range(n + m, n + m + 1)]
        for a in range(1, d):
            axes.append(range(m, n - m + 1, 2 * m + 1))
        centers = [
            c for c in product(*axes)
            if all(window.lo[a] + m <= c[a] <= window.hi[a] - m for a in range(d))
        ]

    # instances contained in one scan box, as offsets from the box center
    probe = Window.centered(m, d, CONTAINED)
    cands = enumerate_candidates(measure, probe, max_candidates=max_instances_per_box)
    if cands.n_candidates == 0:
        raise GateError(f"measure has no positive-weight instance inside B({m})")

    open_set = set()
    open_cands = config.sample.candidates
    starts = open_cands.block_starts
    for idx in config.open_idx:
        b = int(np.searchsorted(starts, idx, side="right") - 1)
        anchor = tuple(int(x) for x in open_cands.anchors[b][idx - starts[b]])
        open_set.add((open_cands.shapes[b].offsets, anchor))

    template = []
    for b, shape in enumerate(cands.shapes):
        for anchor in cands.anchors[b]:
            template.append((shape.offsets, tuple(int(x) for x in anchor)))

    seeds = []
    for center in centers:
        ok = True
        for offsets, anchor in template:
            shifted = tuple(a + c for a, c in zip(anchor, center))
            if (offsets, shifted) not in open_set:
                ok = False
                break
        if ok:
            seeds.append(center)

    octant_union = ()
    if octant_n is not None and seeds:
        union = set()
        for center in seeds:
            union.update(modified_box_vertices(ModifiedBox(center, m, corner_cut)))
        octant_union = tuple(sorted(union))

    return SeedScan(
        box_radius=m,
        corner_cut=corner_cut,
        centers=tuple(seeds),
        scanned=tuple(centers),
        instances_per_box=cands.n_candidates,
        octant_n=octant_n,
        octant_union=octant_union,
    )
