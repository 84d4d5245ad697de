import math

import numpy as np
import pytest

from hyperperc.experiments import (
    BracketError,
    GateError,
    SweepPlan,
    bracket_uc,
    corner_cut_witness,
    crossing_curve,
    detect_seeds,
    loop_corners,
    loop_vertices,
    pack_stream,
    slab_experiment,
    square_loop_experiment,
    uniqueness_census,
    wilson_interval,
)
from hyperperc.measure import IntensityMeasure, canonicalize, nearest_neighbor_measure
from hyperperc.sampler import Window, configuration_at, draw_arrivals

NN2 = nearest_neighbor_measure(2)
NN3 = nearest_neighbor_measure(3)


def plan(measure, windows, replicates, seed=2024, **kw):
    return SweepPlan(measure=measure, windows=tuple(windows),
                     replicates=replicates, base_seed=seed, **kw)


def test_wilson_interval_known_value():
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(0.2365930, abs=1e-6)
    assert hi == pytest.approx(0.7634070, abs=1e-6)
    # interval always contains the point estimate
    for k, n in [(0, 10), (10, 10), (3, 7), (599, 600)]:
        lo, hi = wilson_interval(k, n)
        assert lo <= k / n <= hi


def test_pack_stream_disjoint():
    seen = {pack_stream(e, w, p, r)
            for e in (0, 1) for w in (0, 3) for p in (0, 2) for r in (0, 5)}
    assert len(seen) == 16
    with pytest.raises(ValueError):
        pack_stream(1, 0, 0, 2 ** 28)


def test_crossing_curve_extremes_and_determinism():
    p = plan(NN2, [8], 25, u_values=(0.0, 0.5, 1.0))
    records, rows = crossing_curve(p)
    by_u = {r.params["u"]: r for r in records if r.quantity == "crossing_axis0"}
    assert by_u[0.0].estimate == 0.0
    assert by_u[1.0].estimate == 1.0
    records2, rows2 = crossing_curve(p)
    assert records == records2 and rows == rows2


def test_crossing_curve_monotone_in_u_exactly():
    p = plan(NN2, [12], 40, u_values=tuple(np.linspace(0.1, 0.9, 9).round(2)))
    records, _ = crossing_curve(p)
    ests = [r.estimate for r in records if r.quantity == "crossing_axis0"]
    assert ests == sorted(ests)


def test_crossing_probability_near_half_at_criticality():
    # self-dual point of the bond reduction: crossing close to 1/2
    p = plan(NN2, [64], 2000, u_values=(0.5,))
    records, _ = crossing_curve(p)
    est = next(r.estimate for r in records if r.quantity == "crossing_axis0")
    assert abs(est - 0.5) < 0.05


def test_crossing_axes_agree_for_symmetric_measure():
    # x- and y-crossing estimates must agree within overlapping intervals
    p = plan(NN2, [32], 300, u_values=(0.5,))
    _, rows = crossing_curve(p)
    x = sum(r["cross_axis0"] for r in rows)
    y = sum(r["cross_axis1"] for r in rows)
    lo_x, hi_x = wilson_interval(x, len(rows))
    lo_y, hi_y = wilson_interval(y, len(rows))
    assert lo_x <= hi_y and lo_y <= hi_x


def test_gate_refuses_one_dimensional_measure():
    edge = canonicalize([(0, 0), (1, 0)])
    m = IntensityMeasure(2, ((edge, 1.0),))
    with pytest.raises(GateError):
        crossing_curve(plan(m, [8], 5, u_values=(0.5,)))
    # force overrides the gate
    records, _ = crossing_curve(plan(m, [8], 5, u_values=(0.5,)), force=True)
    assert records


def test_bracket_uc_small_window():
    p = plan(NN2, [16, 24], 120, bracket=(0.3, 0.7, 0.05))
    result = bracket_uc(p)
    assert result.u_high - result.u_low <= 0.05
    assert 0.3 < result.u_low < result.u_high < 0.7
    assert set(result.per_window) == {16, 24}
    # probes are exactly monotone: same replicate streams at every u
    probes = sorted(
        ((r.params["u"], r.estimate) for r in result.probes if r.params["window"] == 24))
    ests = [e for _, e in probes]
    assert ests == sorted(ests)


def test_bracket_uc_requires_straddle():
    with pytest.raises(BracketError):
        bracket_uc(plan(NN2, [12], 40, bracket=(0.8, 0.95, 0.02)))
    with pytest.raises(ValueError):
        bracket_uc(plan(NN2, [12], 40))


def test_uniqueness_census_extremes():
    p = plan(NN2, [12], 30)
    zero = uniqueness_census(p, 0.0, 0.05)
    assert zero.distributions[12] == {0: 30}
    one = uniqueness_census(p, 1.0, 0.05)
    assert one.distributions[12] == {1: 30}
    assert one.fraction_one[0].estimate == 1.0


def test_slab_requires_three_dimensions():
    with pytest.raises(GateError):
        slab_experiment(plan(NN2, [8], 5), 0.3, (1, 2))


def test_slab_monotone_and_saturating():
    p = plan(NN3, [8], 40)
    result = slab_experiment(p, 0.35, (1, 2, 4))
    assert result.monotone_violations == 0
    ests = [r.estimate for r in result.records]
    assert ests == sorted(ests)
    assert result.window == (32, 8)
    # L at the sampling thickness equals the untruncated crossing
    window = Window.slab(32, 8, 4, 3)
    from hyperperc import clusters

    hits_direct = 0
    for r in range(p.replicates):
        sample = draw_arrivals(NN3, window, p.base_seed, pack_stream(4, 0, 0, r))
        lab = clusters.build(configuration_at(sample, 0.35))
        hits_direct += clusters.axis_crossings(lab)[0]
    assert result.records[-1].estimate == hits_direct / p.replicates


def test_slab_zero_u():
    result = slab_experiment(plan(NN3, [6], 10), 0.0, (1, 2))
    assert all(r.estimate == 0.0 for r in result.records)


def test_square_loop_geometry():
    # chain-scale counts and ring sizes
    assert len(loop_corners(1)) == 1
    assert len(loop_corners(3)) == 16
    ring = loop_vertices((0, 0), 1)
    assert ring.size == 4 * 2 ** 3  # perimeter of a side-8 square
    # adjacency of consecutive scales holds exhaustively for small n
    result = square_loop_experiment(0.5, 4, replicates=50, seed=3)
    assert result.adjacency_checked == (1, 2, 3)
    assert result.adjacency_ok


def test_square_loop_probabilities():
    result = square_loop_experiment(0.5, 4, replicates=40_000, seed=5)
    for rec in result.records:
        closed = rec.params["closed_form"]
        sigma = math.sqrt(closed * (1 - closed) / rec.n)
        assert abs(rec.estimate - closed) < 3.5 * sigma
    # scale-3 closed form: exponent (n+1) 2^(-2(n+1)) 4^(n-1) = 1/4
    rec3 = result.records[2]
    assert rec3.params["closed_form"] == pytest.approx(1 - 0.5 ** 0.25)


def test_square_loop_u_zero_and_budget():
    result = square_loop_experiment(0.0, 3, replicates=50, seed=1)
    assert all(r.estimate == 0.0 for r in result.records)
    assert result.longest_chain_max == 0
    with pytest.raises(ValueError):
        square_loop_experiment(0.5, 14, replicates=100_000, seed=1)


def test_square_loop_determinism():
    a = square_loop_experiment(0.25, 5, replicates=500, seed=9)
    b = square_loop_experiment(0.25, 5, replicates=500, seed=9)
    assert [r.estimate for r in a.records] == [r.estimate for r in b.records]


def test_corner_cut_witness_nearest_neighbor():
    assert corner_cut_witness(NN2, 2) == 1


def test_corner_cut_witness_none_for_diagonal_measure():
    # diagonal edges preserve vertex parity: the box never fully connects
    diag = canonicalize([(0, 0), (1, 1)])
    from hyperperc.measure import symmetry_closure

    m = symmetry_closure(IntensityMeasure(2, ((diag, 1.0),)))
    assert corner_cut_witness(m, 2) is None


def test_detect_seeds_extremes():
    w = Window.centered(7, 2)
    sample = draw_arrivals(NN2, w, seed=8)
    everything = configuration_at(sample, 1.0)
    scan = detect_seeds(everything, NN2, 1, 1)
    assert scan.instances_per_box == 12
    assert len(scan.centers) == len(scan.scanned) > 0
    nothing = configuration_at(sample, 0.0)
    scan0 = detect_seeds(nothing, NN2, 1, 1)
    assert not scan0.centers


def test_detect_seeds_refuses_oversized_boxes():
    from hyperperc.sampler import WindowTooLarge

    w = Window.centered(5, 2)
    sample = draw_arrivals(NN2, w, seed=8)
    config = configuration_at(sample, 1.0)
    with pytest.raises(WindowTooLarge):
        detect_seeds(config, NN2, 2, 1, max_instances_per_box=3)


def test_detect_seeds_density():
    u = 0.9
    expected = u ** 12
    hits = boxes = 0
    for r in range(40):
        sample = draw_arrivals(NN2, Window.centered(16, 2), seed=555, stream=r)
        scan = detect_seeds(configuration_at(sample, u), NN2, 1, 1)
        hits += len(scan.centers)
        boxes += len(scan.scanned)
    sigma = math.sqrt(expected * (1 - expected) / boxes)
    assert abs(hits / boxes - expected) < 3 * sigma


def test_detect_seeds_octant_union():
    w = Window((0, -20), (40, 20))
    sample = draw_arrivals(NN2, w, seed=4)
    config = configuration_at(sample, 1.0)
    scan = detect_seeds(config, NN2, 1, 1, octant_n=9)
    assert scan.centers, "u=1 must seed every octant placement"
    assert all(c[0] == 10 for c in scan.centers)
    assert scan.octant_union
    for v in scan.octant_union:
        assert 9 <= v[0] <= 11


def test_workers_do_not_change_results():
    p1 = plan(NN2, [10], 30, u_values=(0.4, 0.6))
    p2 = plan(NN2, [10], 30, u_values=(0.4, 0.6), workers=2)
    r1, rows1 = crossing_curve(p1)
    r2, rows2 = crossing_curve(p2)
    assert r1 == r2 and rows1 == rows2
