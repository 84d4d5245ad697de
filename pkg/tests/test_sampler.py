import io
import math

import numpy as np
import pytest

from hyperperc.lattice import GeometryError
from hyperperc.measure import IntensityMeasure, canonicalize, nearest_neighbor_measure
from hyperperc.sampler import (
    CLIPPED,
    Window,
    WindowTooLarge,
    _philox,
    apply_slab,
    configuration_at,
    draw_arrivals,
    enumerate_candidates,
    level_for,
    write_configuration,
)

NN2 = nearest_neighbor_measure(2)
NN3 = nearest_neighbor_measure(3)


def test_contained_candidates_on_unit_box():
    cands = enumerate_candidates(NN2, Window.centered(1, 2))
    assert cands.n_candidates == 12


def test_empty_measure_no_candidates():
    cands = enumerate_candidates(IntensityMeasure(2), Window.centered(1, 2))
    assert cands.n_candidates == 0


def test_clipped_candidates_on_unit_box():
    cands = enumerate_candidates(NN2, Window.centered(1, 2, CLIPPED))
    assert cands.n_candidates == 24


def test_candidate_order_is_stable():
    a = enumerate_candidates(NN2, Window.centered(3, 2))
    b = enumerate_candidates(NN2, Window.centered(3, 2))
    for x, y in zip(a.anchors, b.anchors):
        assert (x == y).all()
    for s, t in zip(a.shapes, b.shapes):
        assert s == t


def test_window_refusal_is_explicit():
    with pytest.raises(WindowTooLarge):
        enumerate_candidates(NN2, Window.centered(100, 2), max_candidates=100)


def test_arrival_formula_matches_uniforms():
    # t = -ln(1 - U) / mu({h}) with U taken from the keyed Philox stream
    m = nearest_neighbor_measure(2, weight=2.0)
    w = Window.centered(2, 2)
    sample = draw_arrivals(m, w, seed=99, stream=5)
    u = _philox(99, 5).random(sample.candidates.n_candidates)
    assert np.array_equal(sample.times, -np.log1p(-u) / 2.0)


def test_half_uniform_gives_log_two():
    assert -math.log1p(-0.5) / 1.0 == pytest.approx(math.log(2.0), rel=0, abs=0)


def test_threshold_rule_exact():
    sample = draw_arrivals(NN2, Window.centered(2, 2), seed=4)
    t = sample.times[7]
    u_at = 1.0 - math.exp(-t)
    open_idx = configuration_at(sample, min(u_at * 1.000001, 1.0)).open_idx
    assert 7 in open_idx
    closed_idx = configuration_at(sample, u_at * 0.999999).open_idx
    assert 7 not in closed_idx


def test_u_zero_and_one():
    sample = draw_arrivals(NN2, Window.centered(3, 2), seed=1)
    assert configuration_at(sample, 0.0).n_open() == 0
    assert configuration_at(sample, 1.0).n_open() == sample.candidates.n_candidates


def test_monotone_coupling_nesting():
    sample = draw_arrivals(NN2, Window.centered(5, 2), seed=11)
    previous = set()
    for u in np.linspace(0.0, 1.0, 11):
        current = set(configuration_at(sample, float(u)).open_idx.tolist())
        assert previous <= current
        previous = current


def test_level_for_requires_unit_interval():
    with pytest.raises(ValueError):
        level_for(1.5)
    assert level_for(1.0) == math.inf
    assert level_for(0.0) == 0.0


def test_determinism_and_stream_separation():
    a = draw_arrivals(NN2, Window.centered(4, 2), seed=7, stream=3)
    b = draw_arrivals(NN2, Window.centered(4, 2), seed=7, stream=3)
    c = draw_arrivals(NN2, Window.centered(4, 2), seed=7, stream=4)
    assert np.array_equal(a.times, b.times)
    assert not np.array_equal(a.times, c.times)


def test_marginal_frequency_weight_two():
    # open frequency at u=0.3 with weight 2 concentrates on 1 - 0.7^2 = 0.51
    m = nearest_neighbor_measure(2, weight=2.0)
    w = Window.centered(20, 2)
    u = 0.3
    p = 1.0 - (1.0 - u) ** 2.0
    opens = total = 0
    for r in range(32):
        sample = draw_arrivals(m, w, seed=2024, stream=r)
        opens += configuration_at(sample, u).n_open()
        total += sample.candidates.n_candidates
    assert total >= 100_000
    sigma = math.sqrt(p * (1 - p) / total)
    assert abs(opens / total - p) < 3 * sigma


def test_fixed_pattern_probability_factorizes():
    # probability of one fixed open/closed pattern = product of marginals
    edge = canonicalize([(0, 0), (1, 0)])
    m = IntensityMeasure(2, ((edge, 1.0),))
    w = Window.centered(1, 2)
    k = enumerate_candidates(m, w).n_candidates
    assert k == 6
    u = 0.5
    target = frozenset({0, 2, 5})
    expected = u ** 3 * (1 - u) ** 3
    n = 40_000
    hits = 0
    for r in range(n):
        sample = draw_arrivals(m, w, seed=828, stream=r)
        if frozenset(configuration_at(sample, u).open_idx.tolist()) == target:
            hits += 1
    sigma = math.sqrt(expected * (1 - expected) / n)
    assert abs(hits / n - expected) < 3 * sigma


def test_pairwise_independence():
    m = NN2
    w = Window.centered(1, 2)
    u = 0.4
    n = 40_000
    both = first = second = 0
    for r in range(n):
        sample = draw_arrivals(m, w, seed=5150, stream=r)
        open_set = set(configuration_at(sample, u).open_idx.tolist())
        a, b = 0 in open_set, 5 in open_set
        first += a
        second += b
        both += a and b
    p = u
    sigma = math.sqrt(p * p * (1 - p * p) / n)
    assert abs(both / n - (first / n) * (second / n)) < 3 * sigma + 3 / n
    assert abs(both / n - p * p) < 3 * sigma


def test_apply_slab_drops_zero_plane():
    m = NN3
    window = Window((0, 0, 0), (3, 3, 3))
    sample = draw_arrivals(m, window, seed=2)
    config = configuration_at(sample, 1.0)
    sliced = apply_slab(config, 2)
    for inst in sliced.open_instances():
        for v in inst.vertices():
            assert v[0] >= 0 and v[1] >= 0 and 1 <= v[2] <= 2
    # instances with a vertex at third coordinate 0 are gone for every L
    for L in (1, 2, 4, 16):
        out = apply_slab(config, L)
        assert all(v[2] >= 1 for inst in out.open_instances() for v in inst.vertices())


def test_apply_slab_nesting_and_saturation():
    window = Window.slab(16, 4, 8, 3)
    sample = draw_arrivals(NN3, window, seed=77)
    config = configuration_at(sample, 0.4)
    previous = set()
    for L in (1, 2, 4, 8):
        current = set(apply_slab(config, L).open_idx.tolist())
        assert previous <= current
        previous = current
    # thickness not binding beyond the window extent
    saturated = set(apply_slab(config, 8).open_idx.tolist())
    assert set(apply_slab(config, 50).open_idx.tolist()) == saturated
    assert saturated == set(config.open_idx.tolist())


def test_apply_slab_rejects_dimension_two():
    sample = draw_arrivals(NN2, Window.centered(2, 2), seed=3)
    with pytest.raises(GeometryError):
        apply_slab(configuration_at(sample, 0.5), 2)


def test_window_slab_requires_d3():
    with pytest.raises(GeometryError):
        Window.slab(8, 2, 1, 2)


def test_configuration_serialization_deterministic():
    sample = draw_arrivals(NN2, Window.centered(2, 2), seed=8)
    config = configuration_at(sample, 0.6)
    out1, out2 = io.StringIO(), io.StringIO()
    write_configuration(config, out1)
    write_configuration(configuration_at(draw_arrivals(NN2, Window.centered(2, 2), seed=8), 0.6), out2)
    assert out1.getvalue() == out2.getvalue()
    body = [l for l in out1.getvalue().splitlines() if not l.startswith("#")]
    assert len(body) == config.n_open()
    header = [l for l in out1.getvalue().splitlines() if l.startswith("#")]
    assert any("seed" in l for l in header) and any("shape 0" in l for l in header)


def test_exact_pattern_enumeration_oracle():
    # 12-candidate window: Monte Carlo P(x <-> y) vs exhaustive enumeration
    from hyperperc import clusters
    from oracles import exact_connection_probability

    w = Window.centered(1, 2)
    cands = enumerate_candidates(NN2, w)
    instance_lists = []
    for i in range(cands.n_candidates):
        inst = cands.instance(i)
        instance_lists.append([w.vertex_index(v) for v in inst.vertices()])
    u = 0.35
    x, y = w.vertex_index((0, 0)), w.vertex_index((1, 1))
    exact = exact_connection_probability(
        instance_lists, [u] * cands.n_candidates, w.volume(), x, y)
    n = 30_000
    hits = 0
    for r in range(n):
        sample = draw_arrivals(NN2, w, seed=31337, stream=r)
        lab = clusters.build(configuration_at(sample, u))
        hits += clusters.connected(lab, (0, 0), (1, 1))
    sigma = math.sqrt(exact * (1 - exact) / n)
    assert abs(hits / n - exact) < 3 * sigma
