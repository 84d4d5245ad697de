import json

import numpy as np
import pytest

from hyperperc.measure import (
    FAILS,
    HOLDS,
    UNKNOWN,
    IntensityMeasure,
    MeasureSpecError,
    SquareLoopFamily,
    annulus_decay,
    annulus_mass,
    builtin_spec_path,
    canonicalize,
    is_symmetry_closed,
    load_measure_spec,
    local_mass,
    nearest_neighbor_measure,
    parse_measure_spec,
    square_loop_measure,
    symmetry_closure,
    validate,
)
from oracles import brute_annulus_count, brute_local_anchor_count


def atom_measure(*entries, d=2, closed=False):
    atoms = tuple((canonicalize(offs), w) for offs, w in entries)
    m = IntensityMeasure(d, atoms)
    return symmetry_closure(m) if closed else m


# ---------------------------------------------------------------------------
# canonical shapes


def test_canonicalize_shifts_to_origin():
    s = canonicalize([(3, 3), (4, 3)])
    assert s.offsets == ((0, 0), (1, 0))


def test_canonicalize_fixed_point():
    s = canonicalize([(0, 0), (1, 0)])
    assert canonicalize(s.offsets).offsets == s.offsets


def test_canonicalize_rejects_singleton():
    with pytest.raises(MeasureSpecError):
        canonicalize([(5, 5)])
    with pytest.raises(MeasureSpecError):
        canonicalize([])


def test_canonicalize_negative_later_axes():
    s = canonicalize([(0, 0), (1, -5)])
    assert s.offsets[0] == (0, 0)
    lo, hi = s.bounding_box()
    assert lo == (0, -5) and hi == (1, 0)


# ---------------------------------------------------------------------------
# symmetry closure


def test_closure_of_unit_edge():
    m = atom_measure(([(0, 0), (1, 0)], 1.0), closed=True)
    assert len(m.atoms) == 2
    assert all(w == 1.0 for _, w in m.atoms)
    assert m.symmetry_closed and is_symmetry_closed(m)


def test_closure_idempotent():
    m = atom_measure(([(0, 0), (2, 1)], 1.0), closed=True)
    again = symmetry_closure(m)
    assert again.atoms == m.atoms


def test_closure_orbit_of_knight_offset():
    m = atom_measure(([(0, 0), (2, 1)], 1.0), closed=True)
    assert len(m.atoms) == 4


def test_closure_conflicting_weights_abort():
    m = atom_measure(([(0, 0), (1, 0)], 1.0), ([(0, 0), (0, 1)], 2.0))
    with pytest.raises(MeasureSpecError):
        symmetry_closure(m)


def test_not_closed_flag():
    m = atom_measure(([(0, 0), (1, 0)], 1.0))
    assert not is_symmetry_closed(m)


# ---------------------------------------------------------------------------
# local mass


def test_local_mass_nearest_neighbor():
    m = nearest_neighbor_measure(2)
    assert local_mass(m, (0, 0)) == 4.0


def test_local_mass_empty_measure():
    assert local_mass(IntensityMeasure(2), (0, 0)) == 0.0


def test_local_mass_square_loops_cutoff_3():
    m = square_loop_measure(max_scale=10)
    assert local_mass(m, (8, 0), cutoff=3) == 11.0


def test_local_mass_matches_anchor_oracle():
    m = atom_measure(([(0, 0), (2, 1)], 0.5), closed=True)
    total = sum(
        w * brute_local_anchor_count(s.offsets, (3, -2), 2) for s, w in m.atoms
    )
    assert local_mass(m, (3, -2)) == total


def test_local_mass_translation_invariant():
    m = nearest_neighbor_measure(2, weight=1.5)
    rng = np.random.default_rng(3)
    for _ in range(10):
        v = tuple(int(x) for x in rng.integers(-50, 50, size=2))
        assert local_mass(m, v) == local_mass(m, (0, 0))


# ---------------------------------------------------------------------------
# annulus mass


def test_annulus_mass_nn_examples():
    m = nearest_neighbor_measure(2)
    assert annulus_mass(m, 2, 5) == 0.0
    assert annulus_mass(m, 2, 3) == 20.0


def test_annulus_mass_matches_brute_force():
    m = atom_measure(([(0, 0), (1, 0), (1, 1), (0, 1)], 0.5), closed=True)
    for n, outer in ((1, 2), (2, 3), (2, 4)):
        expected = sum(
            w * brute_annulus_count(s.offsets, n, outer, 2) for s, w in m.atoms
        )
        assert annulus_mass(m, n, outer) == expected


def test_annulus_mass_translation_invariant_via_oracle():
    # oracle evaluated around a shifted center equals the origin-based value
    m = nearest_neighbor_measure(2)
    for center in [(0, 0), (7, -3), (-11, 5)]:
        count = sum(
            w * brute_annulus_count(s.offsets, 2, 3, 2, center=center)
            for s, w in m.atoms
        )
        assert count == annulus_mass(m, 2, 3)


def test_annulus_mass_monotone_grids():
    m = atom_measure(([(0, 0), (1, 0), (2, 0), (2, 1)], 1.0), closed=True)
    for n in (1, 2, 3):
        masses = [annulus_mass(m, n, outer) for outer in range(n + 1, n + 6)]
        assert masses == sorted(masses, reverse=True)
    for outer_gap in (1, 2):
        masses = [annulus_mass(m, n, n + outer_gap) for n in (1, 2, 3, 4)]
        assert masses == sorted(masses)


def test_annulus_mass_nn_zero_iff_gap_two():
    # unit edges have diameter 1: the mass vanishes exactly when outer - n >= 2
    m = nearest_neighbor_measure(2)
    for n in range(2, 7):
        assert annulus_mass(m, n, n + 1) > 0.0
        for outer in range(n + 2, n + 5):
            assert annulus_mass(m, n, outer) == 0.0


def test_annulus_mass_square_loop_growth():
    m = square_loop_measure(max_scale=12)
    masses = [annulus_mass(m, n, 2 * n) for n in (4, 8, 16)]
    assert masses[0] > 0
    assert masses == sorted(masses)


def test_annulus_decay_nn():
    m = nearest_neighbor_measure(2)
    assert annulus_decay(m, 3) == 5


def test_annulus_decay_bounded_by_shape_diameter():
    m = atom_measure(([(0, 0), (10, 0)], 0.01), closed=True)
    g = annulus_decay(m, 1)
    assert g is not None and g <= 12


def test_annulus_decay_square_loop_exceeds_cap():
    m = square_loop_measure(max_scale=12)
    assert annulus_decay(m, 4, cutoff=9, cap=128) is None


def test_shape_connectivity_flag():
    assert canonicalize([(0, 0), (1, 0), (1, 1)]).is_connected()
    assert not canonicalize([(0, 0), (3, 0), (7, 0)]).is_connected()
    assert canonicalize([(0, 0), (1, 1)]).is_connected() is False


def test_annulus_mass_not_monotone_for_disconnected_shapes():
    # a gapped shape reaches distant shells without covering nearer ones
    gapped = canonicalize([(0, 0), (3, 0), (7, 0)])
    m = IntensityMeasure(2, ((gapped, 1.0),))
    masses = [annulus_mass(m, 1, outer) for outer in range(2, 9)]
    assert masses == [6.0, 12.0, 12.0, 6.0, 6.0, 6.0, 6.0]
    assert masses != sorted(masses, reverse=True)


def test_annulus_decay_disconnected_matches_linear_oracle():
    gapped = canonicalize([(0, 0), (3, 0), (7, 0)])
    m = IntensityMeasure(2, ((gapped, 1.0),))
    target = 1.0
    smallest = next(
        outer for outer in range(2, 64)
        if brute_annulus_count(gapped.offsets, 1, outer, 2) * 1.0 <= target
    )
    assert annulus_decay(m, 1, cap=64) == smallest


# ---------------------------------------------------------------------------
# validation


def test_validate_nearest_neighbor():
    report = validate(nearest_neighbor_measure(2), 2)
    assert report.not_one_dimensional == HOLDS
    assert report.irreducible == HOLDS
    assert report.symmetry_closed
    assert report.witness_radius == 1
    assert report.ok()


def test_validate_single_orientation_fails():
    m = atom_measure(([(0, 0), (1, 0)], 1.0))
    report = validate(m, 3)
    assert report.not_one_dimensional == FAILS
    assert report.irreducible == FAILS
    assert not report.symmetry_closed


def test_validate_empty_measure():
    report = validate(IntensityMeasure(2), 2)
    assert report.not_one_dimensional == FAILS
    assert report.irreducible == FAILS


def test_validate_family_truncation_is_unknown():
    # only scales beyond the search radius: verdict must not extrapolate
    m = IntensityMeasure(2, (), (SquareLoopFamily(2, 6),), symmetry_closed=True)
    report = validate(m, 1)
    assert report.not_one_dimensional == UNKNOWN


def test_validate_square_loops():
    m = square_loop_measure(max_scale=6)
    report = validate(m, 4)
    assert report.not_one_dimensional == HOLDS
    assert report.irreducible == HOLDS


# ---------------------------------------------------------------------------
# spec files


def test_builtin_specs_load():
    for name, dim in [("nn2d", 2), ("nn2d_w2", 2), ("nn3d", 3),
                      ("square_loop2d", 2), ("plaquette2d", 2)]:
        m = load_measure_spec(builtin_spec_path(name))
        assert m.dimension == dim


def test_nn3d_closure_has_three_orientations():
    m = load_measure_spec(builtin_spec_path("nn3d"))
    assert len(m.atoms) == 3


def test_unknown_family_rejected():
    with pytest.raises(MeasureSpecError):
        parse_measure_spec(
            {"dimension": 2, "atoms": [], "families": [{"name": "hexagon"}]})


def test_malformed_specs_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(MeasureSpecError):
        load_measure_spec(bad)
    with pytest.raises(MeasureSpecError):
        parse_measure_spec({"atoms": []})
    with pytest.raises(MeasureSpecError):
        parse_measure_spec(
            {"dimension": 2, "atoms": [{"offsets": [[0, 0]], "weight": 1.0}]})
    with pytest.raises(MeasureSpecError):
        parse_measure_spec(
            {"dimension": 2,
             "atoms": [{"offsets": [[0, 0], [1, 0]], "weight": -2.0}]})


def test_duplicate_atoms_rejected():
    edge = canonicalize([(0, 0), (1, 0)])
    with pytest.raises(MeasureSpecError):
        IntensityMeasure(2, ((edge, 1.0), (edge, 2.0)))


def test_digest_is_canonical(tmp_path):
    m1 = load_measure_spec(builtin_spec_path("nn2d"))
    spec = m1.spec_dict()
    path = tmp_path / "roundtrip.json"
    path.write_text(json.dumps(spec))
    m2 = load_measure_spec(path)
    assert m1.digest() == m2.digest()
    m3 = load_measure_spec(builtin_spec_path("nn2d_w2"))
    assert m1.digest() != m3.digest()


def test_weight_two_affects_nothing_structural():
    m = nearest_neighbor_measure(2, weight=2.0)
    assert local_mass(m, (0, 0)) == 8.0
