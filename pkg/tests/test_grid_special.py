import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandlab import (
    LatticeFunction,
    PreconditionError,
    ball_capacities,
    check_preservation_lemma,
    grid_sandpile,
    support_sandwich,
    symmetry_flags,
)

import oracles


# -- lattice functions ------------------------------------------------------


def test_zero_values_are_dropped():
    f = LatticeFunction(center=(0, 0), support={(1, 0): 0, (0, 1): 2})
    assert f.support == {(0, 1): 2}
    assert f.value((1, 0)) == 0
    assert f.value((0, 1)) == 2


def test_negative_values_rejected():
    with pytest.raises(PreconditionError, match="negative value"):
        LatticeFunction(center=(0, 0), support={(0, 0): -1})


def test_relative_recenters():
    f = LatticeFunction(center=(2, 3), support={(2, 3): 5, (3, 3): 1})
    assert f.relative() == {(0, 0): 5, (1, 0): 1}


def test_from_grid_and_json():
    g = grid_sandpile(3)
    f = LatticeFunction.from_grid(g, [0, 0, 0, 0, 7, 0, 0, 0, 1], g.vertex_at(1, 1))
    assert f.center == (1, 1)
    assert f.value((1, 1)) == 7
    data = f.to_json()
    assert data["center"] == [1, 1]
    assert data["support"] == {"1,1": 7, "2,2": 1}


# -- symmetry predicates ----------------------------------------------------


def test_point_mass_is_symmetric():
    f = LatticeFunction(center=(0, 0), support={(0, 0): 5})
    assert symmetry_flags(f) == (True, True)
    assert support_sandwich(f) == (0, True)


def test_off_center_mass_is_not():
    f = LatticeFunction(center=(0, 0), support={(1, 0): 1})
    d4, _ = symmetry_flags(f)
    assert not d4


def test_diamond_indicator():
    pts = {(x, y): 1 for x in range(-2, 3) for y in range(-2, 3)
           if abs(x) + abs(y) <= 2}
    f = LatticeFunction(center=(0, 0), support=pts)
    assert symmetry_flags(f) == (True, True)
    assert support_sandwich(f) == (2, True)


def test_square_indicator():
    pts = {(x, y): 1 for x in range(-2, 3) for y in range(-2, 3)}
    f = LatticeFunction(center=(0, 0), support=pts)
    assert symmetry_flags(f) == (True, True)
    assert support_sandwich(f) == (2, True)


def test_hollow_ring_breaks_monotonicity():
    # the shape a small center drop leaves behind: ones around an empty middle
    ring = {p: 1 for p in [(1, 0), (-1, 0), (0, 1), (0, -1)]}
    f = LatticeFunction(center=(0, 0), support=ring)
    d4, axis = symmetry_flags(f)
    assert d4 and not axis
    with pytest.raises(PreconditionError, match="not symmetric and axis-monotone"):
        support_sandwich(f)


def _d4_orbit_support(levels):
    out = {}
    for (x, y), val in levels.items():
        for tx, ty in {(x, y), (-x, y), (x, -y), (-x, -y),
                       (y, x), (-y, x), (y, -x), (-y, -x)}:
            out[(tx, ty)] = val
    return out


def test_diagonal_step_rule_detects_drop():
    # perpendicular steps all pass; only the diagonal comparison fails
    support = _d4_orbit_support({(0, 0): 2, (0, 1): 2, (0, 2): 2, (1, 1): 1})
    f = LatticeFunction(center=(0, 0), support=support)
    d4, axis = symmetry_flags(f)
    assert d4 and not axis

    fixed = _d4_orbit_support({(0, 0): 2, (0, 1): 2, (0, 2): 2, (1, 1): 2})
    g = LatticeFunction(center=(0, 0), support=fixed)
    assert symmetry_flags(g) == (True, True)
    assert support_sandwich(g) == (2, True)


@settings(max_examples=50, deadline=None)
@given(
    levels=st.dictionaries(
        st.tuples(st.integers(0, 3), st.integers(0, 3)),
        st.integers(1, 5),
        min_size=1,
        max_size=6,
    )
)
def test_orbit_closure_is_always_d4(levels):
    f = LatticeFunction(center=(0, 0), support=_d4_orbit_support(levels))
    d4, _ = symmetry_flags(f)
    assert d4


# -- capacities -------------------------------------------------------------


def test_capacity_small_values():
    assert ball_capacities(0) == (3, 3)
    assert ball_capacities(1) == (27, 15)
    assert ball_capacities(2) == (75, 39)


def test_capacity_matches_enumeration():
    for n in range(65):
        square, diamond = ball_capacities(n)
        assert square == 3 * oracles.square_site_count(n)
        assert diamond == 3 * oracles.diamond_site_count(n)


def test_capacity_guards():
    with pytest.raises(PreconditionError):
        ball_capacities(-1)


# -- center drops -----------------------------------------------------------


def test_preservation_flags_matrix():
    # toppling counts keep both symmetries; the final configuration keeps
    # the dihedral one but loses monotonicity once rings form
    cases = {
        (11, 10): (True, True),
        (11, 100): (True, False),
        (5, 3): (True, True),
        (5, 4): (True, False),
    }
    for (n, particles), final_flags in cases.items():
        chk = check_preservation_lemma(n, particles)
        assert chk.holds
        assert (chk.toppling_d4, chk.toppling_axis) == (True, True)
        assert (chk.final_d4, chk.final_axis) == final_flags


def test_preservation_large_drop():
    chk = check_preservation_lemma(31, 2000)
    assert chk.holds
    assert (chk.final_d4, chk.final_axis) == (True, False)
    r, ok = support_sandwich(chk.toppling)
    assert (r, ok) == (15, True)
    with pytest.raises(PreconditionError, match="not symmetric"):
        support_sandwich(chk.final)


def test_preservation_no_topplings():
    chk = check_preservation_lemma(5, 3)
    assert chk.toppling.support == {}
    assert support_sandwich(chk.toppling) == (0, True)
    assert chk.final.support == {(2, 2): 3}


def test_preservation_single_site_grid():
    chk = check_preservation_lemma(1, 4)
    assert chk.holds
    assert chk.toppling.support == {(0, 0): 1}
    assert chk.final.support == {}


def test_preservation_guards():
    with pytest.raises(PreconditionError, match="center undefined"):
        check_preservation_lemma(10, 5)
    with pytest.raises(PreconditionError, match="positive"):
        check_preservation_lemma(0, 5)
    with pytest.raises(PreconditionError, match="nonnegative"):
        check_preservation_lemma(5, -1)


def test_toppling_support_grows_with_particles():
    small = check_preservation_lemma(11, 50)
    large = check_preservation_lemma(11, 500)
    assert set(small.toppling.support) <= set(large.toppling.support)
    for p, val in small.toppling.support.items():
        assert large.toppling.value(p) >= val
