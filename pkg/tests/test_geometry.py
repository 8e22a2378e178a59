import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phcavity.geometry import (SQRT3, CoupledDefects, FourHoleTuning, FractionalEdgeDislocation, GeometryError,
                               IndexChange, PhotonicCrystalSpec, RadiusChange, air_fill_fraction, apply_defect,
                               build_lattice, build_structure, check_overlaps, format_hole_list, parse_hole_list,
                               plan_domain, rasterize)


def host(a=20, r=0.275, d=0.75, layers=5):
    return PhotonicCrystalSpec(a, r, d, num_layers=layers)


def _near(holes, x, y):
    return min(holes.holes, key=lambda h: math.hypot(h.site[0] - x, h.site[1] - y))


@pytest.mark.parametrize("field,value", [("a", 9), ("r_over_a", 0.0), ("r_over_a", 0.5), ("d_over_a", 0.0),
                                         ("n_slab", 1.0), ("num_layers", 0)])
def test_spec_invariants(field, value):
    kw = dict(a=20, r_over_a=0.275, d_over_a=0.75)
    kw[field] = value
    with pytest.raises(GeometryError):
        PhotonicCrystalSpec(**kw)


def test_one_layer_has_six_neighbours():
    hs = build_lattice(host(layers=1))
    assert len(hs) == 7
    c = hs.center_hole
    assert c is not None and (c.x, c.y) == (0.0, 0.0)
    d = sorted(math.hypot(h.x, h.y) for h in hs if not h.is_center)
    assert np.allclose(d, 20.0)


@pytest.mark.parametrize("layers", [1, 2, 3, 5])
def test_ring_count(layers):
    assert len(build_lattice(host(layers=layers))) == 1 + 3 * layers * (layers + 1)


def test_five_layer_host():
    hs = build_lattice(host())
    assert len(hs) == 91
    assert all(h.r == pytest.approx(5.5) for h in hs)
    rows = sorted({round(h.y, 6) for h in hs})
    assert np.allclose(np.diff(rows), 20 * SQRT3 / 2)


def test_interior_holes_have_six_neighbours():
    hs = build_lattice(host(layers=3))
    c = hs.centers()
    d = np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1))
    interior = np.hypot(c[:, 0], c[:, 1]) < 2 * 20
    counts = (np.abs(d - 20) < 0.5).sum(1)
    assert np.all(counts[interior] == 6)


def test_extent_limit():
    with pytest.raises(GeometryError):
        build_lattice(host(a=200, layers=20), max_cells=1000)


def test_radius_change():
    hs = build_structure(host(), [RadiusChange(0.2)])
    assert hs.center_hole.r == pytest.approx(4.0)
    assert sorted(h.r for h in hs if not h.is_center) == [5.5] * 90


def test_radius_change_validation_names_invariant():
    with pytest.raises(GeometryError, match="r_def_over_a"):
        build_structure(host(), [RadiusChange(0.3)])


def test_index_change_validation():
    with pytest.raises(GeometryError, match="n_defect"):
        build_structure(host(), [IndexChange(3.6)])
    hs = build_structure(host(), [IndexChange(2.4)])
    assert hs.center_hole.index == 2.4


def test_zero_dislocation_is_identity():
    base = build_lattice(host())
    assert apply_defect(base, FractionalEdgeDislocation("x", 0)) == base


def test_degenerate_defects_are_identity():
    base = build_lattice(host())
    assert apply_defect(base, RadiusChange(0.275)) == base
    assert apply_defect(base, FourHoleTuning(0.275, 0.275)) == base


def test_dislocation_p2():
    base = build_lattice(host())
    hs = apply_defect(base, FractionalEdgeDislocation("x", 2))
    h = _near(hs, 10.0, 20 * SQRT3 / 2)
    assert h.y == pytest.approx(20 * SQRT3 / 2 + 1)
    assert h.x == pytest.approx(10.0)
    for h in hs:
        if h.site[1] == 0:
            assert h.semi_axes == pytest.approx((5.5, 6.5))
            assert h.y == 0
        else:
            assert h.semi_axes == pytest.approx((5.5, 5.5))


@given(p=st.integers(min_value=0, max_value=6))
@settings(max_examples=7, deadline=None)
def test_dislocation_preserves_half_space_distances(p):
    base = build_lattice(host(layers=3))
    hs = apply_defect(base, FractionalEdgeDislocation("x", p))

    def dists(holes, sign):
        c = np.array([(h.x, h.y) for h in holes if np.sign(h.site[1]) == sign])
        d = np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1))
        return Counter(np.round(d[np.triu_indices(len(c), 1)], 6))

    for sign in (1, -1):
        assert dists(hs, sign) == dists(base, sign)


def test_dislocation_along_y():
    hs = apply_defect(build_lattice(host()), FractionalEdgeDislocation("y", 2))
    for h in hs:
        if h.site[0] == 0:
            assert h.ex == pytest.approx(1.0)
        elif h.site[0] > 0:
            assert h.x == pytest.approx(h.site[0] + 1)


def test_four_hole_tuning():
    spec = host()
    hs = build_structure(spec, [FourHoleTuning(0.2, 0.225)])
    r, r1 = spec.radius, 0.225 * 20
    assert hs.center_hole.r == pytest.approx(4.0)
    tuned = [h for h in hs if abs(h.r - r1) < 1e-9]
    assert len(tuned) == 4
    for h in tuned:
        ux, uy = h.site[0] / 20, h.site[1] / 20
        assert h.x == pytest.approx(h.site[0] + (r - r1) * ux)
        assert h.y == pytest.approx(h.site[1] + (r - r1) * uy)
        nxt = _near(hs, 2 * h.site[0], 2 * h.site[1])
        # edge-to-edge distance to the next hole along the same direction is unchanged
        gap = math.hypot(nxt.x - h.x, nxt.y - h.y) - nxt.r - h.r
        assert gap == pytest.approx(20 - 2 * r)
    # the x-axis neighbours stay untouched
    assert _near(hs, 20, 0).r == pytest.approx(r)


def test_coupled_defects_x():
    hs = build_structure(host(), [CoupledDefects("x", 0.2, 2)])
    small = sorted((h.site for h in hs if abs(h.r - 4.0) < 1e-9))
    assert small == [(-20.0, 0.0), (20.0, 0.0)]
    assert hs.center_hole.r == pytest.approx(5.5)
    for h in hs:
        if abs(abs(h.site[0]) - 20) < 1e-9:
            assert h.ex == pytest.approx(1.0)


def test_coupled_defects_y():
    hs = build_structure(host(), [CoupledDefects("y", 0.2, 2)])
    assert hs.site == "pair"
    small = sorted((round(h.site[0], 6), round(h.site[1], 6)) for h in hs if abs(h.r - 4.0) < 1e-9)
    assert small == [(0.0, round(-10 * SQRT3, 6)), (0.0, round(10 * SQRT3, 6))]
    assert {(h.site[0], h.site[1]) for h in hs if abs(h.y) < 1e-9 and abs(h.x) < 11} == {(-10.0, 0.0), (10.0, 0.0)}
    with pytest.raises(GeometryError):
        apply_defect(build_lattice(host()), CoupledDefects("y", 0.2, 0))


def test_overlap_detection():
    hs = build_lattice(host(r=0.45, layers=2))
    check_overlaps(hs)
    with pytest.raises(GeometryError, match="overlap"):
        check_overlaps(hs.replace([h.__class__(h.x * 0.8, h.y * 0.8, h.r) for h in hs]))


def test_hole_list_roundtrip():
    hs = build_structure(host(), [RadiusChange(0.2), FractionalEdgeDislocation("x", 2)])
    back = parse_hole_list(format_hole_list(hs), 20)
    assert len(back) == len(hs)
    for h, g in zip(hs, back):
        assert g.semi_axes == pytest.approx(h.semi_axes, abs=1e-6)
        assert (g.x, g.y) == pytest.approx((h.x, h.y), abs=1e-6)


@pytest.fixture(scope="module")
def host_grid():
    spec = host(layers=5)
    hs = build_lattice(spec)
    return rasterize(hs, spec, layout=plan_domain(hs, spec, mirrors=(False, False, False)))


def test_grid_values_and_z_symmetry(host_grid):
    eps = host_grid.eps
    assert eps.min() >= 1.0 and eps.max() <= 3.4 ** 2 + 1e-12
    cz = host_grid.center[2]
    n = min(cz, eps.shape[2] - 1 - cz)
    assert np.array_equal(eps[:, :, cz - n:cz], eps[:, :, cz + n:cz:-1])


def test_air_fill_fraction(host_grid):
    # a 4a x 2*sqrt(3)a window holds a whole number of unit cells
    f = air_fill_fraction(host_grid, 2 * 20, SQRT3 * 20)
    analytic = 2 * math.pi / SQRT3 * 0.275 ** 2
    assert f == pytest.approx(analytic, rel=0.02)


def test_unpatterned_slab_profile():
    spec = PhotonicCrystalSpec(20, 0.275, 0.7)
    hs = build_lattice(spec).replace([])
    g = rasterize(hs, spec, layout=plan_domain(build_lattice(spec), spec, mirrors=(False, False, True)))
    col = g.eps[3, 3, :]
    assert np.all(g.eps == col[None, None, :])
    assert np.allclose(col[:7], 3.4 ** 2) and np.allclose(col[8:], 1.0)
    assert col[7] == pytest.approx(0.5 * (3.4 ** 2 + 1))


def test_rasterize_deterministic():
    spec = host(a=12, layers=2)
    hs = build_structure(spec, [RadiusChange(0.2), FractionalEdgeDislocation("x", 1)])
    g1 = rasterize(hs, spec)
    g2 = rasterize(hs, spec)
    assert np.array_equal(g1.eps, g2.eps)


def test_mirrored_grid_matches_full_grid():
    spec = host(a=12, layers=2)
    hs = build_structure(spec, [RadiusChange(0.2)])
    full = rasterize(hs, spec, layout=plan_domain(hs, spec, mirrors=(False, False, False)))
    quarter = rasterize(hs, spec, layout=plan_domain(hs, spec, mirrors=(True, True, True)))
    cx, cy, cz = full.center
    nx, ny, nz = quarter.shape
    assert np.allclose(full.eps[cx:cx + nx, cy:cy + ny, cz:cz + nz], quarter.eps)
