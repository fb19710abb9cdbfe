from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonsmooth_atlas import bcnf
from nonsmooth_atlas.bcnf import (
    AttractorKind,
    BcnfParams,
    BoundaryKind,
    ClassifyOptions,
    attractor_samples,
    bcnf_orbit_diagram,
    bcnf_step,
    boundary_residual,
    classify_attractor,
    region_boundary,
    scan_plane,
    special_points,
)
from nonsmooth_atlas.errors import DegenerateDenominator, NoBracket, Undecided

reals = st.floats(-10.0, 10.0, allow_nan=False)
FAST = ClassifyOptions(transient=3000, samples=3000)


def test_reduced_defaults():
    p = BcnfParams(-2.0, 1.5)
    assert (p.delta_L, p.delta_R, p.mu) == (0.0, 0.5, -1.0) and p.is_reduced
    assert not BcnfParams.full(-2.0, 0.1, 1.5, 0.5).is_reduced


@settings(max_examples=300, deadline=None)
@given(reals, reals, reals)
def test_switching_line_continuity(tl, tr, y):
    p = BcnfParams(tl, tr)
    a, b = p.left((0.0, y)), p.right((0.0, y))
    assert np.array_equal(a, b)
    assert np.array_equal(bcnf_step(p, (0.0, y)), np.array([y - 1.0, 0.0]))


@settings(max_examples=300, deadline=None)
@given(reals, reals, reals, reals)
def test_left_branch_collapse(tl, tr, x, y):
    assert BcnfParams(tl, tr).left((x, y))[1] == 0.0


def test_fixed_point_example():
    assert np.allclose(bcnf_step(BcnfParams(0.5, 3.0), (-2.0, 0.0)), (-2.0, 0.0))


def test_period_two_example():
    p = BcnfParams(-2.0, 1.5)
    wl = bcnf_step(p, (2.0 / 9.0, 0.0))
    assert np.allclose(wl, (-2.0 / 3.0, -1.0 / 9.0))
    sp = special_points(p)
    assert np.allclose(sp.w_left, wl)
    assert np.allclose(bcnf_step(p, sp.w_left), sp.w_right)


def test_special_point_examples():
    sp = special_points((-2.0, 1.5))
    assert np.allclose(sp.u3, (0.5, -0.5))
    assert np.allclose(special_points((0.3, 2.0)).v_point, (-1.5, 0.0))
    sp0 = special_points((0.0, 1.3))
    assert np.array_equal(sp0.u1, sp0.u2) and np.allclose(sp0.u2, (-1.0, 0.0))


def test_special_point_degeneracies():
    with pytest.raises(DegenerateDenominator):
        special_points((1.0, 2.0))
    with pytest.raises(DegenerateDenominator):
        special_points((-2.0, 0.0))


@settings(max_examples=200, deadline=None)
@given(st.floats(-5.0, 0.9), st.floats(0.05, 5.0))
def test_special_point_identities(tl, tr):
    p = BcnfParams(tl, tr)
    sp = special_points(p)
    assert np.allclose(p.left(sp.p_star), sp.p_star)
    assert np.allclose(p.right(sp.w_right), sp.w_left, atol=1e-9)
    assert np.allclose(p.left(sp.w_left), sp.w_right, atol=1e-9)
    o = np.zeros(2)
    assert np.allclose(sp.u1, bcnf_step(p, o))
    assert np.allclose(sp.u2, p.left(sp.u1))
    assert np.allclose(sp.u3, p.right(sp.u2))


@settings(max_examples=100, deadline=None)
@given(st.floats(-5.0, -1.01), st.floats(0.0, 1.0))
def test_half_plane_placement(tl, frac):
    tr = (0.01 + 0.98 * frac) * 2.0 / (1.0 - tl)
    sp = special_points((tl, tr))
    assert sp.w_left[0] < 0 < sp.w_right[0]


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.98, 0.98), st.floats(0.001, 1.999),
       st.floats(0.0, 2 * np.pi), st.floats(0.0, 1.0))
def test_fixed_point_attracts_unit_ball(tl, tr, ang, rad):
    # for tau_R outside (0, 2) the right branch expands and seeds with x > 0 can escape
    p = BcnfParams(tl, tr)
    seed = rad * np.array([np.cos(ang), np.sin(ang)])
    z = attractor_samples(p, n=1, transient=3000, seed=seed)[-1]
    assert np.allclose(z, bcnf.p_star(tl), atol=1e-8)


def test_escaping_seed_for_expanding_right_branch():
    z = attractor_samples((0.0, 3.0), n=1, transient=50, seed=(1.0, 0.0))[-1]
    assert not np.allclose(z, bcnf.p_star(0.0))


@settings(max_examples=60, deadline=None)
@given(st.one_of(st.floats(-4.0, -1.02), st.floats(1.02, 4.0)), st.floats(-1.0, 5.0))
def test_no_fixed_point_outside_band(tl, tr):
    z = attractor_samples((tl, tr), n=1, transient=3000)[-1]
    assert not np.allclose(z, bcnf.p_star(tl), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3.9, -1.1), st.floats(0.05, 0.95))
def test_y_sign_rule(tl, frac):
    lo = 2.0 / (1.0 - tl)
    tr = lo + frac * (2.0 - lo)
    z = attractor_samples((tl, tr), n=2000, transient=2000)
    z = z[np.all(np.isfinite(z), axis=1)]
    if tr > 1:
        assert np.all(z[:, 1] <= 1e-9)
    else:
        assert np.all(z[:, 1] >= -1e-9)


@pytest.mark.parametrize("params,kind", [
    ((0.0, 5.0), AttractorKind.FIXED_POINT),
    ((-2.0, 0.5), AttractorKind.PERIOD_TWO),
    ((2.0, 3.0), AttractorKind.DIVERGENT),
])
def test_classification_examples(params, kind):
    c = classify_attractor(params)
    assert c.kind is kind
    if kind is AttractorKind.FIXED_POINT:
        assert c.attractor_extent is not None


def test_region_four_two_segments_one_component():
    # between the period-two existence boundary (2/3) and the first olive curve (1)
    c = classify_attractor((-2.0, 0.85), FAST)
    assert c.kind is AttractorKind.CHAOTIC
    assert (c.n_segments, c.n_components) == (2, 1)


def test_slow_growth_is_divergent():
    c = classify_attractor((-2.0, 3.0), FAST)
    assert c.kind is AttractorKind.DIVERGENT and c.undecided


def test_boundary_examples():
    assert region_boundary("PeriodTwoExistence", ("tau_L", -3.0)) == pytest.approx(0.5)
    assert region_boundary("FirstOlive", ("tau_L", -3.0)) == pytest.approx(0.625, abs=1e-10)
    assert region_boundary(BoundaryKind.CURVE_F, ("tau_L", -2.0)) == 0.5
    assert region_boundary("PurpleK1", ("tau_L", -3.0)) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(NoBracket):
        region_boundary("FirstOlive", ("tau_L", 0.5), window=(3.0, 5.0))


@pytest.mark.parametrize("tl", [-1.5, -2.0, -3.0, -3.5])
def test_first_olive_closed_form(tl):
    tr = region_boundary("FirstOlive", ("tau_L", tl))
    assert abs(tr * (tl + 1) * (1 - tl) - (2 * tl + 1)) < 1e-9


@pytest.mark.parametrize("kind", list(BoundaryKind))
def test_roots_zero_residual(kind):
    try:
        tr = region_boundary(kind, ("tau_L", -2.5))
    except NoBracket:
        pytest.skip(f"{kind.value} has no root at tau_L = -2.5 in the default window")
    assert abs(boundary_residual(kind, -2.5, tr)) < 1e-8


def test_turquoise_doubles_components():
    for tr in (1.1, 1.4):
        tl = region_boundary("FirstTurquoise", ("tau_R", tr))
        far = classify_attractor((tl - 0.03, tr), FAST)
        near = classify_attractor((tl + 0.03, tr), FAST)
        assert (far.n_components, near.n_components) == (1, 2)


def test_composition_branches():
    assert bcnf.check_composition_branches("LL", -2.0, 1.5, (-0.2, 0.0))
    with pytest.raises(Undecided):
        bcnf.check_composition_branches("L", -2.0, 1.5, (0.0, 0.0))


def test_scan_layout_coarse():
    grid = scan_plane((-4.0, 1.0, 0.25), (-1.0, 5.0, 0.5), FAST)
    codes = grid.kind_codes()
    tl, tr = grid.tau_L, grid.tau_R
    for i, r in enumerate(tr):
        for j, l in enumerate(tl):
            c = grid.cell(i, j)
            if c.undecided:
                continue
            if -1 < l < 1:
                assert codes[i, j] == 0
            elif l < -1 and 0 < r < 2 / (1 - l):
                assert codes[i, j] == 1
    assert (codes == 2).any() and (codes == 3).any()
    assert len(grid.rows()[0]) == 6 and "PeriodTwoExistence" in grid.curves


def test_orbit_diagram_fixed_point_and_doubling():
    rows = bcnf_orbit_diagram([(0.5, 3.0), (-1.2, 0.5)], iterates=2000, keep=50)
    assert np.allclose(rows[0].x_values, 1.0 / (0.5 - 1.0))
    assert len(np.unique(np.round(rows[1].x_values, 8))) == 2
    assert not rows[0].diverged


def test_path_from_normal_form():
    from nonsmooth_atlas.grazing import NormalFormParams

    path = bcnf.path_from_normal_form([NormalFormParams(-1.5, 0.0, 1.3, 0.3), (-1.5, 0.0, 1.3, 0.3)])
    assert path[0] == path[1] and path[0].mu == -1.0
