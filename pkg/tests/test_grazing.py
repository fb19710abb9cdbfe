from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonsmooth_atlas.boundary_hopf import theorem1_limits
from nonsmooth_atlas.errors import DegenerateDenominator, WrongSide
from nonsmooth_atlas.filippov import (
    FilippovModel,
    PlaneSection,
    integrate_smooth,
    lie_derivative,
    lie_derivative2,
)
from nonsmooth_atlas.grazing import (
    disc_map_linear,
    discontinuity_map_apply,
    discontinuity_map_exact,
    dq_disc_limit,
    dq_global_fd,
    dq_global_limit,
    find_grazing_cycle,
    jordan_grazing_point,
    linear_jordan_model,
    normal_form_params,
    omega_point_at_depth,
)
from nonsmooth_atlas.model_io import builtin_model

A, B, C, P, Q, R, BETA, GAMMA = -1.0, -2.0, -3.0, 0.0, -2.0, 1.0, 1.0, -0.2
TOY = builtin_model("toy")


def _jordan_with_left(d):
    j = linear_jordan_model(A, B, C, 1.0, BETA, GAMMA)
    n = np.array([A, B, C])
    return FilippovModel("jordan_d", lambda x, mu: np.array(d, dtype=float), j.f_right, j.h,
                         grad_h=lambda y, mu: n.copy())


@pytest.fixture(scope="module")
def toy_cycle():
    return find_grazing_cycle(TOY, 0.3, 0.0135)


# ---------------------------------------------------------------- closed forms

def test_dq_global_toy():
    m = dq_global_limit(A, B, C, BETA, GAMMA)
    assert np.allclose(m, [[1.0, 0.17171], [0.0, 0.28455]], atol=1e-4)
    _, tr, dr = theorem1_limits([A, B, C], [P, Q, R], [0, 0, 1], [0, 0, 1], BETA, GAMMA)
    assert np.trace(m) == pytest.approx(tr, abs=1e-14)
    assert np.linalg.det(m) == pytest.approx(dr, abs=1e-14)


def test_dq_global_trivial_cases():
    e = math.exp(2 * math.pi * GAMMA / BETA)
    assert np.array_equal(dq_global_limit(A, B, 0.0, BETA, GAMMA), [[1.0, 0.0], [0.0, e]])
    assert np.allclose(dq_global_limit(A, B, C, BETA, 0.0), np.eye(2), atol=0.0)
    with pytest.raises(DegenerateDenominator):
        dq_global_limit(0.0, 0.0, C, BETA, GAMMA)


def test_dq_disc_toy():
    m = dq_disc_limit(A, B, C, P, Q, R, BETA, GAMMA)
    assert np.allclose(m, [[-4.2, -4.368], [5.0, 5.2]], atol=1e-12)


def test_dq_disc_without_r_is_a_projection():
    # with r = 0 the first column vanishes; the matrix stays rank one, so never the identity
    m = dq_disc_limit(A, B, C, 0.3, -2.0, 0.0, BETA, GAMMA)
    k = (A * BETA - B * GAMMA) * C / (BETA * (A * A + B * B))
    assert np.allclose(m, [[0.0, -k], [0.0, 1.0]], atol=1e-15)
    assert np.allclose(m @ m, m, atol=1e-15)
    with pytest.raises(DegenerateDenominator):
        dq_disc_limit(0.0, B, C, P, Q, R, BETA, GAMMA)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=6, max_size=6), st.floats(0.2, 3.0), st.floats(-1.0, 1.0))
def test_dq_disc_is_rank_one(v, beta, gamma):
    a, b, c, p, q, r = v
    if abs(a) < 1e-2 or abs(a * p + b * q + c * r) < 1e-2:
        return
    m = dq_disc_limit(a, b, c, p, q, r, beta, gamma)
    assert abs(np.linalg.det(m)) <= 1e-9 * max(1.0, np.max(np.abs(m)) ** 2)


def test_composition_trace_equals_tau_l():
    prod = dq_global_limit(A, B, C, BETA, GAMMA) @ dq_disc_limit(A, B, C, P, Q, R, BETA, GAMMA)
    tl, _, _ = theorem1_limits([A, B, C], [P, Q, R], [0, 0, 1], [0, 0, 1], BETA, GAMMA)
    assert abs(np.trace(prod) - tl) <= 1e-10
    assert abs(np.linalg.det(prod)) <= 1e-12


def test_z_reproduces_dq_disc_in_omega_chart():
    m = _jordan_with_left([P, Q, R])
    g = jordan_grazing_point(A, B, 1.0)
    z = disc_map_linear(m, np.zeros(2), g).z_field
    n = np.array([A, B, C])
    t1 = np.array([1.0, B / A, 0.0])
    t3 = np.array([0.0, -C * GAMMA / (A * BETA), 1.0])
    chart = np.array([[1 + z[0] * (n @ t1), z[0] * (n @ t3)], [z[2] * (n @ t1), 1 + z[2] * (n @ t3)]])
    assert np.allclose(chart, dq_disc_limit(A, B, C, P, Q, R, BETA, GAMMA), atol=1e-12)


def test_dq_global_fd_matches_closed_form():
    fd = dq_global_fd(A, B, C, 1.0, BETA, GAMMA)
    assert np.allclose(fd, dq_global_limit(A, B, C, BETA, GAMMA), atol=1e-6)


# ---------------------------------------------------------------- discontinuity map

def test_linear_map_invariants(toy_cycle):
    mu, g = toy_cycle.params, toy_cycle.grazing_point_G
    lin = disc_map_linear(TOY, mu, g)
    fl, fr = TOY.f_left(g, mu), TOY.f_right(g, mu)
    cr, cl = lin.coefficients
    assert np.allclose(lin.z_field, cr * fr + cl * fl, atol=1e-14)
    for depth in (1e-3, 1e-4):
        x = omega_point_at_depth(TOY, mu, g, depth)
        y = discontinuity_map_apply(TOY, mu, x, g, lin)
        assert abs(TOY.h(y, mu)) <= 50 * depth ** 2
        assert abs(lie_derivative(TOY, "Right", y, mu)) <= 50 * depth ** 1.5


def test_apply_identity_at_surface_and_wrong_side(toy_cycle):
    mu, g = toy_cycle.params, toy_cycle.grazing_point_G
    assert np.array_equal(discontinuity_map_apply(TOY, mu, g, g), g) or \
        np.allclose(discontinuity_map_apply(TOY, mu, g, g), g, atol=1e-12)
    above = g + 1e-3 * TOY.gradient(g, mu)
    with pytest.raises(WrongSide):
        discontinuity_map_apply(TOY, mu, above, g)
    with pytest.raises(WrongSide):
        discontinuity_map_exact(TOY, mu, above)


def test_exact_map_event_times(toy_cycle):
    mu, g = toy_cycle.params, toy_cycle.grazing_point_G
    l2 = lie_derivative2(TOY, g, mu)
    for depth in (1e-4, 1e-5):
        x1 = omega_point_at_depth(TOY, mu, g, depth)
        res = discontinuity_map_exact(TOY, mu, x1, details=True)
        assert abs(TOY.h(res.x2, mu)) <= 1e-10
        assert abs(lie_derivative(TOY, "Right", res.x3, mu)) <= 1e-9
        # backward excursion time for a quadratic tangency: sqrt(2 depth / L^2 h)
        predicted = math.sqrt(2 * depth / l2)
        assert res.backward_time == pytest.approx(predicted, rel=0.05)
        assert res.sliding_time == pytest.approx(res.backward_time, rel=0.1)


def test_exact_map_at_fold_is_identity(toy_cycle):
    mu, g = toy_cycle.params, toy_cycle.grazing_point_G
    x = g.copy()
    x = x - TOY.h(x, mu) * TOY.gradient(x, mu) / float(TOY.gradient(x, mu) @ TOY.gradient(x, mu))
    if TOY.h(x, mu) > 0:
        x = x - 1e-16 * TOY.gradient(x, mu)
    assert np.allclose(discontinuity_map_exact(TOY, mu, x), g, atol=1e-7)


# ---------------------------------------------------------------- grazing cycles and normal form

def test_grazing_cycle_invariants(toy_cycle):
    gc = toy_cycle
    mu = gc.params
    assert abs(TOY.h(gc.grazing_point_G, mu)) <= 1e-10
    assert abs(lie_derivative(TOY, "Right", gc.grazing_point_G, mu)) <= 1e-10
    assert gc.lie2 > 0
    f = lambda y: TOY.f_right(y, mu)  # noqa: E731
    _, back = integrate_smooth(f, gc.grazing_point_G, gc.period)
    assert np.linalg.norm(back - gc.grazing_point_G) <= 1e-7


def test_eta_gs_is_quadratic_in_nu():
    etas = []
    prev = None
    for nu in (0.1, 0.05, 0.025):
        guess = None if prev is None else (prev.grazing_point_G * nu / prev.nu, prev.period)
        eta0 = 3 * nu * nu / 20 if prev is None else prev.eta_gs * (nu / prev.nu) ** 2
        prev = find_grazing_cycle(TOY, nu, eta0, guess)
        etas.append(prev.eta_gs)
    r1, r2 = etas[0] / etas[1], etas[1] / etas[2]
    assert 3.5 < r1 < 4.5 and 3.5 < r2 < 4.5


def test_normal_form_rank_and_section_independence(toy_cycle):
    omega = normal_form_params(TOY, toy_cycle)
    assert omega.delta_L == pytest.approx(0.0, abs=1e-8)
    assert abs(np.linalg.det(omega.dq_global @ omega.dq_disc)) <= 1e-8
    g = toy_cycle.grazing_point_G
    samples = toy_cycle.cycle_samples
    far = samples[len(samples) // 2]
    v = TOY.f_right(far, toy_cycle.params)
    plane = normal_form_params(TOY, toy_cycle, PlaneSection(point=tuple(far), normal=tuple(v), direction=1))
    for k in ("tau_L", "tau_R", "delta_R"):
        a, b = getattr(omega, k), getattr(plane, k)
        assert abs(a - b) <= 1e-6 * max(1.0, abs(a)), k
    assert np.linalg.norm(far - g) > 0.1 * toy_cycle.diameter
