from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonsmooth_atlas.errors import DegenerateSpectrum, NoBracket
from nonsmooth_atlas.model_io import builtin_model
from nonsmooth_atlas.numerics import (
    ToleranceConfig,
    eig3,
    fd_jacobian,
    neville_at_zero,
    newton_system,
    scalar_root_bracketed,
)


def test_tolerance_config_validation():
    with pytest.raises(ValueError):
        ToleranceConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        ToleranceConfig(max_iter=0)
    with pytest.raises(ValueError):
        ToleranceConfig(fd_step=-1.0)
    assert ToleranceConfig(fd_step=1e-4).step_for([10.0]) == 1e-4


def test_root_sqrt_two():
    r = scalar_root_bracketed(lambda x: x * x - 2.0, 1.0, 2.0)
    assert abs(r - math.sqrt(2.0)) < 1e-8


def test_root_odd_function():
    assert abs(scalar_root_bracketed(lambda x: x, -1.0, 1.0)) < 1e-10


def test_root_no_bracket():
    with pytest.raises(NoBracket):
        scalar_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)


def test_root_inverts_floquet_trace():
    # tau_R(gamma0) = exp(2 pi gamma0) + 1 with beta0 = 1, inverted for gamma0
    gamma_true = -0.2
    target = math.exp(2 * math.pi * gamma_true) + 1.0
    g = scalar_root_bracketed(lambda x: math.exp(2 * math.pi * x) + 1.0 - target, -1.0, 0.0)
    assert abs(g - gamma_true) < 1e-9


def test_newton_toy_equilibrium():
    model = builtin_model("toy")
    mu = np.array([0.0, 0.0])
    x = newton_system(lambda y: model.f_right(y, mu), [0.1, 0.1, 0.1])
    assert np.allclose(x, 0.0, atol=1e-9)


def test_newton_linear_is_one_step():
    M = np.array([[3.0, 1.0, 0.0], [0.0, 2.0, 1.0], [1.0, 0.0, 4.0]])
    b = np.array([1.0, 2.0, 3.0])
    x = newton_system(lambda y: M @ y - b, np.zeros(3), ToleranceConfig(max_iter=1),
                      jac=lambda y: M)
    assert np.allclose(x, np.linalg.solve(M, b), atol=1e-12)


def test_newton_idempotent_at_root():
    f = lambda y: np.array([y[0] ** 2 - 2.0, y[1] - y[0]])  # noqa: E731
    tol = ToleranceConfig(abs_tol=1e-12)
    x = newton_system(f, [1.0, 1.0], tol)
    x2 = newton_system(f, x, tol)
    assert np.linalg.norm(x2 - x) < 1e-12


def test_newton_hastings_powell_matches_simulation():
    from nonsmooth_atlas.filippov import integrate_smooth

    model = builtin_model("hastings_powell_pest")
    mu = np.array([100.0, 2.0])  # b1 = 2.0: stable interior equilibrium
    x = newton_system(lambda y: model.f_right(y, mu), [0.76, 0.125, 13.2])
    _, y = integrate_smooth(lambda z: model.f_right(z, mu), x + [1e-3, 0, 0], 20000.0)
    assert np.allclose(x, y, atol=1e-5)


def test_eig3_toy():
    M = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -0.2]])
    e = eig3(M)
    assert abs(e.alpha) < 1e-14 and abs(e.beta - 1.0) < 1e-14 and abs(e.gamma + 0.2) < 1e-14
    assert np.allclose(e.v, [0, 0, 1]) and np.allclose(e.w, [0, 0, 1])
    assert np.allclose(e.T, np.eye(3))


def test_eig3_block_diagonal():
    M = np.array([[-1.0, 0.0, 0.0], [0.0, 2.0, 3.0], [0.0, -3.0, 2.0]])
    e = eig3(M)
    assert (e.gamma, e.alpha, e.beta) == pytest.approx((-1.0, 2.0, 3.0))


def test_eig3_hastings_powell_hopf():
    from nonsmooth_atlas.boundary_hopf import find_equilibrium

    model = builtin_model("hastings_powell_pest")
    mu = np.array([13.2, 2.1138])
    x = find_equilibrium(model, mu, [0.76, 0.125, 13.2])
    e = eig3(model.jacobian_right(x, mu))
    assert abs(e.alpha) < 1e-4 and e.beta > 0


def test_eig3_rejects_real_spectrum():
    with pytest.raises(DegenerateSpectrum):
        eig3(np.diag([1.0, 2.0, 3.0]))


def _well_conditioned(draw_vals):
    a, b, g, *entries = draw_vals
    P = np.eye(3) + 0.3 * np.array(entries).reshape(3, 3)
    J = np.array([[a, b, 0.0], [-b, a, 0.0], [0.0, 0.0, g]])
    return P @ J @ np.linalg.inv(P)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=12, max_size=12))
def test_eig3_reassembly(vals):
    vals = list(vals)
    vals[1] = 0.5 + abs(vals[1])  # beta bounded away from 0
    M = _well_conditioned(vals)
    if np.linalg.cond(M) > 1e6:
        return
    e = eig3(M)
    R = e.T @ e.jordan @ np.linalg.inv(e.T)
    assert np.allclose(R, M, rtol=1e-10, atol=1e-10 * np.linalg.norm(M))
    assert abs(e.w @ e.v - 1.0) < 1e-10
    assert e.beta > 0


def test_fd_jacobian_linear_and_polynomial():
    M = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert np.allclose(fd_jacobian(lambda x: M @ x, [0.3, -0.7]), M, atol=1e-9)
    J = fd_jacobian(lambda x: np.array([x[0] ** 2, x[0] * x[1]]), [1.0, 1.0], 1e-4)
    assert np.allclose(J, [[2.0, 0.0], [1.0, 1.0]], atol=1e-6)


def test_fd_jacobian_second_order():
    f = lambda x: np.array([np.sin(x[0]) * np.exp(x[1])])  # noqa: E731
    x = np.array([0.7, 0.3])
    exact = np.array([[np.cos(0.7) * np.exp(0.3), np.sin(0.7) * np.exp(0.3)]])
    e1 = np.max(np.abs(fd_jacobian(f, x, 1e-2) - exact))
    e2 = np.max(np.abs(fd_jacobian(f, x, 5e-3) - exact))
    assert 3.5 < e1 / e2 < 4.5


def test_neville_richardson():
    xs = np.array([0.4, 0.2, 0.1, 0.05])
    ys = 1.5 + 2.0 * xs - 3.0 * xs ** 2 + 0.5 * xs ** 3
    assert abs(neville_at_zero(xs, ys) - 1.5) < 1e-12
