from __future__ import annotations

import math

import numpy as np
import pytest

from nonsmooth_atlas.errors import Divergence, NotOnSurface, ZenoGuard
from nonsmooth_atlas.filippov import (
    EventKind,
    FilippovModel,
    IntegrationOptions,
    PlaneSection,
    Regime,
    Side,
    SurfaceKind,
    classify_surface_point,
    integrate_hybrid,
    integrate_smooth,
    lie_derivative,
    lie_derivative2,
    sliding_field,
)
from nonsmooth_atlas.grazing import jordan_grazing_point, linear_jordan_model
from nonsmooth_atlas.model_io import builtin_model
from nonsmooth_atlas.numerics import scalar_root_bracketed

TOY = builtin_model("toy")
ZERO = np.zeros(2)


def _const(v):
    return lambda x, mu: np.array(v, dtype=float)


def _toy_chaos_trajectory():
    return integrate_hybrid(TOY, [0.16, -0.28, -0.28], [0.2, 0.2], 300.0)


@pytest.fixture(scope="module")
def chaos():
    return _toy_chaos_trajectory()


# ---------------------------------------------------------------- Lie derivatives

def test_lie_left_origin_is_u_dot_d():
    assert lie_derivative(TOY, Side.LEFT, np.zeros(3), ZERO) == 1.0


def test_lie_right_at_equilibrium():
    assert lie_derivative(TOY, "Right", np.zeros(3), ZERO) == 0.0


def test_lie_right_hand_value():
    # F_R(0,1,0) = (1, -1, 0) at eta = 0, grad h = (-1, -2, -3)
    assert lie_derivative(TOY, Side.RIGHT, [0.0, 1.0, 0.0], ZERO) == pytest.approx(1.0)


def test_second_lie_derivative_at_jordan_fold():
    # beta0^2 psi with beta0 = 1, psi = 1
    m = linear_jordan_model(-1.0, -2.0, -3.0, 1.0, 1.0, -0.2)
    g = jordan_grazing_point(-1.0, -2.0, 1.0)
    assert lie_derivative2(m, g, ZERO) == pytest.approx(1.0, abs=1e-7)


def test_second_lie_derivative_at_equilibrium():
    assert abs(lie_derivative2(TOY, np.zeros(3), ZERO)) < 1e-12


def test_toy_fold_is_visible():
    # fold of the toy model on the surface at nu = 0.3: h = 0 and L_R h = 0
    mu = np.array([0.3, 0.0])

    def point(s):
        # on the line X3 = 0, X1 + 2 X2 = nu parametrised by X2 = s
        return np.array([0.3 - 2 * s, s, 0.0])

    s = scalar_root_bracketed(lambda s: lie_derivative(TOY, Side.RIGHT, point(s), mu), -1.0, 1.0)
    x = point(s)
    assert abs(TOY.h(x, mu)) < 1e-12
    assert lie_derivative2(TOY, x, mu) > 0


# ---------------------------------------------------------------- sliding field

def _sliding_point(mu):
    # X1 = X3 = 0, h = 0 gives X2 = nu/2; L_R h = -X2 + 2 X1 - ... < 0 there
    return np.array([0.0, mu[0] / 2.0, 0.0])


def test_sliding_field_is_tangent():
    mu = np.array([0.2, 0.2])
    x = _sliding_point(mu)
    c = classify_surface_point(TOY, x, mu)
    assert c.kind is SurfaceKind.ATTRACTING_SLIDING
    v, lam = sliding_field(TOY, x, mu)
    assert abs(TOY.gradient(x, mu) @ v) < 1e-12
    assert 0.0 <= lam <= 1.0


def test_sliding_field_symmetric_combination():
    m = FilippovModel("sym", _const([1.0, 2.0, -1.0]), _const([-1.0, 0.5, 3.0]),
                      lambda x, mu: float(x[0]))
    v, lam = sliding_field(m, np.zeros(3), ZERO)
    assert lam == pytest.approx(0.5)
    assert np.allclose(v, (m.f_left(0, 0) + m.f_right(0, 0)) / 2)


def test_sliding_field_matches_simulated_velocity(chaos):
    mu = np.array([0.2, 0.2])
    seg = next(s for s in chaos.segments if s.regime is Regime.SLIDING and len(s.times) > 4)
    k = len(seg.times) // 2
    dt = seg.times[k + 1] - seg.times[k - 1]
    fd = (seg.states[k + 1] - seg.states[k - 1]) / dt
    v, _ = sliding_field(TOY, seg.states[k], mu, event_tol=1e-8)
    assert np.linalg.norm(fd - v) < 1e-2 * max(1.0, np.linalg.norm(v))


def test_sliding_field_off_surface():
    with pytest.raises(NotOnSurface):
        sliding_field(TOY, [1.0, 1.0, 1.0], ZERO)


# ---------------------------------------------------------------- classification

def test_classify_origin_tangency_right():
    c = classify_surface_point(TOY, np.zeros(3), ZERO)
    assert c.kind is SurfaceKind.TANGENCY_RIGHT
    assert (c.lie_left, c.lie_right) == (1.0, 0.0)


def test_classify_crossing():
    e1 = [1.0, 0.0, 0.0]
    m = FilippovModel("cross", _const(e1), _const(e1), lambda x, mu: float(x[0]))
    assert classify_surface_point(m, [0.0, 0.3, -0.2], ZERO).kind is SurfaceKind.CROSSING


def test_classify_repelling():
    m = FilippovModel("rep", _const([-1.0, 0, 0]), _const([1.0, 0, 0]), lambda x, mu: float(x[0]))
    assert classify_surface_point(m, np.zeros(3), ZERO).kind is SurfaceKind.REPELLING_SLIDING


# ---------------------------------------------------------------- integration

def test_toy_spirals_to_equilibrium():
    traj = integrate_hybrid(TOY, [0.05, 0.05, 0.0], [0.5, -0.1], 300.0)
    assert np.linalg.norm(traj.final_state) < 1e-4
    assert traj.final_regime is Regime.RIGHT


def test_jordan_quarter_turn():
    m = linear_jordan_model(1.0, 0.0, 0.0, 10.0, 1.0, -0.2)  # surface far away
    traj = integrate_hybrid(m, [1.0, 0.0, 1.0], ZERO, math.pi / 2)
    assert np.allclose(traj.final_state, [0.0, -1.0, math.exp(-0.1 * math.pi)], atol=1e-9)
    assert [s.regime for s in traj.segments] == [Regime.RIGHT]


def test_toy_chaos_has_recurring_sliding(chaos):
    entries = [e for e in chaos.events if e.kind is EventKind.SLIDE_ENTRY]
    exits = [e for e in chaos.events if e.kind is EventKind.SLIDE_EXIT_FOLD]
    assert len(entries) >= 10 and len(exits) >= 10


def test_regime_invariants(chaos):
    mu = np.array([0.2, 0.2])
    tol = 1e-10
    prev_end = None
    for seg in chaos.segments:
        if prev_end is not None:
            assert np.linalg.norm(seg.states[0] - prev_end) <= 1e-9
        prev_end = seg.states[-1]
        hv = np.array([TOY.h(x, mu) for x in seg.states])
        inner = hv[1:-1]
        if seg.regime is Regime.SLIDING:
            assert np.all(np.abs(hv) <= 10 * tol)
            lams = [sliding_field(TOY, x, mu, check_surface=False)[1] for x in seg.states]
            assert min(lams) >= -1e-6 and max(lams) <= 1 + 1e-6
        elif seg.regime is Regime.RIGHT:
            assert np.all(inner > -tol)
        else:
            assert np.all(inner < tol)


def test_event_consistency(chaos):
    mu = np.array([0.2, 0.2])
    for e in chaos.events:
        if e.kind is EventKind.CROSS_L_TO_R:
            assert lie_derivative(TOY, Side.LEFT, e.state, mu) > 0
            assert lie_derivative(TOY, Side.RIGHT, e.state, mu) > 0
        elif e.kind is EventKind.SLIDE_ENTRY:
            c = classify_surface_point(TOY, e.state, mu, event_tol=1e-9)
            assert c.kind is SurfaceKind.ATTRACTING_SLIDING
        elif e.kind is EventKind.SLIDE_EXIT_FOLD:
            assert abs(lie_derivative(TOY, Side.RIGHT, e.state, mu)) <= 1e-8


def test_smooth_reversibility():
    mu = np.array([0.0, 0.3])
    f = lambda y: TOY.f_right(y, mu)  # noqa: E731
    x0 = np.array([0.4, -0.2, 0.3])
    _, x1 = integrate_smooth(f, x0, 5.0)
    _, x2 = integrate_smooth(f, x1, -5.0)
    assert np.allclose(x2, x0, rtol=1e-6, atol=1e-9)


def test_section_hits_converge_with_tolerance():
    mu = [0.2, 0.2]
    sec = PlaneSection(point=(0.0, 0.0, 0.0), normal=(0.0, 1.0, 0.0), direction=1, name="y0")
    x0 = [0.16, -0.28, -0.28]
    coarse = IntegrationOptions(rtol=1e-8, atol=1e-10)
    fine = IntegrationOptions(rtol=5e-9, atol=5e-11)
    a = integrate_hybrid(TOY, x0, mu, 20.0, [sec], coarse).hits("y0")
    b = integrate_hybrid(TOY, x0, mu, 20.0, [sec], fine).hits("y0")
    assert len(a) == len(b) and len(a) >= 2
    for ea, eb in zip(a, b):
        assert np.linalg.norm(ea.state - eb.state) < 1e-6
        assert ea.direction == 1


def test_divergence_bound():
    m = FilippovModel("blowup", _const([1.0, 0, 0]), lambda x, mu: np.array(x, dtype=float) * 2.0,
                      lambda x, mu: float(x[0]))
    with pytest.raises(Divergence):
        integrate_hybrid(m, [1.0, 0.0, 0.0], ZERO, 100.0, opts=IntegrationOptions(divergence_bound=1e3))


def test_zeno_guard():
    with pytest.raises(ZenoGuard):
        integrate_hybrid(TOY, [0.16, -0.28, -0.28], [0.2, 0.2], 300.0,
                         opts=IntegrationOptions(max_events=5))
