"""Grazing-sliding cycles, the discontinuity map and normal-form parameters.

A grazing cycle of the right field touches the switching surface at ``G``
where ``h = 0`` and ``L_{F_R} h = 0``.  Near ``G`` the return map on the
surface ``Omega = {L_{F_R} h = 0}`` is the composition of a smooth global
map with a discontinuity map that accounts for the short sliding excursion.
The traces and determinants of the two one-sided Jacobians are the
parameters of the planar border-collision normal form.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .boundary_hopf import equilibrium_data
from .errors import (
    DegenerateDenominator,
    DegenerateLie,
    NoBackwardIntersection,
    NotVisibleFold,
    SectionNotTransverse,
    SlidingExitBeforeOmega,
    StepFailure,
    WrongSide,
)
from .filippov import (
    FilippovModel,
    IntegrationOptions,
    PlaneSection,
    Side,
    _run_field,
    _Terminal,
    grad_lie_right,
    integrate_smooth,
    lie_derivative,
    lie_derivative2,
    lie_left_of_lie_right,
    sliding_field,
)
from .numerics import DEFAULT_TOL, ToleranceConfig, neville_at_zero, newton_system

SHOOTING_OPTS = IntegrationOptions(rtol=1e-12, atol=1e-14)


class MuSide(int, enum.Enum):
    BEFORE_GRAZING = 1
    AFTER_GRAZING = -1


@dataclass(frozen=True)
class GrazingCycle:
    grazing_point_G: np.ndarray
    period: float
    nu: float
    eta_gs: float
    cycle_samples: np.ndarray
    lie2: float = float("nan")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.nu, self.eta_gs])

    @property
    def diameter(self) -> float:
        s = self.cycle_samples
        return float(np.max(np.linalg.norm(s[:, None, :] - s[None, :, :], axis=-1)))


@dataclass(frozen=True)
class NormalFormParams:
    tau_L: float
    delta_L: float
    tau_R: float
    delta_R: float
    mu_side: MuSide = MuSide.AFTER_GRAZING
    dq_global: Optional[np.ndarray] = None
    dq_disc: Optional[np.ndarray] = None

    @property
    def cycle_stable(self) -> bool:
        """Admissible fixed point of the right piece is stable."""
        return self.delta_R > self.tau_R - 1 and abs(self.delta_R) < 1 and self.delta_R > -self.tau_R - 1

    def as_tuple(self) -> tuple:
        return (self.tau_L, self.tau_R, self.delta_R)


@dataclass(frozen=True)
class DiscMapLinear:
    z_field: np.ndarray
    fold_point: np.ndarray
    coefficients: tuple = field(default=(0.0, 0.0))  # Z = c_R F_R + c_L F_L


# ---------------------------------------------------------------- closed forms

def dq_global_limit(a: float, b: float, c: float, beta0: float, gamma0: float) -> np.ndarray:
    """Limit of the global-map Jacobian for a linear right field in Jordan form."""
    if a * a + b * b <= 0:
        raise DegenerateDenominator("a^2 + b^2 must be positive")
    if not beta0 > 0:
        raise ValueError("beta0 must be positive")
    e = math.exp(2 * math.pi * gamma0 / beta0)
    return np.array([[1.0, -b * c * gamma0 * (1 - e) / ((a * a + b * b) * beta0)], [0.0, e]])


def dq_disc_limit(a: float, b: float, c: float, p: float, q: float, r: float,
                  beta0: float, gamma0: float, abs_tol: float = 1e-14) -> np.ndarray:
    """Limit of the discontinuity-map Jacobian in the same coordinates."""
    s = a * p + b * q + c * r
    if abs(a) <= abs_tol or abs(s) <= abs_tol:
        raise DegenerateDenominator("a and ap + bq + cr must be nonzero")
    k = a * beta0 - b * gamma0
    m00 = k * c * r / (a * beta0 * s)
    m01 = -k * c / (beta0 * (a * a + b * b) * s) * (a * p + b * q + b * c * r * gamma0 / (a * beta0))
    m10 = -(a * a + b * b) * r / (a * s)
    return np.array([[m00, m01], [m10, 1.0 - m00]])


@dataclass(frozen=True)
class _LinearJordanRight:
    beta0: float
    gamma0: float

    def __call__(self, y, mu):
        return np.array([self.beta0 * y[1], -self.beta0 * y[0], self.gamma0 * y[2]])


@dataclass(frozen=True)
class _AffineSwitch:
    abc: tuple
    psi: float

    def __call__(self, y, mu):
        return float(np.dot(self.abc, y)) + self.psi


@dataclass(frozen=True)
class _ConstantField:
    value: tuple

    def __call__(self, y, mu):
        return np.array(self.value, dtype=float)


def linear_jordan_model(a: float, b: float, c: float, psi: float, beta0: float, gamma0: float) -> FilippovModel:
    """Right field ``Y' = M Y`` in real Jordan form with ``h = aY1 + bY2 + cY3 + psi``.

    The circle ``Y3 = 0`` through the fold point is a grazing cycle of period
    ``2 pi / beta0``.  The left field is a constant pointing into the surface.
    """
    n = np.array([a, b, c], dtype=float)
    left = tuple(n / float(n @ n))
    return FilippovModel("linear_jordan", _ConstantField(left), _LinearJordanRight(beta0, gamma0),
                         _AffineSwitch((a, b, c), psi), grad_h=lambda y, mu: n.copy())


def jordan_grazing_point(a: float, b: float, psi: float) -> np.ndarray:
    return np.array([-a * psi / (a * a + b * b), -b * psi / (a * a + b * b), 0.0])


def dq_global_fd(a: float, b: float, c: float, psi: float, beta0: float, gamma0: float,
                 step: float = 1e-6, opts: IntegrationOptions = SHOOTING_OPTS) -> np.ndarray:
    """Central-difference Jacobian of the Omega return map of the linear Jordan field.

    Points of ``Omega`` near the fold are charted by the perturbations
    ``(e1, e3)`` of the first and third coordinates; the second coordinate
    keeps the point on ``Omega``.
    """
    if not psi > 0:
        raise ValueError("psi must be positive for the cycle to lie where h >= 0")
    model = linear_jordan_model(a, b, c, psi, beta0, gamma0)
    g = jordan_grazing_point(a, b, psi)
    period = 2 * math.pi / beta0
    mu = np.zeros(2)

    def chart(e):
        e1, e3 = e
        return g + np.array([e1, b / a * e1 - c * gamma0 / (a * beta0) * e3, e3])

    def ret(e):
        y = _next_omega(model, mu, chart(e), period, opts)
        return np.array([y[0] - g[0], y[2]])

    return _fd_matrix(ret, 2, step)


# ---------------------------------------------------------------- discontinuity map

def disc_map_linear(model: FilippovModel, params, fold_point) -> DiscMapLinear:
    """Coefficient vector ``Z`` of the linearised discontinuity map at a fold point."""
    mu = np.asarray(params, dtype=float)
    g = np.asarray(fold_point, dtype=float)
    ll = lie_derivative(model, Side.LEFT, g, mu)
    l2 = lie_derivative2(model, g, mu)
    if abs(ll) <= 1e-12 or abs(l2) <= 1e-12:
        raise DegenerateLie(f"L_L h = {ll:.3e}, L_R^2 h = {l2:.3e} at the fold")
    llr = lie_left_of_lie_right(model, g, mu)
    c_r = llr / (l2 * ll)
    c_l = -1.0 / ll
    z = c_r * np.asarray(model.f_right(g, mu), dtype=float) + c_l * np.asarray(model.f_left(g, mu), dtype=float)
    return DiscMapLinear(z, g, (c_r, c_l))


def discontinuity_map_apply(model: FilippovModel, params, x1_on_omega, fold_point,
                            linear: Optional[DiscMapLinear] = None) -> np.ndarray:
    """``X1 + Z h(X1)`` for a point of ``Omega`` just below the surface."""
    mu = np.asarray(params, dtype=float)
    x1 = np.asarray(x1_on_omega, dtype=float)
    hv = model.h(x1, mu)
    if hv > 0:
        raise WrongSide(f"h(x1) = {hv:.3e} > 0: the map is the identity there")
    if linear is None:
        linear = disc_map_linear(model, mu, fold_point)
    return x1 + linear.z_field * hv


@dataclass(frozen=True)
class ExactDiscResult:
    x2: np.ndarray
    x3: np.ndarray
    backward_time: float
    sliding_time: float


def discontinuity_map_exact(model: FilippovModel, params, x1_on_omega,
                            opts: IntegrationOptions = SHOOTING_OPTS, max_time: float = 10.0,
                            details: bool = False):
    """Flow ``f_right`` backward from ``X1`` to the surface, then slide to ``Omega``."""
    mu = np.asarray(params, dtype=float)
    x1 = np.asarray(x1_on_omega, dtype=float)
    h1 = model.h(x1, mu)
    if h1 > 0:
        raise WrongSide(f"h(x1) = {h1:.3e} > 0")
    if h1 == 0:
        res = ExactDiscResult(x1.copy(), x1.copy(), 0.0, 0.0)
        return res if details else res.x3
    fr = lambda y: np.asarray(model.f_right(y, mu), dtype=float)  # noqa: E731
    h = lambda y: model.h(y, mu)  # noqa: E731
    try:
        tb, x2 = integrate_smooth(fr, x1, -max_time, opts, event=h, direction=1)
    except StepFailure as exc:
        raise NoBackwardIntersection(str(exc)) from None
    lie_r = lambda y: lie_derivative(model, Side.RIGHT, y, mu)  # noqa: E731
    lie_l = lambda y: lie_derivative(model, Side.LEFT, y, mu)  # noqa: E731
    fs = lambda y: sliding_field(model, y, mu, check_surface=False)[0]  # noqa: E731
    terms = [_Terminal(lie_r, 1, "omega", initial_sign=-1), _Terminal(lie_l, -1, "left", initial_sign=1)]
    ts, ys, tag, _ = _run_field(fs, 0.0, x2, max_time, terms, [], mu, opts, [], None, 0.0, [])
    if tag == "left":
        raise SlidingExitBeforeOmega("sliding ended at L_L h = 0 before reaching Omega")
    if tag is None:
        raise SlidingExitBeforeOmega("Omega not reached within the time window")
    res = ExactDiscResult(x2, ys[-1], float(-tb), float(ts[-1]))
    return res if details else res.x3


def omega_point_at_depth(model: FilippovModel, params, fold_point, depth: float, max_iter: int = 40) -> np.ndarray:
    """Point of ``Omega`` with ``h = -depth``, reached from the fold point normal to the fold curve."""
    mu = np.asarray(params, dtype=float)
    g = np.asarray(fold_point, dtype=float)
    gh = model.gradient(g, mu)
    gl = grad_lie_right(model, g, mu)
    along = np.cross(gh, gl)
    inward = np.cross(gl, along)
    inward /= np.linalg.norm(inward)
    if gh @ inward > 0:
        inward = -inward
    s = depth / abs(float(gh @ inward))
    x = g
    for _ in range(max_iter):
        x = _omega_project(model, mu, g + s * inward)
        hv = model.h(x, mu)
        if hv < 0:
            s *= depth / -hv
        else:
            s *= 2.0
        if abs(hv + depth) <= 1e-13 * max(1.0, depth):
            break
    return x


def disc_map_scaling(model: FilippovModel, params, fold_point, depths: Sequence[float],
                     opts: IntegrationOptions = SHOOTING_OPTS) -> tuple:
    """``(depths, errors, slope)``: linearised vs exact discontinuity map.

    ``slope`` is the least-squares exponent of ``error ~ depth^slope``.
    """
    mu = np.asarray(params, dtype=float)
    lin = disc_map_linear(model, mu, fold_point)
    errs = []
    for dep in depths:
        x = omega_point_at_depth(model, mu, fold_point, dep)
        a = discontinuity_map_apply(model, mu, x, fold_point, lin)
        b = discontinuity_map_exact(model, mu, x, opts)
        errs.append(float(np.linalg.norm(a - b)))
    d = np.asarray(depths, dtype=float)
    e = np.asarray(errs)
    slope = float(np.polyfit(np.log(d), np.log(e), 1)[0])
    return d, e, slope


# ---------------------------------------------------------------- grazing cycle

def _omega_project(model, mu, x, tol=1e-13):
    y = np.array(x, dtype=float)
    for _ in range(20):
        val = lie_derivative(model, Side.RIGHT, y, mu)
        if abs(val) <= tol:
            break
        n = grad_lie_right(model, y, mu)
        y = y - val * n / float(n @ n)
    return y


def _cycle_guess(model, mu, x_eq_guess, periods, opts):
    """Simulate the right field and return ``(G0, T0)`` from the last H-minimum."""
    x_eq, eig, h_eq = equilibrium_data(model, mu, x_eq_guess)
    grad = model.gradient(x_eq, mu)
    plane = eig.T[:, :2]
    e = -plane @ np.linalg.lstsq(plane, grad, rcond=None)[0]
    e = e / np.linalg.norm(e)
    slope = float(grad @ e)
    start = x_eq + (h_eq / abs(slope) if h_eq > 0 and slope < 0 else 1e-2) * e
    T0 = 2 * math.pi / eig.beta
    fr = lambda y: np.asarray(model.f_right(y, mu), dtype=float)  # noqa: E731
    _, y = integrate_smooth(fr, start, periods * T0, opts)
    lie_r = lambda y: lie_derivative(model, Side.RIGHT, y, mu)  # noqa: E731
    t1, g1 = integrate_smooth(fr, y, 3 * T0, opts, event=lie_r, direction=1, min_time=1e-3 * T0)
    t2, g2 = integrate_smooth(fr, g1, 3 * T0, opts, event=lie_r, direction=1, min_time=0.5 * T0)
    return g2, t2


def find_grazing_cycle(model: FilippovModel, nu: float, eta_guess: float, cycle_guess=None,
                       tol: ToleranceConfig = DEFAULT_TOL, opts: IntegrationOptions = SHOOTING_OPTS,
                       equilibrium_guess=None, periods: int = 200, n_samples: int = 200) -> GrazingCycle:
    """Solve for ``(G, eta, T)`` with ``h(G) = 0``, ``L_R h(G) = 0`` and ``phi_T(G) = G``.

    ``cycle_guess`` is either ``None`` (simulate to find a starting cycle),
    a previous :class:`GrazingCycle`, or a tuple ``(G0, T0)``.
    """
    if isinstance(cycle_guess, GrazingCycle):
        g0, t0 = cycle_guess.grazing_point_G, cycle_guess.period
    elif cycle_guess is not None:
        g0, t0 = np.asarray(cycle_guess[0], dtype=float), float(cycle_guess[1])
    else:
        eq = np.zeros(3) if equilibrium_guess is None else equilibrium_guess
        g0, t0 = _cycle_guess(model, np.array([nu, eta_guess]), eq, periods, opts)

    def flow(x, mu, T):
        return integrate_smooth(lambda y: np.asarray(model.f_right(y, mu), dtype=float), x, T, opts)[1]

    def residual(z):
        g, eta, T = z[:3], z[3], z[4]
        mu = np.array([nu, eta])
        return np.concatenate([[model.h(g, mu), lie_derivative(model, Side.RIGHT, g, mu)],
                               flow(g, mu, T) - g])

    scale = max(1.0, float(np.max(np.abs(g0))))
    newton_tol = ToleranceConfig(abs_tol=max(tol.abs_tol, 1e-11 * scale), rel_tol=tol.rel_tol,
                                 max_iter=tol.max_iter, fd_step=1e-7 * scale)
    z = newton_system(residual, np.concatenate([g0, [eta_guess, t0]]), newton_tol)
    g, eta, T = z[:3], float(z[3]), float(z[4])
    mu = np.array([nu, eta])
    l2 = lie_derivative2(model, g, mu)
    if not l2 > 0:
        raise NotVisibleFold(f"L_R^2 h(G) = {l2:.3e} <= 0")
    fr = lambda y: np.asarray(model.f_right(y, mu), dtype=float)  # noqa: E731
    samples = [g]
    x = g
    for _ in range(n_samples - 1):
        x = integrate_smooth(fr, x, T / n_samples, opts)[1]
        samples.append(x)
    return GrazingCycle(g, T, float(nu), eta, np.array(samples), float(l2))


# ---------------------------------------------------------------- normal form

def omega_basis(model: FilippovModel, params, point) -> np.ndarray:
    """Orthonormal 3x2 basis of the tangent plane of ``Omega`` at ``point``."""
    n = grad_lie_right(model, point, params)
    n = n / np.linalg.norm(n)
    _, _, vt = np.linalg.svd(n[None, :])
    return vt[1:].T


def _next_omega(model, mu, x, period, opts, min_fraction=0.5):
    fr = lambda y: np.asarray(model.f_right(y, mu), dtype=float)  # noqa: E731
    lie_r = lambda y: lie_derivative(model, Side.RIGHT, y, mu)  # noqa: E731
    return integrate_smooth(fr, x, 3 * period, opts, event=lie_r, direction=1,
                          min_time=min_fraction * period)[1]


def global_map_omega(model, gc: GrazingCycle, s, basis, opts=SHOOTING_OPTS) -> np.ndarray:
    """Right-field return map ``Omega -> Omega`` in chart coordinates ``s``."""
    mu = gc.params
    x = _omega_project(model, mu, gc.grazing_point_G + basis @ np.asarray(s, dtype=float))
    y = _next_omega(model, mu, x, gc.period, opts)
    return basis.T @ (y - gc.grazing_point_G)


def _fd_matrix(fun, n, step):
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        cols.append((fun(e) - fun(-e)) / (2 * step))
    return np.column_stack(cols)


def _flow_to_plane(model, mu, x, plane: PlaneSection, period, opts):
    fr = lambda y: np.asarray(model.f_right(y, mu), dtype=float)  # noqa: E731
    g = lambda y: plane.value(y, mu)  # noqa: E731
    return integrate_smooth(fr, x, 3 * period, opts, event=g, direction=plane.direction,
                            min_time=1e-6 * period)[1]


def normal_form_params(model: FilippovModel, grazing: GrazingCycle, section: Optional[PlaneSection] = None,
                       tol: ToleranceConfig = DEFAULT_TOL, opts: IntegrationOptions = SHOOTING_OPTS,
                       fd_rel_step: float = 1e-5) -> NormalFormParams:
    """Normal-form parameters at a grazing cycle.

    Without ``section`` the return map is taken on ``Omega`` itself.  With a
    plane ``section`` (transverse to the cycle where ``h > 0``) both one-sided
    return maps are built on that plane; traces and determinants agree.
    """
    mu = grazing.params
    G = grazing.grazing_point_G
    lin = disc_map_linear(model, mu, G)
    gradh = model.gradient(G, mu)
    disc = lambda x: x + lin.z_field * float(gradh @ (x - G))  # noqa: E731
    step = fd_rel_step * grazing.diameter
    if section is None:
        E = omega_basis(model, mu, G)
        dqg = _fd_matrix(lambda s: global_map_omega(model, grazing, s, E, opts), 2, step)
        dqd = np.eye(2) + np.outer(E.T @ lin.z_field, gradh @ E)
        pl = dqg @ dqd
        return NormalFormParams(float(np.trace(pl)), float(np.linalg.det(pl)), float(np.trace(dqg)),
                                float(np.linalg.det(dqg)), MuSide.AFTER_GRAZING, dqg, dqd)
    normal = np.asarray(section.normal, dtype=float)
    base = _flow_to_plane(model, mu, G, section, grazing.period, opts)
    fb = np.asarray(model.f_right(base, mu), dtype=float)
    if abs(normal @ fb) <= 1e-8 * np.linalg.norm(normal) * np.linalg.norm(fb) or model.h(base, mu) <= 0:
        raise SectionNotTransverse("section is not transverse to the cycle in h > 0")
    _, _, vt = np.linalg.svd(normal[None, :])
    B = vt[1:].T

    def onto_plane(x):
        return x - normal * (float(normal @ (x - np.asarray(section.point))) / float(normal @ normal))

    def pmap(s, use_disc):
        x = onto_plane(base + B @ s)
        y = _next_omega(model, mu, x, grazing.period, opts, 1e-6)
        if use_disc:
            y = disc(y)
        z = _flow_to_plane(model, mu, y, section, grazing.period, opts)
        return B.T @ (z - base)

    pr = _fd_matrix(lambda s: pmap(s, False), 2, step)
    pl = _fd_matrix(lambda s: pmap(s, True), 2, step)
    return NormalFormParams(float(np.trace(pl)), float(np.linalg.det(pl)), float(np.trace(pr)),
                            float(np.linalg.det(pr)), MuSide.AFTER_GRAZING, pr, None)


def normal_form_limits(model: FilippovModel, nus: Sequence[float], eta_guess_fn, equilibrium_guess=None,
                       tol: ToleranceConfig = DEFAULT_TOL, codim2=None) -> tuple:
    """Normal-form parameters along the grazing curve and their limit at the codim-2 point.

    ``codim2 = (nu_c, eta_c, x_c)`` locates the boundary Hopf point (default
    the origin of parameters and state).  ``nus`` is processed from furthest
    to nearest with warm starts: the grazing point is scaled linearly and
    ``eta`` quadratically in ``nu - nu_c``.  Returns ``(rows, (tau_L0,
    tau_R0, delta_R0))`` where rows are ``(nu, eta, params)`` and the limit
    is the polynomial extrapolation to ``nu = nu_c``.
    """
    nu_c, eta_c, x_c = (0.0, 0.0, np.zeros(3)) if codim2 is None else codim2
    x_c = np.asarray(x_c, dtype=float)
    rows = []
    prev = None
    for nu in sorted(nus, key=lambda v: -abs(v - nu_c)):
        if prev is None:
            eta0, guess = eta_guess_fn(nu), None
        else:
            r = (nu - nu_c) / (prev.nu - nu_c)
            eta0 = eta_c + (prev.eta_gs - eta_c) * r * r
            guess = (x_c + (prev.grazing_point_G - x_c) * r, prev.period)
        gc = find_grazing_cycle(model, nu, eta0, guess, tol, equilibrium_guess=equilibrium_guess)
        rows.append((nu, gc.eta_gs, normal_form_params(model, gc, tol=tol)))
        prev = gc
    xs = [r[0] - nu_c for r in rows]
    limits = tuple(neville_at_zero(xs, [getattr(r[2], k) for r in rows]) for k in ("tau_L", "tau_R", "delta_R"))
    return rows, limits
