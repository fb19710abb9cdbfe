"""Equilibrium, eigen-data and genericity diagnostics at a boundary Hopf point.

The right-hand field has an equilibrium ``X*`` with eigenvalues
``alpha +- i beta`` and ``gamma``.  At the codimension-two point
``h(X*) = 0`` and ``alpha = 0`` simultaneously.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDenominator,
    DependentVectors,
    Divergence,
    NearZeroCoefficient,
    NotCodimTwo,
    StepFailure,
)
from .filippov import FilippovModel, IntegrationOptions, integrate_smooth
from .numerics import DEFAULT_TOL, Eigen3Result, ToleranceConfig, eig3, newton_system


class BebType(str, enum.Enum):
    PERSISTENCE = "Persistence"
    NONSMOOTH_FOLD = "NonsmoothFold"


class Criticality(str, enum.Enum):
    SUPERCRITICAL = "Supercritical"
    SUBCRITICAL = "Subcritical"


@dataclass(frozen=True)
class BoundaryHopfReport:
    params: np.ndarray
    equilibrium: np.ndarray
    eigen: Eigen3Result
    u: np.ndarray
    d: np.ndarray
    m_r: np.ndarray
    psi: float
    alpha_eta_slope: float
    u_dot_d: float
    u_minv_d: float
    beb_type: BebType
    chi_hb_sign: Criticality
    lyapunov_coefficient: float
    genericity: dict
    orientation: dict
    limits: tuple
    criticality_method: str = "projection"
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        e = self.eigen
        return {
            "params": self.params.tolist(),
            "equilibrium": self.equilibrium.tolist(),
            "eigen": {"alpha": e.alpha, "beta": e.beta, "gamma": e.gamma,
                      "v": e.v.tolist(), "w": e.w.tolist(), "T": e.T.tolist()},
            "u": self.u.tolist(),
            "d": self.d.tolist(),
            "m_r": self.m_r.tolist(),
            "psi": self.psi,
            "alpha_eta_slope": self.alpha_eta_slope,
            "u_dot_d": self.u_dot_d,
            "u_minv_d": self.u_minv_d,
            "beb_type": self.beb_type.value,
            "chi_hb_sign": self.chi_hb_sign.value,
            "lyapunov_coefficient": self.lyapunov_coefficient,
            "criticality_method": self.criticality_method,
            "genericity": dict(self.genericity),
            "orientation": dict(self.orientation),
            "limits": {"tau_L0": self.limits[0], "tau_R0": self.limits[1], "delta_R0": self.limits[2]},
            **self.extras,
        }


# ---------------------------------------------------------------- equilibrium

def find_equilibrium(model: FilippovModel, params, guess, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Zero of the right-hand field by Newton's method from ``guess``."""
    mu = np.asarray(params, dtype=float)
    return newton_system(lambda x: np.asarray(model.f_right(x, mu), dtype=float), guess, tol,
                         jac=lambda x: model.jacobian_right(x, mu))


def equilibrium_data(model: FilippovModel, params, guess, tol: ToleranceConfig = DEFAULT_TOL):
    """Return ``(X*, eigen-data, h(X*))``."""
    x = find_equilibrium(model, params, guess, tol)
    eig = eig3(model.jacobian_right(x, params), tol)
    return x, eig, float(model.h(x, params))


def locate_codim2(model: FilippovModel, params_guess, x_guess, tol: ToleranceConfig = DEFAULT_TOL):
    """Refine the parameters so that ``h(X*) = 0`` and ``alpha = 0``."""
    state = {"x": np.asarray(x_guess, dtype=float)}

    def residual(p):
        x, eig, hv = equilibrium_data(model, p, state["x"], tol)
        state["x"] = x
        return np.array([hv, eig.alpha])

    mu = newton_system(residual, np.asarray(params_guess, dtype=float),
                       ToleranceConfig(abs_tol=max(tol.abs_tol, 1e-11), rel_tol=tol.rel_tol,
                                       max_iter=tol.max_iter, fd_step=1e-6))
    return mu, state["x"]


# ---------------------------------------------------------------- closed forms

def theorem1_limits(u, d, v, w, beta0: float, gamma0: float, abs_tol: float = 1e-12) -> tuple:
    """Limiting ``(tau_L, tau_R, delta_R)`` at the boundary Hopf point.

    ``e = exp(2 pi gamma0 / beta0)`` is the nontrivial Floquet multiplier of
    the vanishing limit cycle.
    """
    u, d, v, w = (np.asarray(a, dtype=float) for a in (u, d, v, w))
    ud = float(u @ d)
    if abs(ud) <= abs_tol:
        raise DegenerateDenominator("u . d vanishes")
    if not beta0 > 0:
        raise ValueError("beta0 must be positive")
    e = math.exp(2.0 * math.pi * gamma0 / beta0)
    tau_l = float(u @ v) * float(w @ d) / ud * (1.0 - e) + e
    tau_r = e + 1.0
    # delta_R from tau_R so that tau_R - delta_R is exactly 1 for e <= 1
    return tau_l, tau_r, tau_r - 1.0


# ---------------------------------------------------------------- Hopf coefficient

def _bilinear(f, x0, a, b, h):
    """Second derivative ``D^2 f(x0)[a, b]`` for real directions by polarisation."""
    s = 0.0
    for s1 in (1, -1):
        for s2 in (1, -1):
            s = s + s1 * s2 * f(x0 + h * (s1 * a + s2 * b))
    return s / (4 * h * h)


def _trilinear(f, x0, a, b, c, h):
    s = 0.0
    for s1 in (1, -1):
        for s2 in (1, -1):
            for s3 in (1, -1):
                s = s + s1 * s2 * s3 * f(x0 + h * (s1 * a + s2 * b + s3 * c))
    return s / (8 * h ** 3)


def _complex_multilinear(form, args):
    """Extend a real multilinear form to complex arguments."""
    parts = [(np.real(a), np.imag(a)) for a in args]
    total = np.zeros(len(args[0]), dtype=complex)
    n = len(args)
    for mask in range(2 ** n):
        vecs, factor = [], 1 + 0j
        for k in range(n):
            if mask >> k & 1:
                vecs.append(parts[k][1])
                factor *= 1j
            else:
                vecs.append(parts[k][0])
        if all(np.any(v != 0) for v in vecs):
            total = total + factor * form(*vecs)
    return total


def first_lyapunov_coefficient(model: FilippovModel, params, equilibrium) -> float:
    """First Lyapunov coefficient of the right field by the projection method.

    Second and third derivatives come from central differences of the field.
    """
    mu = np.asarray(params, dtype=float)
    x0 = np.asarray(equilibrium, dtype=float)
    A = model.jacobian_right(x0, mu)
    lam, vecs = np.linalg.eig(A)
    k = int(np.argmax(lam.imag))
    omega = float(lam[k].imag)
    if omega <= 0:
        raise DegenerateDenominator("no complex eigenvalue pair")
    q = vecs[:, k] / np.linalg.norm(vecs[:, k])
    lamT, vecsT = np.linalg.eig(A.T)
    p = vecsT[:, int(np.argmin(np.abs(lamT - np.conj(lam[k]))))]
    p = p / np.conj(np.vdot(p, q))

    scale = max(1.0, float(np.max(np.abs(x0))))
    h2, h3 = 1e-4 * scale, 2e-3 * scale
    f = lambda y: np.asarray(model.f_right(y, mu), dtype=float)  # noqa: E731
    B = lambda a, b: _complex_multilinear(lambda r, s: _bilinear(f, x0, r, s, h2), (a, b))  # noqa: E731
    C = lambda a, b, c: _complex_multilinear(  # noqa: E731
        lambda r, s, t: _trilinear(f, x0, r, s, t, h3), (a, b, c))
    qb = np.conj(q)
    term1 = np.vdot(p, C(q, q, qb))
    term2 = np.vdot(p, B(q, np.linalg.solve(A, B(q, qb))))
    term3 = np.vdot(p, B(qb, np.linalg.solve(2j * omega * np.eye(3) - A, B(q, q))))
    return float(np.real(term1 - 2 * term2 + term3) / (2 * omega))


def criticality_by_simulation(model: FilippovModel, params, equilibrium, eta_index: int = 1,
                              offset: float = 0.05) -> Criticality:
    """Decide the Hopf criticality from the side on which a small cycle exists.

    The second parameter is pushed to where the equilibrium is weakly unstable;
    a bounded small oscillation there means the cycle is stable (supercritical).
    """
    mu0 = np.asarray(params, dtype=float)
    x0 = np.asarray(equilibrium, dtype=float)
    eig0 = eig3(model.jacobian_right(x0, mu0))
    step = 1e-5 * max(1.0, abs(mu0[eta_index]))
    mp, mm = mu0.copy(), mu0.copy()
    mp[eta_index] += step
    mm[eta_index] -= step
    slope = (eig3(model.jacobian_right(find_equilibrium(model, mp, x0), mp)).alpha
             - eig3(model.jacobian_right(find_equilibrium(model, mm, x0), mm)).alpha) / (2 * step)
    if slope == 0:
        raise NearZeroCoefficient("alpha does not vary with the second parameter")
    mu = mu0.copy()
    mu[eta_index] += np.sign(slope) * offset * max(1.0, abs(mu0[eta_index]))
    xe = find_equilibrium(model, mu, x0)
    eig = eig3(model.jacobian_right(xe, mu))
    period = 2 * math.pi / eig.beta
    scale = max(1.0, float(np.max(np.abs(xe))))
    start = xe + 1e-3 * scale * eig.T[:, 0] / np.linalg.norm(eig.T[:, 0])
    opts = IntegrationOptions(rtol=1e-8, atol=1e-10, divergence_bound=1e3 * scale)
    f = lambda y: np.asarray(model.f_right(y, mu), dtype=float)  # noqa: E731
    try:
        _, y = integrate_smooth(f, start, 300 * period, opts)
        amp = 0.0
        for _k in range(20):
            _, y = integrate_smooth(f, y, period / 10, opts)
            amp = max(amp, float(np.linalg.norm(y - xe)))
    except (Divergence, StepFailure):
        return Criticality.SUBCRITICAL
    bound = 20 * math.sqrt(abs(eig.alpha) + 1e-12) * scale * max(1.0, np.linalg.norm(eig0.T))
    return Criticality.SUPERCRITICAL if amp <= bound else Criticality.SUBCRITICAL


def hopf_criticality(model: FilippovModel, params_on_hopf, equilibrium,
                     tol: ToleranceConfig = DEFAULT_TOL, resolution: float = 1e-6) -> tuple:
    """Return ``(Criticality, first Lyapunov coefficient)``.

    Raises :class:`NearZeroCoefficient` when the coefficient cannot be
    separated from zero.
    """
    l1 = first_lyapunov_coefficient(model, params_on_hopf, equilibrium)
    scale = max(1.0, float(np.max(np.abs(equilibrium))))
    if not np.isfinite(l1) or abs(l1) <= resolution * scale:
        raise NearZeroCoefficient(f"first Lyapunov coefficient {l1:.3e} below resolution")
    return (Criticality.SUPERCRITICAL if l1 < 0 else Criticality.SUBCRITICAL), l1


# ---------------------------------------------------------------- report

def _angle(a, b) -> float:
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.acos(min(1.0, c))


def genericity_report(model: FilippovModel, params_codim2, equilibrium_guess,
                      tol: ToleranceConfig = DEFAULT_TOL, refine: bool = True,
                      codim2_tol: float = 1e-6, sign_tol: float = 1e-9) -> BoundaryHopfReport:
    """All diagnostics at (a refinement of) the boundary Hopf point."""
    mu = np.asarray(params_codim2, dtype=float)
    x = np.asarray(equilibrium_guess, dtype=float)
    if refine:
        mu, x = locate_codim2(model, mu, x, tol)
    x, eig, hv = equilibrium_data(model, mu, x, tol)
    scale = max(1.0, float(np.max(np.abs(x))))
    if abs(hv) > codim2_tol * scale or abs(eig.alpha) > codim2_tol * max(1.0, eig.beta):
        raise NotCodimTwo(f"h(X*) = {hv:.3e}, alpha = {eig.alpha:.3e}")
    u = model.gradient(x, mu)
    d = np.asarray(model.f_left(x, mu), dtype=float)
    M = model.jacobian_right(x, mu)
    if _angle(u, eig.w) <= 1e-6:
        raise DependentVectors("u and w are linearly dependent")

    def hstar(p):
        xe = find_equilibrium(model, p, x, tol)
        return float(model.h(xe, p))

    def alpha_of(p):
        xe = find_equilibrium(model, p, x, tol)
        return eig3(model.jacobian_right(xe, p), tol).alpha

    steps = [1e-5 * max(1.0, abs(m)) for m in mu]
    e0, e1 = np.array([steps[0], 0.0]), np.array([0.0, steps[1]])
    psi = (hstar(mu + e0) - hstar(mu - e0)) / (2 * steps[0])
    slope = (alpha_of(mu + e1) - alpha_of(mu - e1)) / (2 * steps[1])

    ud = float(u @ d)
    uminvd = float(u @ np.linalg.solve(M, d))
    beb = BebType.PERSISTENCE if uminvd < 0 else BebType.NONSMOOTH_FOLD
    method = "projection"
    try:
        chi, l1 = hopf_criticality(model, mu, x, tol)
    except NearZeroCoefficient:
        chi, l1, method = criticality_by_simulation(model, mu, x), float("nan"), "simulation"
    flags = {
        "aEigs": bool(eig.beta > 0 and abs(eig.gamma) > sign_tol),
        "avL": bool(ud > sign_tol),
        "anu": bool(psi > sign_tol),
        "aeta": bool(slope > sign_tol),
        "aLimitCycle": bool(method == "projection"),
        "auw": bool(_angle(u, eig.w) > 1e-6),
    }
    orientation = {"nu": int(np.sign(psi)), "eta": int(np.sign(slope))}
    limits = theorem1_limits(u, d, eig.v, eig.w, eig.beta, eig.gamma)
    T = eig.T
    abc = u @ T
    pqr = np.linalg.solve(T, d)
    extras = {"h_at_equilibrium": hv, "uT": abc.tolist(), "Tinv_d": pqr.tolist(),
              "generic_up_to_orientation": bool(flags["aEigs"] and flags["avL"] and abs(psi) > sign_tol
                                                and abs(slope) > sign_tol and flags["aLimitCycle"]
                                                and flags["auw"])}
    return BoundaryHopfReport(mu, x, eig, u, d, M, float(psi), float(slope), ud, uminvd, beb, chi,
                              float(l1), flags, orientation, limits, method, extras)
