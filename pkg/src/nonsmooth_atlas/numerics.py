"""Small numerical kernels shared by the analysis modules.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateSpectrum,
    NoBracket,
    NoConvergence,
    NonInvertibleTransform,
    SingularJacobian,
)

EPS = np.finfo(float).eps
_CBRT_EPS = EPS ** (1.0 / 3.0)


@dataclass(frozen=True)
class ToleranceConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iter: int = 50
    fd_step: Optional[float] = None  # None -> eps^(1/3) * max(1, |x|)

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ValueError("fd_step must be positive")

    def step_for(self, x) -> float:
        if self.fd_step is not None:
            return self.fd_step
        return _CBRT_EPS * max(1.0, float(np.linalg.norm(np.atleast_1d(x))))


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class Eigen3Result:
    """Eigen-data of a 3x3 matrix with one real eigenvalue and a complex pair.

    ``T`` puts the matrix in real Jordan form
    ``[[alpha, beta, 0], [-beta, alpha, 0], [0, 0, gamma]]`` and ``w @ v == 1``.
    """

    alpha: float
    beta: float
    gamma: float
    v: np.ndarray
    w: np.ndarray
    T: np.ndarray

    @property
    def jordan(self) -> np.ndarray:
        a, b, g = self.alpha, self.beta, self.gamma
        return np.array([[a, b, 0.0], [-b, a, 0.0], [0.0, 0.0, g]])


def scalar_root_bracketed(f: Callable[[float], float], lo: float, hi: float,
                          tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Root of ``f`` in ``[lo, hi]`` by Brent's method.

    Raises :class:`NoBracket` when ``f(lo)`` and ``f(hi)`` share a sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise NoBracket(f"f({lo})={flo:g} and f({hi})={fhi:g} do not bracket a root")
    try:
        x, info = brentq(f, lo, hi, xtol=tol.abs_tol, rtol=max(tol.rel_tol, 4 * EPS),
                         maxiter=tol.max_iter * 4, full_output=True, disp=False)
    except RuntimeError as exc:  # pragma: no cover - disp=False keeps brentq quiet
        raise NoConvergence(str(exc)) from exc
    if not info.converged:
        raise NoConvergence(f"brentq stopped after {info.iterations} iterations")
    return float(x)


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x, step: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x`` (shape ``len(f(x)) x len(x)``)."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = _CBRT_EPS * max(1.0, float(np.linalg.norm(x)))
    cols = []
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = step
        fp = np.atleast_1d(np.asarray(f(x + dx), dtype=float))
        fm = np.atleast_1d(np.asarray(f(x - dx), dtype=float))
        cols.append((fp - fm) / (2.0 * step))
    return np.column_stack(cols)


def fd_gradient(f: Callable[[np.ndarray], float], x, step: Optional[float] = None) -> np.ndarray:
    return fd_jacobian(lambda y: np.atleast_1d(f(y)), x, step)[0]


def newton_system(f: Callable[[np.ndarray], np.ndarray], x0, tol: ToleranceConfig = DEFAULT_TOL,
                  jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                  damping: bool = True) -> np.ndarray:
    """Damped Newton iteration for a small square system ``f(x) = 0``.

    The Jacobian is approximated by central differences unless ``jac`` is given.
    Steps are halved (up to 8 times) while the residual norm does not decrease.
    """
    x = np.array(x0, dtype=float)
    fx = np.atleast_1d(np.asarray(f(x), dtype=float))
    res = float(np.linalg.norm(fx))
    for _ in range(tol.max_iter):
        if res <= tol.abs_tol:
            return x
        J = jac(x) if jac is not None else fd_jacobian(f, x, tol.step_for(x))
        try:
            if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e15:
                raise np.linalg.LinAlgError
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"singular Jacobian at x={x}") from exc
        lam = 1.0
        for _k in range(9 if damping else 1):
            x_new = x + lam * dx
            f_new = np.atleast_1d(np.asarray(f(x_new), dtype=float))
            r_new = float(np.linalg.norm(f_new))
            if np.isfinite(r_new) and (r_new < res or not damping):
                break
            lam *= 0.5
        else:
            raise NoConvergence(f"Newton line search stalled at residual {res:.3e}")
        x, fx, res = x_new, f_new, r_new
    if res <= tol.abs_tol:
        return x
    raise NoConvergence(f"Newton did not converge in {tol.max_iter} iterations (residual {res:.3e})")


def _phase_normalise(u: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(u) - 1e-12 * np.arange(u.size)))  # first of (near-)ties
    return u / u[k]


def eig3(M, tol: ToleranceConfig = DEFAULT_TOL) -> Eigen3Result:
    """Eigen-decomposition of a 3x3 matrix with a complex pair and a real eigenvalue.

    Returns the real Jordan transform ``T = [Re q, Im q, v]`` where ``q`` is the
    eigenvector of ``alpha + i beta`` scaled so its largest entry is ``1``; ``v``
    has unit norm and the left vector ``w`` satisfies ``w @ v = 1``.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError("eig3 expects a 3x3 matrix")
    lam, vecs = np.linalg.eig(M)
    scale = max(1.0, float(np.max(np.abs(lam))))
    im = np.abs(lam.imag)
    k_real = int(np.argmin(im))
    k_cplx = [k for k in range(3) if k != k_real]
    if im[k_cplx[0]] <= tol.abs_tol * scale:
        raise DegenerateSpectrum(f"eigenvalues {lam} are all real (beta ~ 0)")
    k_pos = k_cplx[0] if lam[k_cplx[0]].imag > 0 else k_cplx[1]
    mu = lam[k_pos]
    alpha, beta = float(mu.real), float(mu.imag)
    gamma = float(lam[k_real].real)

    q = _phase_normalise(vecs[:, k_pos])
    v = np.real(vecs[:, k_real])
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    lamT, vecsT = np.linalg.eig(M.T)
    kw = int(np.argmin(np.abs(lamT - gamma)))
    w = np.real(vecsT[:, kw])
    wv = float(w @ v)
    if abs(wv) <= tol.abs_tol:
        raise DegenerateSpectrum("left and right real eigenvectors are orthogonal")
    w = w / wv
    T = np.column_stack([q.real, q.imag, v])
    if abs(np.linalg.det(T)) <= tol.abs_tol * max(1.0, np.linalg.norm(T)) ** 3:
        raise NonInvertibleTransform("real Jordan transform is singular")
    return Eigen3Result(alpha, beta, gamma, v, w, T)


def neville_at_zero(xs, ys) -> float:
    """Value at ``x = 0`` of the interpolating polynomial through ``(xs, ys)``.

    With a geometric sequence of ``xs`` this is Richardson extrapolation.
    """
    xs = np.asarray(xs, dtype=float)
    p = np.array(ys, dtype=float)
    n = xs.size
    for m in range(1, n):
        p[: n - m] = (xs[m:] * p[: n - m] - xs[: n - m] * p[1: n - m + 1]) / (xs[m:] - xs[: n - m])
    return float(p[0])
