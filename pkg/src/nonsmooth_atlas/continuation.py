"""Natural-parameter continuation of the codimension-one curves and 1-d sweeps.

All curves are graphs over one parameter in the windows of interest, so each
point is found by stepping one parameter and solving for the other with
Newton or bracketed root finding, warm-started from the previous point.
"""
from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .boundary_hopf import BebType, equilibrium_data, find_equilibrium
from .errors import (
    AtlasError,
    Divergence,
    EigenvalueTrackingLost,
    LostEquilibrium,
    NoConvergence,
    SingularJacobian,
    StepFailure,
    ZenoGuard,
)
from .filippov import (
    EventKind,
    FilippovModel,
    IntegrationOptions,
    OmegaSection,
    PlaneSection,
    Regime,
    integrate_hybrid,
)
from .grazing import GrazingCycle, find_grazing_cycle, normal_form_params
from .numerics import DEFAULT_TOL, ToleranceConfig, eig3, fd_jacobian, newton_system, scalar_root_bracketed


class CurveKind(str, enum.Enum):
    HOPF = "Hopf"
    BEB = "BEB"
    GRAZING_SLIDING = "GrazingSliding"
    PERIOD_DOUBLING = "PeriodDoubling"


class MarkerKind(str, enum.Enum):
    BOUNDARY_HOPF = "BoundaryHopf"
    TAU_L_PLUS_ONE = "TauLPlusOne"
    TAU_L_MINUS_ONE = "TauLMinusOne"
    BEB_TYPE_FLIP = "BebTypeFlip"


class CycleUnstableWarning(UserWarning):
    """The grazing cycle is unstable (the curve is drawn dashed)."""


@dataclass
class CurvePoint:
    param1: float
    param2: float
    residual: float
    payload: dict = field(default_factory=dict)


@dataclass
class Marker:
    index: int
    kind: MarkerKind
    param1: float
    param2: float


@dataclass
class BifurcationCurve:
    kind: CurveKind
    points: list = field(default_factory=list)
    codim2_markers: list = field(default_factory=list)

    def params(self) -> np.ndarray:
        return np.array([[p.param1, p.param2] for p in self.points])

    def rows(self) -> list:
        marks = {}
        for m in self.codim2_markers:
            marks.setdefault(m.index, []).append(m.kind.value)
        return [(p.param1, p.param2, self.kind.value, p.residual, ";".join(marks.get(i, [])))
                for i, p in enumerate(self.points)]


def _values(rng) -> np.ndarray:
    """``(lo, hi, step)`` or an explicit sequence -> array of parameter values."""
    if isinstance(rng, tuple) and len(rng) == 3:
        lo, hi, step = (float(v) for v in rng)
        if step == 0 or (hi - lo) * step < 0:
            raise ValueError("range step must be nonzero and point from lo to hi")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(n)
    return np.asarray(list(rng), dtype=float)


def _stepper(values, solve, max_halvings=5):
    """Visit ``values`` in order; on failure retry through halved sub-steps."""
    out = []
    prev_v = None
    for v in values:
        if prev_v is None:
            out.append((v, solve(v)))
            prev_v = v
            continue
        target, cur = v, prev_v
        h = target - cur
        halvings = 0
        while cur != target:
            nxt = target if abs(target - cur) <= abs(h) else cur + h
            try:
                res = solve(nxt)
            except (NoConvergence, SingularJacobian, LostEquilibrium, StepFailure):
                halvings += 1
                if halvings > max_halvings:
                    raise
                h /= 2
                continue
            cur = nxt
            if cur == target:
                out.append((v, res))
        prev_v = v
    return out


# ---------------------------------------------------------------- Hopf and BEB

def _equilibrium(model, mu, guess, tol):
    try:
        return equilibrium_data(model, mu, guess, tol)
    except (NoConvergence, SingularJacobian) as exc:
        raise LostEquilibrium(f"equilibrium lost at params {mu}: {exc}") from None


def trace_hopf_curve(model: FilippovModel, start_params, param1_range, tol: ToleranceConfig = DEFAULT_TOL,
                     equilibrium_guess=None) -> BifurcationCurve:
    """Zero set of ``alpha`` (real part of the complex pair), stepping parameter 1."""
    state = {"x": np.zeros(3) if equilibrium_guess is None else np.asarray(equilibrium_guess, float),
             "p2": float(start_params[1])}

    def solve(p1):
        def alpha(p2):
            x, eig, _ = _equilibrium(model, [p1, p2[0]], state["x"], tol)
            state["x"] = x
            return np.array([eig.alpha])

        p2 = float(newton_system(alpha, [state["p2"]], tol)[0])
        x, eig, hv = _equilibrium(model, [p1, p2], state["x"], tol)
        state["x"], state["p2"] = x, p2
        return p2, abs(eig.alpha), {"equilibrium": x, "beta": eig.beta, "h": hv}

    curve = BifurcationCurve(CurveKind.HOPF)
    for p1, (p2, res, payload) in _stepper(_values(param1_range), solve):
        curve.points.append(CurvePoint(float(p1), p2, res, payload))
    _mark_sign_change(curve, "h", MarkerKind.BOUNDARY_HOPF)
    return curve


def trace_beb_curve(model: FilippovModel, start_params, param2_range, tol: ToleranceConfig = DEFAULT_TOL,
                    equilibrium_guess=None) -> BifurcationCurve:
    """Zero set of ``h(X*)``, stepping parameter 2 and solving for parameter 1."""
    state = {"x": np.zeros(3) if equilibrium_guess is None else np.asarray(equilibrium_guess, float),
             "p1": float(start_params[0])}

    def solve(p2):
        def hstar(p1):
            x, _, hv = _equilibrium(model, [p1[0], p2], state["x"], tol)
            state["x"] = x
            return np.array([hv])

        p1 = float(newton_system(hstar, [state["p1"]], tol)[0])
        mu = np.array([p1, p2])
        x, eig, hv = _equilibrium(model, mu, state["x"], tol)
        state["x"], state["p1"] = x, p1
        u = model.gradient(x, mu)
        d = np.asarray(model.f_left(x, mu), dtype=float)
        uminvd = float(u @ np.linalg.solve(model.jacobian_right(x, mu), d))
        beb = BebType.PERSISTENCE if uminvd < 0 else BebType.NONSMOOTH_FOLD
        return p1, abs(hv), {"equilibrium": x, "alpha": eig.alpha, "u_minv_d": uminvd, "beb_type": beb}

    curve = BifurcationCurve(CurveKind.BEB)
    for p2, (p1, res, payload) in _stepper(_values(param2_range), solve):
        curve.points.append(CurvePoint(p1, float(p2), res, payload))
    _mark_sign_change(curve, "alpha", MarkerKind.BOUNDARY_HOPF)
    _mark_sign_change(curve, "u_minv_d", MarkerKind.BEB_TYPE_FLIP)
    return curve


def _mark_sign_change(curve, key, kind):
    pts = curve.points
    for i in range(1, len(pts)):
        a, b = pts[i - 1].payload[key], pts[i].payload[key]
        if a == 0 or a * b < 0:
            j = i - 1 if abs(a) <= abs(b) else i
            curve.codim2_markers.append(Marker(j, kind, pts[j].param1, pts[j].param2))


# ---------------------------------------------------------------- grazing-sliding

def trace_gs_curve(model: FilippovModel, param1_range, eta_guess: float, tol: ToleranceConfig = DEFAULT_TOL,
                   equilibrium_guess=None, cycle_guess=None, refine_markers: bool = True) -> BifurcationCurve:
    """Grazing-sliding curve with normal-form parameters at every point.

    Points where ``tau_L`` crosses ``+1`` or ``-1`` are refined by bracketed
    root finding and reported as markers (payload ``marker_param1``).
    """
    state = {"gc": cycle_guess, "eta": float(eta_guess)}

    def solve(p1):
        prev = state["gc"]
        eta0 = state["eta"] if prev is None else prev.eta_gs
        gc = find_grazing_cycle(model, p1, eta0, prev, tol, equilibrium_guess=equilibrium_guess)
        nf = normal_form_params(model, gc, tol=tol)
        state["gc"], state["eta"] = gc, gc.eta_gs
        return gc, nf

    curve = BifurcationCurve(CurveKind.GRAZING_SLIDING)
    for p1, (gc, nf) in _stepper(_values(param1_range), solve):
        mults = np.linalg.eigvals(nf.dq_global)
        stable_floquet = bool(np.all(np.abs(mults) < 1))
        stable = bool(nf.delta_R > nf.tau_R - 1)
        if not (stable and stable_floquet):
            warnings.warn(f"grazing cycle unstable at param1 = {p1:.6g}", CycleUnstableWarning, stacklevel=2)
        mu = gc.params
        res = max(abs(model.h(gc.grazing_point_G, mu)),
                  abs(float(model.gradient(gc.grazing_point_G, mu) @ model.f_right(gc.grazing_point_G, mu))))
        curve.points.append(CurvePoint(float(p1), gc.eta_gs, res,
                                       {"cycle": gc, "nf": nf, "stable": stable,
                                        "stable_floquet": stable_floquet}))
    pts = curve.points
    for i in range(1, len(pts)):
        for level, kind in ((1.0, MarkerKind.TAU_L_PLUS_ONE), (-1.0, MarkerKind.TAU_L_MINUS_ONE)):
            a = pts[i - 1].payload["nf"].tau_L - level
            b = pts[i].payload["nf"].tau_L - level
            if a * b < 0:
                p1m = None
                if refine_markers:
                    p1m = _refine_tau_crossing(model, pts[i - 1], pts[i], level, tol, equilibrium_guess)
                j = i - 1 if abs(a) <= abs(b) else i
                m = Marker(j, kind, pts[j].param1, pts[j].param2)
                if p1m is not None:
                    m.param1, m.param2 = p1m
                curve.codim2_markers.append(m)
    return curve


def _refine_tau_crossing(model, pa, pb, level, tol, equilibrium_guess):
    cache = {"gc": pa.payload["cycle"]}

    def f(p1):
        gc = find_grazing_cycle(model, p1, cache["gc"].eta_gs, cache["gc"], tol,
                                equilibrium_guess=equilibrium_guess)
        cache["gc"] = gc
        return normal_form_params(model, gc, tol=tol).tau_L - level

    p1 = scalar_root_bracketed(f, pa.param1, pb.param1, ToleranceConfig(abs_tol=1e-7, rel_tol=1e-9))
    return p1, cache["gc"].eta_gs


def gs_crossing(model: FilippovModel, level: float, param1_bracket, eta_guess: float,
                tol: ToleranceConfig = DEFAULT_TOL, equilibrium_guess=None) -> tuple:
    """Parameter value on the grazing curve where ``tau_L = level``.

    Returns ``(param1, param2)``.
    """
    curve = trace_gs_curve(model, list(param1_bracket), eta_guess, tol, equilibrium_guess, refine_markers=True)
    kind = MarkerKind.TAU_L_PLUS_ONE if level > 0 else MarkerKind.TAU_L_MINUS_ONE
    for m in curve.codim2_markers:
        if m.kind is kind:
            return m.param1, m.param2
    raise EigenvalueTrackingLost(f"tau_L does not cross {level:+g} in the bracket")


# ---------------------------------------------------------------- period doubling

@dataclass
class SectionCycle:
    point: np.ndarray
    period: float
    multipliers: np.ndarray
    jacobian: np.ndarray
    sliding_segments: int


def _plane_basis(normal):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    _, _, vt = np.linalg.svd(n[None, :])
    return vt[1:].T


def _first_return(model, mu, plane, x, period_guess, opts):
    tr = integrate_hybrid(model, x, mu, 5 * period_guess, sections=[plane], opts=opts,
                          stop_at_hit=(0, 1), min_hit_time=0.3 * period_guess)
    hits = tr.hits(plane.name)
    if not hits:
        raise NoConvergence("orbit did not return to the section")
    n_slide = sum(1 for s in tr.segments if s.regime is Regime.SLIDING)
    return hits[-1].state, hits[-1].time, n_slide


def find_section_cycle(model: FilippovModel, params, plane: PlaneSection, x_guess, period_guess: float,
                       opts: IntegrationOptions = IntegrationOptions(rtol=1e-11, atol=1e-13),
                       tol: ToleranceConfig = ToleranceConfig(abs_tol=1e-9)) -> SectionCycle:
    """Fixed point of the hybrid first-return map on a plane, with FD multipliers."""
    mu = np.asarray(params, dtype=float)
    B = _plane_basis(plane.normal)
    p0 = np.asarray(plane.point, dtype=float)
    n = np.asarray(plane.normal, dtype=float)
    x0 = np.asarray(x_guess, dtype=float)
    x0 = x0 - n * float(n @ (x0 - p0)) / float(n @ n)
    base = x0

    def pmap(s):
        y, _, _ = _first_return(model, mu, plane, base + B @ s, period_guess, opts)
        return B.T @ (y - base)

    scale = max(1.0, float(np.max(np.abs(base))))
    ntol = ToleranceConfig(abs_tol=tol.abs_tol * scale, rel_tol=tol.rel_tol, max_iter=tol.max_iter,
                           fd_step=1e-6 * scale)
    s = newton_system(lambda s: pmap(s) - s, np.zeros(2), ntol)
    J = fd_jacobian(pmap, s, 1e-6 * scale)
    point = base + B @ s
    _, t, n_slide = _first_return(model, mu, plane, point, period_guess, opts)
    return SectionCycle(point, float(t), np.linalg.eigvals(J), J, n_slide)


def _pd_indicator(cycle: SectionCycle) -> float:
    """``lambda + 1`` for the real negative multiplier closest to -1."""
    m = cycle.multipliers
    real_neg = [float(v.real) for v in m if abs(v.imag) <= 1e-9 and v.real < 0]
    if not real_neg:
        raise EigenvalueTrackingLost(f"no real negative multiplier (multipliers {m})")
    lam = min(real_neg, key=lambda v: abs(v + 1))
    return lam + 1.0


def pd_point(model: FilippovModel, param1: float, param2_bracket, plane: PlaneSection, x_guess,
             period_guess: float, opts: IntegrationOptions = IntegrationOptions(rtol=1e-11, atol=1e-13),
             n_scan: int = 6, xtol: float = 1e-6) -> tuple:
    """Solve ``lambda(param2) = -1`` at fixed ``param1``.

    The bracket is scanned with warm-started cycles; returns
    ``(param2, SectionCycle)``.
    """
    lo, hi = (float(v) for v in param2_bracket)
    state = {"x": np.asarray(x_guess, dtype=float), "T": float(period_guess)}

    def cyc(p2):
        c = find_section_cycle(model, [param1, p2], plane, state["x"], state["T"], opts)
        state["x"], state["T"] = c.point, c.period
        return c

    grid = np.linspace(lo, hi, n_scan)
    vals = []
    for p2 in grid:
        vals.append(_pd_indicator(cyc(p2)))
        if len(vals) > 1 and vals[-2] * vals[-1] <= 0:
            a, b = grid[len(vals) - 2], grid[len(vals) - 1]
            break
    else:
        raise EigenvalueTrackingLost(f"multiplier does not cross -1 on [{lo}, {hi}] (lambda+1 = {vals})")
    p2 = scalar_root_bracketed(lambda p: _pd_indicator(cyc(p)), a, b, ToleranceConfig(abs_tol=xtol))
    return p2, cyc(p2)


def default_pd_section(model: FilippovModel, params, equilibrium_guess) -> PlaneSection:
    """Plane through the equilibrium containing the real eigen-direction and ``Re q``."""
    x, eig, _ = equilibrium_data(model, params, equilibrium_guess)
    Tinv = np.linalg.inv(eig.T)
    return PlaneSection(point=tuple(x), normal=tuple(Tinv[1]), direction=1, name="pd_plane")


def trace_pd_curve(model: FilippovModel, start_params, param1_range, param2_window: float,
                   x_guess, period_guess: float, plane: Optional[PlaneSection] = None,
                   equilibrium_guess=None) -> BifurcationCurve:
    """Period-doubling curve: for each parameter-1 value, bracket parameter 2
    within ``+- param2_window`` of the previous solution."""
    mu0 = np.asarray(start_params, dtype=float)
    if plane is None:
        plane = default_pd_section(model, mu0, np.zeros(3) if equilibrium_guess is None else equilibrium_guess)
    state = {"p2": float(mu0[1]), "x": np.asarray(x_guess, dtype=float), "T": float(period_guess)}
    curve = BifurcationCurve(CurveKind.PERIOD_DOUBLING)
    for p1 in _values(param1_range):
        p2, c = pd_point(model, float(p1), (state["p2"] - param2_window, state["p2"] + param2_window),
                         plane, state["x"], state["T"])
        state.update(p2=p2, x=c.point, T=c.period)
        curve.points.append(CurvePoint(float(p1), float(p2), abs(_pd_indicator(c)),
                                       {"cycle_point": c.point, "period": c.period,
                                        "multipliers": c.multipliers, "sliding_segments": c.sliding_segments}))
    return curve


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepPoint:
    value: float
    hit_values: np.ndarray
    extent: float
    hit_spread: float
    sliding_segments: int
    diverged: bool
    final_state: np.ndarray
    error: str = ""


def _bbox_diag(states: np.ndarray) -> float:
    return float(np.linalg.norm(states.max(axis=0) - states.min(axis=0)))


def _sweep_one(model, mu, x0, transient, sample_time, opts):
    omega = OmegaSection(model, direction=1)
    try:
        tr = integrate_hybrid(model, x0, mu, transient, opts=opts)
        x1 = tr.final_state
        tr = integrate_hybrid(model, x1, mu, sample_time, sections=[omega], opts=opts)
    except (Divergence, ZenoGuard, StepFailure) as exc:
        return SweepPoint(float("nan"), np.array([]), float("nan"), float("nan"), 0, True,
                          np.full(3, np.nan), f"{exc.name}: {exc}")
    hv = np.array([model.h(e.state, mu) for e in tr.hits()])
    n_slide = sum(1 for s in tr.segments if s.regime is Regime.SLIDING)
    spread = float(hv.max() - hv.min()) if hv.size else 0.0
    return SweepPoint(float("nan"), hv, _bbox_diag(tr.states()), spread, n_slide, False, tr.final_state)


def _sweep_worker(args):
    model, mu, x0, transient, sample_time, opts = args
    return _sweep_one(model, mu, x0, transient, sample_time, opts)


def max_workers() -> int:
    env = os.environ.get("NONSMOOTH_ATLAS_THREADS")
    cpu = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpu))
        except ValueError:
            pass
    return cpu


def default_transient(model: FilippovModel, params, equilibrium_guess=None, x0=None) -> tuple:
    """``(transient, period)``: 50 periods or 1000 time units, whichever larger.

    The period is ``2 pi / beta`` at the equilibrium, searched from
    ``equilibrium_guess``, then ``x0``, then the origin.
    """
    guesses = [g for g in (equilibrium_guess, x0) if g is not None] + [np.zeros(3)]
    period = 2 * math.pi
    for g in guesses:
        try:
            _, eig, _ = equilibrium_data(model, params, np.asarray(g, dtype=float))
        except AtlasError:
            continue
        if eig.beta > 0:
            period = 2 * math.pi / eig.beta
            break
    return max(50 * period, 1000.0), period


def sweep_1d(model: FilippovModel, fixed_param: float, sweep_values: Sequence[float], x0,
             transient: Optional[float] = None, sample_time: Optional[float] = None,
             opts: IntegrationOptions = IntegrationOptions(rtol=1e-9, atol=1e-11),
             warm_start: bool = True, equilibrium_guess=None) -> list:
    """Attractor observables along ``mu = (fixed_param, v)`` for each sweep value.

    Records ``h`` at upward crossings of ``Omega`` (local minima of ``h``
    along the orbit), the bounding-box diagonal of the post-transient orbit,
    and the number of sliding segments.  With ``warm_start`` each point starts
    from the previous final state (sequential); otherwise points start from
    ``x0`` and run in parallel processes.
    """
    vals = [float(v) for v in sweep_values]
    mu_first = np.array([fixed_param, vals[0]])
    t_def, period = default_transient(model, mu_first, equilibrium_guess, x0)
    transient = t_def if transient is None else float(transient)
    sample_time = 20 * period if sample_time is None else float(sample_time)
    out = []
    if warm_start or max_workers() == 1:
        x = np.asarray(x0, dtype=float)
        for v in vals:
            sp = _sweep_one(model, np.array([fixed_param, v]), x, transient, sample_time, opts)
            sp.value = v
            if not sp.diverged and warm_start:
                x = sp.final_state
            out.append(sp)
        return out
    jobs = [(model, np.array([fixed_param, v]), np.asarray(x0, float), transient, sample_time, opts) for v in vals]
    with ProcessPoolExecutor(max_workers=max_workers()) as ex:
        for v, sp in zip(vals, ex.map(_sweep_worker, jobs)):
            sp.value = v
            out.append(sp)
    return out
