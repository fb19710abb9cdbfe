"""Filippov models, Lie-derivative machinery and the hybrid integrator.

A model is two smooth vector fields ``f_left``/``f_right`` on R^3 and a
switching function ``h``; ``f_right`` applies where ``h > 0``.  Every evaluator
takes ``(x, mu)`` where ``mu`` holds the two bifurcation parameters.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import DOP853, RK45
from scipy.optimize import brentq

from .errors import (
    DegenerateDenominator,
    Divergence,
    EvaluationFailure,
    NonregularSurface,
    NotOnSurface,
    RepellingSliding,
    StepFailure,
    ZenoGuard,
)
from .numerics import EPS

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]
Scalar = Callable[[np.ndarray, np.ndarray], float]

_SOLVERS = {"DOP853": DOP853, "RK45": RK45}


class Side(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


class Regime(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"
    SLIDING = "Sliding"


class SurfaceKind(str, enum.Enum):
    CROSSING = "Crossing"
    ATTRACTING_SLIDING = "AttractingSliding"
    REPELLING_SLIDING = "RepellingSliding"
    TANGENCY_LEFT = "TangencyLeft"
    TANGENCY_RIGHT = "TangencyRight"


class EventKind(str, enum.Enum):
    CROSS_L_TO_R = "CrossLtoR"
    CROSS_R_TO_L = "CrossRtoL"
    SLIDE_ENTRY = "SlideEntry"
    SLIDE_EXIT_FOLD = "SlideExitFold"
    SLIDE_EXIT_LEFT = "SlideExitLeft"
    SECTION_HIT = "SectionHit"


@dataclass(frozen=True)
class FilippovModel:
    name: str
    f_left: Field
    f_right: Field
    h: Scalar
    grad_h: Optional[Field] = None
    jac_right: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    param_names: tuple = ("nu", "eta")
    constants: dict = field(default_factory=dict)
    fd_step: float = 1e-6

    def field(self, side: Side | str) -> Field:
        return self.f_left if Side(side) is Side.LEFT else self.f_right

    def gradient(self, x, mu) -> np.ndarray:
        """Gradient of ``h`` (analytic when registered, central differences otherwise)."""
        x = np.asarray(x, dtype=float)
        if self.grad_h is not None:
            g = np.asarray(self.grad_h(x, mu), dtype=float)
        else:
            s = self.fd_step * max(1.0, float(np.max(np.abs(x))))
            g = np.empty(3)
            for j in range(3):
                e = np.zeros(3)
                e[j] = s
                g[j] = (self.h(x + e, mu) - self.h(x - e, mu)) / (2 * s)
        if not np.all(np.isfinite(g)):
            raise EvaluationFailure(f"non-finite gradient of h at {x}")
        if float(np.linalg.norm(g)) == 0.0:
            raise NonregularSurface(f"grad h vanishes at {x}")
        return g

    def jacobian_right(self, x, mu) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jac_right is not None:
            return np.asarray(self.jac_right(x, mu), dtype=float)
        s = self.fd_step * max(1.0, float(np.max(np.abs(x))))
        cols = []
        for j in range(3):
            e = np.zeros(3)
            e[j] = s
            cols.append((self.f_right(x + e, mu) - self.f_right(x - e, mu)) / (2 * s))
        return np.column_stack(cols)


# ---------------------------------------------------------------- Lie derivatives

def lie_derivative(model: FilippovModel, side: Side | str, x, mu) -> float:
    x = np.asarray(x, dtype=float)
    val = float(model.gradient(x, mu) @ model.field(side)(x, mu))
    if not np.isfinite(val):
        raise EvaluationFailure(f"non-finite Lie derivative at {x}")
    return val


def _directional(fun: Callable[[np.ndarray], float], x: np.ndarray, vec: np.ndarray, rel_step: float) -> float:
    nv = float(np.linalg.norm(vec))
    if nv == 0.0:
        return 0.0
    s = rel_step * max(1.0, float(np.max(np.abs(x)))) / nv
    return (fun(x + s * vec) - fun(x - s * vec)) / (2 * s)


def lie_derivative2(model: FilippovModel, x, mu) -> float:
    """Second Lie derivative of ``h`` along ``f_right``."""
    x = np.asarray(x, dtype=float)
    return _directional(lambda y: lie_derivative(model, Side.RIGHT, y, mu), x,
                        np.asarray(model.f_right(x, mu), dtype=float), 1e-5)


def lie_left_of_lie_right(model: FilippovModel, x, mu) -> float:
    """``L_{F_L} L_{F_R} H``, the derivative of ``L_{F_R} H`` along ``f_left``."""
    x = np.asarray(x, dtype=float)
    return _directional(lambda y: lie_derivative(model, Side.RIGHT, y, mu), x,
                        np.asarray(model.f_left(x, mu), dtype=float), 1e-5)


def grad_lie_right(model: FilippovModel, x, mu) -> np.ndarray:
    """Gradient of ``L_{F_R} H`` (normal of the section where ``L_{F_R} H = 0``)."""
    x = np.asarray(x, dtype=float)
    s = 1e-5 * max(1.0, float(np.max(np.abs(x))))
    g = np.empty(3)
    for j in range(3):
        e = np.zeros(3)
        e[j] = s
        g[j] = (lie_derivative(model, Side.RIGHT, x + e, mu) - lie_derivative(model, Side.RIGHT, x - e, mu)) / (2 * s)
    return g


def sliding_field(model: FilippovModel, x, mu, event_tol: float = 1e-10,
                  check_surface: bool = True) -> tuple[np.ndarray, float]:
    """Filippov sliding vector field and its convex weight on ``f_right``.

    ``velocity = lam * F_R + (1 - lam) * F_L`` with
    ``lam = L_L / (L_L - L_R)``, which makes ``grad h . velocity = 0``.
    """
    x = np.asarray(x, dtype=float)
    if check_surface and abs(model.h(x, mu)) > event_tol:
        raise NotOnSurface(f"|h(x)| = {abs(model.h(x, mu)):.3e} exceeds {event_tol:g}")
    g = model.gradient(x, mu)
    fl = np.asarray(model.f_left(x, mu), dtype=float)
    fr = np.asarray(model.f_right(x, mu), dtype=float)
    ll, lr = float(g @ fl), float(g @ fr)
    den = ll - lr
    if abs(den) <= 1e-14 * max(1.0, abs(ll), abs(lr)):
        raise DegenerateDenominator("L_L H - L_R H vanishes")
    lam = ll / den
    return (fr * ll - fl * lr) / den, lam


@dataclass(frozen=True)
class SurfaceClassification:
    kind: SurfaceKind
    lie_left: float
    lie_right: float


def classify_surface_point(model: FilippovModel, x, mu, event_tol: float = 1e-10,
                           tangency_tol: float = 1e-8) -> SurfaceClassification:
    x = np.asarray(x, dtype=float)
    if abs(model.h(x, mu)) > event_tol:
        raise NotOnSurface(f"|h(x)| = {abs(model.h(x, mu)):.3e} exceeds {event_tol:g}")
    ll = lie_derivative(model, Side.LEFT, x, mu)
    lr = lie_derivative(model, Side.RIGHT, x, mu)
    if abs(lr) <= tangency_tol:
        kind = SurfaceKind.TANGENCY_RIGHT
    elif abs(ll) <= tangency_tol:
        kind = SurfaceKind.TANGENCY_LEFT
    elif ll * lr > 0:
        kind = SurfaceKind.CROSSING
    elif ll > 0:
        kind = SurfaceKind.ATTRACTING_SLIDING
    else:
        kind = SurfaceKind.REPELLING_SLIDING
    return SurfaceClassification(kind, ll, lr)


# ---------------------------------------------------------------- sections

class Section:
    """Scalar function whose zero set is a Poincare section."""

    name = "section"
    direction = 0

    def value(self, x, mu) -> float:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class PlaneSection(Section):
    point: tuple
    normal: tuple
    direction: int = 1
    name: str = "plane"

    def value(self, x, mu) -> float:
        return float(np.dot(np.asarray(self.normal), np.asarray(x) - np.asarray(self.point)))


@dataclass(frozen=True)
class OmegaSection(Section):
    """The surface ``L_{F_R} H = 0`` where orbits of ``f_right`` are tangent to level sets of ``h``."""

    model: FilippovModel
    direction: int = 0
    name: str = "omega"

    def value(self, x, mu) -> float:
        return lie_derivative(self.model, Side.RIGHT, x, mu)


# ---------------------------------------------------------------- trajectories

@dataclass(frozen=True)
class IntegrationOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    event_tol: float = 1e-10
    tangency_tol: float = 1e-8
    max_events: int = 100_000
    divergence_bound: float = 1e6
    max_step: float = np.inf
    method: str = "DOP853"


@dataclass
class Segment:
    regime: Regime
    times: np.ndarray
    states: np.ndarray


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    state: np.ndarray
    section: Optional[str] = None
    direction: int = 0


@dataclass
class HybridTrajectory:
    segments: list = field(default_factory=list)
    events: list = field(default_factory=list)

    @property
    def t_final(self) -> float:
        return float(self.segments[-1].times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].states[-1].copy()

    @property
    def final_regime(self) -> Regime:
        return self.segments[-1].regime

    def hits(self, section: Optional[str] = None) -> list:
        return [e for e in self.events if e.kind is EventKind.SECTION_HIT
                and (section is None or e.section == section)]

    def times(self) -> np.ndarray:
        return np.concatenate([s.times for s in self.segments])

    def states(self) -> np.ndarray:
        return np.concatenate([s.states for s in self.segments])

    def regimes(self) -> list:
        out = []
        for s in self.segments:
            out.extend([s.regime.value] * len(s.times))
        return out


def _signed(v: float) -> int:
    return 1 if v > 0 else (-1 if v < 0 else 0)


def _crossed(prev: float, new: float, direction: int) -> bool:
    if direction > 0:
        return prev < 0 <= new
    if direction < 0:
        return prev > 0 >= new
    return (prev < 0 <= new) or (prev > 0 >= new)


def _root_after(g: Callable[[float], float], ta: float, tb: float, ga: float) -> float:
    """Root of ``g`` in ``[ta, tb]`` (sign change) nudged onto the far side."""
    if ga == 0.0:
        return ta
    t = brentq(g, ta, tb, xtol=4 * EPS * max(1.0, abs(ta), abs(tb)), rtol=4 * EPS, maxiter=200)
    side = _signed(ga)
    span = tb - ta
    d = 4 * EPS * max(1.0, abs(t))
    for _ in range(40):
        gt = g(t)
        if _signed(gt) != side:
            return t
        tn = t + np.sign(span) * d
        if (tn - tb) * np.sign(span) > 0:
            return tb
        t, d = tn, d * 2
    return t


class _Terminal:
    """Terminal event with optional extremum guard (catches dips inside one step)."""

    def __init__(self, g, direction, tag, guard=None, guard_direction=0, initial_sign=None):
        self.g, self.direction, self.tag = g, direction, tag
        self.guard, self.guard_direction = guard, guard_direction
        self.initial_sign = initial_sign


def _run_field(rhs, t0, y0, t_bound, terminals, sections, mu, opts, hit_counts, stop,
               min_hit_time, section_prev, project=None):
    """Integrate one smooth field until a terminal event or ``t_bound``.

    Returns ``(times, states, terminal_tag_or_None, section_events)``.
    ``section_prev`` is updated in place so hits are never counted twice
    across segment boundaries.
    """
    solver_cls = _SOLVERS[opts.method]
    first = None

    def make(t, y):
        kw = dict(rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step)
        if first is not None:
            kw["first_step"] = min(first, abs(t_bound - t)) if t_bound != t else None
        return solver_cls(lambda tt, yy: rhs(yy), t, y, t_bound, **kw)

    times, states, sec_events = [t0], [np.array(y0, dtype=float)], []
    if t_bound == t0:
        return np.array(times), np.array(states), None, sec_events
    solver = make(t0, y0)
    tvals = []
    for term in terminals:
        v = term.g(y0)
        if term.initial_sign is not None:
            v = term.initial_sign * max(abs(v), 1e-300)
        tvals.append(v)
    gvals = [term.guard(y0) if term.guard is not None else 0.0 for term in terminals]
    bound = opts.divergence_bound
    while True:
        if solver.status == "finished":
            return np.array(times), np.array(states), None, sec_events
        t_old, y_old = solver.t, solver.y.copy()
        msg = solver.step()
        if solver.status == "failed":
            raise StepFailure(f"integrator failed at t={t_old:.6g}: {msg}")
        first = solver.step_size
        t_new, y_new = solver.t, solver.y.copy()
        dense = None

        # earliest terminal event in (t_old, t_new]
        t_hit, tag_hit = None, None
        new_tvals, new_gvals = [], []
        for k, term in enumerate(terminals):
            tv = term.g(y_new)
            new_tvals.append(tv)
            cand = None
            if _crossed(tvals[k], tv, term.direction):
                dense = dense or solver.dense_output()
                cand = _root_after(lambda tt: term.g(dense(tt)), t_old, t_new, tvals[k])
            elif term.guard is not None:
                gv = term.guard(y_new)
                new_gvals.append(gv)
                if _crossed(gvals[k], gv, term.guard_direction):
                    dense = dense or solver.dense_output()
                    te = _root_after(lambda tt: term.guard(dense(tt)), t_old, t_new, gvals[k])
                    ve = term.g(dense(te))
                    if _crossed(tvals[k], ve, term.direction):
                        cand = _root_after(lambda tt: term.g(dense(tt)), t_old, te, tvals[k])
            if term.guard is not None and len(new_gvals) <= k:
                new_gvals.append(term.guard(y_new))
            if cand is not None and (t_hit is None or (cand - t_hit) * (t_new - t_old) < 0):
                t_hit, tag_hit = cand, term.tag
        if t_hit is not None:
            dense = dense or solver.dense_output()
            t_end, y_end = t_hit, dense(t_hit)
        else:
            t_end, y_end = t_new, y_new

        # section hits in (t_old, t_end]
        stop_now = False
        for k, sec in enumerate(sections):
            sv = sec.value(y_end, mu)
            if _crossed(section_prev[k], sv, sec.direction):
                dense = dense or solver.dense_output()
                try:
                    th = _root_after(lambda tt: sec.value(dense(tt), mu), t_old, t_end, section_prev[k])
                except ValueError:
                    th = t_end
                if abs(th - t0) >= min_hit_time:
                    direction = 1 if section_prev[k] < 0 else -1
                    sec_events.append(Event(th, EventKind.SECTION_HIT, dense(th), sec.name, direction))
                    hit_counts[k] += 1
                    if stop is not None and stop[0] == k and hit_counts[k] >= stop[1]:
                        stop_now = True
            section_prev[k] = sv
        if stop_now:
            sec_events.sort(key=lambda e: e.time)
            last = [e for e in sec_events if e.section == sections[stop[0]].name][-1]
            # cut the segment at the stopping hit
            keep = [i for i, tt in enumerate(times) if (tt - last.time) * (t_new - t_old) < 0]
            times = [times[i] for i in keep] + [last.time]
            states = [states[i] for i in keep] + [last.state]
            sec_events = [e for e in sec_events if (e.time - last.time) * (t_new - t_old) <= 0]
            return np.array(times), np.array(states), "stop", sec_events

        times.append(t_end)
        states.append(np.array(y_end, dtype=float))
        if not np.all(np.isfinite(y_end)) or float(np.max(np.abs(y_end))) > bound:
            raise Divergence(f"|x| exceeded {bound:g} at t={t_end:.6g}")
        if t_hit is not None:
            return np.array(times), np.array(states), tag_hit, sec_events
        tvals = new_tvals
        gvals = new_gvals if new_gvals else gvals
        if project is not None:
            y_proj = project(y_new)
            if y_proj is not None:
                states[-1] = y_proj
                solver = make(t_new, y_proj)
                tvals = [term.g(y_proj) for term in terminals]


def _project_onto_surface(model, x, mu, tol):
    y = np.array(x, dtype=float)
    for _ in range(8):
        hv = model.h(y, mu)
        if abs(hv) <= tol:
            return y
        g = model.gradient(y, mu)
        y = y - hv * g / float(g @ g)
    return y


def _start_regime(model, x, mu, opts) -> Regime:
    hv = model.h(x, mu)
    if hv > opts.event_tol:
        return Regime.RIGHT
    if hv < -opts.event_tol:
        return Regime.LEFT
    c = classify_surface_point(model, x, mu, opts.event_tol, opts.tangency_tol)
    if c.kind is SurfaceKind.ATTRACTING_SLIDING:
        return Regime.SLIDING
    if c.kind is SurfaceKind.REPELLING_SLIDING:
        raise RepellingSliding(f"start point {x} lies in a repelling sliding region")
    if c.kind is SurfaceKind.CROSSING:
        return Regime.RIGHT if c.lie_right > 0 else Regime.LEFT
    if c.kind is SurfaceKind.TANGENCY_RIGHT:
        return Regime.RIGHT if c.lie_left >= 0 else Regime.LEFT
    return Regime.RIGHT if c.lie_right > 0 else Regime.LEFT


def integrate_hybrid(model: FilippovModel, x0, mu, t_max: float,
                     sections: Sequence[Section] = (), opts: IntegrationOptions = IntegrationOptions(),
                     t0: float = 0.0, stop_at_hit: Optional[tuple] = None,
                     min_hit_time: float = 0.0) -> HybridTrajectory:
    """Integrate the Filippov system from ``x0`` over ``[t0, t0 + t_max]``.

    Switching events are located on the integrator's dense output.  Orbits
    reaching an attracting sliding region follow the sliding vector field
    until ``L_{F_R} H`` rises through zero (exit through the fold into the
    right region) or ``L_{F_L} H`` falls through zero (exit to the left).

    ``stop_at_hit=(k, n)`` ends the run at the ``n``-th hit of ``sections[k]``.
    Hits closer than ``min_hit_time`` to ``t0`` are ignored.
    """
    mu = np.asarray(mu, dtype=float)
    x = np.array(x0, dtype=float)
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    traj = HybridTrajectory()
    t, t_end = float(t0), float(t0) + float(t_max)
    regime = _start_regime(model, x, mu, opts)
    section_prev = [s.value(x, mu) for s in sections]
    hit_counts = [0] * len(sections)
    n_events = 0
    h = lambda y: model.h(y, mu)  # noqa: E731
    lie_r = lambda y: lie_derivative(model, Side.RIGHT, y, mu)  # noqa: E731
    lie_l = lambda y: lie_derivative(model, Side.LEFT, y, mu)  # noqa: E731
    fr = lambda y: model.f_right(y, mu)  # noqa: E731
    fl = lambda y: model.f_left(y, mu)  # noqa: E731

    exit_margin = 1e-4 * opts.tangency_tol

    def fs(y):
        return sliding_field(model, y, mu, check_surface=False)[0]

    def project(y):
        if abs(model.h(y, mu)) > opts.event_tol:
            return _project_onto_surface(model, y, mu, opts.event_tol * 1e-2)
        return None

    while True:
        if regime is Regime.RIGHT:
            terms = [_Terminal(h, -1, "sigma", guard=lie_r, guard_direction=1, initial_sign=1)]
            ts, ys, tag, hits = _run_field(fr, t, x, t_end, terms, sections, mu, opts,
                                           hit_counts, stop_at_hit, min_hit_time, section_prev)
        elif regime is Regime.LEFT:
            terms = [_Terminal(h, 1, "sigma", guard=lie_l, guard_direction=-1, initial_sign=-1)]
            ts, ys, tag, hits = _run_field(fl, t, x, t_end, terms, sections, mu, opts,
                                           hit_counts, stop_at_hit, min_hit_time, section_prev)
        else:
            # small hysteresis on the left exit: orbits creeping onto L_L h = 0
            # from above would otherwise chatter on round-off
            terms = [_Terminal(lie_r, 1, "exit_right", initial_sign=-1),
                     _Terminal(lambda y: lie_l(y) + exit_margin, -1, "exit_left", initial_sign=1)]
            ts, ys, tag, hits = _run_field(fs, t, x, t_end, terms, sections, mu, opts,
                                           hit_counts, stop_at_hit, min_hit_time, section_prev,
                                           project=project)
        traj.segments.append(Segment(regime, ts, ys))
        traj.events.extend(hits)
        t, x = float(ts[-1]), ys[-1].copy()
        if tag is None or tag == "stop":
            return traj
        n_events += 1
        if n_events > opts.max_events:
            err = ZenoGuard(f"more than {opts.max_events} switching events")
            err.trajectory = traj
            raise err
        if tag == "exit_right":
            traj.events.append(Event(t, EventKind.SLIDE_EXIT_FOLD, x.copy()))
            regime = Regime.RIGHT
        elif tag == "exit_left":
            traj.events.append(Event(t, EventKind.SLIDE_EXIT_LEFT, x.copy()))
            regime = Regime.LEFT
        else:
            ll, lr = lie_l(x), lie_r(x)
            if regime is Regime.RIGHT:
                if abs(lr) <= opts.tangency_tol:
                    continue  # grazing touch: stay on the right
                if ll > 0:
                    traj.events.append(Event(t, EventKind.SLIDE_ENTRY, x.copy()))
                    regime = Regime.SLIDING
                else:
                    traj.events.append(Event(t, EventKind.CROSS_R_TO_L, x.copy()))
                    regime = Regime.LEFT
            else:
                if abs(ll) <= opts.tangency_tol:
                    continue
                if lr > 0:
                    traj.events.append(Event(t, EventKind.CROSS_L_TO_R, x.copy()))
                    regime = Regime.RIGHT
                else:
                    traj.events.append(Event(t, EventKind.SLIDE_ENTRY, x.copy()))
                    regime = Regime.SLIDING
        if t >= t_end:
            return traj


def integrate_smooth(f: Callable[[np.ndarray], np.ndarray], x0, t_span: float,
                     opts: IntegrationOptions = IntegrationOptions(),
                     event: Optional[Callable[[np.ndarray], float]] = None, direction: int = 0,
                     min_time: float = 0.0) -> tuple[float, np.ndarray]:
    """Flow a single smooth field for time ``t_span`` (may be negative).

    With ``event`` the flow stops at the first zero crossing (in the given
    direction) occurring after ``|t| >= min_time``; returns ``(t, x)`` at the
    stopping point.  ``t`` is ``None``-free: when no event is found a
    :class:`StepFailure` is raised.
    """
    x = np.array(x0, dtype=float)
    t0 = 0.0
    if min_time > 0:
        ts, ys, _, _ = _run_field(f, 0.0, x, np.sign(t_span) * min_time, [], [], None, opts,
                                  [], None, 0.0, [])
        t0, x = float(ts[-1]), ys[-1]
    if event is None:
        ts, ys, _, _ = _run_field(f, t0, x, t_span, [], [], None, opts, [], None, 0.0, [])
        return float(ts[-1]), ys[-1]
    term = _Terminal(event, direction, "event")
    ts, ys, tag, _ = _run_field(f, t0, x, t_span, [term], [], None, opts, [], None, 0.0, [])
    if tag is None:
        raise StepFailure("event not reached within the integration window")
    return float(ts[-1]), ys[-1]
