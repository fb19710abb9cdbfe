"""Planar border-collision normal form and its reduced two-parameter family.

The full form is

    (x, y) -> (tau_L x + y + mu, -delta_L x)   for x <= 0,
    (x, y) -> (tau_R x + y + mu, -delta_R x)   for x >= 0,

and the reduced family fixes ``delta_L = 0``, ``delta_R = tau_R - 1`` and
``mu = -1``.  Because ``g_L`` collapses the plane onto the x-axis, every
attractor point is ``g_R^k`` applied to an x-axis point, so each sample is
tagged with ``k`` (the number of right steps since the last left step) and
points sharing ``k`` lie on one straight line.  Chaotic attractors are
rebuilt as unions of segments on these lines.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateDenominator, NoBracket, Undecided
from .numerics import ToleranceConfig, scalar_root_bracketed

TAU_L_WINDOW = (-4.0, 1.0)
TAU_R_WINDOW = (-1.0, 5.0)


@dataclass(frozen=True)
class BcnfParams:
    """Parameters of the normal form; omitted fields give the reduced family."""

    tau_L: float
    tau_R: float
    delta_L: float = 0.0
    delta_R: Optional[float] = None
    mu: float = -1.0

    def __post_init__(self):
        object.__setattr__(self, "tau_L", float(self.tau_L))
        object.__setattr__(self, "tau_R", float(self.tau_R))
        object.__setattr__(self, "delta_L", float(self.delta_L))
        dr = self.tau_R - 1.0 if self.delta_R is None else float(self.delta_R)
        object.__setattr__(self, "delta_R", dr)
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def full(cls, tau_L: float, delta_L: float, tau_R: float, delta_R: float, mu: float = -1.0) -> "BcnfParams":
        return cls(tau_L=tau_L, tau_R=tau_R, delta_L=delta_L, delta_R=delta_R, mu=mu)

    @property
    def is_reduced(self) -> bool:
        return self.delta_L == 0.0 and self.delta_R == self.tau_R - 1.0 and self.mu == -1.0

    def left(self, point) -> np.ndarray:
        x, y = float(point[0]), float(point[1])
        return np.array([self.tau_L * x + y + self.mu, -self.delta_L * x])

    def right(self, point) -> np.ndarray:
        x, y = float(point[0]), float(point[1])
        return np.array([self.tau_R * x + y + self.mu, -self.delta_R * x])

    def to_dict(self) -> dict:
        return {"tau_L": self.tau_L, "tau_R": self.tau_R, "delta_L": self.delta_L,
                "delta_R": self.delta_R, "mu": self.mu}


def as_params(p) -> BcnfParams:
    """Coerce ``BcnfParams``, ``(tau_L, tau_R)`` or ``(tau_L, tau_R, extra)``."""
    if isinstance(p, BcnfParams):
        return p
    p = tuple(p)
    if len(p) == 2:
        return BcnfParams(p[0], p[1])
    if len(p) == 3 and isinstance(p[2], dict):
        return BcnfParams(p[0], p[1], **p[2])
    raise ValueError(f"cannot interpret {p!r} as normal-form parameters")


def bcnf_step(params: BcnfParams, point) -> np.ndarray:
    """One iterate of the map.  Both pieces agree on ``x = 0``."""
    return params.left(point) if float(point[0]) <= 0.0 else params.right(point)


# closed-form special points of the reduced family

def _div(num: float, den: float, what: str) -> float:
    if den == 0.0:
        raise DegenerateDenominator(f"{what}: zero denominator")
    return num / den


def p_star(tau_L: float) -> np.ndarray:
    """Fixed point of ``g_L``."""
    return np.array([_div(1.0, tau_L - 1.0, "p_star"), 0.0])


def period_two_points(tau_L: float, tau_R: float) -> tuple:
    """``(W_L, W_R)`` with ``g_R(W_R) = W_L`` and ``g_L(W_L) = W_R``."""
    wl = np.array([_div(2.0, tau_L - 1.0, "w_left"),
                   -_div((tau_L + 1.0) * (tau_R - 1.0), tau_R * (tau_L - 1.0), "w_left")])
    wr = np.array([_div(tau_L + 1.0, tau_R * (tau_L - 1.0), "w_right"), 0.0])
    return wl, wr


def three_images(tau_L: float, tau_R: float) -> tuple:
    """First three images of the origin: ``g_L``, ``g_L^2`` and ``g_R g_L^2``."""
    u1 = np.array([-1.0, 0.0])
    u2 = np.array([-tau_L - 1.0, 0.0])
    u3 = np.array([-tau_R * (tau_L + 1.0) - 1.0, (tau_R - 1.0) * (tau_L + 1.0)])
    return u1, u2, u3


def v_point(tau_R: float) -> np.ndarray:
    """Image of the switching-line point of the segment from ``U1`` to ``U3``."""
    return np.array([_div(1.0, tau_R, "v_point") - 2.0, 0.0])


@dataclass(frozen=True)
class SpecialPoints:
    p_star: np.ndarray
    w_left: np.ndarray
    w_right: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    v_point: np.ndarray

    def to_dict(self) -> dict:
        return {k: [float(c) for c in getattr(self, k)] for k in
                ("p_star", "w_left", "w_right", "u1", "u2", "u3", "v_point")}


def special_points(params) -> SpecialPoints:
    """All special points of the reduced family at ``(tau_L, tau_R)``."""
    p = as_params(params)
    wl, wr = period_two_points(p.tau_L, p.tau_R)
    u1, u2, u3 = three_images(p.tau_L, p.tau_R)
    return SpecialPoints(p_star(p.tau_L), wl, wr, u1, u2, u3, v_point(p.tau_R))


# vectorised iteration

class AttractorKind(enum.Enum):
    FIXED_POINT = "FixedPoint"
    PERIOD_TWO = "PeriodTwo"
    CHAOTIC = "Chaotic"
    DIVERGENT = "Divergent"


KIND_CODES = {AttractorKind.FIXED_POINT: 0, AttractorKind.PERIOD_TWO: 1,
              AttractorKind.CHAOTIC: 2, AttractorKind.DIVERGENT: 3}


class _Batch:
    """Many independent orbits of (possibly) different maps, stepped together."""

    def __init__(self, params: Sequence[BcnfParams], seeds: np.ndarray, bound: float):
        self.tl = np.array([p.tau_L for p in params])
        self.tr = np.array([p.tau_R for p in params])
        self.dl = np.array([p.delta_L for p in params])
        self.dr = np.array([p.delta_R for p in params])
        self.mu = np.array([p.mu for p in params])
        self.x = seeds[:, 0].astype(float).copy()
        self.y = seeds[:, 1].astype(float).copy()
        self.k = np.zeros(len(params), dtype=np.int64)
        self.bound = bound
        self.diverged = np.zeros(len(params), dtype=bool)

    def step(self):
        left = self.x <= 0.0
        t = np.where(left, self.tl, self.tr)
        d = np.where(left, self.dl, self.dr)
        x = t * self.x + self.y + self.mu
        y = -d * self.x
        self.x, self.y = x, y
        self.k = np.where(left, 0, self.k + 1)
        bad = ~(np.abs(x) <= self.bound) | ~(np.abs(y) <= self.bound)
        if bad.any():
            self.diverged |= bad
            self.x[bad] = np.nan
            self.y[bad] = np.nan

    def run(self, n: int):
        for _ in range(n):
            self.step()


@dataclass(frozen=True)
class ClassifyOptions:
    """Iteration counts and tolerances for attractor classification.

    ``gap_tol`` is relative to the bounding-box diagonal of the attractor;
    when ``None`` it adapts to the sample density (see ``_gap``).  Orbits
    whose sampled norm keeps growing (second half of the samples larger by
    ``growth_ratio``) or exceeds ``growth_fraction * divergence_bound`` are
    reported as divergent and flagged undecided.
    """

    transient: int = 10_000
    samples: int = 10_000
    divergence_bound: float = 1e6
    period_tol: float = 1e-9
    gap_tol: Optional[float] = None
    boundary_margin: float = 1e-3
    growth_ratio: float = 1.25
    growth_fraction: float = 1e-2
    seeds: tuple = ((0.0, 0.0), (0.1, 0.0), (-0.1, 0.0), (-1.0, 0.0))


DEFAULT_CLASSIFY = ClassifyOptions()


@dataclass(frozen=True)
class Segment:
    start: tuple
    end: tuple
    line_index: int

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


@dataclass(frozen=True)
class BcnfClassification:
    """Attractor type from the primary seed, with segment structure if chaotic.

    ``undecided`` is set when the parameters lie within ``boundary_margin``
    of a stability boundary, when the empirical type disagrees with the
    closed-form stability ranges, or when auxiliary seeds disagree.
    """

    kind: AttractorKind
    n_components: Optional[int] = None
    n_segments: Optional[int] = None
    attractor_extent: Optional[tuple] = None
    undecided: bool = False
    note: str = ""
    segments: tuple = field(default=(), repr=False)

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "n_components": self.n_components,
                "n_segments": self.n_segments,
                "attractor_extent": None if self.attractor_extent is None else list(self.attractor_extent),
                "undecided": self.undecided, "note": self.note}


def predicted_kind(tau_L: float, tau_R: float) -> Optional[AttractorKind]:
    """Closed-form stability ranges of the reduced family (``None`` if neither)."""
    if -1.0 < tau_L < 1.0:
        return AttractorKind.FIXED_POINT
    if tau_L < -1.0 and 0.0 < tau_R < 2.0 / (1.0 - tau_L):
        return AttractorKind.PERIOD_TWO
    return None


def near_stability_boundary(tau_L: float, tau_R: float, margin: float) -> bool:
    if abs(tau_L + 1.0) < margin or abs(tau_L - 1.0) < margin:
        return True
    if tau_L < -1.0 and (abs(tau_R) < margin or abs(tau_R - 2.0 / (1.0 - tau_L)) < margin):
        return True
    return False


def _segment_distance(a0, a1, b0, b1) -> float:
    """Minimum distance between two closed planar segments."""
    def pt_seg(p, s0, s1):
        d = s1 - s0
        L2 = float(d @ d)
        if L2 == 0.0:
            return float(np.hypot(*(p - s0)))
        t = min(1.0, max(0.0, float((p - s0) @ d) / L2))
        return float(np.hypot(*(p - s0 - t * d)))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    c1, c2 = cross(a0, a1, b0), cross(a0, a1, b1)
    c3, c4 = cross(b0, b1, a0), cross(b0, b1, a1)
    if c1 * c2 < 0 and c3 * c4 < 0:
        return 0.0
    return min(pt_seg(a0, b0, b1), pt_seg(a1, b0, b1), pt_seg(b0, a0, a1), pt_seg(b1, a0, a1))


def _gap(pts_t: np.ndarray, total_len: float, diag: float, n: int, gap_tol: Optional[float]) -> float:
    if gap_tol is not None:
        return gap_tol * diag
    # 50 mean spacings: invariant densities thin out near limb endpoints
    return max(50.0 * total_len / max(n, 1), 1e-9 * max(diag, 1.0))


def reconstruct_segments(xs: np.ndarray, ys: np.ndarray, ks: np.ndarray, params: BcnfParams,
                         gap_tol: Optional[float] = None, max_segments: int = 500) -> tuple:
    """``(segments, n_components)`` for samples tagged by right-step count.

    Samples with equal tag lie on the line ``g_R^k(x-axis)``; they are
    sorted along it and split wherever consecutive points are further apart
    than the gap threshold.  Segments closer than the threshold are joined
    into connected components.  More than ``max_segments`` pieces means no
    segment structure was resolved and the component count is ``None``.
    """
    A = np.array([[params.tau_R, 1.0], [-params.delta_R, 0.0]])
    diag = float(math.hypot(xs.max() - xs.min(), ys.max() - ys.min()))
    kmax = int(ks.max())
    dirs = np.empty((kmax + 1, 2))
    d = np.array([1.0, 0.0])
    for k in range(kmax + 1):
        dirs[k] = d
        nxt = A @ d
        nn = float(np.hypot(*nxt))
        d = d if nn == 0.0 else nxt / nn
    groups = []
    total = 0.0
    for k in np.unique(ks):
        sel = ks == k
        d = dirs[int(k)]
        t = xs[sel] * d[0] + ys[sel] * d[1]
        order = np.argsort(t)
        groups.append((int(k), t[order], xs[sel][order], ys[sel][order]))
        total += float(t[order][-1] - t[order][0])
    gap = _gap(None, total, diag, len(xs), gap_tol)
    segs = []
    for k, t, gx, gy in groups:
        breaks = np.nonzero(np.diff(t) > gap)[0]
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [len(t) - 1]))
        for s, e in zip(starts, ends):
            segs.append(Segment((float(gx[s]), float(gy[s])), (float(gx[e]), float(gy[e])), k))
    if len(segs) > max_segments:
        return tuple(segs), None
    parent = list(range(len(segs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    ends_arr = [(np.array(s.start), np.array(s.end)) for s in segs]
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            if _segment_distance(*ends_arr[i], *ends_arr[j]) <= gap:
                parent[find(i)] = find(j)
    n_comp = len({find(i) for i in range(len(segs))})
    return tuple(segs), n_comp


def _classify_batch(params: Sequence[BcnfParams], opts: ClassifyOptions) -> list:
    """Classify many parameter points at once (all seeds stepped together)."""
    m = len(params)
    seeds = np.asarray(opts.seeds, dtype=float)
    ns = len(seeds)
    rep = [p for p in params for _ in range(ns)]
    batch = _Batch(rep, np.tile(seeds, (m, 1)), opts.divergence_bound)
    batch.run(opts.transient)
    n_samp = max(int(opts.samples), 3)
    X = np.empty((n_samp, m * ns))
    Y = np.empty((n_samp, m * ns))
    K = np.empty((n_samp, m * ns), dtype=np.int64)
    for i in range(n_samp):
        batch.step()
        X[i], Y[i], K[i] = batch.x, batch.y, batch.k
    div = batch.diverged.reshape(m, ns)
    out = []
    for c, p in enumerate(params):
        kinds = []
        growth = [False] * ns
        for s in range(ns):
            col = c * ns + s
            if div[c, s]:
                kinds.append(AttractorKind.DIVERGENT)
                continue
            nrm = np.hypot(X[:, col], Y[:, col])
            half = n_samp // 2
            if (np.max(nrm[half:]) > opts.growth_ratio * np.max(nrm[:half])
                    or np.max(nrm) > opts.growth_fraction * opts.divergence_bound):
                kinds.append(AttractorKind.DIVERGENT)
                growth[s] = True
                continue
            x, y = X[-3:, col], Y[-3:, col]
            if math.hypot(x[-1] - x[-2], y[-1] - y[-2]) < opts.period_tol:
                kinds.append(AttractorKind.FIXED_POINT)
            elif math.hypot(x[-1] - x[-3], y[-1] - y[-3]) < opts.period_tol:
                kinds.append(AttractorKind.PERIOD_TWO)
            else:
                kinds.append(AttractorKind.CHAOTIC)
        kind = kinds[0]
        notes = []
        undecided = False
        if growth[0]:
            undecided = True
            notes.append("orbit grows without reaching divergence_bound")
        if any(k is not kind for k in kinds[1:]):
            undecided = True
            notes.append("seeds disagree: " + ",".join(k.value for k in kinds))
        if p.is_reduced:
            pred = predicted_kind(p.tau_L, p.tau_R)
            if near_stability_boundary(p.tau_L, p.tau_R, opts.boundary_margin):
                undecided = True
                notes.append("near stability boundary")
            if (pred is not None or kind in (AttractorKind.FIXED_POINT, AttractorKind.PERIOD_TWO)) and pred is not kind:
                undecided = True
                notes.append(f"closed-form ranges predict {pred.value if pred else 'no periodic attractor'}")
        col = c * ns
        if kind is AttractorKind.DIVERGENT:
            out.append(BcnfClassification(kind, undecided=undecided, note="; ".join(notes)))
            continue
        xs, ys, ks = X[:, col], Y[:, col], K[:, col]
        extent = (float(xs.min()), float(xs.max()), float(ys.min()), float(ys.max()))
        if kind is AttractorKind.FIXED_POINT:
            out.append(BcnfClassification(kind, 1, 0, extent, undecided, "; ".join(notes)))
        elif kind is AttractorKind.PERIOD_TWO:
            out.append(BcnfClassification(kind, 2, 0, extent, undecided, "; ".join(notes)))
        elif p.delta_L == 0.0:
            segs, ncomp = reconstruct_segments(xs, ys, ks, p, opts.gap_tol)
            if ncomp is None:
                undecided = True
                notes.append("segment structure not resolved")
            out.append(BcnfClassification(kind, ncomp, len(segs), extent, undecided, "; ".join(notes), segs))
        else:
            notes.append("segment reconstruction needs delta_L = 0")
            out.append(BcnfClassification(kind, None, None, extent, undecided, "; ".join(notes)))
    return out


def classify_attractor(params, opts: ClassifyOptions = DEFAULT_CLASSIFY) -> BcnfClassification:
    """Classify the attractor reached from the origin (auxiliary seeds cross-check)."""
    return _classify_batch([as_params(params)], opts)[0]


def classify_many(params_list: Sequence, opts: ClassifyOptions = DEFAULT_CLASSIFY, chunk: int = 256) -> list:
    """Vectorised ``classify_attractor`` over a list of parameter points."""
    ps = [as_params(p) for p in params_list]
    out = []
    for s in range(0, len(ps), chunk):
        out.extend(_classify_batch(ps[s:s + chunk], opts))
    return out


def attractor_samples(params, n: int = 10_000, transient: int = 10_000, seed=(0.0, 0.0),
                      bound: float = 1e6) -> np.ndarray:
    """Post-transient orbit of ``seed`` (NaN after divergence).

    A single parameter point gives an ``(n, 2)`` array; a list of points
    gives ``(n, len(list), 2)``.
    """
    single = isinstance(params, BcnfParams) or (
        not isinstance(params, BcnfParams) and len(params) in (2, 3) and np.isscalar(params[0]))
    ps = [as_params(params)] if single else [as_params(p) for p in params]
    b = _Batch(ps, np.tile(np.asarray(seed, dtype=float), (len(ps), 1)), bound)
    b.run(transient)
    out = np.empty((n, len(ps), 2))
    for i in range(n):
        b.step()
        out[i, :, 0] = b.x
        out[i, :, 1] = b.y
    return out[:, 0, :] if single else out


# region boundaries

class BoundaryKind(enum.Enum):
    PERIOD_TWO_EXISTENCE = "PeriodTwoExistence"
    FIRST_TURQUOISE = "FirstTurquoise"
    FIRST_OLIVE = "FirstOlive"
    PURPLE_K = "PurpleK"
    CURVE_A = "CurveA"
    CURVE_B = "CurveB"
    CURVE_C = "CurveC"
    CURVE_D = "CurveD"
    CURVE_E = "CurveE"
    CURVE_F = "CurveF"
    CURVE_G = "CurveG"
    CURVE_H = "CurveH"


def _gl(tl, tr, p):
    return np.array([tl * p[0] + p[1] - 1.0, 0.0])


def _gr(tl, tr, p):
    return np.array([tr * p[0] + p[1] - 1.0, (1.0 - tr) * p[0]])


def _compose(word: str, tl: float, tr: float, p) -> np.ndarray:
    """Apply a composition written right-to-left, e.g. ``"LRR"`` is ``g_L g_R^2``."""
    q = np.asarray(p, dtype=float)
    for ch in reversed(word):
        q = _gl(tl, tr, q) if ch == "L" else _gr(tl, tr, q)
    return q


def boundary_residual(kind: BoundaryKind, tau_L: float, tau_R: float, k: int = 1) -> float:
    """Scalar defining function whose zero set is the requested curve.

    Every condition equates two points on the x-axis, so the residual is the
    difference of their x-coordinates.
    """
    tl, tr = float(tau_L), float(tau_R)
    if kind is BoundaryKind.PERIOD_TWO_EXISTENCE:
        return tr * (1.0 - tl) - 2.0
    if kind is BoundaryKind.CURVE_F:
        return v_point(tr)[0]
    if kind is BoundaryKind.CURVE_D:
        return v_point(tr)[0] - p_star(tl)[0]
    if kind is BoundaryKind.PURPLE_K:
        if k < 1:
            raise ValueError("PurpleK needs k >= 1")
        return _compose("R" * k + "LL", tl, tr, (0.0, 0.0))[0]
    u1, _, u3 = three_images(tl, tr)
    if kind is BoundaryKind.FIRST_TURQUOISE:
        return _gl(tl, tr, u3)[0] - p_star(tl)[0]
    if kind is BoundaryKind.FIRST_OLIVE:
        return _gl(tl, tr, u3)[0] - u1[0]
    v = v_point(tr)
    wr = period_two_points(tl, tr)[1]
    if kind in (BoundaryKind.CURVE_A, BoundaryKind.CURVE_B, BoundaryKind.CURVE_C):
        lhs = _compose("LRR", tl, tr, u3)[0]
        rhs = {BoundaryKind.CURVE_A: p_star(tl), BoundaryKind.CURVE_B: v,
               BoundaryKind.CURVE_C: wr}[kind][0]
        return lhs - rhs
    if kind is BoundaryKind.CURVE_E:
        return _compose("LL", tl, tr, v)[0] - wr[0]
    lhs = _compose("LRRRLR", tl, tr, v)[0]
    if kind is BoundaryKind.CURVE_G:
        return lhs - wr[0]
    if kind is BoundaryKind.CURVE_H:
        return lhs - v[0]
    raise ValueError(f"unknown boundary {kind!r}")


def _parse_kind(kind) -> tuple:
    if isinstance(kind, BoundaryKind):
        return kind, 1
    if isinstance(kind, tuple):
        return _parse_kind(kind[0])[0], int(kind[1])
    s = str(kind)
    if s.startswith("PurpleK"):
        rest = s[len("PurpleK"):].strip("()[]: ")
        return BoundaryKind.PURPLE_K, int(rest) if rest else 1
    return BoundaryKind(s), 1


def region_boundary(kind, fixed: tuple, tol: float = 1e-12, window: Optional[tuple] = None,
                    n_scan: int = 800) -> float:
    """Solve a boundary condition for the free coordinate.

    ``fixed`` is ``("tau_L", value)`` (solve for ``tau_R``) or
    ``("tau_R", value)`` (solve for ``tau_L``).  The free coordinate is
    scanned over ``window`` for sign changes of the residual; genuine roots
    (not poles) are refined with a bracketing solver and the first one in
    the window is returned.  ``kind`` may be a ``BoundaryKind``, its string
    value, ``"PurpleK3"`` or ``(BoundaryKind.PURPLE_K, 3)``.
    """
    bk, k = _parse_kind(kind)
    name, value = fixed
    value = float(value)
    if name not in ("tau_L", "tau_R"):
        raise ValueError("fixed must name tau_L or tau_R")
    if bk is BoundaryKind.PERIOD_TWO_EXISTENCE:
        if name == "tau_L":
            return _div(2.0, 1.0 - value, "period-two boundary")
        return 1.0 - _div(2.0, value, "period-two boundary")
    if bk is BoundaryKind.CURVE_F and name == "tau_L":
        return 0.5
    if window is None:
        window = TAU_R_WINDOW if name == "tau_L" else TAU_L_WINDOW

    def f(s):
        tl, tr = (value, s) if name == "tau_L" else (s, value)
        try:
            return boundary_residual(bk, tl, tr, k)
        except DegenerateDenominator:
            return math.nan

    grid = np.linspace(window[0], window[1], n_scan + 1)
    vals = np.array([f(s) for s in grid])
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0.0:
            return float(a)
        if fa * fb < 0:
            r = scalar_root_bracketed(f, a, b, tol=ToleranceConfig(abs_tol=tol, rel_tol=tol))
            fr = f(r)
            if np.isfinite(fr) and abs(fr) <= 1e-6 * (1.0 + abs(fa) + abs(fb)):
                return float(r)
    raise NoBracket(f"{bk.value}: no root for {name} = {value} in window {window}")


def boundary_curve(kind, fixed_name: str, values: Iterable[float], **kw) -> list:
    """Rows ``(fixed_value, solved_value)``; values without a root are skipped."""
    rows = []
    for v in values:
        try:
            rows.append((float(v), region_boundary(kind, (fixed_name, v), **kw)))
        except (NoBracket, DegenerateDenominator):
            continue
    return rows


# plane scans and orbit diagrams

@dataclass
class ScanGrid:
    tau_L: np.ndarray
    tau_R: np.ndarray
    cells: list  # row-major, tau_R outer
    curves: dict

    def cell(self, i: int, j: int) -> BcnfClassification:
        return self.cells[i * len(self.tau_L) + j]

    def kind_codes(self) -> np.ndarray:
        return np.array([c.code for c in self.cells]).reshape(len(self.tau_R), len(self.tau_L))

    def rows(self) -> list:
        out = []
        for i, tr in enumerate(self.tau_R):
            for j, tl in enumerate(self.tau_L):
                c = self.cell(i, j)
                out.append((float(tl), float(tr), c.code,
                            -1 if c.n_components is None else c.n_components,
                            -1 if c.n_segments is None else c.n_segments, int(c.undecided)))
        return out


def _axis(axis) -> np.ndarray:
    if isinstance(axis, np.ndarray):
        return axis.astype(float)
    if isinstance(axis, tuple) and len(axis) == 3:
        lo, hi, step = map(float, axis)
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(n)
    return np.asarray(list(axis), dtype=float)


DEFAULT_OVERLAY = ("PeriodTwoExistence", "FirstTurquoise", "FirstOlive", "PurpleK1", "CurveD", "CurveF")


def scan_plane(tau_L_axis, tau_R_axis, opts: ClassifyOptions = DEFAULT_CLASSIFY,
               overlay: Sequence = DEFAULT_OVERLAY, chunk: int = 256) -> ScanGrid:
    """Classify every cell of a ``(tau_L, tau_R)`` grid.

    Axes are ``(lo, hi, step)`` tuples or explicit sequences.  Cells are
    processed in vectorised chunks.  Overlay curves are sampled at the
    ``tau_L`` grid values.
    """
    tl = _axis(tau_L_axis)
    tr = _axis(tau_R_axis)
    cells = classify_many([BcnfParams(a, b) for b in tr for a in tl], opts, chunk)
    curves = {str(k): boundary_curve(k, "tau_L", tl) for k in overlay}
    return ScanGrid(tl, tr, cells, curves)


@dataclass(frozen=True)
class OrbitDiagramRow:
    path_index: int
    params: BcnfParams
    x_values: np.ndarray
    diverged: bool


def bcnf_orbit_diagram(params_path: Sequence, iterates: int = 10_000, keep: int = 100,
                       bound: float = 1e6) -> list:
    """Iterate the origin ``iterates`` times for every parameter tuple; keep the last ``keep`` x-values."""
    ps = [as_params(p) for p in params_path]
    if not ps:
        return []
    keep = min(int(keep), int(iterates))
    b = _Batch(ps, np.zeros((len(ps), 2)), bound)
    b.run(int(iterates) - keep)
    xs = np.empty((keep, len(ps)))
    for i in range(keep):
        b.step()
        xs[i] = b.x
    return [OrbitDiagramRow(i, p, xs[:, i].copy(), bool(b.diverged[i])) for i, p in enumerate(ps)]


def path_from_normal_form(nf_params: Iterable) -> list:
    """Full-form parameters (``mu = -1``) from ``(tau_L, delta_L, tau_R, delta_R)`` tuples."""
    out = []
    for nf in nf_params:
        if hasattr(nf, "delta_L"):
            t = (nf.tau_L, nf.delta_L, nf.tau_R, nf.delta_R)
        else:
            t = tuple(nf)
        out.append(BcnfParams.full(t[0], t[1], t[2], t[3], -1.0))
    return out


def check_composition_branches(word: str, tau_L: float, tau_R: float, p, tol: float = 1e-12) -> bool:
    """Whether each step of ``word`` acts on the side its branch governs.

    Raises ``Undecided`` if an intermediate point is within ``tol`` of the
    switching line.
    """
    q = np.asarray(p, dtype=float)
    ok = True
    for ch in reversed(word):
        if abs(q[0]) < tol:
            raise Undecided(f"iterate {q.tolist()} lies on the switching line")
        ok &= (q[0] < 0) == (ch == "L")
        q = _gl(tau_L, tau_R, q) if ch == "L" else _gr(tau_L, tau_R, q)
    return bool(ok)
