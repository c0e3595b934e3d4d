"""Numerical geometry of the level-1 sets of the jump-kernel MGFs.

The interior MGF gamma is convex with gamma(0) = 1; its open sublevel set
{gamma < 1} is a bounded convex region whose boundary carries all decay-rate
information.  Everything here reduces to one-dimensional convex sections:
a section s -> gamma(..., s, ...) with the other coordinate frozen has at
most two roots of gamma = 1, found by derivative bisection (to bracket the
section minimum) followed by plain bisection.  No Newton steps are used;
convexity makes every bracket valid unconditionally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import GeometryError, NoRootError
from .model import MgfSurface, Vec2

# Residual at which a section minimum counts as tangent to the level line.
_TANGENT_TOL = 1e-13
# Interval width targets for the 1-D searches.
_ROOT_WIDTH = 1e-14
_TERNARY_WIDTH = 1e-12
_MEMBER_SLACK = 1e-12


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def _section_value(ds, cs, s: float) -> float:
    total = 0.0
    for d, c in zip(ds, cs):
        total += c * _safe_exp(d * s)
    return total


def _section_deriv(ds, cs, s: float) -> float:
    total = 0.0
    for d, c in zip(ds, cs):
        if d:
            total += d * c * _safe_exp(d * s)
    return total


def _section_minimum(ds, cs) -> tuple[float, float]:
    """Minimizer and minimum of a proper convex section (mixed-sign support)."""
    lo, hi = -1.0, 1.0
    for _ in range(80):
        if _section_deriv(ds, cs, lo) < 0.0:
            break
        hi = lo
        lo *= 2.0
    else:  # pragma: no cover - impossible for mixed-sign sections
        raise GeometryError("no descent bracket for section minimum")
    for _ in range(80):
        if _section_deriv(ds, cs, hi) > 0.0:
            break
        lo = hi
        hi *= 2.0 if hi > 0 else -0.5
        if hi == 0.0:
            hi = 1.0
    else:  # pragma: no cover
        raise GeometryError("no ascent bracket for section minimum")
    while hi - lo > 1e-13 * (1.0 + abs(lo) + abs(hi)):
        mid = 0.5 * (lo + hi)
        if _section_deriv(ds, cs, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    s_star = 0.5 * (lo + hi)
    return s_star, _section_value(ds, cs, s_star)


def _bisect_root(ds, cs, lo: float, hi: float, increasing: bool) -> float:
    """Root of section = 1 on a bracket where the section crosses 1 once."""
    while hi - lo > _ROOT_WIDTH * (1.0 + abs(lo) + abs(hi)):
        mid = 0.5 * (lo + hi)
        below = _section_value(ds, cs, mid) < 1.0
        if below == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _section_roots(ds, cs) -> Optional[tuple[float, float]]:
    """Both roots of section = 1, using -inf/+inf for one-sided sections.

    Returns None when the section stays above 1 (no admissible points).
    """
    dmin, dmax = ds[0], ds[-1]
    if dmin == 0 and dmax == 0:
        return (-math.inf, math.inf) if math.fsum(cs) < 1.0 else None
    if dmin >= 0:
        # Nondecreasing: limit at -inf is the d=0 coefficient.
        c0 = math.fsum(c for d, c in zip(ds, cs) if d == 0)
        if c0 >= 1.0:
            return None
        a, b = 0.0, 1.0
        if _section_value(ds, cs, a) >= 1.0:
            b = a
            a = -1.0
            for _ in range(80):
                if _section_value(ds, cs, a) < 1.0:
                    break
                b = a
                a *= 2.0
            else:  # pragma: no cover
                raise GeometryError("no bracket for one-sided section root")
        else:
            for _ in range(80):
                if _section_value(ds, cs, b) > 1.0:
                    break
                a = b
                b *= 2.0
            else:  # pragma: no cover
                raise GeometryError("no bracket for one-sided section root")
        return (-math.inf, _bisect_root(ds, cs, a, b, increasing=True))
    if dmax <= 0:
        mirrored = _section_roots(tuple(-d for d in reversed(ds)), tuple(reversed(cs)))
        if mirrored is None:
            return None
        lo, hi = mirrored
        return (-hi, -lo)
    s_star, g_star = _section_minimum(ds, cs)
    if g_star > 1.0 + _TANGENT_TOL:
        return None
    if g_star >= 1.0 - _TANGENT_TOL:
        return (s_star, s_star)
    step = 1.0
    hi = s_star + step
    for _ in range(200):
        if _section_value(ds, cs, hi) > 1.0:
            break
        step *= 2.0
        hi = s_star + step
    else:  # pragma: no cover
        raise GeometryError("upper root bracket not found on a bounded section")
    upper = _bisect_root(ds, cs, s_star, hi, increasing=True)
    step = 1.0
    lo = s_star - step
    for _ in range(200):
        if _section_value(ds, cs, lo) > 1.0:
            break
        step *= 2.0
        lo = s_star - step
    else:  # pragma: no cover
        raise GeometryError("lower root bracket not found on a bounded section")
    lower = -_bisect_root(
        tuple(-d for d in reversed(ds)), tuple(reversed(cs)), -s_star, -lo, increasing=True
    )
    return (lower, upper)


def section_roots(gamma: MgfSurface, solve_coord: int, fixed_value: float) -> Optional[tuple[float, float]]:
    """Min and max roots of gamma = 1 along coordinate ``solve_coord``."""
    ds, cs = gamma.section_terms(solve_coord, fixed_value)
    return _section_roots(ds, cs)


def branch(gamma: MgfSurface, solve_coord: int, fixed_value: float, which: str = "max") -> float:
    """One root of gamma = 1 with the other coordinate frozen.

    ``which`` selects the max or min root.  Raises NoRootError when the
    convex section's minimum exceeds 1 (the frozen value lies outside the
    level set's shadow), telling the caller to shrink its interval.
    """
    roots = section_roots(gamma, solve_coord, fixed_value)
    if roots is None:
        raise NoRootError(
            f"gamma = 1 has no root in coordinate {solve_coord} at fixed value {fixed_value!r}"
        )
    return roots[1] if which == "max" else roots[0]


@lru_cache(maxsize=512)
def admissible_interval(gamma: MgfSurface, solve_coord: int) -> tuple[float, float]:
    """Range of the frozen coordinate over which the solved section has roots.

    Equals the projection of the closed level set onto the non-solved axis.
    Found by doubling outward from 0 (always admissible since gamma(0) = 1)
    and bisecting the transition; requires a bounded level set.
    """

    def has_roots(t: float) -> bool:
        return section_roots(gamma, solve_coord, t) is not None

    if not has_roots(0.0):
        raise GeometryError("origin section has no roots; level set degenerate")

    def edge(direction: float) -> float:
        good, step = 0.0, 1.0
        bad = None
        for _ in range(60):
            cand = good + direction * step
            if has_roots(cand):
                good = cand
                step *= 2.0
            else:
                bad = cand
                break
        if bad is None:  # pragma: no cover - level set unbounded
            raise GeometryError("level set appears unbounded; check the walk conditions")
        while abs(bad - good) > 1e-13 * (1.0 + abs(good)):
            mid = 0.5 * (good + bad)
            if has_roots(mid):
                good = mid
            else:
                bad = mid
        return good

    return (edge(-1.0), edge(1.0))


def _ternary_argopt(f: Callable[[float], float], lo: float, hi: float, maximize: bool) -> float:
    """Argmax (or argmin) of a unimodal function by ternary search."""
    sign = 1.0 if maximize else -1.0
    while hi - lo > _TERNARY_WIDTH:
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        if sign * f(m1) < sign * f(m2):
            lo = m1
        else:
            hi = m2
    return 0.5 * (lo + hi)


def _assemble(solve_coord: int, root: float, fixed: float) -> Vec2:
    return (root, fixed) if solve_coord == 1 else (fixed, root)


def extreme_point(gamma: MgfSurface, k: int, which: str = "max") -> Vec2:
    """Point of the level-1 curve extremizing coordinate ``k``.

    The upper branch of the curve, as a function of the other coordinate, is
    concave (lower branch convex), so a ternary search over the admissible
    interval is exact up to the interval-width tolerance.
    """
    lo, hi = admissible_interval(gamma, k)

    if which == "max":

        def f(t: float) -> float:
            r = section_roots(gamma, k, t)
            return r[1] if r is not None else -math.inf

    else:

        def f(t: float) -> float:
            r = section_roots(gamma, k, t)
            return r[0] if r is not None else math.inf

    t_star = _ternary_argopt(f, lo, hi, maximize=which == "max")

    # Polish: near the optimum the branch value is flat, so the ternary stalls
    # at ~sqrt(root noise).  The cross-coordinate gradient is monotone along
    # the strictly convex boundary and vanishes exactly at the optimum;
    # bisecting it recovers full precision.
    def cross_grad(t: float) -> float:
        try:
            pt = _assemble(k, branch(gamma, k, t, which), t)
        except NoRootError:
            return math.nan
        return gamma.gradient(pt)[2 - k]

    span = 1e-6 * (1.0 + abs(t_star))
    for _ in range(12):
        a, b = t_star - span, t_star + span
        ga, gb = cross_grad(a), cross_grad(b)
        if not (math.isnan(ga) or math.isnan(gb)) and (ga < 0.0) != (gb < 0.0):
            while b - a > 1e-15 * (1.0 + abs(a)):
                mid = 0.5 * (a + b)
                gm = cross_grad(mid)
                if math.isnan(gm):
                    break
                if (gm < 0.0) == (ga < 0.0):
                    a, ga = mid, gm
                else:
                    b = mid
            t_star = min(max(0.5 * (a + b), lo), hi)
            break
        span *= 4.0
    root = branch(gamma, k, t_star, which)
    return _assemble(k, root, t_star)


def branch_grid(gamma: MgfSurface, solve_coord: int, ts: np.ndarray, which: str = "max") -> np.ndarray:
    """Vectorized branch roots over a grid of frozen-coordinate values.

    Only supports proper two-sided sections (the interior MGF always is);
    entries where the section stays above 1 come back NaN.
    """
    ds, C = gamma.section_terms_grid(solve_coord, ts)
    if not (ds[0] < 0 < ds[-1]):
        raise GeometryError("grid branch evaluation needs mixed-sign section support")
    dcol = ds[:, None]
    n = ts.size

    def val(S: np.ndarray) -> np.ndarray:
        return (C * np.exp(np.minimum(dcol * S[None, :], 709.0))).sum(axis=0)

    def deriv(S: np.ndarray) -> np.ndarray:
        return (dcol * C * np.exp(np.minimum(dcol * S[None, :], 709.0))).sum(axis=0)

    lo = np.full(n, -1.0)
    hi = np.full(n, 1.0)
    for _ in range(70):
        mask = deriv(lo) >= 0.0
        if not mask.any():
            break
        hi[mask] = lo[mask]
        lo[mask] *= 2.0
    for _ in range(70):
        mask = deriv(hi) <= 0.0
        if not mask.any():
            break
        lo[mask] = hi[mask]
        hi[mask] = np.where(hi[mask] > 0, hi[mask] * 2.0, 1.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        neg = deriv(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    s_star = 0.5 * (lo + hi)
    g_star = val(s_star)
    has = g_star <= 1.0 + _TANGENT_TOL

    sign = 1.0 if which == "max" else -1.0
    step = np.ones(n)
    outer = s_star + sign * step
    for _ in range(200):
        mask = (val(outer) <= 1.0) & has
        if not mask.any():
            break
        step[mask] *= 2.0
        outer = s_star + sign * step
    a = s_star.copy()
    b = outer
    for _ in range(64):
        mid = 0.5 * (a + b)
        inside = val(mid) < 1.0
        a = np.where(inside, mid, a)
        b = np.where(inside, b, mid)
    roots = 0.5 * (a + b)
    tangent = g_star >= 1.0 - _TANGENT_TOL
    roots = np.where(tangent, s_star, roots)
    return np.where(has, roots, np.nan)


def intersection_slice(
    gamma: MgfSurface, gamma_k: MgfSurface, k: int, t: float
) -> Optional[tuple[float, float]]:
    """Coordinate-k interval of the intersection of the two sublevel sets at
    a fixed cross coordinate; None when the slice is empty."""
    rg = section_roots(gamma, k, t)
    if rg is None:
        return None
    rk = section_roots(gamma_k, k, t)
    if rk is None:
        return None
    lo = max(rg[0], rk[0])
    hi = min(rg[1], rk[1])
    if hi < lo - 1e-12:
        return None
    return (lo, hi)


def intersection_projection(
    gamma: MgfSurface, gamma_k: MgfSurface, k: int, seed_t: float = 0.0
) -> tuple[float, float]:
    """Cross-coordinate range over which the level-set intersection is
    nonempty.  The origin lies in both closed sublevel sets, so t = 0 always
    seeds the bisection."""
    if intersection_slice(gamma, gamma_k, k, seed_t) is None:
        raise GeometryError("seed slice of the level-set intersection is empty")

    def edge(direction: float) -> float:
        good, step = seed_t, 1.0
        bad = None
        for _ in range(60):
            cand = good + direction * step
            if intersection_slice(gamma, gamma_k, k, cand) is not None:
                good = cand
                step *= 2.0
            else:
                bad = cand
                break
        if bad is None:  # pragma: no cover - the interior level set is bounded
            raise GeometryError("level-set intersection appears unbounded")
        while abs(bad - good) > 1e-13 * (1.0 + abs(good)):
            mid = 0.5 * (good + bad)
            if intersection_slice(gamma, gamma_k, k, mid) is not None:
                good = mid
            else:
                bad = mid
        return good

    return (edge(-1.0), edge(1.0))


def intersection_sup(
    gamma: MgfSurface, gamma_k: MgfSurface, k: int
) -> tuple[float, float]:
    """(cross coordinate, value) of the supremum of coordinate k over the
    intersection of the two sublevel sets.

    The slice upper end is a concave envelope of the two branch functions
    over the projection interval, so a ternary search plus an endpoint
    comparison is exact; the endpoint case occurs when the intersection
    pinches off at a curve crossing.
    """
    lo, hi = intersection_projection(gamma, gamma_k, k)

    def envelope(t: float) -> float:
        s = intersection_slice(gamma, gamma_k, k, t)
        return s[1] if s is not None else -math.inf

    a, b = lo, hi
    while b - a > _TERNARY_WIDTH:
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if envelope(m1) < envelope(m2):
            a = m1
        else:
            b = m2
    best_t, best = 0.5 * (a + b), envelope(0.5 * (a + b))
    for t in (lo, hi):
        v = envelope(t)
        if v > best:
            best_t, best = t, v
    return (best_t, best)


def boundary_points(gamma: MgfSurface, n: int = 512) -> np.ndarray:
    """Closed polyline sampling of the level-1 curve (upper then lower branch)."""
    lo, hi = admissible_interval(gamma, 1)
    pad = 1e-9 * (1.0 + hi - lo)
    ts = np.linspace(lo + pad, hi - pad, n)
    upper = branch_grid(gamma, 1, ts, "max")
    lower = branch_grid(gamma, 1, ts, "min")
    pts_up = np.column_stack([upper, ts])
    pts_dn = np.column_stack([lower, ts])[::-1]
    pts = np.vstack([pts_up, pts_dn])
    return pts[~np.isnan(pts[:, 0])]


def edge_point(
    gamma: MgfSurface,
    gamma_k: MgfSurface,
    k: int,
    theta_max: Optional[Vec2] = None,
    scan: int = 512,
) -> Optional[Vec2]:
    """Intersection of the two level-1 curves maximizing coordinate ``k``.

    Walks both branches of the gamma curve parametrized by the other
    coordinate, locates sign changes of gamma_k - 1 on an initial grid of
    ``scan`` samples, refines each by bisection, and keeps the intersection
    with the largest k-th coordinate.  Returns None when the curves do not
    meet (a value, not an error).
    """
    lo, hi = admissible_interval(gamma, k)
    pad = 1e-9 * (1.0 + hi - lo)
    ts = np.linspace(lo + pad, hi - pad, scan)
    candidates: list[Vec2] = []

    if theta_max is None:
        theta_max = extreme_point(gamma, k, "max")
    if abs(gamma_k.value(theta_max) - 1.0) <= 1e-12:
        candidates.append(theta_max)

    # The supremum of coordinate k over the sublevel-set intersection lies on
    # both curves whenever they cross; this finds crossings that pinch the
    # intersection into a lens thinner than the scan grid.
    t_sup, u_sup = intersection_sup(gamma, gamma_k, k)
    sup_point = _assemble(k, u_sup, t_sup)
    if (
        math.isfinite(u_sup)
        and abs(gamma.value(sup_point) - 1.0) <= 1e-9
        and abs(gamma_k.value(sup_point) - 1.0) <= 1e-9
    ):
        candidates.append(sup_point)

    for which in ("max", "min"):
        roots = branch_grid(gamma, k, ts, which)
        good = ~np.isnan(roots)
        tg = ts[good]
        rg = roots[good]
        if tg.size == 0:
            continue
        pts = np.column_stack([rg, tg]) if k == 1 else np.column_stack([tg, rg])
        F = gamma_k.value_many(pts) - 1.0

        def f_scalar(t: float) -> float:
            return gamma_k.value(_assemble(k, branch(gamma, k, t, which), t)) - 1.0

        exact = np.abs(F) <= 1e-12
        for idx in np.nonzero(exact)[0]:
            candidates.append(tuple(pts[idx]))
        flips = np.nonzero((F[:-1] * F[1:] < 0.0) & ~exact[:-1] & ~exact[1:])[0]
        for idx in flips:
            a, b = tg[idx], tg[idx + 1]
            fa = F[idx]
            for _ in range(80):
                mid = 0.5 * (a + b)
                fm = f_scalar(mid)
                if fm == 0.0:
                    a = b = mid
                    break
                if (fm < 0.0) == (fa < 0.0):
                    a = mid
                    fa = fm
                else:
                    b = mid
                if b - a < 1e-13 * (1.0 + abs(a)):
                    break
            t0 = 0.5 * (a + b)
            try:
                candidates.append(_assemble(k, branch(gamma, k, t0, which), t0))
            except NoRootError:  # pragma: no cover - grid edge fp noise
                continue

    if not candidates:
        return None
    j = k - 1
    return max(candidates, key=lambda p: p[j])


def convergence_point(
    gamma: MgfSurface,
    gamma_k: MgfSurface,
    k: int,
    theta_max: Vec2,
    theta_e: Optional[Vec2],
) -> Vec2:
    """Case split defining the convergence-parameter point.

    The edge point governs exactly when the face level set excludes the
    k-maximal point of the interior level set (gamma_k there exceeds 1).
    """
    if gamma_k.value(theta_max) > 1.0 + 1e-12:
        if theta_e is None:
            raise GeometryError(
                f"gamma_{k} exceeds 1 at the coordinate-{k} maximal point but the "
                "level curves have no detected intersection"
            )
        return theta_e
    return theta_max


@dataclass(frozen=True)
class BranchFunction:
    """Root of gamma = 1 in one coordinate as a function of the other."""

    solve_coord: int
    interval: tuple[float, float]
    gamma: MgfSurface

    def upper(self, t: float) -> float:
        return branch(self.gamma, self.solve_coord, t, "max")

    def lower(self, t: float) -> float:
        return branch(self.gamma, self.solve_coord, t, "min")

    def __call__(self, t: float, which: str = "max") -> float:
        return branch(self.gamma, self.solve_coord, t, which)


@dataclass(frozen=True)
class ExtremePoints:
    """Coordinate-extremal, edge and convergence points of the level sets."""

    theta_max: dict[int, Vec2]
    theta_min: dict[int, Vec2]
    theta_e: dict[int, Optional[Vec2]]
    theta_c: dict[int, Vec2]
    gamma_k_at_max: dict[int, float]


@dataclass(frozen=True)
class GeometrySummary:
    """Extreme points, branch functions and the configuration class."""

    extreme: ExtremePoints
    branch1: BranchFunction
    branch2: BranchFunction
    classification: str
    gamma: MgfSurface
    gamma1: MgfSurface
    gamma2: MgfSurface

    def branch_for(self, k: int) -> BranchFunction:
        return self.branch1 if k == 1 else self.branch2


def classify(theta_c1: Vec2, theta_c2: Vec2, tol: float = 1e-9) -> str:
    """Configuration of the two convergence points.

    D1: they strictly interleave; D2: the second is componentwise below the
    first; D3: the reverse.  The fourth sign pattern cannot occur for
    convex level sets sharing the origin, so it raises.
    """
    if theta_c2[0] < theta_c1[0] - tol and theta_c1[1] < theta_c2[1] - tol:
        return "D1"
    if theta_c2[0] <= theta_c1[0] + tol and theta_c2[1] <= theta_c1[1] + tol:
        return "D2"
    if theta_c1[0] <= theta_c2[0] + tol and theta_c1[1] <= theta_c2[1] + tol:
        return "D3"
    raise GeometryError(
        f"impossible convergence-point configuration: {theta_c1!r} vs {theta_c2!r}"
    )


def analyze_geometry(gamma: MgfSurface, gamma1: MgfSurface, gamma2: MgfSurface) -> GeometrySummary:
    """Full level-set geometry: extremes, edge points, classification."""
    faces = {1: gamma1, 2: gamma2}
    theta_max = {k: extreme_point(gamma, k, "max") for k in (1, 2)}
    theta_min = {k: extreme_point(gamma, k, "min") for k in (1, 2)}
    theta_e = {k: edge_point(gamma, faces[k], k, theta_max[k]) for k in (1, 2)}
    theta_c = {
        k: convergence_point(gamma, faces[k], k, theta_max[k], theta_e[k]) for k in (1, 2)
    }
    extremes = ExtremePoints(
        theta_max=theta_max,
        theta_min=theta_min,
        theta_e=theta_e,
        theta_c=theta_c,
        gamma_k_at_max={k: faces[k].value(theta_max[k]) for k in (1, 2)},
    )
    label = classify(theta_c[1], theta_c[2])
    b1 = BranchFunction(1, admissible_interval(gamma, 1), gamma)
    b2 = BranchFunction(2, admissible_interval(gamma, 2), gamma)
    return GeometrySummary(
        extreme=extremes,
        branch1=b1,
        branch2=b2,
        classification=label,
        gamma=gamma,
        gamma1=gamma1,
        gamma2=gamma2,
    )


def gamma_max_membership(
    gamma: MgfSurface,
    p: Vec2,
    theta_max1: Optional[Vec2] = None,
    theta_max2: Optional[Vec2] = None,
) -> bool:
    """Is ``p`` strictly dominated by some point of the open level set?

    Decided through the Pareto frontier of the level set: beyond the
    rightmost point the answer is no; left of the topmost point only the
    top coordinate matters; in between the upper branch bounds the second
    coordinate.  Strict comparisons carry a 1e-12 slack.
    """
    if theta_max1 is None:
        theta_max1 = extreme_point(gamma, 1, "max")
    if theta_max2 is None:
        theta_max2 = extreme_point(gamma, 2, "max")
    if p[0] >= theta_max1[0] - _MEMBER_SLACK:
        return False
    if p[0] <= theta_max2[0]:
        return p[1] < theta_max2[1] - _MEMBER_SLACK
    try:
        cap = branch(gamma, 2, p[0], "max")
    except NoRootError:  # pragma: no cover - excluded by the first guard
        return False
    return p[1] < cap - _MEMBER_SLACK
