"""Convergence domain and directional decay rates of the stationary law.

The componentwise rates tau of the boundary measures follow from the
convergence points by a three-case formula keyed to their configuration
(D1/D2/D3).  An independent route computes the same vector as the limit of
a monotone fixed-point iteration over half-plane cuts of the level-set
intersections; the two must agree, which the test suite enforces.  The
convergence domain is the part of the lower completion of the interior
level set strictly below tau, and the decay rate in a direction c is the
exit scale of the ray x*c from that domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Optional, Sequence

from .errors import ConvergenceError, GeometryError
from .geometry import (
    GeometrySummary,
    branch,
    gamma_max_membership,
    intersection_projection,
    intersection_slice,
    intersection_sup,
)
from .model import MgfSurface, Vec2

_CUT_TOL = 1e-12


@dataclass(frozen=True)
class TauResult:
    tau: Vec2
    classification: str
    provenance: str  # "direct" or "iteration"
    iteration_trace: tuple[Vec2, ...] = ()


def tau_direct(g: GeometrySummary) -> TauResult:
    """Componentwise decay rates from the convergence-point case split."""
    c1 = g.extreme.theta_c[1]
    c2 = g.extreme.theta_c[2]
    label = g.classification
    if label == "D1":
        tau = (c1[0], c2[1])
    elif label == "D2":
        tau = (g.branch1.upper(c2[1]), c2[1])
    else:  # D3
        tau = (c1[0], g.branch2.upper(c1[0]))
    return TauResult(tau=tau, classification=label, provenance="direct")


class _IntersectionSup:
    """sup of one coordinate over the intersection of two sublevel sets,
    optionally under a half-plane cut on the other coordinate.

    At a fixed cross-coordinate t the slice of the intersection is an
    interval whose upper end is the smaller of the two section max-roots;
    that upper envelope is concave on the projection interval, so one
    ternary search gives the unconstrained supremum and every cut
    supremum is a single envelope evaluation afterwards.
    """

    def __init__(self, gamma: MgfSurface, gamma_k: MgfSurface, k: int) -> None:
        self.gamma = gamma
        self.gamma_k = gamma_k
        self.k = k
        self.interval = intersection_projection(gamma, gamma_k, k)
        self.t_star, self.u_star = intersection_sup(gamma, gamma_k, k)

    def _envelope(self, t: float) -> float:
        s = intersection_slice(self.gamma, self.gamma_k, self.k, t)
        return s[1] if s is not None else -math.inf

    def sup_under_cut(self, cut: float) -> float:
        """sup of coordinate k over the intersection with cross <= cut."""
        lo, hi = self.interval
        if cut < lo - _CUT_TOL:
            return -math.inf
        t = min(cut, hi)
        if t >= self.t_star:
            return self.u_star
        return self._envelope(t)


def tau_iteration(
    gamma: MgfSurface,
    gamma1: MgfSurface,
    gamma2: MgfSurface,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> TauResult:
    """Componentwise decay rates as the limit of half-plane-cut suprema.

    Starts from the suprema under nonpositive cross coordinate, then
    repeatedly raises each component to the supremum allowed by the other's
    current value.  The sequence is nondecreasing and bounded by the
    coordinate maxima of the interior level set, hence convergent; the
    limit solves the fixed-point equation.  A running maximum keeps the
    trace monotone when one starting slice is empty.
    """
    sup1 = _IntersectionSup(gamma, gamma1, 1)
    sup2 = _IntersectionSup(gamma, gamma2, 2)

    t1 = sup1.sup_under_cut(0.0)
    t2 = sup2.sup_under_cut(0.0)
    if not (t1 > -math.inf or t2 > -math.inf):
        raise GeometryError("both starting slices empty; model is not stable")
    trace = [(t1, t2)]
    prev_step = math.inf
    for _ in range(max_iter):
        n1 = max(t1, sup1.sup_under_cut(t2)) if t2 > -math.inf else t1
        n2 = max(t2, sup2.sup_under_cut(t1)) if t1 > -math.inf else t2
        step = max(abs(n1 - t1) if math.isfinite(n1 - t1) else math.inf,
                   abs(n2 - t2) if math.isfinite(n2 - t2) else math.inf)
        t1, t2 = n1, n2
        trace.append((t1, t2))
        if step < tol:
            # geometric-tail estimate: stop once the projected remaining
            # change is below tolerance as well
            if prev_step < math.inf and prev_step > 0.0:
                rho = step / prev_step
                if rho < 1.0 and step * rho / (1.0 - rho) < tol:
                    break
            if step < 1e-13:
                break
        prev_step = step if step > 0.0 else prev_step
    else:
        raise ConvergenceError("half-plane-cut iteration did not converge")
    return TauResult(
        tau=(t1, t2),
        classification="",
        provenance="iteration",
        iteration_trace=tuple(trace),
    )


@dataclass(frozen=True)
class DomainDescription:
    """The open convergence domain: lower completion of the interior level
    set intersected with the open box below tau."""

    tau: TauResult
    geometry: GeometrySummary

    def contains(self, p: Sequence[float]) -> bool:
        t1, t2 = self.tau.tau
        if not (p[0] < t1 - _CUT_TOL and p[1] < t2 - _CUT_TOL):
            return False
        ex = self.geometry.extreme
        return gamma_max_membership(
            self.geometry.gamma, (p[0], p[1]), ex.theta_max[1], ex.theta_max[2]
        )

    def _gamma_exit(self, c: Vec2) -> float:
        """sup{x : x*c in the lower completion of the level set}."""
        ex = self.geometry.extreme
        gamma = self.geometry.gamma

        def member(x: float) -> bool:
            return gamma_max_membership(
                gamma, (x * c[0], x * c[1]), ex.theta_max[1], ex.theta_max[2]
            )

        hi = 1.0
        for _ in range(80):
            if not member(hi):
                break
            hi *= 2.0
        else:  # pragma: no cover - the level set is bounded
            raise GeometryError("ray never leaves the lower completion")
        lo = 0.0
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            if member(mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def exit_scales(self, c: Vec2) -> tuple[float, float, float]:
        """Exit scales of the ray x*c against the three active constraints
        (tau box sides and the level-set frontier); inf when inactive."""
        t1, t2 = self.tau.tau
        x1 = t1 / c[0] if c[0] > _CUT_TOL else math.inf
        x2 = t2 / c[1] if c[1] > _CUT_TOL else math.inf
        return (x1, x2, self._gamma_exit(c))

    def boundary_sample(self, n: int = 64) -> list[Vec2]:
        """Points on the domain boundary, snapped onto their active constraint."""
        ex = self.geometry.extreme
        t1max = ex.theta_max[1]
        t2max = ex.theta_max[2]
        tau1, tau2 = self.tau.tau
        pts: list[Vec2] = []
        for i in range(n):
            w = -0.5 * math.pi + (1.5 * math.pi) * (i + 0.5) / n
            c = (math.cos(w), math.sin(w))
            x1, x2, xg = self.exit_scales(c)
            x = min(x1, x2, xg)
            if not math.isfinite(x):  # pragma: no cover - cannot happen on this fan
                continue
            p = [x * c[0], x * c[1]]
            tol = 1e-9 * (1.0 + abs(x))
            if x1 <= min(x2, xg) + tol:
                p[0] = tau1
            elif x2 <= xg + tol:
                p[1] = tau2
            else:
                if p[0] >= t1max[0] - 1e-9:
                    p[0] = t1max[0]
                elif p[0] <= t2max[0] + 1e-9:
                    p[1] = t2max[1]
                else:
                    p[1] = branch(self.geometry.gamma, 2, p[0], "max")
            p[0] = min(p[0], tau1)
            p[1] = min(p[1], tau2)
            pts.append((p[0], p[1]))
        return pts


@dataclass(frozen=True)
class Periodicity:
    kind: str  # "arithmetic" or "unknown"
    delta: Optional[Fraction] = None


def periodicity(c1: Fraction, c2: Fraction) -> Periodicity:
    """Arithmetic span of the inner products <c, n> over the integer quadrant.

    For rational (pre-normalization) direction components the value set is
    delta * Z at infinity with delta the gcd of the two rationals; a zero
    component leaves the other's scale.  Dense behavior needs an irrational
    ratio, which rational inputs cannot represent.
    """
    c1, c2 = Fraction(c1), Fraction(c2)
    if c1 < 0 or c2 < 0 or (c1 == 0 and c2 == 0):
        raise ValueError("direction must be nonnegative and nonzero")
    if c1 == 0:
        return Periodicity("arithmetic", c2)
    if c2 == 0:
        return Periodicity("arithmetic", c1)
    num = gcd(c1.numerator * c2.denominator, c2.numerator * c1.denominator)
    return Periodicity("arithmetic", Fraction(num, c1.denominator * c2.denominator))


@dataclass(frozen=True)
class DirectionRate:
    c: Vec2  # unit direction
    alpha: float
    active_constraint: str  # "tau1", "tau2" or "gamma_boundary"
    periodicity: Periodicity
    raw_direction: Optional[tuple[Fraction, Fraction]] = None


def alpha_direction(
    d: DomainDescription,
    c: Sequence[float],
    raw: Optional[tuple[Fraction, Fraction]] = None,
) -> DirectionRate:
    """Decay rate along a nonnegative unit direction: the exit scale of the
    ray from the convergence domain, with the binding constraint recorded.

    For a coordinate direction this reproduces the marginal case split: the
    box side when the level curve still lies above the axis there, else the
    positive axis crossing of the level curve.
    """
    c1, c2 = float(c[0]), float(c[1])
    norm = math.hypot(c1, c2)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"direction must be unit length, got norm {norm!r}")
    if c1 < -1e-15 or c2 < -1e-15:
        raise ValueError("direction must be nonnegative")
    unit = (max(c1, 0.0), max(c2, 0.0))
    x1, x2, xg = d.exit_scales(unit)
    alpha = min(x1, x2, xg)
    tol = 1e-9 * (1.0 + alpha)
    if x1 <= min(x2, xg) + tol:
        active = "tau1"
    elif x2 <= xg + tol:
        active = "tau2"
    else:
        active = "gamma_boundary"
    if raw is not None:
        per = periodicity(raw[0], raw[1])
    else:
        per = Periodicity("unknown", None)
    return DirectionRate(
        c=unit, alpha=alpha, active_constraint=active, periodicity=per, raw_direction=raw
    )


def coordinate_rate_case_split(g: GeometrySummary, tau: Vec2, k: int) -> float:
    """Marginal decay rate by the explicit two-branch formula.

    Equals the box rate tau_k while the level curve at theta_k = tau_k still
    reaches nonnegative cross values, else the positive solution of
    gamma = 1 on the k-th axis.  Used as a consistency check against the
    ray-exit computation.
    """
    other = 3 - k
    try:
        cross = branch(g.gamma, other, tau[k - 1], "max")
    except Exception:
        cross = -math.inf
    if cross >= 0.0:
        return tau[k - 1]
    axis = branch(g.gamma, k, 0.0, "max")
    return axis


def exactness_verdict(
    g: GeometrySummary, tau: Vec2, rate: DirectionRate, tol: float = 1e-9
) -> str:
    """Qualitative verdict on exactly exponential tail asymptotics.

    Reports whether the sufficient conditions hold at the rate point (on
    the interior level curve, off both face level curves, and off the tau
    box), flags the branch-point configuration as indeterminate, and claims
    nothing otherwise.
    """
    p = (rate.alpha * rate.c[0], rate.alpha * rate.c[1])
    on_gamma = abs(g.gamma.value(p) - 1.0) <= tol
    off_faces = all(abs(face.value(p) - 1.0) > tol for face in (g.gamma1, g.gamma2))
    off_box = all(abs(rate.alpha * rate.c[k - 1] - tau[k - 1]) > tol for k in (1, 2))
    if on_gamma and off_faces and off_box:
        return "exactly exponential (sufficient conditions hold)"
    for k in (1, 2):
        tmax = g.extreme.theta_max[k]
        te = g.extreme.theta_e[k]
        distinct = te is None or math.hypot(tmax[0] - te[0], tmax[1] - te[1]) > 1e-7
        if not distinct:
            continue
        # the ray meets the curve-maximal point, or the marginal rate equals
        # its k-th coordinate: either way the decay sits at a branch point
        at_max = math.hypot(p[0] - tmax[0], p[1] - tmax[1]) <= 1e-7
        coord_max = rate.c[k - 1] > tol and abs(p[k - 1] - tmax[k - 1]) <= tol
        if at_max or coord_max:
            return "indeterminate at branch point"
    return "not established"
