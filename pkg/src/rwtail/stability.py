"""Stability of the reflecting walk: drift conditions and geometric check.

The primary decision uses the corrected drift conditions: three sign
patterns of the interior drift combined with inner products against the
rotated face drifts, plus two boundary-case corrections that the classical
statement omits (a face drift pointing straight along its own axis must
point toward the origin).  The geometric criterion - the two level-set
intersections each contain a point with positive own coordinate - is an
equivalent formulation used as a verification device, never as a fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import NullDriftError
from .geometry import GeometrySummary
from .model import DriftVectors, MgfSurface, ModelSpec, Vec2, drift_vectors

# Sign tests treat |x| below this as zero so the boundary-case corrections
# fire exactly when a drift component vanishes, not when it merely rounds.
SIGN_TOL = 1e-12


def _neg(x: float) -> bool:
    return x < -SIGN_TOL


def _zero(x: float) -> bool:
    return abs(x) <= SIGN_TOL


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    case: str  # "I", "II", "III" or "None"
    inner_products: tuple[float, float]  # <m, m1_perp>, <m, m2_perp>
    extra_condition_applied: bool
    geometric_agreement: Optional[bool] = None
    note: str = ""


def drift_stability(d: DriftVectors) -> StabilityVerdict:
    """Stationary-distribution existence from the mean drifts.

    Requires a nonvanishing interior drift (raises NullDriftError below the
    sign tolerance; with null drift the stationary law cannot have light
    tails and this analysis does not apply).  Drift sign patterns not
    covered by the three cases are reported unstable.
    """
    m, m1, m2 = d.m, d.m1, d.m2
    if max(abs(m[0]), abs(m[1])) <= SIGN_TOL:
        raise NullDriftError("interior drift vanishes; stability analysis unsupported")
    ip1 = m[0] * d.m1_perp[0] + m[1] * d.m1_perp[1]
    ip2 = m[0] * d.m2_perp[0] + m[1] * d.m2_perp[1]

    extra = False
    if _neg(m[0]) and _neg(m[1]):
        stable = _neg(ip1) and _neg(ip2)
        case = "I" if stable else "None"
    elif not _neg(m[0]) and _neg(m[1]):
        stable = _neg(ip1)
        if stable and _zero(m2[0]):
            extra = True
            stable = _neg(m2[1])
        case = "II" if stable else "None"
    elif _neg(m[0]) and not _neg(m[1]):
        stable = _neg(ip2)
        if stable and _zero(m1[1]):
            extra = True
            stable = _neg(m1[0])
        case = "III" if stable else "None"
    else:  # pragma: no cover - excluded by the null-drift gate
        stable = False
        case = "None"
    note = ""
    if not stable and case == "None":
        note = "drift sign pattern matches no stable case"
    return StabilityVerdict(
        stable=stable,
        case=case,
        inner_products=(ip1, ip2),
        extra_condition_applied=extra,
        note=note,
    )


_TWO_PI = 2.0 * math.pi


def _arc_intersect(a: Optional[tuple[float, float]], b: tuple[float, float]) -> Optional[tuple[float, float]]:
    """Intersection of two open circular arcs given as (start, length).

    Both arcs have length <= pi, so the intersection is a single arc or
    empty.  Angles are taken mod 2*pi.
    """
    if a is None:
        return None
    s1, l1 = a
    s2, l2 = b
    d = (s2 - s1) % _TWO_PI
    pieces = []
    if d < l1:
        pieces.append((d, min(l1, d + l2)))
    if d + l2 > _TWO_PI:  # the second arc wraps past the frame of the first
        end = d + l2 - _TWO_PI
        pieces.append((0.0, min(l1, end)))
    for lo, hi in pieces:
        if hi - lo > 1e-12:
            return (s1 + lo, hi - lo)
    return None


def _half_plane_arc(v: Vec2) -> Optional[tuple[float, float]]:
    """Open arc of unit directions theta with <theta, v> < 0."""
    if v[0] == 0.0 and v[1] == 0.0:
        return None
    return (math.atan2(v[1], v[0]) + 0.5 * math.pi, math.pi)


def _direction_witness(m: Vec2, mk: Vec2, k: int, fan: int) -> Optional[Vec2]:
    """A direction with positive k-th coordinate along which both the
    interior and the face-k MGF initially descend below 1.

    Scans a uniform fan of directions and, in addition, the exact feasible
    angular arc (intersection of the two drift half-planes with the
    positive coordinate half-plane), so a cone narrower than the fan step
    cannot be missed.  Directions with nonpositive cross coordinate are
    preferred, exhibiting the sharper form of the geometric criterion.
    """

    def feasible(th: Vec2) -> bool:
        if th[k - 1] <= SIGN_TOL:
            return False
        return (
            th[0] * m[0] + th[1] * m[1] < -SIGN_TOL
            and th[0] * mk[0] + th[1] * mk[1] < -SIGN_TOL
        )

    coord_arc = (0.0, math.pi) if k == 2 else (-0.5 * math.pi, math.pi)
    arc_m = _half_plane_arc(m)
    arc_k = _half_plane_arc(mk)
    arc = None
    if arc_m is not None and arc_k is not None:
        arc = _arc_intersect(_arc_intersect(arc_m, arc_k), coord_arc)

    candidates: list[Vec2] = []
    if arc is not None:
        mid = arc[0] + 0.5 * arc[1]
        candidates.append((math.cos(mid), math.sin(mid)))
    for i in range(fan):
        a = _TWO_PI * i / fan
        candidates.append((math.cos(a), math.sin(a)))

    preferred = [c for c in candidates if feasible(c) and c[2 - k] <= 0.0]
    fallback = [c for c in candidates if feasible(c)]
    for pool in (preferred, fallback):
        if pool:
            return pool[0]
    return None


def _scale_below_one(surface: MgfSurface, direction: Vec2, start: float = 1.0) -> Optional[float]:
    """A scale u > 0 with surface(u * direction) < 1, found by halving.

    Exists whenever the directional derivative at the origin is negative;
    sixty halvings cover any curvature the finite supports can produce.
    """
    u = start
    for _ in range(60):
        if surface.value((u * direction[0], u * direction[1])) < 1.0:
            return u
        u *= 0.5
    return None


def positive_quadrant_witness(gamma: MgfSurface, fan: int = 180) -> Optional[Vec2]:
    """A nonzero point of the interior sublevel set in the closed positive
    quadrant, or None.

    Exists exactly when some interior drift component is negative: the
    surface descends below 1 along a nonnegative direction iff its slope at
    the origin is negative there.
    """
    m = gamma.gradient((0.0, 0.0))
    for i in range(fan + 1):
        a = 0.5 * math.pi * i / fan
        th = (math.cos(a), math.sin(a))
        if th[0] * m[0] + th[1] * m[1] < -SIGN_TOL:
            u = _scale_below_one(gamma, th)
            if u is not None:
                return (u * th[0], u * th[1])
    return None


def geometric_witnesses(
    gamma: MgfSurface, gamma1: MgfSurface, gamma2: MgfSurface, fan: int = 720
) -> dict[int, Optional[Vec2]]:
    """For each face k, a point interior to both level sets with positive
    k-th coordinate, or None when no such point exists."""
    m = gamma.gradient((0.0, 0.0))
    faces = {1: gamma1, 2: gamma2}
    out: dict[int, Optional[Vec2]] = {}
    for k, gk in faces.items():
        mk = gk.gradient((0.0, 0.0))
        direction = _direction_witness(m, mk, k, fan)
        if direction is None:
            out[k] = None
            continue
        u0 = _scale_below_one(gamma, direction)
        if u0 is None:
            out[k] = None
            continue
        point = (u0 * direction[0], u0 * direction[1])
        u1 = _scale_below_one(gk, point)
        if u1 is None:
            out[k] = None
            continue
        u1 = min(1.0, u1)
        witness = (u1 * point[0], u1 * point[1])
        # The segment from the origin stays inside the interior level set.
        if gamma.value(witness) < 1.0 and gk.value(witness) < 1.0 and witness[k - 1] > 0.0:
            out[k] = witness
        else:  # pragma: no cover - convexity should prevent this
            out[k] = None
    return out


def geometric_stability(
    gamma: MgfSurface, gamma1: MgfSurface, gamma2: MgfSurface, fan: int = 720
) -> bool:
    """Level-set formulation of stability.

    True iff the interior sublevel set reaches into the closed positive
    quadrant and, for each face k, its intersection with the face-k
    sublevel set contains a point with positive k-th coordinate.  The
    quadrant clause is essential: with both interior drift components
    nonnegative (never stable) the per-face witnesses can still exist, via
    points far down the opposite axis.  The search tests drift inner
    products over a direction fan plus the exact feasible arc, then
    line-searches the scale; a feasible direction certifies the point.
    """
    if positive_quadrant_witness(gamma) is None:
        return False
    w = geometric_witnesses(gamma, gamma1, gamma2, fan)
    return w[1] is not None and w[2] is not None


def assess_stability(model: ModelSpec) -> StabilityVerdict:
    """Drift verdict cross-checked against the geometric criterion."""
    verdict = drift_stability(drift_vectors(model))
    geom = geometric_stability(*model.mgfs())
    agreement = geom == verdict.stable
    return StabilityVerdict(
        stable=verdict.stable,
        case=verdict.case,
        inner_products=verdict.inner_products,
        extra_condition_applied=verdict.extra_condition_applied,
        geometric_agreement=agreement,
        note=verdict.note,
    )
