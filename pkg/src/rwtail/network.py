"""Two-node Markovian network with exogenous batch arrivals.

Customers arrive in batches (possibly at both nodes at once) by a compound
Poisson stream; service is exponential at each node with Markovian routing
between the two nodes and outside.  With the total event rate normalized
to one, uniformization turns the queue-length process into a discrete-time
reflecting walk of exactly the skip-free kind this package analyzes, with
explicit jump kernels per region.  The module also solves the
Miyazawa-Taylor geometric bound for networks without simultaneous
arrivals and decides when that bound is tight in each coordinate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import (
    KernelError,
    ModelFileError,
    NormalizationError,
    SimultaneousArrivalsError,
)
from .geometry import GeometrySummary, analyze_geometry
from .model import JumpKernel, ModelSpec, Region

BatchAtom = tuple[int, int, float]


@dataclass(frozen=True)
class NetworkSpec:
    """Arrival, service, routing and batch-size parameters.

    ``lam + mu1 + mu2`` must equal 1 (pass ``normalize=True`` to rescale,
    which leaves the stationary distribution unchanged).  Routing
    probabilities at 0 are accepted with a warning flag: they break the
    usual positivity assumption but still define a valid walk, and the
    downstream analysis does not depend on it.
    """

    lam: float
    mu1: float
    mu2: float
    p12: float
    p21: float
    batch: tuple[BatchAtom, ...]

    def __post_init__(self) -> None:
        # lam = 0 (no arrivals) is degenerate but accepted so the
        # utilization formulas cover it; service rates must be positive.
        if self.lam < 0 or self.mu1 <= 0 or self.mu2 <= 0:
            raise KernelError("lambda must be nonnegative and mu1, mu2 positive")
        total = self.lam + self.mu1 + self.mu2
        if abs(total - 1.0) > 1e-12:
            raise NormalizationError(
                f"lambda + mu1 + mu2 = {total!r}; pass normalize=True to rescale"
            )
        for name, p in (("p12", self.p12), ("p21", self.p21)):
            if not (0.0 <= p < 1.0):
                raise KernelError(f"{name} = {p!r} outside [0, 1)")
        if not self.batch:
            raise KernelError("batch distribution is empty")
        seen = set()
        cleaned = []
        for b1, b2, p in self.batch:
            b1, b2 = int(b1), int(b2)
            if b1 < 0 or b2 < 0 or (b1 == 0 and b2 == 0):
                raise KernelError(f"batch atom ({b1}, {b2}) outside Z+^2 minus the origin")
            if p <= 0.0:
                raise KernelError(f"batch probability {p!r} must be positive")
            if (b1, b2) in seen:
                raise KernelError(f"duplicate batch atom ({b1}, {b2})")
            seen.add((b1, b2))
            cleaned.append((b1, b2, float(p)))
        if abs(math.fsum(p for _, _, p in cleaned) - 1.0) > 1e-12:
            raise NormalizationError("batch probabilities must sum to 1")
        object.__setattr__(self, "batch", tuple(sorted(cleaned)))

    @property
    def routing_warning(self) -> Optional[str]:
        zeros = [name for name, p in (("p12", self.p12), ("p21", self.p21)) if p == 0.0]
        if zeros:
            return f"routing probability {' and '.join(zeros)} is zero (boundary of the usual assumption)"
        return None

    def batch_means(self) -> tuple[float, float]:
        b1 = math.fsum(a * p for a, _, p in self.batch)
        b2 = math.fsum(b * p for _, b, p in self.batch)
        return (b1, b2)

    def has_simultaneous(self) -> bool:
        return any(a > 0 and b > 0 for a, b, _ in self.batch)

    def batch_at_node(self, k: int) -> bool:
        """True when node k can receive more than one customer at once."""
        if k == 1:
            return any(a > 1 for a, b, _ in self.batch if b == 0) or any(
                a > 0 and b > 0 for a, b, _ in self.batch
            )
        return any(b > 1 for a, b, _ in self.batch if a == 0) or any(
            a > 0 and b > 0 for a, b, _ in self.batch
        )


def network_spec(
    lam: float,
    mu1: float,
    mu2: float,
    p12: float,
    p21: float,
    batch: Sequence[BatchAtom],
    normalize: bool = False,
) -> NetworkSpec:
    """Construct a NetworkSpec, optionally rescaling to total rate one."""
    if normalize:
        total = lam + mu1 + mu2
        if total <= 0:
            raise KernelError("cannot normalize nonpositive total rate")
        lam, mu1, mu2 = lam / total, mu1 / total, mu2 / total
    return NetworkSpec(lam, mu1, mu2, p12, p21, tuple(batch))


def _merge(weights: dict[tuple[int, int], float], dx: int, dy: int, w: float) -> None:
    if w > 0.0:
        weights[(dx, dy)] = weights.get((dx, dy), 0.0) + w


def build_model(ns: NetworkSpec) -> ModelSpec:
    """Uniformized jump kernels of the network's queue-length process.

    Interior: batch atoms with weight lam * F(b), service completions
    (-1, 0) and (-1, 1) for node 1 (leave / route to node 2), (0, -1) and
    (1, -1) for node 2.  On a face the idle node's service events collapse
    into a (0, 0) atom of weight mu_k; at the origin both do.  Zero-weight
    atoms are dropped.
    """
    lam, mu1, mu2, p12, p21 = ns.lam, ns.mu1, ns.mu2, ns.p12, ns.p21

    def batches() -> dict[tuple[int, int], float]:
        w: dict[tuple[int, int], float] = {}
        for b1, b2, p in ns.batch:
            _merge(w, b1, b2, lam * p)
        return w

    interior = batches()
    _merge(interior, -1, 0, mu1 * (1 - p12))
    _merge(interior, -1, 1, mu1 * p12)
    _merge(interior, 0, -1, mu2 * (1 - p21))
    _merge(interior, 1, -1, mu2 * p21)

    face1 = batches()
    _merge(face1, -1, 0, mu1 * (1 - p12))
    _merge(face1, -1, 1, mu1 * p12)
    _merge(face1, 0, 0, mu2)

    face2 = batches()
    _merge(face2, 0, 0, mu1)
    _merge(face2, 0, -1, mu2 * (1 - p21))
    _merge(face2, 1, -1, mu2 * p21)

    origin = batches()
    _merge(origin, 0, 0, mu1 + mu2)

    def kernel(region: Region, weights: dict[tuple[int, int], float]) -> JumpKernel:
        return JumpKernel(region, tuple((dx, dy, p) for (dx, dy), p in weights.items()))

    return ModelSpec(
        interior=kernel(Region.INTERIOR, interior),
        face1=kernel(Region.FACE1, face1),
        face2=kernel(Region.FACE2, face2),
        origin=kernel(Region.ORIGIN, origin),
    )


def utilizations(ns: NetworkSpec) -> tuple[float, float]:
    """Traffic intensities; the network is stable iff both are below one."""
    b1, b2 = ns.batch_means()
    denom = 1.0 - ns.p12 * ns.p21
    rho1 = ns.lam * (b1 + b2 * ns.p21) / (denom * ns.mu1)
    rho2 = ns.lam * (b2 + b1 * ns.p12) / (denom * ns.mu2)
    return (rho1, rho2)


def _split_batches(ns: NetworkSpec) -> tuple[float, list[tuple[int, float]], float, list[tuple[int, float]]]:
    """Per-node arrival rates and conditional batch-size distributions."""
    w1 = [(a, p) for a, b, p in ns.batch if b == 0]
    w2 = [(b, p) for a, b, p in ns.batch if a == 0]
    f1 = math.fsum(p for _, p in w1)
    f2 = math.fsum(p for _, p in w2)
    lam1 = ns.lam * f1
    lam2 = ns.lam * f2
    dist1 = [(s, p / f1) for s, p in w1] if f1 > 0 else []
    dist2 = [(s, p / f2) for s, p in w2] if f2 > 0 else []
    return lam1, dist1, lam2, dist2


def _pgf(dist: list[tuple[int, float]], s: float) -> float:
    return math.fsum(p * s**size for size, p in dist)


@dataclass(frozen=True)
class MTBound:
    """Geometric product-form upper bound for the stationary distribution.

    (h1, h2) is the maximal solution of the bound equations; eta_k = log
    h_k lies on the interior level curve.  ``tight_k`` records whether
    eta_k equals the true coordinate decay rate, decided by the
    characterization through the level-set configuration.
    """

    h1: float
    h2: float
    eta1: float
    eta2: float
    solvable: bool
    tight1: bool
    tight2: bool
    no_simultaneous: bool
    reasons: tuple[str, str] = ("", "")


def _bound_root(
    lam_k: float,
    dist_k: list[tuple[int, float]],
    mu_k: float,
    cross: float,
) -> float:
    """Maximal root s > 0 of lam_k (F~(s) - 1) + mu_k (1-s)/s = cross * (1-s).

    The left-minus-right expression is convex in s with a root at 1; the
    maximal root exceeds 1 exactly when the derivative at 1 is negative.
    """

    def f(s: float) -> float:
        pgf = _pgf(dist_k, s) if dist_k else s  # no batches: identity
        return lam_k * (pgf - 1.0) + mu_k * (1.0 - s) / s - cross * (1.0 - s)

    b1 = math.fsum(size * p for size, p in dist_k) if dist_k else 1.0
    deriv1 = lam_k * b1 - mu_k + cross
    if deriv1 >= 0.0:
        return 1.0
    hi = 2.0
    for _ in range(200):
        if f(hi) > 0.0:
            break
        hi = 1.0 + (hi - 1.0) * 2.0
    else:
        return math.inf
    lo = 1.0
    while hi - lo > 1e-14 * (1.0 + hi):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tightness_predicate(
    ns: NetworkSpec, g: GeometrySummary, k: int, h_other: float
) -> tuple[bool, str]:
    """Characterization of eta_k = alpha_k through the level-set geometry.

    Beyond the edge-point characterization there is a degenerate regime the
    classical statement misses: when the other coordinate's bound collapses
    to h = 1, the solved h_k is exactly the positive axis crossing of the
    interior level curve, which is also the marginal decay rate whenever
    the level curve at theta_k = tau_k no longer reaches nonnegative cross
    values.  That clause is checked first.
    """
    other = 3 - k
    if h_other <= 1.0 + 1e-12:
        from .asymptotics import tau_direct
        from .geometry import branch

        tau_k = tau_direct(g).tau[k - 1]
        try:
            cross = branch(g.gamma, other, tau_k, "max")
        except Exception:
            cross = -math.inf
        if cross <= 1e-9:
            return True, (
                f"bound degenerate in coordinate {other} (h = 1): the solved rate is the "
                f"axis crossing of the level curve, which is the marginal rate here"
            )
        return False, (
            f"bound degenerate in coordinate {other} (h = 1) while the box side still "
            f"binds the coordinate-{k} marginal rate"
        )
    if not any(ns.batch_at_node(j) for j in (1, 2)):
        return True, "no batch arrivals anywhere: product-form stationary law"
    if ns.batch_at_node(other):
        return False, f"node {other} has batch arrivals"
    label = g.classification
    gk_at_max = g.extreme.gamma_k_at_max[k]
    same_d = "D3" if k == 1 else "D2"
    if label == same_d:
        return True, f"no batch arrivals at node {other} and configuration {same_d}"
    if label == "D1" and gk_at_max > 1.0 + 1e-12:
        return (
            True,
            f"no batch arrivals at node {other}, configuration D1 with the coordinate-{k} "
            "maximal point outside the face level set",
        )
    return False, (
        f"configuration {label} keeps the coordinate-{k} maximal point inside the face level set"
    )


def mt_bound(ns: NetworkSpec, geometry: Optional[GeometrySummary] = None) -> MTBound:
    """Maximal solution of the geometric bound equations.

    Requires single-node batches (raises SimultaneousArrivalsError
    otherwise).  Starting from the product-form rates of the matching
    network without batches - a supersolution - the alternating 1-D
    maximal-root solves decrease monotonically to the maximal solution.
    """
    if ns.has_simultaneous():
        raise SimultaneousArrivalsError(
            "batch distribution has a joint atom; the bound needs single-node batches"
        )
    lam1, dist1, lam2, dist2 = _split_batches(ns)
    rho1, rho2 = utilizations(ns)
    if rho1 >= 1.0 or rho2 >= 1.0:
        raise KernelError("the bound is defined for stable networks only")
    s1, s2 = 1.0 / rho1, 1.0 / rho2
    for _ in range(500):
        n1 = _bound_root(lam1, dist1, ns.mu1, ns.mu2 * ns.p21 / s2)
        n2 = _bound_root(lam2, dist2, ns.mu2, ns.mu1 * ns.p12 / n1)
        change = max(abs(n1 - s1), abs(n2 - s2))
        s1, s2 = n1, n2
        if change < 1e-12:
            break
    # h = 1 in one coordinate is a legitimate (degenerate) maximal solution:
    # the bound holds but is vacuous there
    solvable = (
        math.isfinite(s1)
        and math.isfinite(s2)
        and s1 >= 1.0
        and s2 >= 1.0
        and max(s1, s2) > 1.0
    )
    if not solvable:
        return MTBound(s1, s2, math.log(s1), math.log(s2), False, False, False, True)
    if geometry is None:
        geometry = analyze_geometry(*build_model(ns).mgfs())
    t1, r1 = _tightness_predicate(ns, geometry, 1, s2)
    t2, r2 = _tightness_predicate(ns, geometry, 2, s1)
    return MTBound(
        h1=s1,
        h2=s2,
        eta1=math.log(s1),
        eta2=math.log(s2),
        solvable=True,
        tight1=t1,
        tight2=t2,
        no_simultaneous=True,
        reasons=(r1, r2),
    )


def tightness(
    ns: NetworkSpec,
    g: GeometrySummary,
    bound: MTBound,
    rates: tuple[float, float],
    tol: float = 1e-8,
) -> tuple[bool, bool, tuple[str, str]]:
    """Numeric tightness of the bound against the analytic decay rates.

    Returns per-coordinate equality within ``tol`` plus the reason strings
    of the characterization.  The characterization is sufficient always
    and necessary when the node itself has batch arrivals; a mismatch
    within its scope means an internal inconsistency, which the caller
    (and the test suite) treats as a hard failure.
    """
    numeric = (abs(bound.eta1 - rates[0]) < tol, abs(bound.eta2 - rates[1]) < tol)
    predicate = (bound.tight1, bound.tight2)
    reasons = []
    for k in (1, 2):
        reason = bound.reasons[k - 1]
        if predicate[k - 1] and not numeric[k - 1]:
            reason += " [INCONSISTENT: predicate holds but rates differ]"
        if ns.batch_at_node(k) and numeric[k - 1] and not predicate[k - 1]:
            reason += " [INCONSISTENT: rates agree but the necessary condition fails]"
        reasons.append(reason)
    return numeric[0], numeric[1], (reasons[0], reasons[1])


# ---------------------------------------------------------------------------
# Network files


def network_to_dict(ns: NetworkSpec) -> dict:
    return {
        "lambda": ns.lam,
        "mu1": ns.mu1,
        "mu2": ns.mu2,
        "p12": ns.p12,
        "p21": ns.p21,
        "batch": [[b1, b2, p] for b1, b2, p in ns.batch],
    }


def network_from_dict(doc: dict) -> NetworkSpec:
    try:
        lam = float(doc["lambda"])
        mu1 = float(doc["mu1"])
        mu2 = float(doc["mu2"])
        p12 = float(doc["p12"])
        p21 = float(doc["p21"])
        batch = tuple((int(r[0]), int(r[1]), float(r[2])) for r in doc["batch"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFileError(f"malformed network document: {exc}") from exc
    return network_spec(lam, mu1, mu2, p12, p21, batch, normalize=bool(doc.get("normalize", False)))


def load_network(path: str) -> NetworkSpec:
    """Read a network from a JSON file (keys lambda, mu1, mu2, p12, p21, batch)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read network file {path!r}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFileError("network file must hold a JSON object")
    return network_from_dict(doc)


def is_network_document(doc: dict) -> bool:
    return "lambda" in doc and "batch" in doc
