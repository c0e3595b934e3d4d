import math
from fractions import Fraction

import numpy as np
import pytest

from rwtail.asymptotics import (
    DomainDescription,
    alpha_direction,
    coordinate_rate_case_split,
    exactness_verdict,
    periodicity,
    tau_direct,
    tau_iteration,
)
from rwtail.geometry import analyze_geometry, branch, branch_grid, admissible_interval
from rwtail.model import JumpKernel, ModelSpec, Region, build_mgf
from rwtail.network import build_model, network_spec, utilizations
from rwtail.testing import node1_batch_network, random_model

from conftest import make_rng

SQRT2 = math.sqrt(2.0)


def swap_model(model: ModelSpec) -> ModelSpec:
    def sw(kernel, region):
        return JumpKernel(region, tuple((dy, dx, p) for dx, dy, p in kernel.atoms))

    return ModelSpec(
        interior=sw(model.interior, Region.INTERIOR),
        face1=sw(model.face2, Region.FACE1),
        face2=sw(model.face1, Region.FACE2),
        origin=sw(model.origin, Region.ORIGIN),
    )


def d2_network():
    """Node-2 batches of size two shrink the face-2 level set enough to put
    its convergence point componentwise below the face-1 one."""
    return network_spec(0.1, 0.5, 0.3, 0.5, 0.1, [(0, 2, 1.0)], normalize=True)


@pytest.fixture(scope="module")
def e1_domain(e1_geo):
    return DomainDescription(tau=tau_direct(e1_geo), geometry=e1_geo)


class TestTauDirect:
    def test_e1_matches_product_form(self, e1_geo, e1_net):
        # independent oracle: the no-batch network is product form with
        # per-node geometric rates rho_k, so tau_k = -log rho_k
        rho1, rho2 = utilizations(e1_net)
        result = tau_direct(e1_geo)
        assert result.classification == "D1"
        assert abs(result.tau[0] - (-math.log(rho1))) <= 1e-9
        assert abs(result.tau[1] - (-math.log(rho2))) <= 1e-9

    def test_coordinate_swap_symmetry(self, e1):
        swapped = swap_model(e1)
        t0 = tau_direct(analyze_geometry(*e1.mgfs())).tau
        t1 = tau_direct(analyze_geometry(*swapped.mgfs())).tau
        assert abs(t0[0] - t1[1]) <= 1e-9
        assert abs(t0[1] - t1[0]) <= 1e-9

    def test_d2_engineered_model(self):
        model = build_model(d2_network())
        summary = analyze_geometry(*model.mgfs())
        assert summary.classification == "D2"
        result = tau_direct(summary)
        c2 = summary.extreme.theta_c[2]
        assert abs(result.tau[1] - c2[1]) <= 1e-9
        assert abs(result.tau[0] - branch(summary.gamma, 1, c2[1], "max")) <= 1e-9
        other = tau_iteration(*model.mgfs())
        assert max(abs(result.tau[0] - other.tau[0]), abs(result.tau[1] - other.tau[1])) <= 1e-9


class TestTauIteration:
    def test_e1_agreement(self, e1, e1_geo):
        direct = tau_direct(e1_geo)
        iterated = tau_iteration(*e1.mgfs())
        gap = max(abs(direct.tau[i] - iterated.tau[i]) for i in (0, 1))
        assert gap <= 1e-9

    def test_trace_monotone_and_bounded(self, e1, e1_geo):
        iterated = tau_iteration(*e1.mgfs())
        trace = iterated.iteration_trace
        for a, b in zip(trace, trace[1:]):
            assert b[0] >= a[0] - 1e-12 and b[1] >= a[1] - 1e-12
        cap1 = e1_geo.extreme.theta_max[1][0]
        cap2 = e1_geo.extreme.theta_max[2][1]
        for point in trace:
            assert point[0] <= cap1 + 1e-9 and point[1] <= cap2 + 1e-9

    def test_random_models_agree(self):
        rng = make_rng(41)
        for _ in range(8):
            model = random_model(rng, stable=True)
            direct = tau_direct(analyze_geometry(*model.mgfs()))
            iterated = tau_iteration(*model.mgfs())
            gap = max(abs(direct.tau[i] - iterated.tau[i]) for i in (0, 1))
            assert gap <= 1e-8


class TestAlphaDirection:
    def test_e1_axes(self, e1_domain):
        r1 = alpha_direction(e1_domain, (1.0, 0.0), (Fraction(1), Fraction(0)))
        r2 = alpha_direction(e1_domain, (0.0, 1.0), (Fraction(0), Fraction(1)))
        assert abs(r1.alpha - math.log(2.5)) <= 1e-9
        assert r1.active_constraint == "tau1"
        assert abs(r2.alpha - math.log(3.0)) <= 1e-9
        assert r2.active_constraint == "tau2"

    def test_e1_diagonal_against_dense_scan(self, e1, e1_domain, e1_geo):
        c = (1.0 / SQRT2, 1.0 / SQRT2)
        rate = alpha_direction(e1_domain, c)
        assert abs(rate.alpha - SQRT2 * math.log(2.5)) <= 1e-8
        # dense-scan oracle: 1e5 points along the ray against the membership
        xs = np.linspace(1e-6, 2.5, 100_000)
        inside = np.array([e1_domain.contains((x * c[0], x * c[1])) for x in xs[:: 1000]])
        # coarse pre-check, then exact scan near the transition
        lo = xs[::1000][inside].max()
        fine = np.linspace(lo, lo + 2.5 / 100, 1000)
        sup = max(x for x in fine if e1_domain.contains((x * c[0], x * c[1])))
        assert abs(rate.alpha - sup) <= 1e-3

    def test_case_split_agreement_random(self):
        rng = make_rng(42)
        for _ in range(8):
            model = random_model(rng, stable=True)
            summary = analyze_geometry(*model.mgfs())
            tau = tau_direct(summary)
            domain = DomainDescription(tau=tau, geometry=summary)
            for k, c in ((1, (1.0, 0.0)), (2, (0.0, 1.0))):
                a = alpha_direction(domain, c).alpha
                assert abs(a - coordinate_rate_case_split(summary, tau.tau, k)) <= 1e-9

    def test_rate_point_invariants(self, e1_domain):
        rng = make_rng(43)
        for _ in range(25):
            raw = rng.uniform(0.0, 1.0, size=2)
            if raw.sum() < 0.1:
                continue
            c = tuple(raw / np.hypot(*raw))
            rate = alpha_direction(e1_domain, c)
            assert rate.alpha > 0.0
            assert not e1_domain.contains(((rate.alpha + 1e-7) * c[0], (rate.alpha + 1e-7) * c[1]))
            assert e1_domain.contains(((rate.alpha - 1e-6) * c[0], (rate.alpha - 1e-6) * c[1]))

    def test_axis_rate_below_tau(self):
        rng = make_rng(44)
        for _ in range(6):
            model = random_model(rng, stable=True)
            summary = analyze_geometry(*model.mgfs())
            tau = tau_direct(summary)
            domain = DomainDescription(tau=tau, geometry=summary)
            for k, c in ((1, (1.0, 0.0)), (2, (0.0, 1.0))):
                assert alpha_direction(domain, c).alpha <= tau.tau[k - 1] + 1e-9

    def test_rejects_bad_directions(self, e1_domain):
        with pytest.raises(ValueError):
            alpha_direction(e1_domain, (1.0, 1.0))
        with pytest.raises(ValueError):
            alpha_direction(e1_domain, (-1.0, 0.0))


class TestPeriodicity:
    def test_coordinate_direction(self):
        assert periodicity(Fraction(1), Fraction(0)).delta == Fraction(1)

    def test_mixed_rationals_with_enumeration(self):
        per = periodicity(Fraction(2, 3), Fraction(1, 2))
        assert per.delta == Fraction(1, 6)
        values = sorted(
            {Fraction(2, 3) * i + Fraction(1, 2) * j for i in range(21) for j in range(21)}
        )
        gaps = {b - a for a, b in zip(values, values[1:])}
        assert min(gaps) == Fraction(1, 6)
        assert all(g % Fraction(1, 6) == 0 for g in gaps)

    def test_equal_components(self):
        assert periodicity(Fraction(3), Fraction(3)).delta == Fraction(3)

    def test_invalid(self):
        with pytest.raises(ValueError):
            periodicity(Fraction(0), Fraction(0))


class TestDomainDescription:
    def test_boundary_sample_invariants(self, e1_domain, e1_geo):
        tau = e1_domain.tau.tau
        gamma = e1_geo.gamma
        t1 = e1_geo.extreme.theta_max[1]
        t2 = e1_geo.extreme.theta_max[2]
        for p in e1_domain.boundary_sample(64):
            assert p[0] <= tau[0] + 1e-12 and p[1] <= tau[1] + 1e-12
            on_tau1 = abs(p[0] - tau[0]) <= 1e-9
            on_tau2 = abs(p[1] - tau[1]) <= 1e-9
            on_curve = (
                abs(p[0] - t1[0]) <= 1e-9
                or abs(p[1] - t2[1]) <= 1e-9
                or abs(gamma.value(p) - 1.0) <= 1e-8
            )
            assert on_tau1 or on_tau2 or on_curve
            # closure membership: a small inward nudge is inside
            from rwtail.geometry import gamma_max_membership

            assert gamma_max_membership(gamma, (p[0] - 1e-6, p[1] - 1e-6), t1, t2)


class TestExactness:
    def test_edge_constrained_rate_not_exact(self, e1_domain, e1_geo):
        rate = alpha_direction(e1_domain, (1.0, 0.0))
        tau = e1_domain.tau.tau
        # the rate point sits on both the interior and the face-1 curves
        assert exactness_verdict(e1_geo, tau, rate) == "not established"

    def test_interior_arc_rate_is_exact(self):
        model = build_model(node1_batch_network(2))
        summary = analyze_geometry(*model.mgfs())
        tau = tau_direct(summary)
        domain = DomainDescription(tau=tau, geometry=summary)
        a = math.radians(60.0)
        rate = alpha_direction(domain, (math.cos(a), math.sin(a)))
        assert rate.active_constraint == "gamma_boundary"
        assert exactness_verdict(summary, tau.tau, rate) == (
            "exactly exponential (sufficient conditions hold)"
        )

    def test_branch_point_indeterminate(self, e1):
        # an inward face-1 kernel moves the convergence point to the
        # coordinate-maximal point while the edge point stays elsewhere
        face1 = JumpKernel(Region.FACE1, ((-1, 0, 0.7), (0, 0, 0.3)))
        model = ModelSpec(e1.interior, face1, e1.face2, e1.origin)
        summary = analyze_geometry(*model.mgfs())
        tau = tau_direct(summary)
        tmax = summary.extreme.theta_max[1]
        assert abs(tau.tau[0] - tmax[0]) <= 1e-9
        domain = DomainDescription(tau=tau, geometry=summary)
        rate = alpha_direction(domain, (1.0, 0.0))
        assert exactness_verdict(summary, tau.tau, rate) == "indeterminate at branch point"


def test_positive_rates_fan():
    rng = make_rng(45)
    model = random_model(rng, stable=True)
    summary = analyze_geometry(*model.mgfs())
    domain = DomainDescription(tau=tau_direct(summary), geometry=summary)
    for i in range(9):
        a = 0.5 * math.pi * i / 8
        rate = alpha_direction(domain, (math.cos(a), math.sin(a)))
        assert rate.alpha > 0.0
