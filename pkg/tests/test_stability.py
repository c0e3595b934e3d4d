import math

import pytest

from rwtail.errors import NullDriftError
from rwtail.model import JumpKernel, ModelSpec, Region, drift_vectors
from rwtail.stability import (
    assess_stability,
    drift_stability,
    geometric_stability,
    geometric_witnesses,
    positive_quadrant_witness,
)
from rwtail.testing import random_model

from conftest import make_rng


def correction_model(face2_up, face2_down, face1_right=0.1):
    """m = (0.1, -0.2) with the face-2 drift controlled by its atoms.

    With all face-2 support on the vertical axis the walk cannot leave that
    axis except through the origin, which is the boundary case the
    corrected drift conditions handle.
    """
    interior = JumpKernel(
        Region.INTERIOR,
        ((1, 0, 0.3), (-1, 0, 0.2), (0, -1, 0.3), (0, 1, 0.1), (0, 0, 0.1)),
    )
    face1 = JumpKernel(
        Region.FACE1, ((-1, 0, 0.4), (1, 0, face1_right), (0, 1, 0.25), (0, 0, 0.25 + 0.1 - face1_right))
    )
    rest = 1.0 - face2_up - face2_down
    face2 = JumpKernel(Region.FACE2, ((0, 1, face2_up), (0, -1, face2_down), (0, 0, rest)))
    origin = JumpKernel(Region.ORIGIN, ((1, 0, 0.25), (0, 1, 0.25), (0, 0, 0.5)))
    return ModelSpec(interior, face1, face2, origin)


def case_three_model(face1_left, face1_right):
    """m = (-0.2, 0.1) with the face-1 drift pinned to the horizontal axis."""
    interior = JumpKernel(
        Region.INTERIOR,
        ((-1, 0, 0.3), (1, 0, 0.1), (0, 1, 0.25), (0, -1, 0.15), (0, 0, 0.2)),
    )
    rest = 1.0 - face1_left - face1_right
    face1 = JumpKernel(Region.FACE1, ((-1, 0, face1_left), (1, 0, face1_right), (0, 0, rest)))
    face2 = JumpKernel(Region.FACE2, ((0, -1, 0.3), (0, 1, 0.1), (1, 0, 0.2), (0, 0, 0.4)))
    origin = JumpKernel(Region.ORIGIN, ((1, 0, 0.3), (0, 1, 0.3), (0, 0, 0.4)))
    return ModelSpec(interior, face1, face2, origin)


class TestDriftStability:
    def test_e1_case_one(self, e1, e1_net):
        verdict = drift_stability(drift_vectors(e1))
        assert verdict.stable and verdict.case == "I"
        ip1, ip2 = verdict.inner_products
        assert abs(ip1 - (-0.09)) <= 1e-12
        assert abs(ip2 - (-0.1)) <= 1e-12
        # the same inner products through the network identities
        lam, mu1, mu2 = e1_net.lam, e1_net.mu1, e1_net.mu2
        b1, b2 = e1_net.batch_means()
        denom = 1.0 - e1_net.p12 * e1_net.p21
        assert abs(ip1 - mu2 * (lam * (b1 + b2 * e1_net.p21) - mu1 * denom)) <= 1e-12
        assert abs(ip2 - mu1 * (lam * (b2 + b1 * e1_net.p12) - mu2 * denom)) <= 1e-12

    def test_null_drift_rejected(self):
        interior = JumpKernel(
            Region.INTERIOR,
            ((1, 0, 0.2), (-1, 0, 0.2), (0, 1, 0.2), (0, -1, 0.2), (0, 0, 0.2)),
        )
        model = correction_model(0.1, 0.3)
        d = drift_vectors(ModelSpec(interior, model.face1, model.face2, model.origin))
        with pytest.raises(NullDriftError):
            drift_stability(d)

    def test_correction_flips_verdict(self):
        # the face-2 drift points straight along its own axis; the sign of
        # its vertical component alone decides stability
        stable = correction_model(face2_up=0.1, face2_down=0.3)
        unstable = correction_model(face2_up=0.3, face2_down=0.1)
        tie = correction_model(face2_up=0.2, face2_down=0.2)
        v_s = drift_stability(drift_vectors(stable))
        v_u = drift_stability(drift_vectors(unstable))
        v_t = drift_stability(drift_vectors(tie))
        assert v_s.stable and v_s.case == "II" and v_s.extra_condition_applied
        assert not v_u.stable and v_u.extra_condition_applied
        assert not v_t.stable  # a vanishing component counts as zero, not noise

    def test_case_two_without_correction(self):
        # face-2 drift leaves its axis (positive first component): no extra
        # condition even though the vertical component points up
        model = correction_model(0.3, 0.1)
        face2 = JumpKernel(Region.FACE2, ((1, 0, 0.05), (0, 1, 0.25), (0, -1, 0.2), (0, 0, 0.5)))
        model = ModelSpec(model.interior, model.face1, face2, model.origin)
        v = drift_stability(drift_vectors(model))
        assert v.stable and v.case == "II" and not v.extra_condition_applied

    def test_case_three_corrections(self):
        v_s = drift_stability(drift_vectors(case_three_model(0.3, 0.1)))
        v_u = drift_stability(drift_vectors(case_three_model(0.1, 0.3)))
        assert v_s.stable and v_s.case == "III" and v_s.extra_condition_applied
        assert not v_u.stable and v_u.extra_condition_applied


class TestGeometricStability:
    def test_e1_true_with_sharp_witness(self, e1):
        gamma, gamma1, gamma2 = e1.mgfs()
        assert geometric_stability(gamma, gamma1, gamma2)
        w = geometric_witnesses(gamma, gamma1, gamma2)
        assert w[1] is not None and w[2] is not None
        # at least one face has a witness with nonpositive cross coordinate
        assert w[1][1] <= 0.0 or w[2][0] <= 0.0
        for k, gk in ((1, gamma1), (2, gamma2)):
            assert gamma.value(w[k]) < 1.0 and gk.value(w[k]) < 1.0
            assert w[k][k - 1] > 0.0

    def test_zero_drift_symmetric_false(self, e1):
        interior = JumpKernel(
            Region.INTERIOR, ((1, 0, 0.25), (-1, 0, 0.25), (0, 1, 0.25), (0, -1, 0.25))
        )
        model = ModelSpec(interior, e1.face1, e1.face2, e1.origin)
        assert not geometric_stability(*model.mgfs())
        assert positive_quadrant_witness(model.mgfs()[0]) is None

    def test_unstable_axis_bound_example_false(self):
        model = correction_model(face2_up=0.3, face2_down=0.1)
        assert not geometric_stability(*model.mgfs())

    def test_agreement_with_drift_conditions(self):
        rng = make_rng(31)
        for _ in range(60):
            model = random_model(rng)
            expected = drift_stability(drift_vectors(model)).stable
            assert geometric_stability(*model.mgfs()) == expected

    def test_assess_records_agreement(self, e1):
        verdict = assess_stability(e1)
        assert verdict.geometric_agreement is True

    def test_verdict_invariant_under_lazy_mixing(self):
        rng = make_rng(32)
        for _ in range(10):
            model = random_model(rng)
            mixed = {}
            for name, kernel in (
                ("interior", model.interior),
                ("face1", model.face1),
                ("face2", model.face2),
                ("origin", model.origin),
            ):
                masses = {(0, 0): 0.5}
                for dx, dy, p in kernel.atoms:
                    masses[(dx, dy)] = masses.get((dx, dy), 0.0) + 0.5 * p
                mixed[name] = JumpKernel(
                    kernel.region, tuple((x, y, p) for (x, y), p in masses.items())
                )
            slowed = ModelSpec(**mixed)
            v0 = drift_stability(drift_vectors(model))
            v1 = drift_stability(drift_vectors(slowed))
            assert v0.stable == v1.stable
            assert geometric_stability(*slowed.mgfs()) == v1.stable
