import math

import numpy as np
import pytest

from rwtail.errors import (
    KernelError,
    ModelFileError,
    NormalizationError,
    SupportViolationError,
)
from rwtail.model import (
    JumpKernel,
    ModelSpec,
    Region,
    build_mgf,
    check_conditions,
    drift_vectors,
    load_model,
    mean_preserving_spread,
    model_from_dict,
    model_to_dict,
    save_model,
)
from rwtail.testing import random_model

from conftest import make_rng


def uniform_symmetric_interior():
    return JumpKernel(
        Region.INTERIOR, ((1, 0, 0.25), (-1, 0, 0.25), (0, 1, 0.25), (0, -1, 0.25))
    )


def zero_drift_aperiodic_model():
    # self-loop keeps the walk aperiodic, so only the drift condition fails
    interior = JumpKernel(
        Region.INTERIOR,
        ((1, 0, 0.2), (-1, 0, 0.2), (0, 1, 0.2), (0, -1, 0.2), (0, 0, 0.2)),
    )
    face1 = JumpKernel(Region.FACE1, ((1, 0, 0.3), (-1, 0, 0.3), (0, 1, 0.2), (0, 0, 0.2)))
    face2 = JumpKernel(Region.FACE2, ((0, 1, 0.3), (0, -1, 0.3), (1, 0, 0.2), (0, 0, 0.2)))
    origin = JumpKernel(Region.ORIGIN, ((1, 0, 0.4), (0, 1, 0.4), (0, 0, 0.2)))
    return ModelSpec(interior, face1, face2, origin)


class TestJumpKernelValidation:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(NormalizationError):
            JumpKernel(Region.INTERIOR, ((1, 0, 0.5), (-1, 0, 0.5 + 1e-9)))

    def test_duplicate_atoms_rejected(self):
        with pytest.raises(KernelError):
            JumpKernel(Region.INTERIOR, ((1, 0, 0.5), (1, 0, 0.5)))

    def test_empty_support_rejected(self):
        with pytest.raises(KernelError):
            JumpKernel(Region.INTERIOR, ())

    @pytest.mark.parametrize(
        "region,bad",
        [
            (Region.INTERIOR, (-2, 0)),
            (Region.INTERIOR, (0, -2)),
            (Region.FACE1, (0, -1)),
            (Region.FACE2, (-1, 0)),
            (Region.ORIGIN, (-1, 0)),
            (Region.ORIGIN, (0, -1)),
        ],
    )
    def test_skip_free_bounds(self, region, bad):
        with pytest.raises(SupportViolationError):
            JumpKernel(region, ((bad[0], bad[1], 0.5), (1, 1, 0.5)))

    def test_boundary_atoms_accepted(self):
        k = JumpKernel(Region.INTERIOR, ((-1, -1, 0.5), (1, 1, 0.5)))
        assert k.probability(-1, -1) == 0.5

    def test_probability_range(self):
        with pytest.raises(KernelError):
            JumpKernel(Region.INTERIOR, ((1, 0, 0.0), (0, 1, 1.0)))
        with pytest.raises(KernelError):
            JumpKernel(Region.INTERIOR, ((1, 0, -0.1), (0, 1, 1.1)))

    def test_region_tag_mismatch(self, e1):
        with pytest.raises(KernelError):
            ModelSpec(e1.face1, e1.face1, e1.face2, e1.origin)


class TestMgfSurface:
    def test_degenerate_atom_at_origin(self):
        k = JumpKernel(Region.ORIGIN, ((0, 0, 1.0),))
        f = build_mgf(k)
        assert f.value((5.0, -3.0)) == 1.0

    def test_value_at_zero_is_one(self, e1):
        f = build_mgf(e1.interior)
        assert abs(f.value((0.0, 0.0)) - 1.0) <= 1e-12

    def test_worked_value(self, e1):
        # 0.2*2.5 + 0.25/2.5 + 0.25/2.5 + 0.3 = 1 by hand
        f = build_mgf(e1.interior)
        assert abs(f.value((math.log(2.5), 0.0)) - 1.0) <= 1e-12

    def test_gradient_at_zero_is_mean(self):
        rng = make_rng(7)
        for _ in range(20):
            model = random_model(rng)
            for kernel in model.kernels().values():
                f = build_mgf(kernel)
                g = f.gradient((0.0, 0.0))
                m = kernel.mean()
                assert abs(g[0] - m[0]) <= 1e-12
                assert abs(g[1] - m[1]) <= 1e-12

    def test_gradient_matches_central_differences(self):
        rng = make_rng(8)
        h = 1e-6
        for _ in range(10):
            model = random_model(rng)
            f = build_mgf(model.interior)
            for _ in range(10):
                theta = tuple(rng.uniform(-2.0, 2.0, size=2))
                if f.value(theta) >= 1e6:
                    continue
                g = f.gradient(theta)
                fd1 = (f.value((theta[0] + h, theta[1])) - f.value((theta[0] - h, theta[1]))) / (2 * h)
                fd2 = (f.value((theta[0], theta[1] + h)) - f.value((theta[0], theta[1] - h))) / (2 * h)
                scale = max(1.0, abs(g[0]), abs(g[1]))
                assert abs(g[0] - fd1) <= 1e-6 * scale
                assert abs(g[1] - fd2) <= 1e-6 * scale

    def test_midpoint_convexity(self):
        rng = make_rng(9)
        for _ in range(10):
            model = random_model(rng)
            f = build_mgf(model.interior)
            for _ in range(20):
                a = rng.uniform(-3, 3, size=2)
                b = rng.uniform(-3, 3, size=2)
                mid = 0.5 * (a + b)
                lhs = f.value(mid)
                rhs = 0.5 * (f.value(a) + f.value(b))
                if math.isfinite(rhs):
                    assert lhs <= rhs + 1e-12 * max(1.0, rhs)

    def test_value_many_matches_scalar(self, e1):
        rng = make_rng(10)
        f = build_mgf(e1.interior)
        pts = rng.uniform(-2, 2, size=(50, 2))
        vec = f.value_many(pts)
        for p, v in zip(pts, vec):
            assert abs(f.value(p) - v) <= 1e-12 * max(1.0, v)


class TestDriftVectors:
    def test_e1_values(self, e1):
        d = drift_vectors(e1)
        assert abs(d.m[0] - (-0.3)) <= 1e-12
        assert abs(d.m[1] - (-0.05)) <= 1e-12
        assert abs(d.m1[0] - (-0.3)) <= 1e-12
        assert abs(d.m1[1] - 0.25) <= 1e-12
        assert d.m1_perp == (d.m1[1], -d.m1[0])
        assert d.m2_perp == (-d.m2[1], d.m2[0])

    def test_symmetric_kernel_zero_drift(self):
        k = uniform_symmetric_interior()
        assert k.mean() == (0.0, 0.0)

    def test_means_match_weighted_sums(self):
        rng = make_rng(11)
        for _ in range(10):
            model = random_model(rng)
            d = drift_vectors(model)
            for vec, kernel in ((d.m, model.interior), (d.m1, model.face1), (d.m2, model.face2)):
                mx = sum(dx * p for dx, dy, p in kernel.atoms)
                my = sum(dy * p for dx, dy, p in kernel.atoms)
                assert abs(vec[0] - mx) <= 1e-12 and abs(vec[1] - my) <= 1e-12

    def test_linearity_under_mixing(self):
        rng = make_rng(12)
        a = random_model(rng).interior
        b = random_model(rng).interior
        masses = {}
        for dx, dy, p in a.atoms:
            masses[(dx, dy)] = masses.get((dx, dy), 0.0) + 0.3 * p
        for dx, dy, p in b.atoms:
            masses[(dx, dy)] = masses.get((dx, dy), 0.0) + 0.7 * p
        mixed = JumpKernel(Region.INTERIOR, tuple((x, y, p) for (x, y), p in masses.items()))
        ma, mb, mm = a.mean(), b.mean(), mixed.mean()
        assert abs(mm[0] - (0.3 * ma[0] + 0.7 * mb[0])) <= 1e-12
        assert abs(mm[1] - (0.3 * ma[1] + 0.7 * mb[1])) <= 1e-12


class TestCheckConditions:
    def test_e1_all_pass(self, e1):
        report = check_conditions(e1)
        assert report.all_ok
        assert report.i.approximate and report.ii.approximate

    def test_zero_drift_fails_iv_only(self):
        report = check_conditions(zero_drift_aperiodic_model())
        assert not report.iv.ok
        assert report.failed() == ["iv"]
        assert "CONDITION_IV_VIOLATED" in report.iv.note

    def test_diagonal_sublattice_fails_i(self, e1):
        interior = JumpKernel(Region.INTERIOR, ((1, 1, 0.5), (-1, -1, 0.5)))
        model = ModelSpec(interior, e1.face1, e1.face2, e1.origin)
        assert not check_conditions(model).i.ok

    def test_periodic_walk_fails_i(self, e1):
        model = ModelSpec(uniform_symmetric_interior(), e1.face1, e1.face2, e1.origin)
        assert not check_conditions(model).i.ok


class TestMeanPreservingSpread:
    def kernel_with_far_atom(self):
        return JumpKernel(
            Region.INTERIOR,
            ((2, 0, 0.2), (-1, 0, 0.4), (0, -1, 0.2), (0, 1, 0.1), (0, 0, 0.1)),
        )

    def test_symmetric_split(self):
        k = self.kernel_with_far_atom()
        out = mean_preserving_spread(k, (2, 0), (1, 0), 0.1)
        assert abs(out.probability(1, 0) - 0.05) <= 1e-15
        assert abs(out.probability(3, 0) - 0.05) <= 1e-15
        assert abs(out.probability(2, 0) - 0.1) <= 1e-15
        m_in, m_out = k.mean(), out.mean()
        assert abs(m_in[0] - m_out[0]) <= 1e-12 and abs(m_in[1] - m_out[1]) <= 1e-12

    def test_e1_spread_values(self, e1):
        out = mean_preserving_spread(e1.interior, (1, 0), (1, 0), 0.2)
        assert out.probability(1, 0) == 0.0
        assert abs(out.probability(0, 0) - 0.1) <= 1e-15
        assert abs(out.probability(2, 0) - 0.1) <= 1e-15
        f_old = build_mgf(e1.interior)
        f_new = build_mgf(out)
        # contribution at theta = (1, 0): 0.1 + 0.1*e^2 > 0.2*e
        assert abs((0.1 + 0.1 * math.e**2) - 0.8389056098930650) <= 1e-12
        assert abs(0.2 * math.e - 0.5436563656918090) <= 1e-12
        assert f_new.value((1.0, 0.0)) > f_old.value((1.0, 0.0))

    def test_support_violation(self, e1):
        with pytest.raises(SupportViolationError):
            mean_preserving_spread(e1.interior, (-1, 0), (1, 0), 0.1)

    def test_insufficient_mass(self, e1):
        with pytest.raises(KernelError):
            mean_preserving_spread(e1.interior, (1, 0), (1, 0), 0.5)

    def test_output_dominates_on_grid(self):
        rng = make_rng(13)
        grid = np.array(
            [(0.3 * i - 1.5, 0.3 * j - 1.5) for i in range(11) for j in range(11)]
        )
        tried = 0
        while tried < 15:
            kernel = random_model(rng).interior
            candidates = [
                (dx, dy, p)
                for dx, dy, p in kernel.atoms
                if dx - 1 >= -1 and dy >= -1 and p > 0.02
            ]
            if not candidates:
                continue
            dx, dy, p = candidates[0]
            out = mean_preserving_spread(kernel, (dx, dy), (1, 0), p / 2)
            f_in = build_mgf(kernel).value_many(grid)
            f_out = build_mgf(out).value_many(grid)
            assert np.all(f_out >= f_in - 1e-12)
            tried += 1


class TestModelFiles:
    def test_roundtrip(self, e1, tmp_path):
        path = tmp_path / "model.json"
        save_model(e1, str(path))
        back = load_model(str(path))
        assert back == e1

    def test_dict_roundtrip(self, e1):
        assert model_from_dict(model_to_dict(e1)) == e1

    def test_missing_section(self):
        with pytest.raises(ModelFileError):
            model_from_dict({"interior": [[1, 0, 1.0]]})

    def test_malformed_rows(self):
        with pytest.raises(ModelFileError):
            model_from_dict(
                {"interior": [[1, 0]], "face1": [], "face2": [], "origin": []}
            )

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ModelFileError):
            load_model(str(path))
