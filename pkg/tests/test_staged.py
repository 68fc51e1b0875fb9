import numpy as np
import pytest

from conftest import fd_jacobian, rel_err
from gradcont.composition import (reference_coefficients, order_condition_system, order_conditions,
                                  symmetry_conditions)
from gradcont.errors import NoConvergence
from gradcont.poly import Polynomial, PolySystem
from gradcont.staged import (AugPoint, StagedLagrangeSystem, build_staged_system, eval_F,
                             eval_H, eval_w, jac_H, refine_stationary, sphere_constraint)
from gradcont.toys import stationary_points, toy3


def three_var_toy():
    x, y, z = Polynomial.variables(3)
    return StagedLagrangeSystem.from_constraints(PolySystem([x + y + z - 1.0]),
                                                 PolySystem([x * y - 0.2 * z]))


class TestLayout:
    def test_benchmark_sizes(self, bench31):
        assert (bench31.n, bench31.m, bench31.r, bench31.ell) == (31, 31, 11, 65)
        s33 = build_staged_system(order_conditions(33), symmetry_conditions(33))
        assert (s33.m, s33.ell) == (32, 68)

    def test_sphere_is_first(self, bench31):
        assert bench31.constraints[0] == sphere_constraint(31, 4.0)

    def test_homogeneous_members(self, bench31):
        rng = np.random.default_rng(0)
        for p in bench31.constraints[1:]:
            assert p.is_homogeneous()
            for _ in range(5):
                y = rng.uniform(-1, 1, 32)
                t = rng.uniform(0.3, 2.0) * rng.choice([-1, 1])
                ref = t**p.degree * p(y)
                assert abs(p(t * y) - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_dehomogenization_identity(self, small_bench):
        rng = np.random.default_rng(1)
        originals = list(symmetry_conditions(9)) + list(order_conditions(9))
        for P, p in zip(small_bench.constraints[1:], originals):
            for _ in range(20):
                x = rng.uniform(-1, 1, 9)
                assert abs(P(np.r_[1.0, x]) - p(x)) <= 1e-13 * max(1.0, abs(p(x)))

    def test_simple_sum_condition_homogenized(self, small_bench):
        lin = small_bench.constraints[1 + 4]
        g = Polynomial.variables(10)
        assert lin == sum(g[1:], Polynomial.constant(0.0, 10)) - g[0]

    def test_rows_change_one_at_a_time(self, bench31):
        for k in range(1, bench31.r + 1):
            a, b = bench31.row_labels(k - 1), bench31.row_labels(k)
            diff = [i for i, (u, v) in enumerate(zip(a, b)) if u != v]
            assert diff == [bench31.swap_row(k)]

    def test_numeric_shared_components(self, small_bench):
        rng = np.random.default_rng(2)
        for _ in range(10):
            z = rng.uniform(-2, 2, small_bench.ell)
            for k in range(1, small_bench.r + 1):
                d = eval_F(small_bench, k, z) - eval_F(small_bench, k - 1, z)
                assert np.count_nonzero(d) == 1

    def test_partition_property(self, small_bench):
        z = np.random.default_rng(3).uniform(-2, 2, small_bench.ell)
        for k in range(1, small_bench.r + 1):
            F = eval_F(small_bench, k, z)
            both = np.r_[eval_H(small_bench, k, z), eval_w(small_bench, k, z)]
            np.testing.assert_array_equal(np.sort(both), np.sort(F))
            np.testing.assert_array_equal(
                small_bench.assemble(k, eval_H(small_bench, k, z), eval_w(small_bench, k, z)), F)

    def test_zero_multipliers_give_sphere_row(self, small_bench):
        z = np.zeros(small_bench.ell)
        z[:10] = 0.3
        assert eval_F(small_bench, 0, z)[0] == -small_bench.R_lambda**2

    def test_stage_range(self, small_bench):
        with pytest.raises(ValueError):
            eval_F(small_bench, small_bench.r + 1, np.zeros(small_bench.ell))
        with pytest.raises(ValueError):
            eval_H(small_bench, 0, np.zeros(small_bench.ell))
        with pytest.raises(ValueError):
            eval_F(small_bench, 0, np.zeros(small_bench.ell + 1))

    def test_inconsistent_nvars(self):
        with pytest.raises(ValueError):
            build_staged_system(order_conditions(9), symmetry_conditions(11))

    def test_augpoint(self):
        p = AugPoint(np.ones(3), np.zeros(4))
        assert len(p) == 7 and np.asarray(p).shape == (7,)
        with pytest.raises(ValueError):
            AugPoint(np.array([np.nan]), np.zeros(1))


class TestDerivatives:
    def test_toy_jac_H(self):
        sys_ = three_var_toy()
        rng = np.random.default_rng(4)
        for _ in range(100):
            z = rng.uniform(-2, 2, sys_.ell)
            assert rel_err(jac_H(sys_, 1, z), fd_jacobian(lambda u: sys_.H(1, u), z)) <= 1e-6

    def test_benchmark_jac_F(self, bench31):
        rng = np.random.default_rng(5)
        for i in range(100):
            z = rng.uniform(-2, 2, bench31.ell) * np.r_[np.full(32, 0.5), np.ones(33)]
            k = i % (bench31.r + 1)
            J = bench31.jac_F(k, z)
            if i < 5:
                assert rel_err(J, fd_jacobian(lambda u: bench31.F(k, u), z)) <= 1e-6
            else:
                # directional derivative check keeps the loop fast
                v = rng.normal(size=bench31.ell)
                h = 1e-6
                fd = (bench31.F(k, z + h * v) - bench31.F(k, z - h * v)) / (2 * h)
                assert rel_err(J @ v, fd) <= 1e-6


class TestSolutions:
    def test_reference_point_is_final_zero(self, bench31):
        x = reference_coefficients(31).gamma
        z = bench31.lift(bench31.r, x, polish=False)
        assert np.abs(eval_F(bench31, bench31.r, z)).max() <= 1e-8

    def test_previous_stage_zero_splits(self):
        sys_ = three_var_toy()
        x = np.full(3, 1.0 / 3.0)
        z = sys_.lift(0, x)
        assert np.abs(sys_.F(0, z)).max() <= 1e-12
        assert np.abs(eval_H(sys_, 1, z)).max() <= 1e-10
        assert eval_w(sys_, 1, z) == pytest.approx(sys_.constraints[-1](z[:4]))

    def test_canonical_form_and_symmetries(self):
        sys_ = three_var_toy()
        z = sys_.lift(0, np.full(3, 1.0 / 3.0))
        g, lam = sys_.split(z)
        flipped = np.r_[-g, -sys_._parities * lam]
        for cand in (flipped, np.r_[g, -lam], np.r_[-g, sys_._parities * lam]):
            assert np.abs(sys_.F(0, cand)).max() <= 1e-12
            np.testing.assert_allclose(sys_.canonicalize(cand), z, atol=1e-15)

    def test_merit_is_euclidean_norm(self):
        sys_ = three_var_toy()
        x = np.array([0.2, 0.3, 0.5])
        z = np.r_[sys_.homogenize_point(x), np.zeros(sys_.m + 2)]
        assert sys_.merit(z) == pytest.approx(np.linalg.norm(x), rel=1e-14)
        np.testing.assert_allclose(sys_.dehomogenize(z), x, rtol=1e-14)
        z[0] = 0.0
        assert sys_.merit(z) == np.inf


class TestRefine:
    @pytest.mark.parametrize("eps", [0.0, 1e-9, 1e-6])
    def test_square_benchmark_system(self, eps):
        cons = order_condition_system(31)
        x = reference_coefficients(31).gamma
        xr, res = refine_stationary(cons, x * (1 + eps))
        assert res <= 1e-13
        assert np.abs(xr - x).max() <= 1e-10

    def test_toy_stationary_point(self):
        cons = toy3().constraints_at(1)
        x = stationary_points(cons, per_axis=11)[0]
        xr, res = refine_stationary(cons, x + 1e-7)
        assert res <= 1e-13 and np.abs(xr - x).max() <= 1e-10

    def test_far_start_rejected(self):
        cons = order_condition_system(31)
        with pytest.raises(NoConvergence):
            refine_stationary(cons, reference_coefficients(31).gamma * 1.001)
        with pytest.raises(NoConvergence):
            refine_stationary(cons, np.full(31, np.nan))
