import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_jacobian, rel_err
from gradcont.poly import PolyBatch, Polynomial, PolySystem, eval_poly, grad_poly, homogenize


def random_poly(rng, nvars, degree, nterms):
    terms = []
    for _ in range(nterms):
        d = rng.integers(0, degree + 1)
        e = np.zeros(nvars, dtype=int)
        for _ in range(d):
            e[rng.integers(nvars)] += 1
        terms.append((rng.normal(), e))
    return Polynomial(terms, nvars)


exponents = st.lists(st.integers(0, 3), min_size=3, max_size=3)
term_lists = st.lists(st.tuples(st.floats(-5, 5, allow_nan=False), exponents), max_size=8)


class TestRepresentation:
    @given(term_lists)
    def test_invariants(self, terms):
        p = Polynomial(terms, 3)
        keys = [tuple(e) for e in p.exps]
        assert len(keys) == len(set(keys))
        assert np.all(p.coeffs != 0.0)
        assert keys == sorted(keys)
        expected = max((sum(e) for e in keys), default=0)
        assert p.degree == expected

    def test_merge_and_cancel(self):
        p = Polynomial([(2.0, (1, 0)), (-2.0, (1, 0)), (1.0, (0, 2))], 2)
        assert len(p) == 1 and p.degree == 2

    def test_structural_equality(self):
        x, y = Polynomial.variables(2)
        assert (x + y) ** 2 == x * x + 2.0 * x * y + y * y

    def test_rejects_bad_exponents(self):
        with pytest.raises(ValueError):
            Polynomial([(1.0, (1, 2, 3))], 2)
        with pytest.raises(ValueError):
            Polynomial([(1.0, (-1, 0))], 2)

    def test_system_nvars_must_agree(self):
        with pytest.raises(ValueError):
            PolySystem([Polynomial.variable(0, 2), Polynomial.variable(0, 3)])

    def test_text_roundtrip(self):
        rng = np.random.default_rng(3)
        ps = PolySystem([random_poly(rng, 4, 5, 7) for _ in range(3)])
        back = PolySystem.from_text(ps.to_text())
        assert all(a == b for a, b in zip(ps, back))


class TestEvaluation:
    def test_hand_value(self):
        p = Polynomial([(1.0, (0, 2)), (-2.0, (2, 0))], 2)
        assert eval_poly(p, [1.0, 3.0]) == 7.0

    def test_zero_polynomial(self):
        assert eval_poly(Polynomial([], 3), [1.0, 2.0, 3.0]) == 0.0

    def test_sphere_value(self):
        from gradcont.staged import sphere_constraint
        P1 = sphere_constraint(2, 4.0)
        assert eval_poly(P1, [0.7, 2.0, 2.0 * np.sqrt(3.0)]) == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_poly(Polynomial.variable(0, 2), [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            grad_poly(Polynomial.variable(0, 2), [1.0])

    def test_hand_gradient(self):
        p = Polynomial([(1.0, (2, 1))], 2)
        np.testing.assert_array_equal(grad_poly(p, [2.0, 3.0]), [12.0, 4.0])

    def test_constant_gradient(self):
        np.testing.assert_array_equal(grad_poly(Polynomial.constant(3.0, 3), [1.0, 2.0, 3.0]),
                                      np.zeros(3))

    def test_gradient_and_hessian_match_fd(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = random_poly(rng, 4, 5, 6)
            x = rng.uniform(-2, 2, 4)
            assert rel_err(p.gradient(x), fd_jacobian(p.evaluate, x)[0]) <= 1e-6
            assert rel_err(p.hessian(x), fd_jacobian(p.gradient, x)) <= 1e-6

    def test_batch_matches_members(self):
        rng = np.random.default_rng(1)
        polys = [random_poly(rng, 5, 4, 6) for _ in range(4)]
        batch = PolyBatch(polys)
        x = rng.uniform(-1, 1, 5)
        w = rng.normal(size=4)
        vals, grads, mono = batch.values_and_gradients(x)
        np.testing.assert_allclose(vals, [p(x) for p in polys], rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(grads, [p.gradient(x) for p in polys], rtol=1e-13, atol=1e-12)
        H = sum(wi * p.hessian(x) for wi, p in zip(w, polys))
        np.testing.assert_allclose(batch.weighted_hessian(x, w, mono), H, rtol=1e-12, atol=1e-12)


class TestHomogenize:
    def test_by_definition(self):
        x1, = Polynomial.variables(1)
        h = homogenize(x1 * x1 - 2.0, 0)
        g0, g1 = Polynomial.variables(2)
        assert h == g1 * g1 - 2.0 * g0 * g0

    def test_linear_sum(self):
        x1, x2 = Polynomial.variables(2)
        g0, g1, g2 = Polynomial.variables(3)
        assert homogenize(x1 + x2 - 1.0, 0) == g1 + g2 - g0

    def test_scaling_and_dehomogenization(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = random_poly(rng, 3, 6, 8)
            h = p.homogenize(0)
            assert h.is_homogeneous() and h.degree == p.degree
            for _ in range(5):
                t = rng.uniform(0.2, 3.0) * rng.choice([-1, 1])
                y = rng.uniform(-1, 1, 4)
                ref = t**p.degree * h(y)
                assert abs(h(t * y) - ref) <= 1e-12 * max(1.0, abs(ref))
                x = rng.uniform(-1, 1, 3)
                assert abs(h(np.r_[1.0, x]) - p(x)) <= 1e-13 * max(1.0, abs(p(x)))

    @settings(max_examples=50)
    @given(st.integers(0, 3))
    def test_extra_variable_position(self, pos):
        x = Polynomial.variables(3)
        p = x[0] * x[1] * x[2] + x[0] - 1.0
        h = p.homogenize(pos)
        pt = np.array([0.3, -1.2, 0.8])
        assert h(np.insert(pt, pos, 1.0)) == pytest.approx(p(pt), rel=1e-14)
