import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_jacobian, rel_err
from gradcont.composition import (CONDITION_LABELS, REFERENCE_ONE_NORMS, CoeffVector,
                                  reference_coefficients, order_condition_system,
                                  order_conditions, polish_one_norm, primed_partial_sum, verify)
from gradcont.errors import SignFlip
from gradcont.poly import Polynomial, PolySystem
from gradcont.prefixsum import GAMMA, PrefixSumForm, PrimedSum, Term


def ps(a, k):
    """Primed sum a_1 + ... + a_{k-1} + a_k / 2 (1-based k), by plain loop."""
    total = 0.0
    for l in range(1, k):
        total += a[l - 1]
    return total + 0.5 * a[k - 1]


def nested_loop_conditions(g):
    """The 16 order conditions evaluated term by term with explicit loops."""
    n = len(g)
    g1 = list(g)
    g3 = [v**3 for v in g]
    g5 = [v**5 for v in g]
    out = [sum(g) - 1.0] + [sum(v**p for v in g) for p in (3, 5, 7, 9)]
    S = [ps(g1, k) for k in range(1, n + 1)]
    T3 = [ps(g3, k) for k in range(1, n + 1)]
    T5 = [ps(g5, k) for k in range(1, n + 1)]
    inner = [g3[m - 1] * S[m - 1] for m in range(1, n + 1)]
    U = [ps(inner, k) for k in range(1, n + 1)]

    def total(f):
        return sum(f(k) for k in range(n))

    out += [
        total(lambda k: g[k]**3 * S[k]**2),
        total(lambda k: g[k]**5 * S[k]**2),
        total(lambda k: g[k]**3 * S[k] * T3[k]),
        total(lambda k: g[k]**3 * S[k]**4),
        total(lambda k: g[k]**7 * S[k]**2),
        total(lambda k: g[k]**5 * S[k] * T3[k]),
        total(lambda k: g[k]**3 * S[k] * T5[k]),
        total(lambda k: g[k]**3 * S[k]**2 * U[k]),
        total(lambda k: g[k]**5 * S[k]**4),
        total(lambda k: g[k]**3 * S[k]**3 * T3[k]),
        total(lambda k: g[k]**3 * S[k]**6),
    ]
    return np.array(out)


class TestPrimedSum:
    def test_values(self):
        assert primed_partial_sum([1, 2, 3], 3) == 4.5
        assert primed_partial_sum([1, 2, 3], 1) == 0.5

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            primed_partial_sum([1, 2, 3], 0)
        with pytest.raises(IndexError):
            primed_partial_sum([1, 2, 3], 4)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=12))
    def test_matches_loop(self, a):
        for k in range(1, len(a) + 1):
            assert primed_partial_sum(a, k) == pytest.approx(ps(a, k), abs=1e-12)


class TestOrderConditions:
    def test_counts_and_degrees(self):
        sys31 = order_condition_system(31)
        assert len(sys31) == 31
        assert sys31.degrees[15:] == [1, 3, 5, 7, 9, 5, 7, 7, 7] + [9] * 7
        assert order_conditions(31).labels == CONDITION_LABELS

    def test_even_n_rejected(self):
        with pytest.raises(ValueError):
            order_condition_system(30)

    def test_unit_vector(self):
        g = np.zeros(9)
        g[0] = 1.0
        res = order_conditions(9).evaluate(g)
        assert res[0] == 0.0 and res[1] == 1.0

    @pytest.mark.parametrize("n", [9, 31])
    def test_against_nested_loops(self, n):
        rng = np.random.default_rng(n)
        sys_ = order_conditions(n)
        for _ in range(100 if n == 9 else 20):
            g = rng.uniform(-1, 1, n)
            got = sys_.evaluate(g)
            ref = nested_loop_conditions(g)
            assert np.all(np.abs(got - ref) <= 1e-13 * np.maximum(1.0, np.abs(ref)))

    def test_structured_forms_expand_to_same_polynomial(self):
        n = 5
        rng = np.random.default_rng(7)
        for p in order_conditions(n):
            e = p.expand() if isinstance(p, PrefixSumForm) else p
            assert isinstance(e, Polynomial)
            for _ in range(5):
                x = rng.uniform(-1, 1, n)
                assert e(x) == pytest.approx(p(x), rel=1e-12, abs=1e-13)
                np.testing.assert_allclose(e.gradient(x), p.gradient(x), rtol=1e-11, atol=1e-12)
                np.testing.assert_allclose(e.hessian(x), p.hessian(x), rtol=1e-11, atol=1e-12)

    def test_structured_derivatives_match_fd(self):
        rng = np.random.default_rng(11)
        forms = [p for p in order_conditions(31) if isinstance(p, PrefixSumForm)]
        for _ in range(100):
            x = rng.uniform(-1, 1, 31)
            p = forms[rng.integers(len(forms))]
            assert rel_err(p.gradient(x), fd_jacobian(p.evaluate, x)[0]) <= 1e-6
        x = rng.uniform(-1, 1, 31)
        for p in forms:
            assert rel_err(p.hessian(x), fd_jacobian(p.gradient, x)) <= 1e-6

    def test_shared_cache_is_transparent(self):
        x = np.random.default_rng(5).uniform(-1, 1, 11)
        forms = [p for p in order_conditions(11) if isinstance(p, PrefixSumForm)]
        cache: dict = {}
        for p in forms:
            v1, g1, h1 = p.derivatives(x, cache=cache)
            v2, g2, h2 = p.derivatives(x)
            assert v1 == v2
            np.testing.assert_array_equal(g1, g2)
            np.testing.assert_array_equal(h1, h2)

    def test_prefix_form_homogenize_shifts_block(self):
        f = PrefixSumForm(Term((GAMMA, 3), PrimedSum(Term(GAMMA))), 4)
        h = f.homogenize(0)
        x = np.array([0.3, -0.2, 0.5, 0.1])
        assert h(np.r_[7.0, x]) == f(x)


class TestVerify:
    @pytest.mark.parametrize("n", [31, 33, 35])
    def test_reference_sets(self, n):
        rep = verify(reference_coefficients(n))
        assert rep.max_residual <= 1e-11
        assert rep.sym_max_abs == 0.0
        assert abs(rep.one_norm - REFERENCE_ONE_NORMS[n]) <= 1e-12
        assert rep.ok()
        assert set(rep.order_residuals) == set(CONDITION_LABELS)

    def test_pure(self):
        c = reference_coefficients(31)
        before = c.gamma.copy()
        a, b = verify(c), verify(c)
        assert a == b
        np.testing.assert_array_equal(c.gamma, before)

    def test_perturbation_breaks_conditions(self):
        g = reference_coefficients(31).gamma.copy()
        g[15] += 1e-6
        assert verify(g).max_residual > 1e-10

    def test_coefficient_file_roundtrip(self, tmp_path):
        c = reference_coefficients(33)
        c.save(tmp_path / "c.txt")
        np.testing.assert_array_equal(CoeffVector.load(tmp_path / "c.txt").gamma, c.gamma)


class TestPolish:
    def test_reference_n31(self):
        c = reference_coefficients(31)
        p = polish_one_norm(c)
        cons = order_condition_system(31)
        assert np.abs(cons.evaluate(p.gamma)).max() <= 1e-11
        assert np.abs(p.gamma).sum() <= np.abs(c.gamma).sum() + 1e-12
        assert np.all(np.abs(p.gamma - c.gamma) < 0.01 * np.abs(c.gamma))

    def test_fixed_point(self):
        p1 = polish_one_norm(reference_coefficients(31))
        p2 = polish_one_norm(p1)
        np.testing.assert_allclose(p2.gamma, p1.gamma, atol=1e-11)

    def test_degenerate_face(self):
        x, y = Polynomial.variables(2)
        cons = PolySystem([x + y - 1.0])
        out = polish_one_norm(CoeffVector([0.6, 0.4]), cons)
        assert abs(out.gamma.sum() - 1.0) <= 1e-11
        assert np.abs(out.gamma).sum() <= 1.0 + 1e-12

    def test_sign_flip_detected(self):
        # min x + y on y = (x - 1)^2 - 0.3 sits at (0.5, -0.05); start with y > 0
        x, y = Polynomial.variables(2)
        cons = PolySystem([(x - 1.0) ** 2 - 0.3 - y])
        with pytest.raises(SignFlip):
            polish_one_norm(CoeffVector([0.45, 0.0025]), cons)

    def test_near_zero_component_rejected(self):
        with pytest.raises(ValueError):
            polish_one_norm(CoeffVector([1.0, 1e-8]))
