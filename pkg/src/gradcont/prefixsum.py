"""Polynomials built from nested primed prefix sums.

Order conditions of composition methods have the shape

    sum_k  g_k^a * A_k^p * B_k^q * ...

where ``A``, ``B`` are primed prefix sums ``sum'_{l<=k} (...)_l`` of simpler
expressions (the last summand is halved). Fully expanding them produces
millions of monomials for 30+ variables, so they are kept in this factored
form instead. Values, gradients and Hessians are computed exactly by
propagating Jacobians through the (linear) prefix-sum operators; Hessians
use the adjoint of the prefix sum, so nothing larger than ``n x n`` is ever
formed.

Expressions are immutable trees made of three node types:

* :class:`Gamma` -- the vector of variables ``(g_1, ..., g_n)``;
* :class:`Term` -- elementwise product of powers of sub-expressions;
* :class:`PrimedSum` -- primed prefix sum of a :class:`Term`.
"""

from __future__ import annotations

import numpy as np

from .poly import Polynomial, _check_point


def primed_cumsum(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """``a_1 + ... + a_{k-1} + a_k / 2`` for every k along ``axis``."""
    return np.cumsum(a, axis=axis) - 0.5 * a


def primed_cumsum_adjoint(c: np.ndarray) -> np.ndarray:
    # transpose of the primed prefix-sum operator: suffix sums, own term halved
    return np.cumsum(c[::-1])[::-1] - 0.5 * c


def _powprod(vals, exps) -> np.ndarray:
    """Elementwise product of ``vals[i] ** exps[i]``; zero if any exponent < 0."""
    out = np.ones_like(vals[0])
    for v, e in zip(vals, exps):
        if e < 0:
            return np.zeros_like(vals[0])
        if e:
            out = out * v**e
    return out


class Gamma:
    key = "g"
    degree = 1

    def _eval(self, x, cache):
        if self.key not in cache:
            cache[self.key] = (x, np.eye(len(x)))
        return cache[self.key]

    def _hess(self, w, cache):
        return None

    def _expand(self, xs):
        return xs

    def __repr__(self):
        return "g"


GAMMA = Gamma()


class Term:
    """Elementwise product ``prod_i factor_i ** exponent_i``."""

    def __init__(self, *factors):
        fs = []
        for f in factors:
            if isinstance(f, tuple):
                expr, e = f
            else:
                expr, e = f, 1
            if e <= 0:
                raise ValueError("exponents in a term must be positive")
            fs.append((expr, int(e)))
        self.factors = tuple(fs)
        self.key = "*".join(f"{expr.key}^{e}" if e > 1 else expr.key for expr, e in self.factors)
        self.degree = sum(e * expr.degree for expr, e in self.factors)

    def __repr__(self):
        return self.key

    def _eval(self, x, cache):
        if self.key in cache:
            return cache[self.key]
        parts = [f._eval(x, cache) for f, _ in self.factors]
        vals = [p[0] for p in parts]
        exps = [e for _, e in self.factors]
        phi = _powprod(vals, exps)
        jac = np.zeros((len(x), len(x)))
        for i, (_, J) in enumerate(parts):
            d = list(exps)
            d[i] -= 1
            jac += (exps[i] * _powprod(vals, d))[:, None] * J
        cache[self.key] = (phi, jac)
        return cache[self.key]

    def _hess(self, w, cache):
        """Hessian of ``sum_k w_k * term_k`` (None when identically zero)."""
        parts = [cache[f.key] for f, _ in self.factors]
        vals = [p[0] for p in parts]
        jacs = [p[1] for p in parts]
        exps = [e for _, e in self.factors]
        nf = len(self.factors)
        H = None
        for i in range(nf):
            for j in range(i, nf):
                d = list(exps)
                d[i] -= 1
                d[j] -= 1
                coef = exps[i] * (exps[j] - (1 if i == j else 0))
                if coef == 0:
                    continue
                s = w * coef * _powprod(vals, d)
                block = jacs[i].T @ (s[:, None] * jacs[j])
                if i != j:
                    block = block + block.T
                H = block if H is None else H + block
        for i, (f, _) in enumerate(self.factors):
            d = list(exps)
            d[i] -= 1
            sub = f._hess(w * exps[i] * _powprod(vals, d), cache)
            if sub is not None:
                H = sub if H is None else H + sub
        return H

    def _expand(self, xs):
        n = len(xs)
        out = [Polynomial.constant(1.0, xs[0].nvars) for _ in range(n)]
        for f, e in self.factors:
            sub = f._expand(xs)
            out = [o * s**e for o, s in zip(out, sub)]
        return out


class PrimedSum:
    """Primed prefix sum ``sum'_{l<=k} term_l`` of a :class:`Term`."""

    def __init__(self, term):
        if not isinstance(term, Term):
            term = Term(term)
        self.term = term
        self.key = f"S[{term.key}]"
        self.degree = term.degree

    def __repr__(self):
        return self.key

    def _eval(self, x, cache):
        if self.key in cache:
            return cache[self.key]
        v, J = self.term._eval(x, cache)
        cache[self.key] = (primed_cumsum(v), primed_cumsum(J, axis=0))
        return cache[self.key]

    def _hess(self, w, cache):
        return self.term._hess(primed_cumsum_adjoint(w), cache)

    def _expand(self, xs):
        sub = self.term._expand(xs)
        out, run = [], None
        for s in sub:
            out.append(s * 0.5 if run is None else run + s * 0.5)
            run = s if run is None else run + s
        return out


class PrefixSumForm:
    """Scalar polynomial ``coeff * sum_k term_k`` over a block of variables.

    Parameters
    ----------
    term : Term
        Summand, indexed by the stage index ``k``.
    n : int
        Length of the variable block ``(g_1, ..., g_n)``.
    nvars : int, optional
        Total number of variables (default ``n``).
    offset : int
        Index of ``g_1`` among the ``nvars`` variables.
    """

    def __init__(self, term: Term, n: int, nvars: int | None = None, offset: int = 0,
                 coeff: float = 1.0):
        self.term = term
        self.n = int(n)
        self.nvars = int(nvars if nvars is not None else n)
        self.offset = int(offset)
        self.coeff = float(coeff)
        if self.offset + self.n > self.nvars:
            raise ValueError("variable block does not fit")
        self.degree = term.degree

    def __repr__(self):
        return f"PrefixSumForm({self.coeff:g}*sum[{self.term.key}], n={self.n}, nvars={self.nvars})"

    def is_homogeneous(self) -> bool:
        return True

    def _block(self, x):
        x = _check_point(x, self.nvars)
        return x[self.offset:self.offset + self.n]

    def evaluate(self, x) -> float:
        cache: dict = {}
        v, _ = self.term._eval(self._block(x), cache)
        return self.coeff * float(v.sum())

    __call__ = evaluate

    def gradient(self, x) -> np.ndarray:
        return self.derivatives(x, hessian=False)[1]

    def hessian(self, x) -> np.ndarray:
        return self.derivatives(x)[2]

    def derivatives(self, x, hessian: bool = True, cache: dict | None = None):
        """Return ``(value, gradient, hessian)``; Hessian is None if not requested.

        Forms over the same variable block may share ``cache`` at one point,
        so common prefix sums are computed once.
        """
        xb = self._block(x)
        if cache is None:
            cache = {}
        v, J = self.term._eval(xb, cache)
        s = slice(self.offset, self.offset + self.n)
        grad = np.zeros(self.nvars)
        grad[s] = self.coeff * J.sum(axis=0)
        H = None
        if hessian:
            H = np.zeros((self.nvars, self.nvars))
            hb = self.term._hess(np.ones(self.n), cache)
            if hb is not None:
                H[s, s] = self.coeff * hb
        return self.coeff * float(v.sum()), grad, H

    def homogenize(self, extra_var_index: int = 0) -> "PrefixSumForm":
        # already homogeneous: only the variable numbering shifts
        if self.offset < extra_var_index < self.offset + self.n:
            raise ValueError("cannot insert a variable inside the prefix-sum block")
        offset = self.offset + (1 if extra_var_index <= self.offset else 0)
        return PrefixSumForm(self.term, self.n, self.nvars + 1, offset, self.coeff)

    def expand(self) -> Polynomial:
        """Sparse expansion; only practical for small ``n``."""
        xs = [Polynomial.variable(self.offset + i, self.nvars) for i in range(self.n)]
        total = Polynomial.constant(0.0, self.nvars)
        for p in self.term._expand(xs):
            total = total + p
        return total * self.coeff
