"""Sparse multivariate polynomials with exact derivatives.

A :class:`Polynomial` stores its terms as an exponent matrix plus a
coefficient vector, kept in canonical lexicographic order so that two
polynomials compare equal exactly when they have the same terms.
Derivatives are produced symbolically and cached, so repeated gradient or
Hessian evaluation at many points only pays for the numeric part.

The plain-text format used for fixtures and debugging is one term per line,
``coeff e0 e1 ... e{nvars-1}``; a system is a sequence of such blocks
separated by lines containing ``---``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def _check_point(x, nvars: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (nvars,):
        raise ValueError(f"expected a point with {nvars} coordinates, got shape {x.shape}")
    return x


class Polynomial:
    """Real polynomial in ``nvars`` variables.

    Parameters
    ----------
    terms : mapping or iterable
        Either a ``{exponent_tuple: coefficient}`` mapping or an iterable of
        ``(coefficient, exponent_tuple)`` pairs. Repeated exponents are merged
        and zero coefficients dropped.
    nvars : int
        Number of variables.
    """

    __slots__ = ("nvars", "exps", "coeffs", "degree", "_key", "_dcache")

    def __init__(self, terms, nvars: int):
        if isinstance(terms, dict):
            items = ((c, e) for e, c in terms.items())
        else:
            items = terms
        merged: dict[tuple, float] = {}
        for c, e in items:
            e = tuple(int(v) for v in e)
            if len(e) != nvars:
                raise ValueError(f"exponent {e} does not have {nvars} entries")
            if any(v < 0 for v in e):
                raise ValueError(f"negative exponent in {e}")
            merged[e] = merged.get(e, 0.0) + float(c)
        keys = sorted(e for e, c in merged.items() if c != 0.0)
        self.nvars = int(nvars)
        self.exps = np.array(keys, dtype=np.int64).reshape(len(keys), nvars)
        self.coeffs = np.array([merged[e] for e in keys], dtype=float)
        self.degree = int(self.exps.sum(axis=1).max()) if keys else 0
        self._key = tuple(zip(keys, self.coeffs.tolist()))
        self._dcache: dict = {}

    # construction helpers ----------------------------------------------

    @classmethod
    def constant(cls, value: float, nvars: int) -> "Polynomial":
        return cls({(0,) * nvars: value}, nvars)

    @classmethod
    def variable(cls, index: int, nvars: int) -> "Polynomial":
        e = [0] * nvars
        e[index] = 1
        return cls({tuple(e): 1.0}, nvars)

    @classmethod
    def variables(cls, nvars: int) -> list["Polynomial"]:
        return [cls.variable(i, nvars) for i in range(nvars)]

    @property
    def terms(self) -> list[tuple[float, tuple]]:
        return [(c, e) for e, c in self._key]

    def __len__(self) -> int:
        return len(self.coeffs)

    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def is_homogeneous(self) -> bool:
        if self.is_zero():
            return True
        return bool(np.all(self.exps.sum(axis=1) == self.degree))

    # arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different numbers of variables")
            return other
        return Polynomial.constant(float(other), self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        return Polynomial(self.terms + other.terms, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial([(-c, e) for c, e in self.terms], self.nvars)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial([(c * float(other), e) for c, e in self.terms], self.nvars)
        other = self._coerce(other)
        out: dict[tuple, float] = {}
        for e1, c1 in self._key:
            for e2, c2 in other._key:
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(out, self.nvars)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = Polynomial.constant(1.0, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._key == other._key

    def __hash__(self):
        return hash((self.nvars, self._key))

    def __repr__(self):
        if self.is_zero():
            return f"Polynomial(0, nvars={self.nvars})"
        parts = []
        for c, e in self.terms:
            mono = "*".join(f"x{i}" + (f"^{p}" if p > 1 else "") for i, p in enumerate(e) if p)
            parts.append(f"{c:+g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial({' '.join(parts)}, nvars={self.nvars})"

    # calculus ----------------------------------------------------------

    def diff(self, i: int) -> "Polynomial":
        """Exact partial derivative with respect to variable ``i``."""
        key = ("d", i)
        if key not in self._dcache:
            terms = []
            for c, e in self.terms:
                if e[i]:
                    e2 = list(e)
                    e2[i] -= 1
                    terms.append((c * e[i], e2))
            self._dcache[key] = Polynomial(terms, self.nvars)
        return self._dcache[key]

    def _derivative_table(self):
        # every nonzero first/second derivative term stacked into flat arrays
        # so a gradient or Hessian costs one vectorized monomial evaluation
        if "table" not in self._dcache:
            n = self.nvars
            gi, gc, ge = [], [], []
            hi, hj, hc, he = [], [], [], []
            for i in range(n):
                gp = self.diff(i)
                for c, e in gp.terms:
                    gi.append(i), gc.append(c), ge.append(e)
                for j in range(n):
                    for c, e in gp.diff(j).terms:
                        hi.append(i), hj.append(j), hc.append(c), he.append(e)
            self._dcache["table"] = (
                (np.array(gi, dtype=np.intp), np.array(gc), np.array(ge, dtype=np.int64).reshape(-1, n)),
                (np.array(hi, dtype=np.intp), np.array(hj, dtype=np.intp), np.array(hc),
                 np.array(he, dtype=np.int64).reshape(-1, n)),
            )
        return self._dcache["table"]

    def evaluate(self, x) -> float:
        x = _check_point(x, self.nvars)
        if self.is_zero():
            return 0.0
        return float(self.coeffs @ np.prod(x[None, :] ** self.exps, axis=1))

    __call__ = evaluate

    def gradient(self, x) -> np.ndarray:
        x = _check_point(x, self.nvars)
        (gi, gc, ge), _ = self._derivative_table()
        out = np.zeros(self.nvars)
        if len(gc):
            np.add.at(out, gi, gc * np.prod(x[None, :] ** ge, axis=1))
        return out

    def hessian(self, x) -> np.ndarray:
        x = _check_point(x, self.nvars)
        _, (hi, hj, hc, he) = self._derivative_table()
        out = np.zeros((self.nvars, self.nvars))
        if len(hc):
            np.add.at(out, (hi, hj), hc * np.prod(x[None, :] ** he, axis=1))
        return out

    def derivatives(self, x, hessian: bool = True):
        """Return ``(value, gradient, hessian)``; Hessian is None if not requested."""
        return self.evaluate(x), self.gradient(x), (self.hessian(x) if hessian else None)

    # transformations ---------------------------------------------------

    def homogenize(self, extra_var_index: int = 0) -> "Polynomial":
        """Insert a new variable at ``extra_var_index`` making every term degree ``degree``.

        The result ``P`` satisfies ``P(1, x) = p(x)`` (with the new variable
        set to one) and ``P(t*y) = t**degree * P(y)``.
        """
        d = self.degree
        terms = []
        for c, e in self.terms:
            e2 = list(e)
            e2.insert(extra_var_index, d - sum(e))
            terms.append((c, e2))
        return Polynomial(terms, self.nvars + 1)

    def embed(self, nvars: int, offset: int = 0) -> "Polynomial":
        """Same polynomial viewed in ``nvars`` variables, shifted by ``offset``."""
        if offset + self.nvars > nvars:
            raise ValueError("embedding does not fit")
        terms = []
        for c, e in self.terms:
            e2 = [0] * nvars
            e2[offset:offset + self.nvars] = e
            terms.append((c, e2))
        return Polynomial(terms, nvars)

    def expand(self) -> "Polynomial":
        return self

    # text format -------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for c, e in self.terms:
            lines.append(" ".join([repr(float(c))] + [str(v) for v in e]))
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str, nvars: int | None = None) -> "Polynomial":
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            terms.append((float(fields[0]), [int(v) for v in fields[1:]]))
        if nvars is None:
            if not terms:
                raise ValueError("cannot infer nvars from an empty polynomial")
            nvars = len(terms[0][1])
        return cls(terms, nvars)


class PolyBatch:
    """Values, gradients and weighted Hessians of several polynomials at once.

    All monomials that occur in the polynomials or their first and second
    derivatives are evaluated once per point from a table of powers; the
    results are scattered to their owners with ``bincount``.
    """

    def __init__(self, polys: Sequence[Polynomial]):
        self.polys = list(polys)
        if not self.polys:
            raise ValueError("empty batch")
        n = self.nvars = self.polys[0].nvars
        if any(p.nvars != n for p in self.polys):
            raise ValueError("polynomials disagree on nvars")
        self.size = len(self.polys)
        rows, val, grad, hess = [], [], [], []
        for k, p in enumerate(self.polys):
            for c, e in zip(p.coeffs, p.exps):
                val.append((k, c, len(rows)))
                rows.append(e)
            (gi, gc, ge), (hi, hj, hc, he) = p._derivative_table()
            for i, c, e in zip(gi, gc, ge):
                grad.append((k * n + i, c, len(rows)))
                rows.append(e)
            for i, j, c, e in zip(hi, hj, hc, he):
                hess.append((k, i * n + j, c, len(rows)))
                rows.append(e)
        E = np.array(rows, dtype=np.int64).reshape(-1, n)
        self._monos, inv = np.unique(E, axis=0, return_inverse=True)
        inv = inv.ravel()
        self._deg = int(self._monos.max()) if self._monos.size else 0
        self._val = self._table(val, inv, 3)
        self._grad = self._table(grad, inv, 3)
        self._hess = self._table(hess, inv, 4)

    @staticmethod
    def _table(entries, inv, width):
        if not entries:
            return tuple(np.zeros(0, dtype=np.intp if i != width - 2 else float)
                         for i in range(width))
        cols = list(zip(*entries))
        out = [np.array(c, dtype=np.intp) for c in cols[:-2]]
        out.append(np.array(cols[-2], dtype=float))
        out.append(inv[np.array(cols[-1], dtype=np.intp)])
        return tuple(out)

    def _monomials(self, x):
        pw = x[None, :] ** np.arange(self._deg + 1)[:, None]
        return np.prod(pw[self._monos, np.arange(self.nvars)], axis=1)

    def values_and_gradients(self, x):
        x = _check_point(x, self.nvars)
        m = self._monomials(x)
        k, c, mi = self._val
        vals = np.bincount(k, c * m[mi], minlength=self.size)
        gk, gc, gm = self._grad
        grads = np.bincount(gk, gc * m[gm], minlength=self.size * self.nvars)
        return vals, grads.reshape(self.size, self.nvars), m

    def weighted_hessian(self, x, w, monomials=None) -> np.ndarray:
        """``sum_k w[k] * hessian(poly_k)`` at ``x``."""
        x = _check_point(x, self.nvars)
        m = self._monomials(x) if monomials is None else monomials
        k, ij, c, mi = self._hess
        n = self.nvars
        H = np.bincount(ij, np.asarray(w, dtype=float)[k] * c * m[mi], minlength=n * n)
        return H.reshape(n, n)


def eval_poly(p, x) -> float:
    return p.evaluate(x)


def grad_poly(p, x) -> np.ndarray:
    return p.gradient(x)


def homogenize(p: Polynomial, extra_var_index: int = 0) -> Polynomial:
    return p.homogenize(extra_var_index)


class PolySystem:
    """Ordered list of polynomial-like constraints sharing one variable count.

    Members only need ``nvars``, ``degree``, ``evaluate``, ``gradient``,
    ``hessian`` and ``homogenize``, so structured forms such as
    :class:`gradcont.prefixsum.PrefixSumForm` can sit next to sparse
    :class:`Polynomial` objects.
    """

    def __init__(self, polys: Sequence, labels: Sequence[str] | None = None):
        polys = list(polys)
        if not polys:
            raise ValueError("empty system")
        nv = {p.nvars for p in polys}
        if len(nv) != 1:
            raise ValueError(f"members disagree on nvars: {sorted(nv)}")
        self.polys = polys
        self.nvars = nv.pop()
        if labels is None:
            labels = [f"p{i + 1}" for i in range(len(polys))]
        if len(labels) != len(polys):
            raise ValueError("one label per polynomial")
        self.labels = list(labels)

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return PolySystem(self.polys[i], self.labels[i])
        return self.polys[i]

    def __add__(self, other: "PolySystem") -> "PolySystem":
        return PolySystem(self.polys + other.polys, self.labels + other.labels)

    @property
    def degrees(self) -> list[int]:
        return [p.degree for p in self.polys]

    def evaluate(self, x) -> np.ndarray:
        return np.array([p.evaluate(x) for p in self.polys])

    def jacobian(self, x) -> np.ndarray:
        return np.array([p.gradient(x) for p in self.polys])

    def homogenize(self, extra_var_index: int = 0) -> "PolySystem":
        return PolySystem([p.homogenize(extra_var_index) for p in self.polys], self.labels)

    def to_text(self) -> str:
        return "\n---\n".join(p.expand().to_text() for p in self.polys) + "\n"

    @classmethod
    def from_text(cls, text: str, nvars: int | None = None) -> "PolySystem":
        blocks = [b for b in _split_blocks(text)]
        polys = [Polynomial.from_text(b, nvars) for b in blocks]
        return cls(polys)


def _split_blocks(text: str) -> Iterable[str]:
    block: list[str] = []
    for line in text.splitlines():
        if line.strip() == "---":
            yield "\n".join(block)
            block = []
        else:
            block.append(line)
    if any(l.strip() for l in block):
        yield "\n".join(block)
