"""Order conditions for time-symmetric 10th order composition methods.

A composition method with ``n`` stages is given by step fractions
``gamma_1, ..., gamma_n``. Time symmetry is the palindrome condition
``gamma_j = gamma_{n-j+1}``; order 10 then requires 16 polynomial
conditions built from primed prefix sums (last summand halved).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import NoConvergence, SignFlip
from .poly import Polynomial, PolySystem
from .prefixsum import GAMMA, PrefixSumForm, PrimedSum, Term

REFERENCE_ONE_NORMS = {31: 7.386456254909627, 33: 6.680425940964748, 35: 5.863208397834587}

_S = PrimedSum(Term(GAMMA))
_T3 = PrimedSum(Term((GAMMA, 3)))
_T5 = PrimedSum(Term((GAMMA, 5)))
_U = PrimedSum(Term((GAMMA, 3), _S))

# the eleven conditions beyond the odd power sums, in listing order:
# one of degree 5, three of degree 7, seven of degree 9
HIGHER_CONDITIONS = [
    ("g3.S2", Term((GAMMA, 3), (_S, 2))),
    ("g5.S2", Term((GAMMA, 5), (_S, 2))),
    ("g3.S.T3", Term((GAMMA, 3), _S, _T3)),
    ("g3.S4", Term((GAMMA, 3), (_S, 4))),
    ("g7.S2", Term((GAMMA, 7), (_S, 2))),
    ("g5.S.T3", Term((GAMMA, 5), _S, _T3)),
    ("g3.S.T5", Term((GAMMA, 3), _S, _T5)),
    ("g3.S2.U", Term((GAMMA, 3), (_S, 2), _U)),
    ("g5.S4", Term((GAMMA, 5), (_S, 4))),
    ("g3.S3.T3", Term((GAMMA, 3), (_S, 3), _T3)),
    ("g3.S6", Term((GAMMA, 3), (_S, 6))),
]

CONDITION_LABELS = ["sum", "pow3", "pow5", "pow7", "pow9"] + [lab for lab, _ in HIGHER_CONDITIONS]


def primed_partial_sum(a, k: int) -> float:
    """``a_1 + ... + a_{k-1} + a_k / 2`` (1-based ``k``)."""
    a = np.asarray(a, dtype=float)
    if not 1 <= k <= len(a):
        raise IndexError(f"k={k} outside 1..{len(a)}")
    return float(a[:k - 1].sum() + 0.5 * a[k - 1])


def symmetry_conditions(n: int) -> PolySystem:
    """``gamma_j - gamma_{n-j+1}`` for ``j = 1..[n/2]``."""
    polys = []
    for j in range(n // 2):
        e1 = [0] * n
        e2 = [0] * n
        e1[j] = 1
        e2[n - 1 - j] = 1
        polys.append(Polynomial([(1.0, e1), (-1.0, e2)], n))
    return PolySystem(polys, [f"sym{j + 1}" for j in range(n // 2)])


def power_sum(n: int, p: int) -> Polynomial:
    return Polynomial([(1.0, [p if i == k else 0 for i in range(n)]) for k in range(n)], n)


def order_conditions(n: int) -> PolySystem:
    """The 16 order-10 conditions in the variables ``gamma_1..gamma_n``."""
    polys = [power_sum(n, 1) - 1.0] + [power_sum(n, p) for p in (3, 5, 7, 9)]
    polys += [PrefixSumForm(term, n) for _, term in HIGHER_CONDITIONS]
    return PolySystem(polys, CONDITION_LABELS)


def order_condition_system(n: int) -> PolySystem:
    """Symmetry conditions followed by the 16 order conditions (``[n/2] + 16`` members)."""
    if n % 2 == 0 or n < 1:
        raise ValueError("n must be a positive odd integer")
    return symmetry_conditions(n) + order_conditions(n)


# coefficient vectors -----------------------------------------------------


@dataclass
class CoeffVector:
    gamma: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).ravel()
        self.n = len(self.gamma)

    def save(self, path) -> None:
        Path(path).write_text("".join(f"{v:.17g}\n" for v in self.gamma))

    @classmethod
    def load(cls, path) -> "CoeffVector":
        return cls.parse(Path(path).read_text())

    @classmethod
    def parse(cls, text: str) -> "CoeffVector":
        vals = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                vals.append(float(line))
        if not vals:
            raise ValueError("no coefficients found")
        return cls(np.array(vals))


def reference_coefficients(n: int) -> CoeffVector:
    """Shipped 10th order coefficient sets for ``n`` in {31, 33, 35}."""
    if n not in REFERENCE_ONE_NORMS:
        raise ValueError("fixtures exist for n = 31, 33, 35")
    text = resources.files("gradcont.data").joinpath(f"reference_n{n}.txt").read_text()
    return CoeffVector.parse(text)


def reference_path(n: int) -> Path:
    return Path(str(resources.files("gradcont.data").joinpath(f"reference_n{n}.txt")))


@dataclass
class ConditionReport:
    n: int
    sym_max_abs: float
    order_residuals: dict
    one_norm: float
    euclid_norm: float
    of2_value: float
    cumsum_ok: bool

    @property
    def max_residual(self) -> float:
        return max(abs(v) for v in self.order_residuals.values())

    def ok(self, tol: float = 1e-10) -> bool:
        return self.sym_max_abs == 0.0 and self.max_residual <= tol

    def format(self) -> str:
        lines = [f"n = {self.n}",
                 f"symmetry max |g_j - g_(n-j+1)| = {self.sym_max_abs:.3e}"]
        for lab, v in self.order_residuals.items():
            lines.append(f"  {lab:<10s} {v: .3e}")
        lines += [f"max order residual = {self.max_residual:.3e}",
                  f"1-norm        = {self.one_norm:.15f}",
                  f"Euclidean norm = {self.euclid_norm:.15f}",
                  f"max |primed partial sum| over first half = {self.of2_value:.6f}",
                  f"partial sums within [0, 1]: {self.cumsum_ok}"]
        return "\n".join(lines)


def of2_value(gamma) -> float:
    g = np.asarray(gamma, dtype=float)
    h = len(g) // 2
    ps = np.cumsum(g) - 0.5 * g
    return float(np.abs(ps[:h]).max()) if h else 0.0


def cumsum_ok(gamma, tol: float = 1e-12) -> bool:
    c = np.cumsum(np.asarray(gamma, dtype=float))[1:]
    return bool(np.all(c >= -tol) and np.all(c <= 1.0 + tol))


def verify(coeffs) -> ConditionReport:
    g = coeffs.gamma if isinstance(coeffs, CoeffVector) else np.asarray(coeffs, dtype=float)
    n = len(g)
    h = n // 2
    sym = float(np.abs(g[:h] - g[::-1][:h]).max()) if h else 0.0
    res = order_conditions(n).evaluate(g)
    return ConditionReport(
        n=n,
        sym_max_abs=sym,
        order_residuals=dict(zip(CONDITION_LABELS, res.tolist())),
        one_norm=float(np.abs(g).sum()),
        euclid_norm=float(np.linalg.norm(g)),
        of2_value=of2_value(g),
        cumsum_ok=cumsum_ok(g),
    )


# 1-norm polishing -----------------------------------------------------------


def polish_one_norm(coeffs, constraints: PolySystem | None = None, tol: float = 1e-11,
                    max_iter: int = 40) -> CoeffVector:
    """Nearby stationary point of the 1-norm on the constraint set.

    The sign pattern ``s`` of the input is frozen, which makes the objective
    the linear form ``s . x``; Newton's method is then applied to the
    Lagrange system ``s + J(x)^T mu = 0, c(x) = 0``. Steps come from a
    least-squares solve so degenerate faces (objective constant on the
    constraint set) leave the point in place. The feasible iterate with the
    smallest 1-norm is returned, so an input that is already stationary
    comes back unchanged instead of picking up rounding noise.

    Raises :class:`SignFlip` if a component changes sign and
    :class:`NoConvergence` if the iteration fails, the 1-norm grows, or some
    component loses its first two significant digits.
    """
    x0 = coeffs.gamma if isinstance(coeffs, CoeffVector) else np.asarray(coeffs, dtype=float)
    x0 = x0.astype(float)
    n = len(x0)
    if constraints is None:
        constraints = order_condition_system(n)
    if np.min(np.abs(x0)) <= 1e-6:
        raise ValueError("a component is too close to zero for a fixed sign pattern")
    s = np.sign(x0)

    def jac_and_hess(x, mu):
        J = np.empty((len(constraints), n))
        Hm = np.zeros((n, n))
        c = np.empty(len(constraints))
        for i, p in enumerate(constraints):
            v, g, h = p.derivatives(x, hessian=True)
            c[i], J[i] = v, g
            Hm += mu[i] * h
        return c, J, Hm

    def one_norm(v):
        return float(np.abs(v).sum())

    # best feasible iterate so far; rounding noise in the Newton steps must
    # not push the 1-norm of an already stationary input up
    best = x0.copy() if np.abs(constraints.evaluate(x0)).max() <= tol else None
    x = x0.copy()
    c, J, _ = jac_and_hess(x, np.zeros(len(constraints)))
    mu, *_ = np.linalg.lstsq(J.T, -s, rcond=None)
    m = len(constraints)
    for _ in range(max_iter):
        c, J, Hm = jac_and_hess(x, mu)
        F = np.concatenate([s + J.T @ mu, c])
        K = np.block([[Hm, J.T], [J, np.zeros((m, m))]])
        step, *_ = np.linalg.lstsq(K, -F, rcond=None)
        x = x + step[:n]
        mu = mu + step[n:]
        if not np.all(np.isfinite(x)):
            break
        if np.abs(constraints.evaluate(x)).max() <= tol and np.all(np.sign(x) == s):
            if best is None or one_norm(x) < one_norm(best):
                best = x.copy()
        if np.abs(step[:n]).max() <= 1e-15 * max(1.0, np.abs(x).max()):
            break
    if np.all(np.isfinite(x)) and np.any(np.sign(x) != s):
        raise SignFlip(f"components {np.flatnonzero(np.sign(x) != s).tolist()} changed sign")
    if best is None:
        res = np.abs(constraints.evaluate(x)).max() if np.all(np.isfinite(x)) else np.inf
        raise NoConvergence(f"constraint residual {res:.3e} after polishing")
    x = best
    if one_norm(x) > one_norm(x0) + 1e-12:
        raise NoConvergence("polishing increased the 1-norm")
    if np.any(np.abs(x - x0) > 0.01 * np.maximum(np.abs(x0), 0.01)):
        raise NoConvergence("polishing moved a component by more than 1%")
    return CoeffVector(x)
