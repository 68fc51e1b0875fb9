"""Small staged problems with an independent all-stationary-points oracle.

Each toy minimizes ``|x|^2`` subject to constraints that are switched on
one at a time. The oracle solves the Lagrange conditions directly in the
original variables, from a dense grid of starts, with no continuation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .explorer import StageSet, Vertex
from .poly import Polynomial, PolySystem
from .staged import StagedLagrangeSystem


@dataclass
class ToyProblem:
    name: str
    initial: PolySystem
    released: PolySystem
    box: float = 3.0

    @property
    def n(self) -> int:
        return self.initial.nvars

    def system(self, R: float = 4.0, R_lambda: float = 1.0) -> StagedLagrangeSystem:
        return StagedLagrangeSystem.from_constraints(self.initial, self.released, R, R_lambda)

    def constraints_at(self, k: int) -> PolySystem:
        """Constraints active at stage ``k``."""
        return self.initial + self.released[:k] if k else self.initial


def toy2() -> ToyProblem:
    """``min x^2 + y^2`` with ``x + 2 y = 2``, then ``x y = 0.3``.

    The line is not symmetric under ``x <-> y``; with ``x + y = 1`` the
    stage-0 minimizer would be a branch point of the stage-1 curve.
    """
    x, y = Polynomial.variables(2)
    return ToyProblem("toy2", PolySystem([x + 2.0 * y - 2.0], ["line"]),
                      PolySystem([x * y - 0.3], ["hyperbola"]))


def toy3() -> ToyProblem:
    """``min |x|^2`` in three variables with a plane, then an ellipsoid,
    then a quadric that cuts the resulting ellipse in four points."""
    x, y, z = Polynomial.variables(3)
    plane = x + y + z - 1.0
    ellipsoid = x * x + 2.0 * y * y + 4.0 * z * z - 2.3
    quadric = x * y - 0.4 * z - 0.1
    return ToyProblem("toy3", PolySystem([plane], ["plane"]),
                      PolySystem([ellipsoid, quadric], ["ellipsoid", "quadric"]))


TOYS = {"toy2": toy2, "toy3": toy3}


def _kkt(cons: PolySystem, x, mu):
    g = 2.0 * x + cons.jacobian(x).T @ mu
    return np.concatenate([g, cons.evaluate(x)])


def _kkt_jac(cons: PolySystem, x, mu):
    n, p = len(x), len(cons)
    J = cons.jacobian(x)
    H = 2.0 * np.eye(n)
    for m_i, c in zip(mu, cons):
        H += m_i * c.hessian(x)
    return np.block([[H, J.T], [J, np.zeros((p, p))]])


def stationary_points(cons: PolySystem, box: float = 3.0, per_axis: int = 25,
                      tol: float = 1e-12, merge: float = 1e-8) -> np.ndarray:
    """All non-singular stationary points of ``|x|^2`` on ``{cons = 0}`` in a box.

    Newton's method on the Lagrange system starts from every node of a
    ``per_axis^n`` grid (multipliers from least squares at the node).
    Converged points with a non-singular Lagrange Jacobian are merged
    within ``merge`` and returned sorted.
    """
    n, p = cons.nvars, len(cons)
    axis = np.linspace(-box, box, per_axis)
    found: list[np.ndarray] = []
    for node in itertools.product(axis, repeat=n):
        x = np.array(node)
        J = cons.jacobian(x)
        mu = np.linalg.lstsq(J.T, -2.0 * x, rcond=None)[0]
        u = np.concatenate([x, mu])
        ok = False
        for _ in range(50):
            F = _kkt(cons, u[:n], u[n:])
            if np.abs(F).max() <= tol:
                ok = True
                break
            try:
                u = u - np.linalg.solve(_kkt_jac(cons, u[:n], u[n:]), F)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(u)) or np.abs(u[:n]).max() > 10 * box:
                break
        if not ok:
            continue
        if np.linalg.cond(_kkt_jac(cons, u[:n], u[n:])) > 1e10:
            continue
        if not any(np.abs(u[:n] - f).max() <= merge for f in found):
            found.append(u[:n].copy())
    return np.array(sorted(found, key=tuple)).reshape(-1, n)


def oracle_vertices(problem: ToyProblem, sys: StagedLagrangeSystem, k: int, **kw) -> np.ndarray:
    """Oracle stationary points at stage ``k`` lifted to canonical ``z``."""
    xs = stationary_points(problem.constraints_at(k), problem.box, **kw)
    return np.array([sys.lift(k, x) for x in xs]).reshape(-1, sys.ell)


def stage0_set(problem: ToyProblem, sys: StagedLagrangeSystem, dedup_tol: float = 1e-6,
               **kw) -> StageSet:
    S0 = StageSet(0, dedup_tol)
    for z in oracle_vertices(problem, sys, 0, **kw):
        S0.insert(Vertex.make(sys, 0, z, provenance="oracle"))
    return S0


def match_sets(A, B, tol: float = 1e-8) -> bool:
    """True if the rows of ``A`` and ``B`` pair up one-to-one within ``tol`` (max-norm)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if len(A) != len(B):
        return False
    used = set()
    for a in A:
        hits = [j for j, b in enumerate(B) if j not in used and np.abs(a - b).max() <= tol]
        if len(hits) != 1:
            return False
        used.add(hits[0])
    return True
