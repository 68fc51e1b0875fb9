"""Staged Lagrange maps for homogenized norm minimization.

Variables are ``z = (gamma_0, ..., gamma_n, lambda_0, ..., lambda_{m+1})``
with ``ell = n + m + 3`` components. ``gamma_0`` is the homogenizing
variable, ``lambda_0`` multiplies the objective ``-gamma_0**2`` and
``lambda_j`` multiplies the constraint ``P_j``; ``P_1`` is the sphere
``|gamma_{1:n}|**2 - R**2``.

The stage-k map ``F_k`` has the fixed row layout::

    [ |lambda|^2 - R_lambda^2                                   (1 row)
      lambda_0 grad g + sum_j lambda_j grad P_j                 (n + 1 rows)
      P_1, ..., P_{a_k}                                         (a_k rows)
      lambda_{a_k + 1}, ..., lambda_{m+1} ]                     (r - k rows)

with ``a_k = m - r + k + 1`` active constraints. Consecutive maps differ
only in row ``n + 1 + a_k`` (0-based), which holds ``P_{a_k}`` in ``F_k``
and ``lambda_{a_k}`` in ``F_{k-1}``. Dropping that row gives ``H_k``; its
``F_k`` entry is ``w_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoConvergence, SingularJacobian
from .poly import PolyBatch, Polynomial, PolySystem
from .prefixsum import PrefixSumForm


@dataclass(frozen=True, eq=False)
class AugPoint:
    gamma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        l = np.asarray(self.lam, dtype=float)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(l))):
            raise ValueError("AugPoint components must be finite")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "lam", l)

    def __array__(self, dtype=None, copy=None):
        z = np.concatenate([self.gamma, self.lam])
        return z if dtype is None else z.astype(dtype)

    def __len__(self):
        return len(self.gamma) + len(self.lam)

    @classmethod
    def from_array(cls, z, n: int) -> "AugPoint":
        z = np.asarray(z, dtype=float)
        return cls(z[:n + 1].copy(), z[n + 1:].copy())


def sphere_constraint(n: int, R: float) -> Polynomial:
    """``sum_{i>=1} gamma_i**2 - R**2`` in the variables ``gamma_0..gamma_n``."""
    terms = [(1.0, [0] * i + [2] + [0] * (n - i)) for i in range(1, n + 1)]
    terms.append((-R * R, [0] * (n + 1)))
    return Polynomial(terms, n + 1)


def _parity(p) -> int:
    # P(-y) = parity * P(y) for homogeneous members; the sphere is even
    return -1 if p.degree % 2 else 1


class StagedLagrangeSystem:
    """The maps ``F_0, ..., F_r`` together with ``H_k`` and ``w_k``.

    Parameters
    ----------
    constraints : sequence
        Homogeneous constraints ``P_1, ..., P_{m+1}`` in ``n + 1`` variables,
        ordered so that the first ``m - r + 1`` are active at stage 0 and the
        k-th of the remaining ones is switched on at stage k.
    r : int
        Number of released constraints.
    R, R_lambda : float
        Radii of the coordinate sphere and of the multiplier sphere.
    objective : Polynomial, optional
        Objective in the homogeneous variables (default ``-gamma_0**2``).
    """

    def __init__(self, constraints: Sequence, r: int, R: float = 4.0, R_lambda: float = 1.0,
                 objective: Polynomial | None = None, labels: Sequence[str] | None = None,
                 stage_order: Sequence[int] | None = None):
        self.constraints = list(constraints)
        N = {p.nvars for p in self.constraints}
        if len(N) != 1:
            raise ValueError("constraints disagree on the number of variables")
        self.N = N.pop()
        self.n = self.N - 1
        self.m = len(self.constraints) - 1
        self.r = int(r)
        if not 0 <= self.r <= self.m:
            raise ValueError(f"r={r} must lie in [0, m={self.m}]")
        self.ell = self.n + self.m + 3
        self.R = float(R)
        self.R_lambda = float(R_lambda)
        if objective is None:
            e = [0] * self.N
            e[0] = 2
            objective = Polynomial({tuple(e): -1.0}, self.N)
        if objective.nvars != self.N:
            raise ValueError("objective lives in the wrong number of variables")
        self.objective = objective
        self.labels = list(labels) if labels is not None else [f"P{j + 1}" for j in range(self.m + 1)]
        self.stage_order = list(stage_order) if stage_order is not None else list(range(self.r))
        self._setup_batches()
        self._parities = np.array([_parity(objective)] + [_parity(p) for p in self.constraints], dtype=float)

    @classmethod
    def from_constraints(cls, initial: PolySystem, released: PolySystem, R: float = 4.0,
                         R_lambda: float = 1.0, stage_order: Sequence[int] | None = None):
        """Homogenize de-homogenized constraint lists and stack them in stage order."""
        if initial.nvars != released.nvars:
            raise ValueError("initial and released constraints disagree on nvars")
        n = initial.nvars
        order = list(stage_order) if stage_order is not None else list(range(len(released)))
        if sorted(order) != list(range(len(released))):
            raise ValueError("stage_order must be a permutation of the released constraints")
        polys = [sphere_constraint(n, R)] + [p.homogenize(0) for p in initial]
        polys += [released[i].homogenize(0) for i in order]
        labels = ["sphere"] + list(initial.labels) + [released.labels[i] for i in order]
        return cls(polys, len(released), R, R_lambda, labels=labels, stage_order=order)

    # layout -------------------------------------------------------------

    def n_active(self, k: int) -> int:
        self._check_stage(k, 0)
        return self.m - self.r + k + 1

    def swap_row(self, k: int) -> int:
        """Row index of ``w_k`` inside ``F_k`` (and of the dropped multiplier row in ``F_{k-1}``)."""
        self._check_stage(k, 1)
        return self.N + self.m - self.r + k + 1

    def _check_stage(self, k: int, lo: int):
        if not (isinstance(k, (int, np.integer)) and lo <= k <= self.r):
            raise ValueError(f"stage index {k} outside [{lo}, {self.r}]")

    def row_labels(self, k: int) -> list[str]:
        """Symbolic description of the rows of ``F_k``, in order."""
        a = self.n_active(k)
        rows = ["|lambda|^2 - R_lambda^2"]
        rows += [f"d/dgamma_{i} L" for i in range(self.N)]
        rows += [self.labels[j] for j in range(a)]
        rows += [f"lambda_{j}" for j in range(a + 1, self.m + 2)]
        return rows

    def split(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.ell,):
            raise ValueError(f"expected a point of length {self.ell}, got {z.shape}")
        return z[:self.N], z[self.N:]

    # constraint derivatives ----------------------------------------------

    def constraint_values(self, gamma) -> np.ndarray:
        return np.array([p.evaluate(gamma) for p in self.constraints])

    def _setup_batches(self):
        # plain polynomials (objective first) go through one stacked batch;
        # structured forms over the same variable block share a cache
        members = [self.objective] + self.constraints
        self._poly_idx = [i for i, p in enumerate(members) if isinstance(p, Polynomial)]
        self._batch = PolyBatch([members[i] for i in self._poly_idx])
        self._other_idx = [i for i, p in enumerate(members) if not isinstance(p, Polynomial)]

    def _derivs(self, gamma, lam=None):
        """Values and gradients of ``(objective, P_1, ..., P_{m+1})`` and, given
        multipliers, the Hessian of ``lam . (objective, P)``."""
        members = [self.objective] + self.constraints
        vals = np.empty(self.m + 2)
        grads = np.empty((self.m + 2, self.N))
        v, g, mono = self._batch.values_and_gradients(gamma)
        vals[self._poly_idx] = v
        grads[self._poly_idx] = g
        H = None
        if lam is not None:
            H = self._batch.weighted_hessian(gamma, lam[self._poly_idx], mono)
        caches: dict = {}
        for i in self._other_idx:
            p = members[i]
            # multipliers at rounding level contribute nothing measurable
            need_h = lam is not None and abs(lam[i]) > 1e-15
            if isinstance(p, PrefixSumForm):
                cache = caches.setdefault(p.offset, {})
                v, g, h = p.derivatives(gamma, hessian=need_h, cache=cache)
            else:
                v, g, h = p.derivatives(gamma, hessian=need_h)
            vals[i] = v
            grads[i] = g
            if need_h:
                H += lam[i] * h
        return vals, grads, H

    # maps ----------------------------------------------------------------

    def F(self, k: int, z) -> np.ndarray:
        a = self.n_active(k)
        gamma, lam = self.split(z)
        vals, grads, _ = self._derivs(gamma)
        out = np.empty(self.ell)
        out[0] = lam @ lam - self.R_lambda**2
        out[1:self.N + 1] = grads.T @ lam
        out[self.N + 1:self.N + 1 + a] = vals[1:a + 1]
        out[self.N + 1 + a:] = lam[a + 1:]
        return out

    def jac_F(self, k: int, z) -> np.ndarray:
        a = self.n_active(k)
        gamma, lam = self.split(z)
        _, grads, Hl = self._derivs(gamma, lam)
        N = self.N
        J = np.zeros((self.ell, self.ell))
        J[0, N:] = 2.0 * lam
        J[1:N + 1, :N] = Hl
        J[1:N + 1, N:] = grads.T
        J[N + 1:N + 1 + a, :N] = grads[1:a + 1]
        rows = np.arange(N + 1 + a, self.ell)
        J[rows, N + a + 1 + np.arange(len(rows))] = 1.0
        return J

    def H(self, k: int, z) -> np.ndarray:
        return np.delete(self.F(k, z), self.swap_row(k))

    def w(self, k: int, z) -> float:
        self._check_stage(k, 1)
        gamma, _ = self.split(z)
        return float(self.constraints[self.n_active(k) - 1].evaluate(gamma))

    def jac_H(self, k: int, z) -> np.ndarray:
        return np.delete(self.jac_F(k, z), self.swap_row(k), axis=0)

    def assemble(self, k: int, h, w: float) -> np.ndarray:
        """Inverse of the H/w split: re-insert ``w`` at its row."""
        return np.insert(np.asarray(h, dtype=float), self.swap_row(k), w)

    # geometry of solutions ------------------------------------------------

    def canonicalize(self, z) -> np.ndarray:
        """Representative of ``z`` modulo the sign symmetries of the maps.

        ``(gamma, lambda) -> (gamma, -lambda)`` and
        ``(gamma, lambda_j) -> (-gamma, parity_j * -lambda_j)`` both map zeros
        of every ``F_k`` to zeros and leave the de-homogenized point
        unchanged. The representative has its first nonzero gamma and its
        first nonzero lambda positive.
        """
        gamma, lam = self.split(z)
        gamma, lam = gamma.copy(), lam.copy()
        nz = np.flatnonzero(gamma)
        if len(nz) and gamma[nz[0]] < 0:
            gamma = -gamma
            lam = -self._parities * lam
        nz = np.flatnonzero(lam)
        if len(nz) and lam[nz[0]] < 0:
            lam = -lam
        return np.concatenate([gamma, lam])

    def dehomogenize(self, z) -> np.ndarray:
        gamma, _ = self.split(z)
        return gamma[1:] / gamma[0]

    def merit(self, z) -> float:
        """``R / |gamma_0|``, the Euclidean norm of the de-homogenized point."""
        gamma, _ = self.split(z)
        return float("inf") if gamma[0] == 0.0 else self.R / abs(float(gamma[0]))

    def homogenize_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        if x.shape != (self.n,) or nx == 0.0:
            raise ValueError("need a nonzero point with n coordinates")
        return np.concatenate([[1.0], x]) * (self.R / nx)

    def newton(self, k: int, z, tol: float = 1e-13, max_iter: int = 25, accept: float = 1e-10):
        """Full Newton on ``F_k``; returns ``(z, residual)``.

        Iterates until the residual drops below ``tol`` or stops improving,
        and raises :class:`NoConvergence` if it ends above ``accept``.
        """
        with np.errstate(over="ignore", invalid="ignore"):
            return self._newton(k, z, tol, max_iter, accept)

    def _newton(self, k, z, tol, max_iter, accept):
        z = np.array(z, dtype=float)
        res = np.abs(self.F(k, z)).max()
        for _ in range(max_iter):
            if res <= tol:
                break
            try:
                dz = np.linalg.solve(self.jac_F(k, z), self.F(k, z))
            except np.linalg.LinAlgError as exc:
                raise SingularJacobian(str(exc)) from None
            z_new = z - dz
            res_new = np.abs(self.F(k, z_new)).max()
            if not np.isfinite(res_new) or (res_new >= res and res <= accept):
                break
            z, res = z_new, res_new
        if not np.isfinite(res) or res > accept:
            raise NoConvergence(f"Newton on F_{k} stalled at residual {res:.3e}")
        return z, float(res)

    def lift(self, k: int, x, pinned: Sequence[int] = (), polish: bool = True):
        """Zero of ``F_k`` above a de-homogenized stationary point ``x``.

        The multipliers of the active constraints solve the gradient rows in
        the least-squares sense; multipliers listed in ``pinned`` (indices
        into ``lambda``) and all inactive ones are set to zero. The result is
        normalized onto the multiplier sphere, canonicalized, and polished
        with Newton when ``polish`` is true.
        """
        gamma = self.homogenize_point(x)
        a = self.n_active(k)
        _, grads, _ = self._derivs(gamma)
        cols = [0] + [j for j in range(1, a + 1) if j not in set(pinned)]
        A = grads[cols].T
        # objective multiplier fixed to 1 before normalization
        sol, *_ = np.linalg.lstsq(A[:, 1:], -A[:, 0], rcond=None)
        lam = np.zeros(self.m + 2)
        lam[0] = 1.0
        lam[cols[1:]] = sol
        lam *= self.R_lambda / np.linalg.norm(lam)
        z = self.canonicalize(np.concatenate([gamma, lam]))
        if polish:
            z, _ = self.newton(k, z)
            z = self.canonicalize(z)
        return z


def build_staged_system(order_conds: PolySystem, sym_conds: PolySystem, r: int = 11,
                        R: float = 4.0, R_lambda: float = 1.0,
                        stage_order: Sequence[int] | None = None) -> StagedLagrangeSystem:
    """Benchmark layout: symmetry plus the first ``len(order_conds) - r`` order
    conditions start active; the last ``r`` order conditions are released one
    per stage in ``stage_order`` (default: listing order)."""
    if order_conds.nvars != sym_conds.nvars:
        raise ValueError("order and symmetry conditions disagree on nvars")
    if not 0 < r <= len(order_conds):
        raise ValueError("r must be between 1 and the number of order conditions")
    cut = len(order_conds) - r
    initial = sym_conds + order_conds[:cut] if cut else sym_conds
    return StagedLagrangeSystem.from_constraints(initial, order_conds[cut:], R, R_lambda, stage_order)


def eval_F(sys: StagedLagrangeSystem, k: int, z) -> np.ndarray:
    return sys.F(k, np.asarray(z, dtype=float))


def eval_H(sys: StagedLagrangeSystem, k: int, z) -> np.ndarray:
    return sys.H(k, np.asarray(z, dtype=float))


def eval_w(sys: StagedLagrangeSystem, k: int, z) -> float:
    return sys.w(k, np.asarray(z, dtype=float))


def jac_H(sys: StagedLagrangeSystem, k: int, z) -> np.ndarray:
    return sys.jac_H(k, np.asarray(z, dtype=float))


def refine_stationary(cons: PolySystem, x, tol: float = 1e-13, max_iter: int = 20,
                      max_move: float = 1e-6):
    """Newton refinement of a stationary point of ``|x|^2`` on ``{cons = 0}``.

    Works directly in the original coordinates, which removes the error
    amplification of de-homogenizing points with small ``gamma_0``. The
    multipliers start from least squares; steps are least-squares solutions
    of the Lagrange Jacobian so square constraint systems are handled too.

    Returns ``(x, residual)`` with the largest constraint value at ``x``.
    Raises :class:`NoConvergence` if the iteration diverges or the point
    moves more than ``max_move * (1 + |x|)``, i.e. it is not a refinement
    of the same stationary point.
    """
    x0 = np.asarray(x, dtype=float).copy()
    n, p = len(x0), len(cons)
    if not np.all(np.isfinite(x0)):
        raise NoConvergence("non-finite point")
    mu = np.linalg.lstsq(cons.jacobian(x0).T, -2.0 * x0, rcond=None)[0]
    u = np.concatenate([x0, mu])
    best = (np.inf, x0)
    for _ in range(max_iter):
        xs, ms = u[:n], u[n:]
        c = np.asarray(cons.evaluate(xs), dtype=float)
        J = cons.jacobian(xs)
        F = np.concatenate([2.0 * xs + J.T @ ms, c])
        res = float(np.abs(c).max()) if p else 0.0
        if res < best[0]:
            best = (res, xs.copy())
        scale = max(1.0, float(np.abs(ms).max(initial=0.0)))
        if res <= tol and np.abs(F[:n]).max() <= 1e-10 * scale:
            break
        Hs = 2.0 * np.eye(n)
        for m_i, q in zip(ms, cons):
            Hs += m_i * q.hessian(xs)
        K = np.block([[Hs, J.T], [J, np.zeros((p, p))]])
        try:
            step = np.linalg.solve(K, F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(K, F, rcond=None)[0]
        u = u - step
        if not np.all(np.isfinite(u)):
            break
        if np.abs(step).max() <= 1e-16 * max(1.0, float(np.abs(u).max())):
            break
    res, xb = best
    # minimum-norm corrections onto the constraint set; the moves are far
    # below the stationarity tolerance
    for _ in range(3 if p else 0):
        if not np.isfinite(res) or res <= tol:
            break
        xn = xb - np.linalg.lstsq(cons.jacobian(xb), np.asarray(cons.evaluate(xb)), rcond=None)[0]
        rn = float(np.abs(cons.evaluate(xn)).max())
        if not rn < res:
            break
        res, xb = rn, xn
    if not np.isfinite(res):
        raise NoConvergence("refinement produced no finite iterate")
    if np.abs(xb - x0).max() > max_move * (1.0 + float(np.abs(x0).max())):
        raise NoConvergence("refinement left the neighbourhood of the start point")
    return xb, res
