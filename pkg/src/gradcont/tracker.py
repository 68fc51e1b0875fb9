"""Pseudo-arclength continuation along ``H(z) = 0`` with zero detection for ``w``.

The curve is any object exposing ``H(k, z)``, ``jac_H(k, z)`` and ``w(k, z)``
(a :class:`~gradcont.staged.StagedLagrangeSystem` does); :class:`ImplicitCurve`
wraps plain callables for analytic tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import BracketFailure, NoConvergence, SingularJacobian

ZERO_FOUND = "ZeroFound"
LOOP_CLOSURE = "LoopClosure"
SINGULAR_STOP = "SingularStop"
LENGTH_LIMIT = "LengthLimit"
COUNT_LIMIT = "CountLimit"
ABORTED = "Aborted"  # the zero sink asked to stop this curve

TERMINAL_KINDS = (LOOP_CLOSURE, SINGULAR_STOP, LENGTH_LIMIT, COUNT_LIMIT, ABORTED)


@dataclass(frozen=True)
class TrackerConfig:
    h0: float = 1e-2
    h_min: float = 1e-8
    h_max: float = 0.25
    newton_tol: float = 1e-10
    target_iters: int = 4
    max_iters: int = 12
    max_consecutive_rejects: int = 8
    L_max: float = 200.0
    ell_max: int = 10
    closure_tol: float = 1e-6
    min_closure_arclength: float | None = None  # default 10 * h0
    max_corrector_move: float = 0.5  # fraction of the step
    min_tangent_cos: float = 0.7
    rank_tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.h_min <= self.h0 <= self.h_max:
            raise ValueError("need 0 < h_min <= h0 <= h_max")
        for name in ("newton_tol", "closure_tol", "L_max", "rank_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.target_iters < 1 or self.max_consecutive_rejects < 1:
            raise ValueError("iteration counts must be positive")
        if self.ell_max < 1:
            raise ValueError("ell_max must be positive")

    @property
    def closure_arclength(self) -> float:
        m = self.min_closure_arclength
        return 10.0 * self.h0 if m is None else m


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    arclen: float
    z: np.ndarray | None = None
    w: float | None = None
    tangent: np.ndarray | None = None

    def __repr__(self):
        return f"TraceEvent({self.kind}, arclen={self.arclen:.6g})"


class FollowResult(NamedTuple):
    termination: TraceEvent
    zeros: list
    trace: list


class ImplicitCurve:
    """Curve ``H(z) = 0`` given by callables; the stage argument is ignored.

    Parameters
    ----------
    H : callable
        ``z -> (d-1,)`` residual.
    jac : callable
        ``z -> (d-1, d)`` Jacobian of ``H``.
    w : callable, optional
        Scalar function whose sign changes are detected.
    """

    def __init__(self, H: Callable, jac: Callable, w: Callable | None = None):
        self._H, self._jac, self._w = H, jac, w

    def H(self, k, z):
        return np.atleast_1d(np.asarray(self._H(np.asarray(z, dtype=float)), dtype=float))

    def jac_H(self, k, z):
        return np.atleast_2d(np.asarray(self._jac(np.asarray(z, dtype=float)), dtype=float))

    def w(self, k, z):
        if self._w is None:
            return 1.0
        return float(self._w(np.asarray(z, dtype=float)))


def tangent_at(J, prev=None, rank_tol: float = 1e-10) -> np.ndarray:
    """Unit kernel vector of a full-row-rank ``(d-1) x d`` matrix.

    With ``prev`` the sign makes ``<t, prev> > 0``; otherwise
    ``det([J; t]) > 0``.
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    d = J.shape[1]
    if J.shape[0] != d - 1:
        raise ValueError(f"expected a {d - 1} x {d} Jacobian, got {J.shape}")
    U, s, Vt = np.linalg.svd(J)
    if not np.all(np.isfinite(s)) or s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
        raise SingularJacobian("Jacobian is rank deficient")
    t = Vt[-1].copy()
    if prev is not None:
        if np.dot(t, prev) < 0:
            t = -t
    elif np.linalg.det(np.vstack([J, t])) < 0:
        t = -t
    return t


def _as_point(z):
    return np.asarray(z, dtype=float).ravel().copy()


def correct(sys, k, z_pred, t, cfg: TrackerConfig = TrackerConfig()):
    """Simplified Newton onto the curve within the hyperplane through ``z_pred``
    orthogonal to ``t``; returns ``(z, iters)``."""
    z0 = _as_point(z_pred)
    t = np.asarray(t, dtype=float)
    z = z0.copy()
    r = sys.H(k, z)
    res = float(np.abs(r).max())
    if res <= cfg.newton_tol:
        return z, 0
    A = np.vstack([sys.jac_H(k, z0), t])
    if not np.all(np.isfinite(A)):
        raise NoConvergence("non-finite Jacobian at the predictor")
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-14 * max(diag.max(), 1e-300):
        raise SingularJacobian("bordered Jacobian is singular")
    growth = 0
    for it in range(1, cfg.max_iters + 1):
        rhs = np.append(r, np.dot(t, z - z0))
        z = z - scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
        r = sys.H(k, z)
        new = float(np.abs(r).max())
        if not math.isfinite(new):
            raise NoConvergence("corrector produced non-finite values")
        if new <= cfg.newton_tol:
            return z, it
        growth = growth + 1 if new > res else 0
        if growth >= 2:
            raise NoConvergence("corrector residual grew twice in a row")
        res = new
    raise NoConvergence(f"corrector did not converge in {cfg.max_iters} iterations")


def locate_zero(sys, k, z_a, z_b, cfg: TrackerConfig = TrackerConfig(), max_iter: int = 200):
    """Zero of ``w`` on the curve between two bracketing curve points.

    Illinois-modified regula falsi on the distance along the chord
    ``z_a -> z_b``; every trial point is projected back onto the curve.
    """
    z_a, z_b = _as_point(z_a), _as_point(z_b)
    wa, wb = sys.w(k, z_a), sys.w(k, z_b)
    if wa == 0.0:
        return z_a
    if wb == 0.0:
        return z_b
    if wa * wb > 0:
        raise BracketFailure("endpoints do not bracket a sign change")
    L = float(np.linalg.norm(z_b - z_a))
    d = (z_b - z_a) / L
    lo, hi = 0.0, L
    best = (abs(wa), z_a) if abs(wa) <= abs(wb) else (abs(wb), z_b)
    side = 0
    for _ in range(max_iter):
        s = (lo * wb - hi * wa) / (wb - wa)
        if not lo < s < hi:
            s = 0.5 * (lo + hi)
        try:
            z, _ = correct(sys, k, z_a + s * d, d, cfg)
        except (NoConvergence, SingularJacobian) as exc:
            raise BracketFailure(f"projection failed inside the bracket: {exc}") from None
        ws = sys.w(k, z)
        if abs(ws) < best[0]:
            best = (abs(ws), z)
        if abs(ws) <= cfg.newton_tol:
            return z
        if ws * wa < 0:
            hi, wb = s, ws
            if side == -1:
                wa *= 0.5
            side = -1
        else:
            lo, wa = s, ws
            if side == 1:
                wb *= 0.5
            side = 1
        if hi - lo <= 4 * np.finfo(float).eps * (1.0 + L):
            break
    if best[0] <= 10 * cfg.newton_tol:
        return best[1]
    raise BracketFailure(f"bracket collapsed with |w| = {best[0]:.3e}")


def follow(sys, k, start, direction=1, w_sink: Callable | None = None,
           cfg: TrackerConfig = TrackerConfig(), home=None, record_trace: bool = False
           ) -> FollowResult:
    """Trace the curve from ``start`` and report the sign changes of ``w``.

    Parameters
    ----------
    direction : +1, -1 or array
        Orientation relative to ``det([J; t]) > 0``, or a vector the first
        tangent must point along.
    w_sink : callable, optional
        Called with each ``ZeroFound`` event; returning ``False`` ends the
        curve with an ``Aborted`` event.
    home : array, optional
        Point whose return closes the loop; defaults to ``start``.

    Returns
    -------
    FollowResult
        Terminal event, ordered ``ZeroFound`` events and, if requested, trace
        rows ``(arclen, step, corrector_iters, w_value, event)``.
    """
    z = _as_point(start)
    home = z.copy() if home is None else _as_point(home)
    r0 = float(np.abs(sys.H(k, z)).max())
    if not r0 <= 10 * cfg.newton_tol:
        raise ValueError(f"start point is off the curve (residual {r0:.3e})")
    zeros: list = []
    trace: list = []
    arclen = 0.0

    def log(step, iters, wv, event):
        if record_trace:
            trace.append((arclen, step, iters, wv, event))

    def stop(kind):
        ev = TraceEvent(kind, arclen, z.copy(), w_cur, t.copy() if t is not None else None)
        log(0.0, 0, w_cur, kind)
        return FollowResult(ev, zeros, trace)

    w_cur = sys.w(k, z)
    t = None
    try:
        if np.ndim(direction) == 0:
            t = tangent_at(sys.jac_H(k, z), None, cfg.rank_tol)
            if direction < 0:
                t = -t
        else:
            t = tangent_at(sys.jac_H(k, z), np.asarray(direction, dtype=float), cfg.rank_tol)
    except SingularJacobian:
        return stop(SINGULAR_STOP)
    w_home = sys.w(k, home)
    h = cfg.h0
    rejects = 0
    log(0.0, 0, w_cur, "start")
    while True:
        if arclen > cfg.L_max:
            return stop(LENGTH_LIMIT)
        step = h
        closing = False
        if arclen >= cfg.closure_arclength:
            d = home - z
            dist = float(np.linalg.norm(d))
            if dist <= cfg.closure_tol:
                return stop(LOOP_CLOSURE)
            tau = float(np.dot(d, t))
            if 0.0 < tau <= step and dist <= 1.5 * step:
                step, closing = tau, True
        try:
            z_new, iters = correct(sys, k, z + step * t, t, cfg)
            moved = float(np.linalg.norm(z_new - (z + step * t)))
            if moved > cfg.max_corrector_move * step:
                raise NoConvergence("corrector moved too far")
            t_new = tangent_at(sys.jac_H(k, z_new), t, cfg.rank_tol)
            if np.dot(t_new, t) < cfg.min_tangent_cos:
                raise NoConvergence("tangent turned too sharply")
        except (NoConvergence, SingularJacobian):
            rejects += 1
            log(step, -1, None, "reject")
            h = max(0.5 * h, cfg.h_min)
            if rejects >= cfg.max_consecutive_rejects:
                return stop(SINGULAR_STOP)
            continue
        at_home = closing and float(np.linalg.norm(z_new - home)) <= cfg.closure_tol
        w_new = w_home if at_home else sys.w(k, z_new)
        crossed = w_cur * w_new < 0 or (w_new == 0.0 and not at_home)
        if crossed:
            try:
                zz = z_new if w_new == 0.0 else locate_zero(sys, k, z, z_new, cfg)
            except BracketFailure:
                rejects += 1
                log(step, -1, None, "bracket_failure")
                h = max(0.5 * step, cfg.h_min)
                if rejects >= cfg.max_consecutive_rejects:
                    return stop(SINGULAR_STOP)
                continue
            s_zero = arclen + float(np.dot(zz - z, t))
            ev = TraceEvent(ZERO_FOUND, s_zero, zz, sys.w(k, zz), t_new.copy())
            zeros.append(ev)
            arclen_before = arclen
            arclen = s_zero
            log(0.0, 0, ev.w, ZERO_FOUND)
            arclen = arclen_before
        rejects = 0
        arclen += step
        z, t, w_cur = z_new, t_new, w_new
        log(step, iters, w_new, "step")
        if crossed:
            if w_sink is not None and w_sink(zeros[-1]) is False:
                return stop(ABORTED)
            if len(zeros) >= cfg.ell_max:
                return stop(COUNT_LIMIT)
        if at_home:
            return stop(LOOP_CLOSURE)
        h = h * min(2.0, max(0.5, cfg.target_iters / max(iters, 1)))
        h = min(max(h, cfg.h_min), cfg.h_max)


def write_trace_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["arclen", "step", "corrector_iters", "w_value", "event"])
        for row in rows:
            wr.writerow(["" if v is None else v for v in row])
