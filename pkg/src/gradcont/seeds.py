"""Stage-0 seeds from equal-component patterns.

Take five positive integers ``i_1 >= ... >= i_5`` summing to ``n`` and five
distinct values ``a_1..a_5`` with

    sum_k i_k a_k = 1,    sum_k i_k a_k**(2j+1) = 0   (j = 1..4).

Any arrangement of the multiset ``{a_k repeated i_k times}`` satisfies the
first five order conditions and is a stationary point of the squared norm
restricted to them. Palindromic arrangements also satisfy time symmetry;
they exist only if at most one ``i_k`` is odd, and they are obtained by
permuting the half-vector (multiplicities ``i_k // 2``) with the
odd-multiplicity value in the middle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.stats import qmc

from .composition import cumsum_ok, of2_value, symmetry_conditions
from .errors import NoConvergence, SeedRejected, SingularJacobian

log = logging.getLogger(__name__)

REFERENCE_SEED_COUNTS = {31: 1954677, 33: 4785415, 35: 5801580}


@dataclass(frozen=True)
class Pattern:
    """Multiplicities ``i_1 >= ... >= i_5`` of the five distinct values.

    Palindromic arrangements need at most one odd multiplicity; pass
    ``symmetric=False`` to build other patterns for the reduced solver only.
    """

    i: tuple
    symmetric: bool = field(default=True, compare=False)

    def __post_init__(self):
        i = tuple(int(v) for v in self.i)
        if len(i) != 5 or any(v < 1 for v in i) or list(i) != sorted(i, reverse=True):
            raise ValueError(f"pattern must be 5 positive integers in descending order, got {i}")
        if self.symmetric and sum(v % 2 for v in i) > 1:
            raise ValueError(f"pattern {i} has more than one odd entry")
        object.__setattr__(self, "i", i)

    @property
    def n(self) -> int:
        return sum(self.i)

    @property
    def offsets(self) -> tuple:
        """``l_k = i_1 + ... + i_{k-1}``."""
        return tuple(int(v) for v in np.concatenate([[0], np.cumsum(self.i)[:-1]]))

    @property
    def half(self) -> tuple:
        return tuple(v // 2 for v in self.i)

    @property
    def odd_index(self) -> int | None:
        odd = [k for k, v in enumerate(self.i) if v % 2]
        return odd[0] if odd else None

    def arrangement_count(self) -> int:
        """Number of palindromic arrangements, ``h! / prod (i_k // 2)!``."""
        self.require_symmetric()
        return _multinomial(self.half)

    def require_symmetric(self) -> None:
        if sum(v % 2 for v in self.i) > 1:
            raise ValueError(f"pattern {self} admits no palindromic arrangement")

    def __str__(self):
        return "(" + ",".join(map(str, self.i)) + ")"


@dataclass(frozen=True)
class ReducedSolution:
    a: np.ndarray
    pattern: Pattern

    def residuals(self) -> np.ndarray:
        return _reduced_F(np.asarray(self.a)[None, :], np.array(self.pattern.i, dtype=float))[0]


@dataclass(frozen=True)
class SeedFilter:
    N_max: float = 7.5
    of2_max: float = 0.8
    cumsum_lo: float = 0.0
    cumsum_hi: float = 1.0
    cumsum_tol: float = 1e-12


@dataclass(frozen=True)
class Seed:
    pattern: Pattern
    solution_index: int
    arrangement_index: int
    gamma: np.ndarray


def _multinomial(counts: Sequence[int]) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def enumerate_patterns(n: int) -> list[Pattern]:
    """All descending 5-part compositions of ``n`` with at most one odd part."""
    out = []

    def rec(prefix, remaining, cap):
        k = len(prefix)
        if k == 5:
            if remaining == 0 and sum(v % 2 for v in prefix) <= 1:
                out.append(Pattern(tuple(prefix)))
            return
        slots = 5 - k
        for v in range(min(cap, remaining - (slots - 1)), 0, -1):
            if v * slots < remaining:
                break
            rec(prefix + [v], remaining - v, v)

    rec([], n, n)
    return out


# reduced 5-unknown system ---------------------------------------------------

_POWERS = np.array([1, 3, 5, 7, 9])


def _odd_powers(a):
    a2 = a * a
    out = [a]
    for _ in range(4):
        out.append(out[-1] * a2)
    return np.stack(out, axis=-2)  # (..., 5 powers, 5 values)


def _reduced_F(a, i):
    F = _odd_powers(a) @ i
    F[..., 0] -= 1.0
    return F


def _reduced_J(a, i):
    ones = np.ones_like(a)
    a2 = a * a
    rows = [ones]
    for _ in range(4):
        rows.append(rows[-1] * a2)
    return np.stack(rows, axis=-2) * (_POWERS[:, None] * i[None, :])


def _newton_batch(a, i, iters: int = 60, tol: float = 1e-14):
    """Damped Newton on many starts at once; returns final points and max-norm residuals."""
    a = np.array(a, dtype=float)
    res = np.abs(_reduced_F(a, i)).max(axis=1)
    active = np.flatnonzero(np.isfinite(res))
    for _ in range(iters):
        active = active[(res[active] > tol) & (np.abs(a[active]).max(axis=1) < 1e3)]
        if not len(active):
            break
        x = a[active]
        F = _reduced_F(x, i)
        J = _reduced_J(x, i)
        try:
            step = np.linalg.solve(J, -F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(Jk, -Fk, rcond=None)[0] for Jk, Fk in zip(J, F)])
        r0 = res[active]
        t = np.ones(len(x))
        best_x, best_r = x.copy(), r0.copy()
        pending = np.ones(len(x), dtype=bool)
        # backtracking on the max-norm residual
        for _ in range(10):
            idx = np.flatnonzero(pending)
            if not len(idx):
                break
            trial = x[idx] + t[idx, None] * step[idx]
            with np.errstate(all="ignore"):
                rt = np.abs(_reduced_F(trial, i)).max(axis=1)
            ok = rt < r0[idx]
            best_x[idx[ok]] = trial[ok]
            best_r[idx[ok]] = rt[ok]
            pending[idx[ok]] = False
            t[idx[~ok]] *= 0.5
        a[active] = best_x
        # a start that cannot decrease its residual is done: converged or stuck
        stalled = best_r >= r0
        res[active] = np.where(stalled & (r0 > 1e-12), np.inf, best_r)
        res[active[stalled & (r0 <= 1e-12)]] = 0.0
    return a, res


def solve_reduced(pattern: Pattern, n_starts: int = 10_000, seed: int = 0,
                  box: float = 2.0) -> list[ReducedSolution]:
    """Real solutions of the reduced system by multi-start damped Newton.

    Starts are a scrambled Sobol sequence in ``[-box, box]^5``. Solutions are
    identified up to reordering values that share a multiplicity, and only
    non-singular solutions with pairwise distinct values are kept.
    """
    i = np.array(pattern.i, dtype=float)
    sob = qmc.Sobol(d=5, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(max(n_starts, 2))))
    starts = sob.random_base2(m)[:n_starts] * (2 * box) - box
    a, res = _newton_batch(starts, i)
    good = a[res < 1e-10]
    groups = {}
    for k, v in enumerate(pattern.i):
        groups.setdefault(v, []).append(k)
    good = good.copy()
    for idx in groups.values():
        good[:, idx] = np.sort(good[:, idx], axis=1)
    out: list[ReducedSolution] = []
    iu = np.triu_indices(5, 1)
    for sol in good:
        if any(np.abs(sol - o.a).max() <= 1e-7 for o in out):
            continue
        pol, pres = _newton_batch(sol[None, :], i, iters=6)
        pol = pol[0]
        diffs = np.abs(pol[:, None] - pol[None, :])[iu]
        sq = np.abs(pol[:, None] ** 2 - pol[None, :] ** 2)[iu]
        if pres[0] > 1e-12 or diffs.min() <= 1e-9 or sq.min() <= 1e-9:
            continue
        if any(np.abs(pol - o.a).max() <= 1e-7 for o in out):
            continue
        out.append(ReducedSolution(pol, pattern))
    out.sort(key=lambda s: tuple(s.a))
    return out


# palindromic arrangements ---------------------------------------------------


def _half_multiset_perms(counts: list[int]) -> Iterator[list[int]]:
    """Lexicographic multiset permutations of value indices (Algorithm L)."""
    seq = [k for k, c in enumerate(counts) for _ in range(c)]
    L = len(seq)
    yield list(seq)
    while True:
        j = L - 2
        while j >= 0 and seq[j] >= seq[j + 1]:
            j -= 1
        if j < 0:
            return
        l = L - 1
        while seq[l] <= seq[j]:
            l -= 1
        seq[j], seq[l] = seq[l], seq[j]
        seq[j + 1:] = reversed(seq[j + 1:])
        yield list(seq)


def _mirror(half_vals, center):
    return np.concatenate([half_vals, [center] if center is not None else [], half_vals[::-1]])


def symmetric_arrangements(pattern: Pattern, sol: ReducedSolution) -> Iterator[np.ndarray]:
    """Every palindromic arrangement of the solution values, in lexicographic
    order of value indices over the first half."""
    pattern.require_symmetric()
    a = np.asarray(sol.a)
    odd = pattern.odd_index
    center = a[odd] if odd is not None else None
    for idx in _half_multiset_perms(list(pattern.half)):
        yield _mirror(a[idx], center)


def count_symmetric_arrangements(pattern: Pattern, sol: ReducedSolution) -> int:
    pattern.require_symmetric()
    return sum(1 for _ in _half_multiset_perms(list(pattern.half)))


def filter_mask(G, f: SeedFilter = SeedFilter()) -> np.ndarray:
    """Row-wise :func:`filter_seed` for a ``(count, n)`` array."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = G.shape[1] // 2
    ok = np.abs(G).sum(axis=1) <= f.N_max
    c = np.cumsum(G, axis=1)[:, 1:]
    ok &= np.all(c >= f.cumsum_lo - f.cumsum_tol, axis=1)
    ok &= np.all(c <= f.cumsum_hi + f.cumsum_tol, axis=1)
    if h:
        ps = np.cumsum(G[:, :h], axis=1) - 0.5 * G[:, :h]
        ok &= np.abs(ps).max(axis=1) < f.of2_max
    return ok


def filter_seed(gamma, f: SeedFilter = SeedFilter()) -> bool:
    """1-norm bound, partial sums in ``[lo, hi]`` from the second on, and the
    half-range primed partial sums strictly below ``of2_max``."""
    return bool(filter_mask(np.asarray(gamma, dtype=float)[None, :], f)[0])


def _half_frontier(pattern: Pattern, a: np.ndarray, f: SeedFilter):
    """Admissible half-vectors as ``(ranks, index sequences)``, sorted by rank.

    The half-vector is grown one position at a time for all prefixes at
    once. A prefix survives if its partial sums stay in the cumsum bounds
    and its primed partial sums stay below ``of2_max``; by the palindrome
    symmetry these prefix tests cover every position, so only rounding
    margins separate them from the exact filter applied to the leaves.
    """
    counts0 = np.array(pattern.half, dtype=np.int64)
    h = int(counts0.sum())
    lo = f.cumsum_lo - 1e-9
    hi = f.cumsum_hi + 1e-9
    of2 = f.of2_max + 1e-9
    cnt = counts0[None, :].copy()
    s = np.zeros(1)
    rank = np.zeros(1, dtype=np.int64)
    M = np.array([_multinomial(counts0)], dtype=np.int64)  # completions below each prefix
    seq = np.zeros((1, 0), dtype=np.int8)
    for depth in range(h):
        left = h - depth
        parts = []
        offset = np.zeros(len(s), dtype=np.int64)
        for k in range(5):
            c = cnt[:, k]
            sub = M * c // left
            s_new = s + a[k]
            keep = (c > 0) & (s_new >= lo) & (s_new <= hi) & (np.abs(s + 0.5 * a[k]) < of2)
            idx = np.flatnonzero(keep)
            if len(idx):
                nc = cnt[idx].copy()
                nc[:, k] -= 1
                col = np.full((len(idx), 1), k, dtype=np.int8)
                parts.append((rank[idx] + offset[idx], s_new[idx], sub[idx], nc,
                              np.hstack([seq[idx], col])))
            offset += sub
        if not parts:
            return np.zeros(0, dtype=np.int64), np.zeros((0, h), dtype=np.int8)
        rank = np.concatenate([p[0] for p in parts])
        order = np.argsort(rank, kind="stable")
        rank = rank[order]
        s = np.concatenate([p[1] for p in parts])[order]
        M = np.concatenate([p[2] for p in parts])[order]
        cnt = np.concatenate([p[3] for p in parts])[order]
        seq = np.concatenate([p[4] for p in parts])[order]
    return rank, seq


def _expand_halves(a, seq, center):
    half = a[seq.astype(np.intp)]
    mid = np.full((len(seq), 1 if center is not None else 0), center if center is not None else 0.0)
    return np.hstack([half, mid, half[:, ::-1]])


def filtered_arrangement_arrays(pattern: Pattern, sol: ReducedSolution,
                                f: SeedFilter = SeedFilter(), chunk: int = 100_000):
    """Yield ``(arrangement indices, gammas)`` blocks of seeds passing ``filter_seed``."""
    pattern.require_symmetric()
    a = np.asarray(sol.a, dtype=float)
    if float(np.dot(pattern.i, np.abs(a))) > f.N_max:
        return
    odd = pattern.odd_index
    center = a[odd] if odd is not None else None
    ranks, seq = _half_frontier(pattern, a, f)
    for start in range(0, len(ranks), chunk):
        G = _expand_halves(a, seq[start:start + chunk], center)
        ok = filter_mask(G, f)
        if ok.any():
            yield ranks[start:start + chunk][ok], G[ok]


def filtered_arrangements(pattern: Pattern, sol: ReducedSolution, f: SeedFilter = SeedFilter()
                          ) -> Iterator[tuple[int, np.ndarray]]:
    """``(arrangement_index, gamma)`` for arrangements passing ``filter_seed``,
    in increasing index order. The index is the rank among all arrangements
    as produced by :func:`symmetric_arrangements`."""
    for ranks, G in filtered_arrangement_arrays(pattern, sol, f):
        for r, g in zip(ranks.tolist(), G):
            yield r, g


def count_filtered(pattern: Pattern, sol: ReducedSolution, f: SeedFilter = SeedFilter()) -> int:
    return sum(len(r) for r, _ in filtered_arrangement_arrays(pattern, sol, f))


def lift_seed(gamma, sys, pattern_tag: str = ""):
    """Stage-0 vertex above a seed; symmetry multipliers are pinned to zero."""
    from .explorer import Vertex

    g = np.asarray(gamma, dtype=float)
    n_sym = len(g) // 2
    pinned = list(range(2, 2 + n_sym))  # lambda indices of the symmetry rows
    try:
        z = sys.lift(0, g, pinned=pinned)
    except (NoConvergence, SingularJacobian, ValueError) as exc:
        raise SeedRejected(str(exc)) from None
    return Vertex.make(sys, 0, z, provenance=pattern_tag)


@dataclass
class PatternTally:
    pattern: Pattern
    solution_index: int  # -1 when the reduced system has no admissible real solution
    a: np.ndarray | None
    arrangements: int
    filtered: int

    @property
    def one_norm(self) -> float:
        return float("nan") if self.a is None else float(np.dot(self.pattern.i, np.abs(self.a)))


def _solutions(n, n_starts, rng_seed, solutions):
    for pat in enumerate_patterns(n):
        if solutions is not None and pat.i in solutions:
            sols = solutions[pat.i]
        else:
            sols = solve_reduced(pat, n_starts=n_starts, seed=rng_seed)
            if solutions is not None:
                solutions[pat.i] = sols
        yield pat, sols


def seed_tally(n: int, f: SeedFilter = SeedFilter(), n_starts: int = 10_000, rng_seed: int = 0,
               solutions: dict | None = None, progress=None) -> list[PatternTally]:
    """Per (pattern, solution) counts of filtered seeds, without materializing them."""
    out = []
    for pat, sols in _solutions(n, n_starts, rng_seed, solutions):
        if not sols:
            out.append(PatternTally(pat, -1, None, pat.arrangement_count(), 0))
        for si, sol in enumerate(sols):
            out.append(PatternTally(pat, si, np.asarray(sol.a), pat.arrangement_count(),
                                    count_filtered(pat, sol, f)))
        if progress is not None:
            progress(pat, out)
    return out


def iter_seeds(n: int, f: SeedFilter = SeedFilter(), n_starts: int = 10_000, rng_seed: int = 0,
               limit: int | None = None, solutions: dict | None = None) -> Iterator[Seed]:
    """Stream filtered seeds for ``n`` in pattern, solution, arrangement order."""
    emitted = 0
    if limit is not None and limit <= 0:
        return
    for pat, sols in _solutions(n, n_starts, rng_seed, solutions):
        for si, sol in enumerate(sols):
            for ranks, G in filtered_arrangement_arrays(pat, sol, f):
                for r, g in zip(ranks.tolist(), G):
                    yield Seed(pat, si, r, g)
                    emitted += 1
                    if limit is not None and emitted >= limit:
                        return


def seed_record(seed: Seed) -> dict:
    return {"pattern": list(seed.pattern.i), "solution_index": seed.solution_index,
            "arrangement_index": seed.arrangement_index, "gamma": seed.gamma.tolist()}


def seed_from_record(rec: dict) -> Seed:
    return Seed(Pattern(tuple(rec["pattern"])), int(rec.get("solution_index", 0)),
                int(rec["arrangement_index"]), np.asarray(rec["gamma"], dtype=float))


def seed_tag(seed: Seed) -> str:
    return f"{seed.pattern}#{seed.solution_index}#{seed.arrangement_index}"


def generate_S0(n: int, f: SeedFilter, sys, limit: int | None = None, n_starts: int = 10_000,
                rng_seed: int = 0, seeds: Iterable[Seed] | None = None, store=None,
                dedup_tol: float = 1e-6):
    """Lift filtered seeds into a stage-0 :class:`StageSet`; failures are logged and skipped.

    ``seeds`` replaces the generator, e.g. with seeds read back from a dump.
    """
    from .explorer import StageSet

    out = store if store is not None else StageSet(0, dedup_tol)
    if seeds is None:
        seeds = iter_seeds(n, f, n_starts, rng_seed, limit)
    for seed in seeds:
        tag = seed_tag(seed)
        try:
            v = lift_seed(seed.gamma, sys, tag)
        except SeedRejected as exc:
            log.warning("seed %s rejected: %s", tag, exc)
            continue
        out.insert(v)
    return out
