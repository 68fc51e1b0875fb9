"""
The 10th order composition benchmark, piece by piece.

1. Check the shipped 31-stage coefficients against the 16 order conditions.
2. Build one family of starting points: values repeated according to the
   multiplicity pattern (16, 8, 3, 2, 2), solved from a 5x5 polynomial system,
   and arranged palindromically.
3. Lift one filtered arrangement to a stationary point of the homogenized
   Lagrange system and look at its residual.
4. Polish the shipped coefficients towards a nearby 1-norm minimizer.
"""

import numpy as np

from gradcont import seeds
from gradcont.composition import (reference_coefficients, order_condition_system,
                                  order_conditions, polish_one_norm, symmetry_conditions, verify)
from gradcont.staged import build_staged_system

n = 31
cv = reference_coefficients(n)
rep = verify(cv)
print(f"shipped n = {n}: max residual {rep.max_residual:.1e}, 1-norm {rep.one_norm:.15f}, "
      f"|x| = {rep.euclid_norm:.6f}")

pat = seeds.Pattern((16, 8, 3, 2, 2))
sols = seeds.solve_reduced(pat)
print(f"\npattern {pat}: {len(sols)} real solution(s)")
for s in sols:
    print("  values", np.array2string(s.a, precision=6),
          f" residual {np.abs(s.residuals()).max():.1e}")
print(f"  palindromic arrangements: {seeds.count_symmetric_arrangements(pat, sols[0])}")
print(f"  passing the seed filter: {seeds.count_filtered(pat, sols[0])}")

# no arrangement of this pattern passes the default filter; take the first seed that does
first = next(seeds.iter_seeds(n, limit=1))
print(f"\nfirst filtered seed comes from pattern {first.pattern}:")
print("  gamma =", np.array2string(first.gamma[:8], precision=4), "...")
sys_ = build_staged_system(order_conditions(n), symmetry_conditions(n))
v = seeds.lift_seed(first.gamma, sys_, seeds.seed_tag(first))
print(f"  lifted to stage 0: |F_0| = {v.residual:.1e}, |x| = {v.merit:.6f}")

p = polish_one_norm(cv.gamma, order_condition_system(n))
print(f"\npolished 1-norm {np.abs(p.gamma).sum():.15f} "
      f"(change {np.abs(p.gamma).sum() - rep.one_norm:+.1e}); "
      f"constraints {np.abs(order_condition_system(n).evaluate(p.gamma)).max():.1e}")
