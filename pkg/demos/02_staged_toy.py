"""
Staged exploration of a three-variable toy problem.

Minimize |x|^2 subject to a plane, then additionally an ellipsoid, then a
quadric. The explorer starts from the single stationary point on the plane,
releases one constraint per stage and follows the curve of stationary points
of the current stage until the newly released constraint vanishes. The
vertices it finds are compared with a brute-force list of all stationary
points (dense grid of starts, Newton on the KKT system).
"""

import numpy as np

from gradcont.explorer import ExploreConfig, run_all
from gradcont.toys import match_sets, oracle_vertices, stage0_set, toy3

P = toy3()
sys_ = P.system()
S0 = stage0_set(P, sys_, per_axis=11)
res = run_all(sys_, S0, ExploreConfig())

for k, S in enumerate(res.stages):
    found = np.array([v.z for v in S]).reshape(-1, sys_.ell)
    oracle = oracle_vertices(P, sys_, k, per_axis=11)
    same = match_sets(found, oracle)
    print(f"stage {k}: {len(found)} vertices, oracle {len(oracle)}, same set: {same}")
    for v in S.sorted():
        x = sys_.dehomogenize(v.z)
        print(f"    x = {np.array2string(x, precision=6)}   |x| = {v.merit:.6f}")

print(f"\n{len(res.edges)} edges in the stage graph:")
for e in res.edges:
    print(f"  {e.src} -> {e.dst}  (stage {e.stage})")
