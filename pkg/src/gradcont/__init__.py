"""Graduated continuation for minimal-norm points of polynomial systems.

Constraints are switched on one at a time. Stationary points of the norm
under the current constraints are followed along implicitly defined curves
to stationary points under one more constraint. The built-in benchmark
searches coefficients of 10th order time-symmetric composition methods.
"""

from .composition import (CoeffVector, ConditionReport, order_condition_system, order_conditions,
                          polish_one_norm, primed_partial_sum, verify)
from .errors import (BracketFailure, GradContError, NoConvergence, SeedRejected, SignFlip,
                     SingularJacobian)
from .explorer import (Edge, ExploreConfig, StageSet, Vertex, expand_vertex, run_all,
                       run_stage)
from .poly import Polynomial, PolySystem, eval_poly, grad_poly, homogenize
from .seeds import (Pattern, ReducedSolution, Seed, SeedFilter, enumerate_patterns,
                    filter_seed, generate_S0, lift_seed, solve_reduced, symmetric_arrangements)
from .staged import (AugPoint, StagedLagrangeSystem, build_staged_system, eval_F, eval_H,
                     eval_w, jac_H)
from .tracker import (ImplicitCurve, TraceEvent, TrackerConfig, correct, follow, locate_zero,
                      tangent_at)

__version__ = "0.1.0"
