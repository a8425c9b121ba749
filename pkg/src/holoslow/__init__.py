"""Invariant manifolds of holomorphic slow-fast systems."""

from .briot_bouquet import BBProblem, bb_solve, fenichel_series, reduced_vector_field, slow_dynamics_on_manifold
from .dynamics import classify_point, integrate_full, integrate_reduced, layer_flow
from .expr import compile_expr, diff_expr, eval_expr, parse_expr, to_string
from .manifolds import coupled_manifold, formal_graph_series, graph_series, separable_manifold
from .series import Series1, Series2, radius_estimate
from .systems import SF2Spec, SystemSpec, build_system, critical_manifold_solve
from .verify import (
    attraction_report,
    hausdorff_scaling,
    invariance_residual,
    normal_hyperbolicity_check,
    persistence_report,
)

__version__ = "0.1.0"
