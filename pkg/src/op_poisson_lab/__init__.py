"""Poisson percolation on the oriented lattice.

Simulators for homogeneous and Poisson oriented bond percolation, estimators
for the homogeneous constants (edge speed, survival probability, edge
variance, correlation lengths), the limit shape they induce, and finite-size
checks of the shape, density and edge-fluctuation limits.
"""

from .cluster import Cluster, ClusterFormatError
from .density import BoxGrid, DensityReport, build_grid, measure_density
from .estimators import (CorrelationLengthEstimator, EdgeSpeedEstimator, EdgeVarianceEstimator,
                         SpeedTable, SurvivalProbabilityEstimator, ThetaTable, VarianceTable,
                         build_speed_table, build_theta_table, build_variance_table,
                         conjectured_height_exponent, estimate_alpha, estimate_sigma2,
                         estimate_tail_rates, estimate_theta)
from .fluctuations import (EdgeFunctional, detect_break_points, fit_height_exponent, sample_W,
                           test_gaussianity, test_increment_independence)
from .homog import P_C, HomogParams, exact_enumeration, grow_cluster, right_edge, survival_depth
from .lattice import Direction, Edge, RandomnessKey, Site, edge_uniform, neighbors_up
from .poisson import (PoissonParams, critical_height, dual_membership_estimate,
                      grow_poisson_cluster, height_scale, rho)
from .shape import LimitShape, ShapeCurve, build_shape, check_envelope, envelope

__version__ = "0.1.0"

__all__ = [
    "BoxGrid", "Cluster", "ClusterFormatError", "CorrelationLengthEstimator", "DensityReport",
    "Direction", "Edge", "EdgeFunctional", "EdgeSpeedEstimator", "EdgeVarianceEstimator",
    "HomogParams", "LimitShape", "P_C", "PoissonParams", "RandomnessKey", "ShapeCurve", "Site",
    "SpeedTable", "SurvivalProbabilityEstimator", "ThetaTable", "VarianceTable",
    "build_grid", "build_shape", "build_speed_table", "build_theta_table",
    "build_variance_table", "check_envelope", "conjectured_height_exponent", "critical_height",
    "detect_break_points", "dual_membership_estimate", "edge_uniform", "envelope",
    "estimate_alpha", "estimate_sigma2", "estimate_tail_rates", "estimate_theta",
    "exact_enumeration", "fit_height_exponent", "grow_cluster", "grow_poisson_cluster",
    "height_scale", "measure_density", "neighbors_up", "rho", "right_edge", "sample_W",
    "survival_depth", "test_gaussianity", "test_increment_independence",
]
