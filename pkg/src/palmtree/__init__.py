"""Tropical geometry tools for phylogenetic tree space."""

from .comparison import (
    BhvDistance,
    StabilityReport,
    bhv_distance,
    path_difference,
    quartet_distance,
    rf_distance,
    stability_check,
)
from .newick_io import (
    NewickError,
    ThreePointViolation,
    Tree,
    cophenetic_vector,
    edge_count_vector,
    parse_newick,
    tree_from_ultrametric,
    write_newick,
)
from .stats import MeasureKind, MeasureSpec, fermat_weber, frechet_mean, sample_base, sample_exp_family
from .symmetry import LeafPermutation, apply_sigma, permutation_relating, segment_equivariance_check
from .topology import NestedSet, compatible_candidates, compatibility_witness, topology_of
from .treespace import Level, TropicalBall, ball_contains, classify_level
from .tropical import trop_dist, trop_segment, tropline_ultrametric
from .vectors import DEFAULT_TOL, MetricVector, ProjectivePoint

__version__ = "0.1.0"
