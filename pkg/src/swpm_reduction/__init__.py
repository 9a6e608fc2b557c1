"""Moment-preserving particle reduction for stochastic weighted particle methods."""

from .distributions import (
    DistParams,
    QuadratureGrid,
    normalization_constant,
    pdf1d,
    pdf3d,
    reference_moment,
    reference_tail,
    sample_dsmc_like,
    sample_swpm_like,
)
from .ensemble import (
    Ensemble,
    MomentKey,
    MomentVector,
    WeightedParticle,
    moment,
    moment_vector,
    n_moments,
    read_particles,
    tail_functional,
    write_particles,
)
from .errors import (
    DegenerateCovariance,
    NegativeWeight,
    NoFeasibleSpeed,
    ReductionError,
    SingularSystem,
    SpeedTooSmall,
)
from .grouping import BoxGrid, GroupingConfig, group_particles, plan_boxes, reduce_grouped
from .harness import ExperimentConfig, StatRecord, run_experiment, summarize_errors
from .progenitor import build_progenitor, solve_square, verify_reduction
from .schemes import (
    K1,
    K2,
    K2_5,
    K3,
    FixedSpeed,
    MinimalSpeed,
    SchemeConfig,
    reduce,
    reduce_with_report,
    select_min_speed,
)
from .standardization import destandardize, standardize, symmetric_eig3

__version__ = "0.1.0"
