"""Tail decay rates of two-dimensional reflecting random walks.

Given the four one-step jump kernels of a reflecting walk on the
nonnegative quadrant (or a two-node batch-arrival network that
uniformizes into one), the package decides stability, computes the
convergence domain of the stationary moment generating function and
returns the exact exponential decay rate of the stationary tail in every
nonnegative direction, with truncated-chain and Monte Carlo oracles to
verify each rate empirically.
"""

from .asymptotics import (
    DirectionRate,
    DomainDescription,
    Periodicity,
    TauResult,
    alpha_direction,
    coordinate_rate_case_split,
    exactness_verdict,
    periodicity,
    tau_direct,
    tau_iteration,
)
from .errors import (
    ConvergenceError,
    GeometryError,
    KernelError,
    ModelFileError,
    NoisyWindowError,
    NormalizationError,
    NullDriftError,
    RwtailError,
    SimultaneousArrivalsError,
    SupportViolationError,
)
from .geometry import (
    BranchFunction,
    ExtremePoints,
    GeometrySummary,
    analyze_geometry,
    branch,
    edge_point,
    extreme_point,
    gamma_max_membership,
)
from .model import (
    ConditionReport,
    DriftVectors,
    JumpKernel,
    MgfSurface,
    ModelSpec,
    Region,
    build_mgf,
    check_conditions,
    drift_vectors,
    load_model,
    mean_preserving_spread,
    save_model,
)
from .network import (
    MTBound,
    NetworkSpec,
    build_model,
    load_network,
    mt_bound,
    network_spec,
    tightness,
    utilizations,
)
from .stability import (
    StabilityVerdict,
    assess_stability,
    drift_stability,
    geometric_stability,
    geometric_witnesses,
)
from .verify import (
    SimResult,
    SlopeFit,
    TruncatedChain,
    export_tail_csv,
    fit_decay,
    fit_sim_decay,
    simulate,
    solve_truncated,
)

__version__ = "0.1.0"
