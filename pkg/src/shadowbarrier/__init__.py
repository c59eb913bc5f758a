"""Shadows of measures, two-point dilations and barrier solutions of the Skorokhod embedding problem."""

from .dilation import DilationDomainError, dilate, dilation_kernel, shadow_decomposition_check
from .measures import (
    ClosedSet,
    DiscreteMeasure,
    MeasureError,
    PiecewiseLinearFn,
    max_atom_discrepancy,
    measure_from_potential,
    order_leq,
    potential_of,
    wasserstein1,
)
from .montecarlo import (
    StoppedSample,
    StoppedSamples,
    convergence_sweep,
    default_tol,
    fixed_time_samples,
    simulate,
    verify_embedding,
    verify_shadow_residual,
)
from .report import Report
from .shadows import (
    Coupling,
    ShadowInfeasibleError,
    convex_envelope,
    left_curtain,
    obstructed_shadow,
    shadow,
    shadow_associativity_check,
    shadow_lp_oracle,
)
from .solvers import (
    Barrier,
    EmbeddingError,
    EmbeddingPlan,
    GridSpec,
    PotentialSurface,
    TimeChangeSpec,
    adjoint_level_process,
    interpolate_solve,
    lm_solve,
    multi_marginal_lm,
    propagate,
    root_coupling,
    root_solve,
)

__version__ = "0.1.0"
