"""Gradient-based prediction via smoothed potentials.

An online linear optimization toolkit: play the gradient of a smoothed
support function, decompose the realized regret exactly, and certify the
curvature and regret bounds numerically.
"""

from .duality import (
    BUILTIN_CDF_NAMES,
    GumbelHedgeResult,
    PerturbationCDF,
    Regularizer1D,
    builtin_cdf,
    default_probe_grid,
    ftpl_to_ftrl,
    ftrl_to_ftpl,
    gumbel_hedge_check,
    potential_match_error,
    roundtrip_error,
    table_cdf,
)
from .game import (
    POTENTIAL_KINDS,
    Adversary,
    FixedSequence,
    GameTrace,
    GreedyAdaptive,
    IidGaussianClipped,
    IidRademacher,
    PotentialSpec,
    RegretLedger,
    bound_for_trace,
    decompose_regret,
    run_game,
    theoretical_bound,
    trace_summary,
    trace_to_csv,
)
from .rng import subseed, substream
from .sets import (
    ArgmaxResult,
    DecisionSet,
    Interval01,
    L2Ball,
    Simplex,
    VertexSet,
    linear_oracle,
    lipschitz_constant,
)
from .smoothing import (
    AdaptiveExperts,
    AdaptiveL2,
    BaselinePotential,
    EntropicPotential,
    EtaSchedule,
    FixedEta,
    GaussianMCPotential,
    GaussianSmoothingConfig,
    GradientEstimate,
    HessianEstimate,
    HindsightExperts,
    HindsightL2,
    PotentialEstimate,
    QuadraticPotential,
    entropic_ftrl_potential,
    gaussian_smoothed_gradient,
    gaussian_smoothed_hessian,
    gaussian_smoothed_value,
    infconv_bruteforce_value,
    next_eta,
    quadratic_ftrl_potential,
)
from .verify import (
    CheckReport,
    SmoothingCertificate,
    check_bregman_sandwich,
    check_generic_smoothing,
    check_gradient_fd,
    check_hessian_experts_bound,
    check_hessian_experts_structure,
    check_hessian_l2_bound,
    check_hessian_l2_ordering,
    check_max_gaussian,
    check_overestimation_telescope,
    entropic_reference_certificate,
)

__version__ = "0.1.0"
