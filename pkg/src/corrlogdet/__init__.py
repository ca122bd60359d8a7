"""Log-determinants of high-dimensional sample correlation matrices under heavy tails."""

from .corrmat import (
    LogDetResult,
    RankCollapseError,
    SingularCorrelationError,
    correlation_matrix,
    logdet_cholesky,
    logdet_perpendiculars,
    perpendicular_deltas,
    self_normalize,
)
from .estimators import LogDetIndependenceTest, SelfNormalizer, Truncator
from .heavytail import GaussianLaw, StandardizedLaw, TailLaw, sample, standardize, tail_prob, truncated_moment
from .moments import (
    MomentEstimate,
    MomentIndex,
    estimate_mixed_moment,
    gaussian_moment_exact,
    moment_rate_limit,
)
from .normalization import CLTConstants, Regime, clt_constants, gaussian_exact_constants, select_regime, standardize_logdet
from .projections import (
    NormalizedProjection,
    diag_summary,
    projection_matrix,
    q_bound_sums,
    resolvent_trace,
    stieltjes_formula,
    verify_q_bounds,
)
from .simharness import (
    SimConfig,
    SimResult,
    export_results,
    gaussian_beta_oracle,
    independence_test,
    ks_statistic,
    replacement_experiment,
    run_clt_experiment,
)
from .truncation import TruncationPlan, apply_truncation, exceedance_profile, plan_truncation

__version__ = "0.1.0"
