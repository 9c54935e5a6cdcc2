"""l1-analysis basis pursuit: sampling-rate predictions and recovery experiments."""

from .cosparsity import CosparsityProfile, analysis_profile, best_s_term_error, kr15_error_bound
from .linalg import Subspace, kernel_basis, l1_ball_project, project, soft_threshold
from .operators import (
    AnalysisOperator,
    GramInfo,
    build_haar_dwt,
    build_haar_undecimated,
    build_haar_undecimated_2d,
    build_identity,
    build_random_tight,
    build_tv1,
    build_tv2,
    gram_info,
)
from .rate import (
    RateReport,
    exact_recovery_m,
    h_eval,
    h_inverse,
    krz_bound,
    phi_eval,
    sampling_rate_M,
    simplified_M,
    stable_bound,
)

__version__ = "0.1.0"
