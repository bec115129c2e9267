"""Exact NML and renormalized-ML code-lengths for exponential families and
Gaussian mixtures, with cluster-number selection built on them."""

__version__ = "0.1.0"

from ._accel import HAVE_NUMBA, backend
from .complexity import (
    ComplexityTable,
    HyperParams,
    build_complexity_table,
    log_B,
    log_C1,
    log_C2,
    log_I,
    log_J,
    nml_codelength_gmm,
    rnml_codelength_gmm,
)
from .errors import (
    ConfigError,
    DegenerateDomainError,
    DomainError,
    InfeasibleError,
    InputError,
    NMLError,
    OutOfDomainError,
    SingularityError,
)
from .exponential_family import (
    ExpFamilyModel,
    GammaModel,
    LogisticModel,
    gamma_log_normalizer,
    gamma_mle,
    logistic_log_normalizer,
    logistic_mle,
    nml_codelength,
)
from .gaussian import DomainParams, GaussianMLE, log_C_gaussian_nml, ml_domain_params, mvn_mle, nml_codelength_gaussian
from .harness import (
    SweepConfig,
    TrueModel,
    benefit,
    generate_gmm_data,
    generate_true_model,
    identification_probability,
    run_sweep,
)
from .selection import EMConfig, aic, bic, em_fit, select_k
from .special import log_gamma, log_multivariate_gamma, log_sum_exp
