"""Martingale posteriors for conditional predictive functionals.

Start from any posterior-predictive distribution tabulated on a grid,
resample it forward through Gaussian-copula CDF updates, and read off
posterior draws for means, quantiles, variances, or CDF values.
"""

from .engine import (
    ChainResult,
    EngineConfig,
    EngineError,
    FunctionalSummary,
    PosteriorResult,
    contraction_probe,
    copula_update,
    run_chain,
    run_posterior,
)
from .griddist import (
    EmpiricalCdf,
    FunctionalSpec,
    GridDistribution,
    GridDistributionError,
    PpdSchemaError,
    empirical_from_samples,
    load_ppd_json,
    save_ppd_json,
)
from .harness import CoverageReport, bootstrap_interval, coverage_run, quantile_truth
from .normal import (
    CopulaBandwidth,
    copula_conditional_cdf,
    copula_density,
    std_normal_cdf,
    std_normal_quantile,
)
from .schedules import ScheduleSpec, alpha
from .sources import (
    CopulaForwardSource,
    CopulaRegressionSource,
    Dataset,
    DriftingSource,
    FileSource,
    GaussianSource,
    PpdSource,
    forward_diagnostic,
)
from .splines import OptimalModel, SplineModelSpec, bspline_basis, conjugate_posterior
from .tuning import TuneResult, prequential_log_score, tune_rho

__version__ = "0.1.0"
