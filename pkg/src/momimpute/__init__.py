"""Multiple imputation for method-of-moments estimation.

Rubin's combining rule, the over-imputation variance estimator, the
asymptotic bias of Rubin's estimator, and a Monte Carlo study harness.
"""

from .config import ScenarioConfig, builtin_config, load_config
from .datagen import (
    CovariateDist,
    IncompleteDataset,
    MissingnessMechanism,
    PopulationModel,
    apply_missingness,
    generate_sample,
    true_eta,
)
from .estimators import Estimand, mme_point, mme_variance
from .imputer import draw_parameters, fit_posterior, impute, make_replicate
from .pooling import PooledResult, pool, rubin_combine
from .randcore import RngStream, derive_stream, t_quantile

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig",
    "builtin_config",
    "load_config",
    "CovariateDist",
    "IncompleteDataset",
    "MissingnessMechanism",
    "PopulationModel",
    "apply_missingness",
    "generate_sample",
    "true_eta",
    "Estimand",
    "mme_point",
    "mme_variance",
    "draw_parameters",
    "fit_posterior",
    "impute",
    "make_replicate",
    "PooledResult",
    "pool",
    "rubin_combine",
    "RngStream",
    "derive_stream",
    "t_quantile",
]
