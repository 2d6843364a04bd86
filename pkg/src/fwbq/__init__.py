"""Frank-Wolfe Bayesian quadrature.

Design points chosen by Frank-Wolfe (or line-search Frank-Wolfe, or
sequential BQ) paired with Bayesian quadrature weights, giving a Gaussian
posterior over the value of an integral against a known density.
"""

from .density import GaussianMixture, TruncatedGaussian, random_mixture, read_density_config
from .evidence import model_evidence, propagate, run_model_selection, synthetic_data
from .exceptions import (
    ConvergenceError,
    DegeneratePosteriorError,
    DegenerateStepError,
    FWBQError,
    IllConditionedGramError,
    IllPosedError,
    NumericalInconsistencyError,
)
from .kernel import EqKernel, RffKernel, gram, rff_sample
from .mean_element import MeanElement, mean_element, numeric_mean_element
from .quadrature import (
    IntegralPosterior,
    KernelExpansion,
    QuadratureRule,
    bq_rule,
    bq_weights,
    contraction_bound,
    contraction_mass,
    fw_weights,
    mmd_squared,
    posterior,
)
from .selector import SelectionConfig, fw_select, fwls_select, mc_select, sbq_select, select

__version__ = "0.1.0"
