from .priors import GaussianPrior, PriorSpec, UniformBoxPrior
from .basis import BasisOptions, PosteriorSamples, basis
from .likelihood import ConditionModel, log_likelihood
from .summary import SummaryStats, posterior_summary
from .bands import predictive_bands
from .sobol import inert_mask, sobol_sensitivity
from .hierarchical import HierarchicalOptions, HierarchicalResult, infer_hierarchical

__all__ = [
    "PriorSpec",
    "UniformBoxPrior",
    "GaussianPrior",
    "BasisOptions",
    "PosteriorSamples",
    "basis",
    "ConditionModel",
    "log_likelihood",
    "SummaryStats",
    "posterior_summary",
    "predictive_bands",
    "sobol_sensitivity",
    "inert_mask",
    "HierarchicalOptions",
    "HierarchicalResult",
    "infer_hierarchical",
]
