"""Parsimonious Bayesian deep networks.

Infinite support hyperplane machines (iSHMs) trained by Gibbs sampling or
stochastic MAP, stacked greedily into a deep network whose width comes from
gamma-process shrinkage and whose depth comes from AIC forward selection.
"""
from .data import (
    Dataset,
    Standardization,
    load_dense,
    load_sparse,
    make_gaussians,
    make_two_spirals,
    partition,
    save_dense,
    save_sparse,
    standardize,
    train_test_split,
)
from .errors import (
    DegenerateWeightsError,
    DimensionError,
    LabelDomainError,
    NumericalStabilityError,
    ParameterDomainError,
    ParseError,
    PartitionError,
    PbdnError,
)
from .gibbs import GibbsConfig, run_gibbs
from .kernels import BACKEND
from .map_engine import MapConfig, run_map
from .model import (
    Hyperplane,
    IshmHyperparams,
    IshmModel,
    extract_subtypes,
    log_likelihood,
    pair_prob_one,
    polytope_margin,
    prob_one,
    rate,
)
from .rng import RngStream
from .stack import IshmPair, PbdnStack, aic, aic_eps, complexity, grow, predict, predict_proba

__version__ = "0.1.0"
