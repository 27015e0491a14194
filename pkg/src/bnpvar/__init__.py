"""Sparse Bayesian nonparametric VAR with Dirichlet-process Lasso shrinkage."""

from .sampler import Hyperparameters, run_chain, blasso_baseline
from .var import PanelSpec, TimeSeriesData, DgpConfig, simulate_var

__all__ = ["Hyperparameters", "run_chain", "blasso_baseline", "PanelSpec", "TimeSeriesData", "DgpConfig", "simulate_var"]
__version__ = "0.1.0"
