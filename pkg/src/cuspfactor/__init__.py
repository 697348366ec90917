"""Bayesian factor models under the cumulative shrinkage process prior."""
from ._backend import BACKEND
from .cusp_prior import CuspHyper, stick_break, expected_pi, expected_theta, tail_prob, truncation_bound
from .gibbs_cusp import ChainState, Dataset, FactorHyper, McmcSettings, run_chain
from .gibbs_mgp import MgpHyper, run_chain_mgp
from .store import DrawStore

__version__ = "0.1.0"
