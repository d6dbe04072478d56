"""Simulation and estimation of the skew Brownian motion from grid observations."""

from .likelihood import (DerivativeStack, EstimateReport, alpha_n, contrast_log,
                         expansion_coefficients, h_k, likelihood_ratio,
                         log_likelihood_derivatives, mle, theta_expansion,
                         transition_density)
from .limit_dist import (MuTable, draw_upsilon, mu_constant, mu_table, upsilon_cdf,
                         upsilon_density, upsilon_quantile)
from .num_core import DomainError, RngStream
from .sbm_sim import GridPath, SbmParams, local_time_proxy, sbm_transition, simulate_path

__version__ = "0.1.0"
