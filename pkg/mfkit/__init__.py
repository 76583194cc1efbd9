"""
mfkit
--------------------------------------------------------------------
Multifractal detrended fluctuation analysis, surrogate-based source
decomposition, stylized-fact statistics and Bayesian GARCH-family
volatility models for high-frequency price series.
"""

from .config import ChainConfig, MfdfaConfig, RunConfig
from .errors import ComputationError, InputError, MfkitError, UsageError
from .ingest import PriceSeries, ReturnSeries, compute_returns, load_prices
from .mfdfa import analyze, decompose, fit_hurst, fluctuation_surface
from .rolling import rolling_mfdfa
from .surrogate import phase_surrogate, shuffle, source_analysis
from .volatility import VolModelParams, estimate, log_likelihood, simulate

__version__ = "0.1.0"
