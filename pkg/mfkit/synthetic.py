"""
synthetic.py | mfkit
--------------------------------------------------------------------
Deterministic benchmark series with known scaling behaviour.
"""

import numpy as np

from .errors import InputError
from .ingest import PriceSeries

STAGE = "synthetic"


# ==========================================================
# === Binomial multifractal cascade ========================
# ==========================================================
def binomial_cascade(n_levels: int, a: float) -> np.ndarray:
    """x_k = a^n(k) (1-a)^(L-n(k)), n(k) = number of 1 bits of k, k < 2^L."""
    if not 0 < a < 1:
        raise InputError(f"cascade weight a={a} must lie in (0, 1)", stage=STAGE)
    if n_levels < 1:
        raise InputError("cascade needs at least one level", stage=STAGE)
    k = np.arange(2 ** n_levels, dtype=np.int64)
    ones = np.zeros(k.size, dtype=np.int64)
    for bit in range(n_levels):
        ones += (k >> bit) & 1
    return np.power(a, ones) * np.power(1.0 - a, n_levels - ones)


def cascade_tau(q, a: float):
    return -np.log2(np.power(a, q) + np.power(1.0 - a, q))


def cascade_hurst(q, a: float):
    """h(q) = (tau(q) + 1) / q, with the q -> 0 limit -ln(a(1-a)) / (2 ln 2)."""
    q = np.asarray(q, dtype=float)
    limit = -np.log(a * (1.0 - a)) / (2.0 * np.log(2.0))
    safe = np.where(q == 0, 1.0, q)
    h = (cascade_tau(safe, a) + 1.0) / safe
    out = np.where(q == 0, limit, h)
    return float(out) if out.ndim == 0 else out


def cascade_alpha_range(a: float):
    """(alpha_min, alpha_max) of the cascade's singularity spectrum."""
    big, small = max(a, 1.0 - a), min(a, 1.0 - a)
    return float(-np.log2(big)), float(-np.log2(small))


# ==========================================================
# === Noise processes ======================================
# ==========================================================
def gaussian_noise(n: int, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    return scale * np.random.default_rng(seed).standard_normal(n)


def ar1(n: int, phi: float, seed: int = 0) -> np.ndarray:
    eps = np.random.default_rng(seed).standard_normal(n)
    x = np.empty(n)
    x[0] = eps[0] / np.sqrt(1.0 - phi ** 2) if abs(phi) < 1 else eps[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    return x


def student_t(n: int, nu: float, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_t(nu, size=n)


def price_path(returns, start_price: float = 100.0, start_time: int = 0,
               base_period: int = 60, label: str = "synthetic") -> PriceSeries:
    """Prices P_0 exp(cumsum r) on a regular grid; one more price than returns."""
    r = np.asarray(returns, dtype=float)
    log_p = np.log(start_price) + np.concatenate([[0.0], np.cumsum(r)])
    stamps = start_time + base_period * np.arange(log_p.size, dtype=np.int64)
    return PriceSeries(stamps, np.exp(log_p), np.zeros(log_p.size, bool), base_period, label=label)
