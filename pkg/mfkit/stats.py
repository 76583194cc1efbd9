"""
stats.py | mfkit
--------------------------------------------------------------------
Descriptive statistics of return series: autocorrelation of returns
and absolute returns, power-law decay fits of the ACF, skewness and
kurtosis as functions of the sampling period, and the normalized
return distribution.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import stats as sps
from statsmodels.tsa.stattools import acf as sm_acf

from .audit import log_event, warn
from .errors import InputError
from .ingest import PriceSeries, ReturnSeries, compute_returns
from .workers import parallel_map

STAGE = "stats"
MIN_RELIABLE_RETURNS = 30


# ==========================================================
# === Domain types =========================================
# ==========================================================
@dataclass(frozen=True, eq=False)
class AcfResult:
    lags: np.ndarray
    values: np.ndarray
    series_label: str
    absolute: bool = False


@dataclass(frozen=True, eq=False)
class PowerLawFit:
    """ACF(k) ~ amplitude * k^(-exponent) over fit_range."""

    exponent: float
    amplitude: float
    fit_range: Tuple[int, int]
    r_squared: float
    exponent_stderr: float
    n_points: int


@dataclass(frozen=True, eq=False)
class MomentScan:
    sampling_periods: np.ndarray
    kurtosis: np.ndarray
    skewness: np.ndarray
    kurtosis_se: np.ndarray
    skewness_se: np.ndarray
    counts: np.ndarray
    reliable: np.ndarray

    @property
    def std_errors(self) -> dict:
        return {"kurtosis": self.kurtosis_se, "skewness": self.skewness_se}


# ==========================================================
# === Autocorrelation ======================================
# ==========================================================
def acf(r: ReturnSeries, max_lag: int, absolute: bool = False) -> AcfResult:
    """Sample ACF with the global (biased) variance in the denominator."""
    x = np.abs(r.values) if absolute else np.asarray(r.values)
    n = x.size
    if max_lag < 0 or not max_lag < n / 2:
        raise InputError(f"max_lag {max_lag} must be below half the series length ({n})", stage=STAGE)
    if not np.var(x) > 0:
        raise InputError("zero-variance series has no autocorrelation", stage=STAGE)
    values = sm_acf(x, nlags=max_lag, adjusted=False, fft=True, missing="none")
    values = np.clip(values, -1.0, 1.0)
    values[0] = 1.0
    label = f"|{r.label}|" if absolute else r.label
    return AcfResult(np.arange(max_lag + 1), values, label, absolute)


def fit_power_law_acf(a: AcfResult, fit_range: Tuple[int, int]) -> PowerLawFit:
    """Least-squares line through ln ACF vs ln lag; exponent = -slope."""
    low, high = int(fit_range[0]), int(fit_range[1])
    if not 1 <= low < high:
        raise InputError(f"lag fit range {fit_range} must satisfy 1 <= min < max", stage=STAGE)
    mask = (a.lags >= low) & (a.lags <= high)
    lags, values = a.lags[mask], a.values[mask]
    if lags.size < 2:
        raise InputError(f"fewer than 2 lags inside {fit_range}", stage=STAGE)
    bad = values <= 0
    if bad.any():
        lag = int(lags[np.flatnonzero(bad)[0]])
        raise InputError(f"ACF at lag {lag} is not positive; cannot fit a power law", stage=STAGE)
    fit = sps.linregress(np.log(lags), np.log(values))
    stderr = float(fit.stderr) if lags.size > 2 else float("nan")
    return PowerLawFit(
        exponent=float(-fit.slope),
        amplitude=float(np.exp(fit.intercept)),
        fit_range=(low, high),
        r_squared=float(fit.rvalue ** 2),
        exponent_stderr=stderr,
        n_points=int(lags.size),
    )


# ==========================================================
# === Moments ==============================================
# ==========================================================
def sample_moments(values) -> Tuple[float, float]:
    """(skewness, kurtosis) as standardized third/fourth moments; Gaussian kurtosis = 3."""
    x = np.asarray(values, float)
    skew = float(sps.skew(x, bias=True))
    kurt = float(sps.kurtosis(x, fisher=False, bias=True))
    return skew, kurt


def _moments_from_sums(s1, s2, s3, s4, n):
    mean = s1 / n
    m2 = s2 / n - mean ** 2
    m3 = s3 / n - 3 * mean * s2 / n + 2 * mean ** 3
    m4 = s4 / n - 4 * mean * s3 / n + 6 * mean ** 2 * s2 / n - 3 * mean ** 4
    with np.errstate(divide="ignore", invalid="ignore"):
        return m3 / m2 ** 1.5, m4 / m2 ** 2


def block_bootstrap_moments(values, resamples: int = 1000, block_length: int = None, seed: int = 0):
    """
    Moving-block bootstrap standard errors of (skewness, kurtosis).
    Resamples are assembled from power sums of overlapping blocks.
    """
    x = np.asarray(values, float)
    n = x.size
    if block_length is None:
        block_length = max(10, int(round(n ** (1.0 / 3.0))))
    block_length = int(min(block_length, n))
    x = x - x.mean()
    starts_available = n - block_length + 1
    n_blocks = int(np.ceil(n / block_length))

    sums = []
    for power in (1, 2, 3, 4):
        c = np.concatenate([[0.0], np.cumsum(x ** power)])
        sums.append(c[block_length:] - c[:starts_available])
    rng = np.random.default_rng(seed)
    skews = np.empty(resamples)
    kurts = np.empty(resamples)
    total = n_blocks * block_length
    for i in range(resamples):
        picks = rng.integers(0, starts_available, size=n_blocks)
        s1, s2, s3, s4 = (s[picks].sum() for s in sums)
        skews[i], kurts[i] = _moments_from_sums(s1, s2, s3, s4, total)
    return float(np.nanstd(skews, ddof=1)), float(np.nanstd(kurts, ddof=1))


def moment_scan(
    p: PriceSeries,
    periods: Sequence[int],
    resamples: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> MomentScan:
    """Skewness and kurtosis of returns for each sampling period, with bootstrap errors."""
    periods = [int(dt) for dt in periods]
    for dt in periods:
        if dt <= 0 or dt % p.base_period:
            raise InputError(f"sampling period {dt}s is not a multiple of {p.base_period}s", stage=STAGE)

    def one(dt):
        try:
            r = compute_returns(p, dt)
        except InputError:
            return dt, np.nan, np.nan, np.nan, np.nan, 0
        n = len(r)
        if n < 3 or not np.var(r.values) > 0:
            return dt, np.nan, np.nan, np.nan, np.nan, n
        skew, kurt = sample_moments(r.values)
        skew_se, kurt_se = block_bootstrap_moments(r.values, resamples, seed=seed)
        return dt, skew, kurt, skew_se, kurt_se, n

    rows = parallel_map(one, periods, threads)
    counts = np.array([row[5] for row in rows])
    reliable = counts >= MIN_RELIABLE_RETURNS
    for dt, ok, n in zip(periods, reliable, counts):
        if not ok:
            warn(STAGE, f"sampling period {dt}s gives only {n} returns; moments unreliable",
                 {"sampling_period": dt, "count": int(n)})
    log_event("STATS", f"Moment scan over {len(periods)} sampling periods complete")
    return MomentScan(
        sampling_periods=np.array(periods, dtype=np.int64),
        skewness=np.array([row[1] for row in rows]),
        kurtosis=np.array([row[2] for row in rows]),
        skewness_se=np.array([row[3] for row in rows]),
        kurtosis_se=np.array([row[4] for row in rows]),
        counts=counts,
        reliable=reliable,
    )


# ==========================================================
# === Distribution =========================================
# ==========================================================
def return_histogram(r: ReturnSeries, bins: int = 101, span: float = None):
    """
    Density histogram of zero-mean, unit-variance returns together with the
    standard normal density at the bin centers.
    """
    x = np.asarray(r.values, float)
    std = x.std()
    if not std > 0:
        raise InputError("zero-variance series has no distribution to normalize", stage=STAGE)
    z = (x - x.mean()) / std
    limit = span if span is not None else float(np.max(np.abs(z)))
    density, edges = np.histogram(z, bins=int(bins), range=(-limit, limit), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, density, sps.norm.pdf(centers)
