"""
mfdfa.py | mfkit
--------------------------------------------------------------------
Multifractal detrended fluctuation analysis.

Steps:
1. Profile: cumulative sum of mean-subtracted returns
2. 2*N_s segments per scale (from the start and from the end)
3. Local polynomial detrending, segment variances F^2(v, s)
4. q-th order fluctuation functions F_q(s) (logarithmic average at q = 0)
5. Scaling fits h(q), then tau(q), alpha, f(alpha), delta-h and the
   correlation / distribution decomposition of delta-h
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import legendre
from scipy import stats as sps
from scipy.special import logsumexp

from .audit import log_event, warn
from .config import MfdfaConfig
from .errors import ComputationError, InputError
from .ingest import ReturnSeries
from .workers import parallel_map

STAGE = "mfdfa"
VARIANCE_FLOOR = 1e-300
R_UNDEFINED = float("nan")
MIN_FIT_SCALES = 4


# ==========================================================
# === Domain types =========================================
# ==========================================================
@dataclass(frozen=True, eq=False)
class Profile:
    values: np.ndarray
    source_length: int


@dataclass(frozen=True, eq=False)
class FluctuationSurface:
    q_grid: np.ndarray
    scale_grid: np.ndarray
    values: np.ndarray  # shape (len(q_grid), len(scale_grid))
    detrend_order: int
    segment_counts: np.ndarray
    degenerate: bool = False
    degenerate_scales: Tuple[int, ...] = ()
    floored_segments: int = 0


@dataclass(frozen=True, eq=False)
class MultifractalSpectrum:
    q_grid: np.ndarray
    h: np.ndarray
    h_stderr: np.ndarray
    tau: np.ndarray
    alpha: np.ndarray
    f_alpha: np.ndarray
    fit_range: Tuple[float, float]
    delta_h: float
    r_squared: Optional[np.ndarray] = None
    intercepts: Optional[np.ndarray] = None
    fitted_scales: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)
    surface: Optional[FluctuationSurface] = None

    def at(self, q: float) -> float:
        return float(self.h[_grid_index(self.q_grid, q)])

    @property
    def h2(self) -> float:
        try:
            return self.at(2.0)
        except InputError:
            return float("nan")


@dataclass(frozen=True, eq=False)
class DecompositionReport:
    delta_h_orig: float
    delta_h_corr: float
    delta_h_sh: float
    delta_h_su: float
    ratio_R: float
    h2_orig: float
    q_min: float
    q_max: float

    @property
    def r_defined(self) -> bool:
        return bool(np.isfinite(self.ratio_R))


def _grid_index(q_grid, q: float, tol: float = 1e-9) -> int:
    hits = np.flatnonzero(np.abs(np.asarray(q_grid) - q) <= tol)
    if hits.size == 0:
        raise InputError(f"q = {q} is not on the q-grid", stage=STAGE)
    return int(hits[0])


# ==========================================================
# === Step 1: profile ======================================
# ==========================================================
def make_profile(r) -> Profile:
    """Y(i) = sum_{j<=i} (r(j) - <r>)."""
    x = np.asarray(r.values if isinstance(r, ReturnSeries) else r, float)
    if x.size < 2:
        raise InputError("profile needs at least 2 returns", stage=STAGE)
    return Profile(np.cumsum(x - x.mean()), int(x.size))


# ==========================================================
# === Steps 2-4: fluctuation functions =====================
# ==========================================================
def _detrend_basis(s: int, order: int) -> np.ndarray:
    """Orthonormal basis of polynomials of degree <= order on s points."""
    x = np.linspace(-1.0, 1.0, s)
    q, _ = np.linalg.qr(legendre.legvander(x, order))
    return q


def segment_variances(y: np.ndarray, s: int, order: int) -> np.ndarray:
    """F^2(v, s) for the N_s forward and N_s backward segments, in that order."""
    n = y.size
    ns = n // s
    forward = y[: ns * s].reshape(ns, s)
    backward = y[n - ns * s:].reshape(ns, s)[::-1]
    segments = np.vstack([forward, backward])
    basis = _detrend_basis(s, order)
    residual = segments - (segments @ basis) @ basis.T
    return np.mean(residual ** 2, axis=1)


def _fluctuation_row(log_f2: np.ndarray, q_grid: np.ndarray, q_zero_tol: float) -> np.ndarray:
    count = log_f2.size
    out = np.empty(q_grid.size)
    for i, q in enumerate(q_grid):
        if abs(q) < q_zero_tol:
            out[i] = np.exp(0.5 * np.mean(log_f2))
        else:
            out[i] = np.exp((logsumexp(0.5 * q * log_f2) - np.log(count)) / q)
    return out


def fluctuation_surface(
    y: Profile,
    q_grid: Sequence[float],
    scale_grid: Sequence[int],
    detrend_order: int = 3,
    q_zero_tolerance: float = 1e-10,
    threads: int = 1,
) -> FluctuationSurface:
    """F_q(s) on the (q, s) lattice."""
    values = np.asarray(y.values, float)
    n = values.size
    q_grid = np.asarray(q_grid, float)
    scales = np.asarray(scale_grid, dtype=np.int64)
    if not 1 <= detrend_order <= 5:
        raise InputError(f"detrend order {detrend_order} outside 1..5", stage=STAGE)
    if q_grid.size == 0 or not np.all(np.isfinite(q_grid)):
        raise InputError("q-grid must be non-empty and finite", stage=STAGE)
    smallest = 2 * (detrend_order + 2)
    bad = [int(s) for s in scales if s < smallest or s > n / 4]
    if bad or scales.size == 0:
        raise InputError(
            f"scales {bad} violate {smallest} <= s <= N/4 = {n / 4:g}", stage=STAGE
        )

    span = float(np.max(np.abs(values))) if n else 0.0
    zero_level = (1e-10 * span) ** 2

    def one_scale(s):
        f2 = segment_variances(values, int(s), detrend_order)
        zero = bool(np.all(f2 <= zero_level))
        floored = int(np.count_nonzero(f2 < VARIANCE_FLOOR))
        return f2, zero, floored

    results = parallel_map(one_scale, scales, threads)

    surface = np.zeros((q_grid.size, scales.size))
    degenerate_scales = []
    floored_total = 0
    for j, (s, (f2, zero, floored)) in enumerate(zip(scales, results)):
        if zero:
            degenerate_scales.append(int(s))
            continue
        floored_total += floored
        log_f2 = np.log(np.maximum(f2, VARIANCE_FLOOR))
        surface[:, j] = _fluctuation_row(log_f2, q_grid, q_zero_tolerance)

    degenerate = len(degenerate_scales) == scales.size
    if degenerate:
        warn(STAGE, "profile is polynomial within every segment; F_q(s) = 0 everywhere")
    elif degenerate_scales:
        warn(STAGE, f"zero fluctuation at scales {degenerate_scales}", {"scales": degenerate_scales})
    if floored_total:
        warn(STAGE, f"{floored_total} segment variances floored at {VARIANCE_FLOOR:g}",
             {"floored": floored_total})

    return FluctuationSurface(
        q_grid=q_grid,
        scale_grid=scales,
        values=surface,
        detrend_order=int(detrend_order),
        segment_counts=n // scales,
        degenerate=degenerate,
        degenerate_scales=tuple(degenerate_scales),
        floored_segments=floored_total,
    )


# ==========================================================
# === Step 5: spectra ======================================
# ==========================================================
def tau_spectrum(h, q_grid) -> np.ndarray:
    """tau(q) = q h(q) - 1."""
    h = np.asarray(h, float)
    q = np.asarray(q_grid, float)
    if h.shape != q.shape:
        raise InputError("h and q-grid are not aligned", stage=STAGE)
    return q * h - 1.0


def singularity_spectrum(h, q_grid) -> Tuple[np.ndarray, np.ndarray]:
    """alpha = h + q h'(q), f(alpha) = q (alpha - h) + 1, h' by finite differences."""
    h = np.asarray(h, float)
    q = np.asarray(q_grid, float)
    if h.shape != q.shape:
        raise InputError("h and q-grid are not aligned", stage=STAGE)
    if q.size < 3:
        raise InputError("singularity spectrum needs at least 3 q values", stage=STAGE)
    steps = np.diff(q)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-9) or steps[0] <= 0:
        raise InputError("singularity spectrum needs a uniform, increasing q-grid", stage=STAGE)
    dh = np.gradient(h, steps[0], edge_order=1)
    alpha = h + q * dh
    f_alpha = q * (alpha - h) + 1.0
    return alpha, f_alpha


def delta_h(spectrum: MultifractalSpectrum, q_min: float = None, q_max: float = None) -> float:
    """h(q_min) - h(q_max); defaults to the grid extremes."""
    q_grid = np.asarray(spectrum.q_grid)
    q_min = float(q_grid.min()) if q_min is None else float(q_min)
    q_max = float(q_grid.max()) if q_max is None else float(q_max)
    if not q_min < q_max:
        raise InputError(f"need q_min < q_max (got {q_min}, {q_max})", stage=STAGE)
    return float(spectrum.h[_grid_index(q_grid, q_min)] - spectrum.h[_grid_index(q_grid, q_max)])


def spectrum_from_h(
    q_grid, h, h_stderr, fit_range, q_min=None, q_max=None, **extra
) -> MultifractalSpectrum:
    """Derive tau, alpha, f(alpha) and delta-h from h(q)."""
    q_grid = np.asarray(q_grid, float)
    h = np.asarray(h, float)
    diagnostics = dict(extra.pop("diagnostics", {}) or {})
    tau = tau_spectrum(h, q_grid)
    try:
        alpha, f_alpha = singularity_spectrum(h, q_grid)
    except InputError as e:
        warn(STAGE, f"singularity spectrum skipped: {e}")
        alpha = np.full_like(h, np.nan)
        f_alpha = np.full_like(h, np.nan)
    order = np.argsort(q_grid)
    rises = int(np.count_nonzero(np.diff(h[order]) > 1e-12))
    diagnostics["h_increasing_steps"] = rises
    diagnostics["f_alpha_above_one"] = int(np.count_nonzero(f_alpha > 1.0 + 1e-9))
    if rises:
        diagnostics["h_monotone"] = False
    spectrum = MultifractalSpectrum(
        q_grid=q_grid, h=h, h_stderr=np.asarray(h_stderr, float), tau=tau, alpha=alpha,
        f_alpha=f_alpha, fit_range=tuple(fit_range), delta_h=float("nan"),
        diagnostics=diagnostics, **extra,
    )
    width = delta_h(spectrum, q_min, q_max) if q_grid.size > 1 else 0.0
    return replace(spectrum, delta_h=width)


def fit_hurst(
    f: FluctuationSurface,
    fit_range: Optional[Tuple[float, float]] = None,
    q_min: float = None,
    q_max: float = None,
) -> MultifractalSpectrum:
    """Per q, slope of ln F_q(s) against ln s over the fit range -> h(q) with standard error."""
    scales = np.asarray(f.scale_grid, float)
    low, high = (scales.min(), scales.max()) if fit_range is None else fit_range
    inside = (scales >= low) & (scales <= high)
    positive = np.all(f.values > 0, axis=0) & np.all(np.isfinite(f.values), axis=0)
    dropped = scales[inside & ~positive]
    if dropped.size:
        warn(STAGE, f"dropping scales with zero F_q(s): {dropped.astype(int).tolist()}",
             {"dropped": dropped})
    use = inside & positive
    if np.count_nonzero(use) < MIN_FIT_SCALES:
        raise InputError(
            f"only {int(np.count_nonzero(use))} usable scales in fit range "
            f"[{low:g}, {high:g}]; need at least {MIN_FIT_SCALES}", stage=STAGE,
        )
    log_s = np.log(scales[use])
    log_f = np.log(f.values[:, use])
    h = np.empty(f.q_grid.size)
    stderr = np.empty_like(h)
    intercepts = np.empty_like(h)
    r2 = np.empty_like(h)
    for i in range(f.q_grid.size):
        fit = sps.linregress(log_s, log_f[i])
        h[i], stderr[i], intercepts[i], r2[i] = fit.slope, fit.stderr, fit.intercept, fit.rvalue ** 2
    if not np.all(np.isfinite(h)):
        raise ComputationError("non-finite generalized Hurst exponent", stage=STAGE)
    diagnostics = {"dropped_scales": dropped.astype(int).tolist(),
                   "floored_segments": f.floored_segments}
    return spectrum_from_h(
        f.q_grid, h, stderr, (float(low), float(high)), q_min, q_max,
        r_squared=r2, intercepts=intercepts, fitted_scales=scales[use].astype(np.int64),
        diagnostics=diagnostics, surface=f,
    )


def analyze(r, config: MfdfaConfig = None) -> MultifractalSpectrum:
    """Profile -> fluctuation surface -> scaling fit, with `config` defaults."""
    config = config or MfdfaConfig()
    profile = make_profile(r)
    scales = config.scale_grid(profile.source_length)
    surface = fluctuation_surface(
        profile, config.q_array(), scales, config.detrend_order,
        config.q_zero_tolerance, config.threads,
    )
    spectrum = fit_hurst(surface, config.fit_range, config.q_min, config.q_max)
    label = getattr(r, "label", "series")
    log_event("MFDFA", f"{label}: h(2) = {spectrum.h2:.4f}, delta-h = {spectrum.delta_h:.4f}",
              {"h2": spectrum.h2, "delta_h": spectrum.delta_h, "n": profile.source_length})
    return spectrum


def ensemble_spectrum(
    spectra: Sequence[MultifractalSpectrum], q_min: float = None, q_max: float = None
) -> MultifractalSpectrum:
    """Average h(q) over realizations; stderr is the ensemble spread."""
    spectra = list(spectra)
    if not spectra:
        raise InputError("empty surrogate ensemble", stage=STAGE)
    if len(spectra) == 1:
        return spectra[0]
    first = spectra[0]
    for s in spectra[1:]:
        if s.q_grid.shape != first.q_grid.shape or not np.allclose(s.q_grid, first.q_grid):
            raise InputError("ensemble spectra do not share a q-grid", stage=STAGE)
    stack = np.vstack([s.h for s in spectra])
    return spectrum_from_h(
        first.q_grid, stack.mean(axis=0), stack.std(axis=0, ddof=1) / np.sqrt(len(spectra)),
        first.fit_range, q_min, q_max, diagnostics={"ensemble_size": len(spectra)},
    )


# ==========================================================
# === Source decomposition =================================
# ==========================================================
def decompose(
    orig: MultifractalSpectrum,
    shuffled: MultifractalSpectrum,
    surrogate: MultifractalSpectrum,
    q_min: float = None,
    q_max: float = None,
) -> DecompositionReport:
    """delta_h_corr = delta_h - delta_h_sh and R = delta_h_corr / delta_h_sh."""
    for other in (shuffled, surrogate):
        if other.q_grid.shape != orig.q_grid.shape or not np.allclose(other.q_grid, orig.q_grid):
            raise InputError("spectra do not share a q-grid", stage=STAGE)
    q_min = float(orig.q_grid.min()) if q_min is None else q_min
    q_max = float(orig.q_grid.max()) if q_max is None else q_max
    dh = delta_h(orig, q_min, q_max)
    dh_sh = delta_h(shuffled, q_min, q_max)
    dh_su = delta_h(surrogate, q_min, q_max)
    dh_corr = dh - dh_sh
    if abs(dh_sh) < 1e-6:
        warn(STAGE, "shuffled delta-h below 1e-6; R undefined")
        ratio = R_UNDEFINED
    else:
        ratio = dh_corr / dh_sh
    return DecompositionReport(
        delta_h_orig=dh, delta_h_corr=dh_corr, delta_h_sh=dh_sh, delta_h_su=dh_su,
        ratio_R=ratio, h2_orig=orig.h2, q_min=q_min, q_max=q_max,
    )


# ==========================================================
# === Tables ===============================================
# ==========================================================
def surface_table(f: FluctuationSurface) -> pd.DataFrame:
    q, s = np.meshgrid(f.q_grid, f.scale_grid, indexing="ij")
    return pd.DataFrame({"q": q.ravel(), "s": s.ravel(), "F": f.values.ravel()})


def spectrum_table(spec: MultifractalSpectrum) -> pd.DataFrame:
    return pd.DataFrame({
        "q": spec.q_grid, "h": spec.h, "h_stderr": spec.h_stderr, "tau": spec.tau,
        "alpha": spec.alpha, "f_alpha": spec.f_alpha,
    })


def read_spectrum_table(path: str, fit_range=(np.nan, np.nan)) -> MultifractalSpectrum:
    table = pd.read_csv(path, comment="#", float_precision="round_trip")
    return spectrum_from_h(table["q"].to_numpy(), table["h"].to_numpy(),
                           table["h_stderr"].to_numpy(), fit_range)
