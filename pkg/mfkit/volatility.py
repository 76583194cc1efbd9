"""
volatility.py | mfkit
--------------------------------------------------------------------
Daily volatility models estimated by Bayesian MCMC:

    GARCH   s2_t = w + a r2_{t-1} + b s2_{t-1}
    GJR     s2_t = w + (a + d [r_{t-1} < 0]) r2_{t-1} + b s2_{t-1}
    RGARCH  s2_t = (w + a r2_{t-1} + b s2_{t-1}) / (1 + g r_{t-1})

with r_t = s_t e_t, e_t ~ N(0, 1). The recursion starts from a presample
backcast r2_0 = s2_0 = sample variance of r (sign-neutral, so the first
step has no asymmetry term), which makes s2_1 = w whenever a = b = 0.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from numba import njit

from .audit import log_event, warn
from .config import ChainConfig
from .errors import ComputationError, InputError
from .ingest import ReturnSeries

STAGE = "volatility"
MODELS = ("garch", "gjr", "rgarch")
PARAM_NAMES = {
    "garch": ("omega", "arch_alpha", "garch_beta"),
    "gjr": ("omega", "arch_alpha", "garch_beta", "gjr_delta"),
    "rgarch": ("omega", "arch_alpha", "garch_beta", "rg_gamma"),
}
MIN_OBSERVATIONS = 200
ACCEPTANCE_BOUNDS = (0.05, 0.8)
SIMULATION_RETRIES = 100
LOG_2PI = float(np.log(2.0 * np.pi))


# ==========================================================
# === Parameters ===========================================
# ==========================================================
@dataclass(frozen=True)
class VolModelParams:
    model: str
    omega: float
    arch_alpha: float
    garch_beta: float
    gjr_delta: Optional[float] = None
    rg_gamma: Optional[float] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise InputError(f"unknown volatility model '{self.model}'", stage=STAGE)
        if not self.omega > 0:
            raise InputError(f"omega must be positive (got {self.omega})", stage=STAGE)
        if not (self.arch_alpha >= 0 and self.garch_beta >= 0):
            raise InputError("arch_alpha and garch_beta must be non-negative", stage=STAGE)
        active = set(PARAM_NAMES[self.model])
        for name in ("gjr_delta", "rg_gamma"):
            present = getattr(self, name) is not None
            if present != (name in active):
                state = "requires" if name in active else "does not take"
                raise InputError(f"model {self.model} {state} {name}", stage=STAGE)

    @property
    def persistence(self) -> float:
        return self.arch_alpha + self.garch_beta

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES[self.model]], dtype=float)

    @classmethod
    def from_vector(cls, model: str, vector: Sequence[float]) -> "VolModelParams":
        names = PARAM_NAMES[model]
        if len(vector) != len(names):
            raise InputError(f"model {model} takes {len(names)} parameters", stage=STAGE)
        return cls(model, **{name: float(v) for name, v in zip(names, vector)})


def _coefficients(model: str, vector: np.ndarray):
    """(omega, alpha, beta, delta, gamma) with zeros for inactive terms."""
    delta = vector[3] if model == "gjr" else 0.0
    gamma = vector[3] if model == "rgarch" else 0.0
    return float(vector[0]), float(vector[1]), float(vector[2]), float(delta), float(gamma)


# ==========================================================
# === Recursion kernels ====================================
# ==========================================================
@njit(cache=True)
def _filter_kernel(r, omega, alpha, beta, delta, gamma, backcast, out):
    """Fills out with s2_t; returns the first failing index or -1."""
    prev_r = 0.0
    prev_r2 = backcast
    prev_s2 = backcast
    for t in range(r.shape[0]):
        arch = alpha
        if prev_r < 0.0:
            arch = alpha + delta
        num = omega + arch * prev_r2 + beta * prev_s2
        denom = 1.0 + gamma * prev_r
        if denom <= 0.0:
            return t
        s2 = num / denom
        if not s2 > 0.0:
            return t
        out[t] = s2
        prev_r = r[t]
        prev_r2 = r[t] * r[t]
        prev_s2 = s2
    return -1


@njit(cache=True)
def _loglik_kernel(r, omega, alpha, beta, delta, gamma, backcast, log_2pi):
    out = np.empty(r.shape[0])
    if _filter_kernel(r, omega, alpha, beta, delta, gamma, backcast, out) >= 0:
        return -np.inf
    total = 0.0
    for t in range(r.shape[0]):
        total += -0.5 * (log_2pi + np.log(out[t]) + r[t] * r[t] / out[t])
    return total


def _as_array(r) -> np.ndarray:
    values = r.values if isinstance(r, ReturnSeries) else r
    return np.ascontiguousarray(values, dtype=np.float64)


def backcast_variance(r) -> float:
    x = _as_array(r)
    return float(np.var(x)) if x.size else 0.0


def filter_variance(params: VolModelParams, r, backcast: float = None) -> np.ndarray:
    """Conditional variance path s2_1..s2_T; raises when the recursion leaves the valid region."""
    x = _as_array(r)
    backcast = backcast_variance(x) if backcast is None else backcast
    out = np.empty(x.size)
    failed = _filter_kernel(x, *_coefficients(params.model, params.as_vector()), backcast, out)
    if failed >= 0:
        raise InputError(
            f"{params.model} variance not positive at t={failed + 1} for {params}", stage=STAGE
        )
    return out


def log_likelihood(params: VolModelParams, r, backcast: float = None) -> float:
    """Gaussian log-likelihood; -inf when the variance path is invalid."""
    x = _as_array(r)
    backcast = backcast_variance(x) if backcast is None else backcast
    return float(_loglik_kernel(x, *_coefficients(params.model, params.as_vector()), backcast, LOG_2PI))


def _log_posterior(model: str, vector: np.ndarray, x: np.ndarray, backcast: float) -> float:
    # flat prior over omega > 0, alpha >= 0, beta >= 0
    if not (vector[0] > 0 and vector[1] >= 0 and vector[2] >= 0):
        return -np.inf
    return float(_loglik_kernel(x, *_coefficients(model, vector), backcast, LOG_2PI))


# ==========================================================
# === Sampler ==============================================
# ==========================================================
def metropolis_step(log_target: Callable, state, current_lp: float, candidate,
                    rng: np.random.Generator):
    """One accept/reject decision -> (state, log target, accepted)."""
    proposed = log_target(candidate)
    if np.log(rng.uniform()) < proposed - current_lp:
        return candidate, proposed, True
    return state, current_lp, False


def metropolis_chain(
    log_target: Callable,
    initial,
    propose: Callable,
    n_steps: int,
    rng: np.random.Generator,
):
    """
    Metropolis kernel for symmetric proposals: propose(state, rng) -> candidate.
    Returns (states, acceptance_rate).
    """
    state = initial
    current = log_target(state)
    if not np.isfinite(current):
        raise InputError("initial state has zero target density", stage=STAGE)
    states = [None] * n_steps
    accepted = 0
    for i in range(n_steps):
        state, current, moved = metropolis_step(log_target, state, current, propose(state, rng), rng)
        accepted += moved
        states[i] = state
    return np.asarray(states), accepted / max(n_steps, 1)


@dataclass(frozen=True, eq=False)
class VolatilityFit:
    model: str
    param_names: tuple
    posterior: np.ndarray
    log_likelihoods: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    aic: float
    dic: float
    p_dic: float
    acceptance_rate: float
    log_likelihood_at_mean: float
    max_log_likelihood: float
    stationarity_probability: float
    n_obs: int
    step_sizes: np.ndarray
    seed: int
    demeaned: bool = False
    warnings: List[str] = field(default_factory=list)

    @property
    def point_estimate(self) -> Dict[str, tuple]:
        return {n: (float(m), float(s)) for n, m, s in zip(self.param_names, self.means, self.sds)}

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def params_at_mean(self) -> VolModelParams:
        return VolModelParams.from_vector(self.model, self.means)

    def chain_table(self) -> pd.DataFrame:
        table = pd.DataFrame(self.posterior, columns=list(self.param_names))
        table["log_likelihood"] = self.log_likelihoods
        return table

    def summary_table(self) -> pd.DataFrame:
        return pd.DataFrame({"parameter": list(self.param_names), "mean": self.means, "sd": self.sds})


def _initial_point(model: str, variance: float) -> np.ndarray:
    start = [0.05 * variance, 0.05, 0.9]
    if model != "garch":
        start.append(0.0)
    return np.array(start, dtype=float)


def _initial_steps(start: np.ndarray) -> np.ndarray:
    steps = np.full(start.size, 0.02)
    steps[0] = max(0.5 * start[0], 1e-8)
    return steps


def estimate(model: str, r, chain_config: ChainConfig = None, demean: bool = False) -> VolatilityFit:
    """
    Componentwise random-walk Metropolis over the model parameters under flat
    priors. Step sizes adapt during burn-in toward the target acceptance rate;
    retained draws are summarized into means, SDs, AIC (chain maximum) and DIC.
    """
    if model not in MODELS:
        raise InputError(f"unknown volatility model '{model}'", stage=STAGE)
    cfg = chain_config or ChainConfig()
    if cfg.draws < 1 or cfg.burn_in < 0 or cfg.adapt_every < 1:
        raise InputError(
            f"chain needs draws >= 1, burn_in >= 0 and adapt_every >= 1 "
            f"(got {cfg.draws}, {cfg.burn_in}, {cfg.adapt_every})", stage=STAGE,
        )
    x = _as_array(r)
    if x.size < MIN_OBSERVATIONS:
        raise InputError(
            f"{x.size} observations; volatility estimation needs at least {MIN_OBSERVATIONS}",
            stage=STAGE,
        )
    if demean:
        x = np.ascontiguousarray(x - x.mean())
    backcast = backcast_variance(x)
    if not backcast > 0:
        raise InputError("zero-variance return series", stage=STAGE)

    current = _initial_point(model, backcast)
    k = current.size
    if cfg.initial_steps is not None:
        if len(cfg.initial_steps) != k:
            raise InputError(f"initial_steps needs {k} entries for {model}", stage=STAGE)
        steps = np.array(cfg.initial_steps, dtype=float)
    else:
        steps = _initial_steps(current)
    current_lp = _log_posterior(model, current, x, backcast)
    if not np.isfinite(current_lp):
        raise ComputationError("initial parameter point has non-finite likelihood", stage=STAGE)

    rng = np.random.default_rng(cfg.seed)
    total = cfg.burn_in + cfg.draws
    draws = np.empty((cfg.draws, k))
    lls = np.empty(cfg.draws)
    window_accepts = np.zeros(k)
    kept_accepts = 0
    log_event("VOLATILITY", f"{model}: {cfg.burn_in} burn-in + {cfg.draws} draws, seed {cfg.seed}")

    def log_target(vector):
        return _log_posterior(model, vector, x, backcast)

    for it in range(total):
        for j in range(k):
            proposal = current.copy()
            proposal[j] += steps[j] * rng.standard_normal()
            current, current_lp, moved = metropolis_step(log_target, current, current_lp, proposal, rng)
            if moved:
                if it < cfg.burn_in:
                    window_accepts[j] += 1
                else:
                    kept_accepts += 1
        if it < cfg.burn_in and (it + 1) % cfg.adapt_every == 0:
            rates = window_accepts / cfg.adapt_every
            steps = steps * np.exp(rates - cfg.target_acceptance)
            window_accepts[:] = 0
        if it >= cfg.burn_in:
            draws[it - cfg.burn_in] = current
            lls[it - cfg.burn_in] = current_lp

    if not (np.all(np.isfinite(draws)) and np.all(np.isfinite(lls))):
        raise ComputationError(f"{model} chain produced non-finite states", stage=STAGE)

    notes = []
    acceptance = kept_accepts / max(cfg.draws * k, 1)
    if not ACCEPTANCE_BOUNDS[0] < acceptance < ACCEPTANCE_BOUNDS[1]:
        notes.append(f"acceptance rate {acceptance:.3f} outside {ACCEPTANCE_BOUNDS}")
        warn(STAGE, notes[-1], {"model": model, "acceptance": acceptance})

    means = draws.mean(axis=0)
    sds = draws.std(axis=0, ddof=1) if cfg.draws > 1 else np.full(k, np.nan)
    ll_mean = _log_posterior(model, means, x, backcast)
    if not np.isfinite(ll_mean):
        notes.append("posterior mean lies outside the valid variance region; DIC undefined")
        warn(STAGE, notes[-1], {"model": model})
    mean_deviance = float(np.mean(-2.0 * lls))
    p_dic = mean_deviance + 2.0 * ll_mean
    dic = mean_deviance + p_dic
    max_ll = float(lls.max())
    aic = 2.0 * k - 2.0 * max_ll
    notes.append("AIC uses the maximum log-likelihood along the chain")
    stationary = float(np.mean(draws[:, 1] + draws[:, 2] < 1.0))

    fit = VolatilityFit(
        model=model, param_names=PARAM_NAMES[model], posterior=draws, log_likelihoods=lls,
        means=means, sds=sds, aic=float(aic), dic=float(dic), p_dic=float(p_dic),
        acceptance_rate=float(acceptance), log_likelihood_at_mean=float(ll_mean),
        max_log_likelihood=max_ll, stationarity_probability=stationary, n_obs=int(x.size),
        step_sizes=steps, seed=cfg.seed, demeaned=bool(demean), warnings=notes,
    )
    log_event(
        "VOLATILITY",
        f"{model}: acceptance {acceptance:.3f}, AIC {aic:.2f}, DIC {dic:.2f}, "
        f"P(a+b<1) = {stationary:.3f}",
        {"model": model, "means": means, "sds": sds},
    )
    return fit


def compare_models(fits: Sequence[VolatilityFit]) -> pd.DataFrame:
    """One row per model; `best_aic` / `best_dic` mark the lowest criterion."""
    table = pd.DataFrame({
        "model": [f.model for f in fits],
        "aic": [f.aic for f in fits],
        "dic": [f.dic for f in fits],
        "p_dic": [f.p_dic for f in fits],
        "acceptance": [f.acceptance_rate for f in fits],
        "stationarity": [f.stationarity_probability for f in fits],
    })
    table["best_aic"] = table["aic"] == table["aic"].min()
    table["best_dic"] = table["dic"] == table["dic"].min()
    return table


# ==========================================================
# === Simulation ===========================================
# ==========================================================
def simulate(params: VolModelParams, T: int, seed: int = 0, period: int = 86400) -> ReturnSeries:
    """Gaussian innovations driven through the model recursion."""
    if T < 1:
        raise InputError("simulation length must be positive", stage=STAGE)
    omega, alpha, beta, delta, gamma = _coefficients(params.model, params.as_vector())
    if params.persistence < 1:
        start = omega / (1.0 - params.persistence)
    else:
        warn(STAGE, f"alpha + beta = {params.persistence:.3f} >= 1; path is non-stationary")
        start = omega
    rng = np.random.default_rng(seed)
    out = np.empty(T)
    prev_r, prev_r2, prev_s2 = 0.0, start, start
    for t in range(T):
        arch = alpha + delta if prev_r < 0 else alpha
        s2 = (omega + arch * prev_r2 + beta * prev_s2) / (1.0 + gamma * prev_r)
        if not s2 > 0:
            raise ComputationError(f"simulated variance not positive at t={t + 1}", stage=STAGE)
        for _ in range(SIMULATION_RETRIES):
            value = np.sqrt(s2) * rng.standard_normal()
            if 1.0 + gamma * value > 0:
                break
        else:
            raise ComputationError(
                f"RGARCH denominator non-positive after {SIMULATION_RETRIES} draws at t={t + 1}",
                stage=STAGE,
            )
        out[t] = value
        prev_r, prev_r2, prev_s2 = value, value * value, s2
    return ReturnSeries(
        values=out, timestamps=np.arange(1, T + 1, dtype=np.int64) * period,
        sampling_period=period, base_period=period, label=f"simulated-{params.model}", seed=seed,
    )
