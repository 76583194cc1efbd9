"""
config.py | mfkit
--------------------------------------------------------------------
Run configuration for every pipeline command.

Provides:
1. `key = value` config files validated against CONFIG_GRAMMAR
2. The RunConfig model (defaults < config file < command-line flags)
3. Range (`min:max:step`) and duration (`30s`, `1m`, `1h`, `1d`) parsing
4. MfdfaConfig / ChainConfig views handed to the numerical modules
"""

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from jsonschema import ValidationError, validate
from pydantic import BaseModel, ConfigDict, field_validator

from .errors import InputError

DURATION_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400}

_NUM = r"[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?"
_DURATION = r"^\d+[smhd]?$"
_PAIR = rf"^{_NUM}:{_NUM}$"
_RANGE = rf"^{_NUM}:{_NUM}:{_NUM}$"
_BOOL = r"^(true|false|yes|no|1|0|on|off)$"
_INT = r"^\d+$"
_FLOAT = rf"^{_NUM}$"

COMMANDS = (
    "returns", "distribution", "acf", "moments", "mfdfa",
    "surrogate", "decompose", "garch", "rolling",
)

# Fit ranges (original/shuffled, phase surrogate); None means the whole scale grid.
FIT_PRESETS = {
    "full": ((3000, 270000), (100, 100000)),
    "year": ((3000, 90000), (100, 20000)),
    "auto": (None, None),
}

# ==========================================================
# === Config file grammar ==================================
# ==========================================================
CONFIG_GRAMMAR = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "input": {"type": "string"},
        "output": {"type": "string"},
        "base_period": {"type": "string", "pattern": _DURATION},
        "sampling_period": {"type": "string", "pattern": _DURATION},
        "scale": {"type": "string", "pattern": _FLOAT},
        "normalize": {"type": "string", "pattern": _BOOL},
        "overlapping": {"type": "string", "pattern": _BOOL},
        "drop_gaps": {"type": "string", "pattern": _BOOL},
        "start": {"type": "string"},
        "end": {"type": "string"},
        "q": {"type": "string", "pattern": _RANGE},
        "scale_min": {"type": "string", "pattern": _INT},
        "scale_max": {"type": "string", "pattern": _INT},
        "scale_count": {"type": "string", "pattern": _INT},
        "detrend_order": {"enum": ["1", "2", "3", "4", "5"]},
        "preset": {"enum": list(FIT_PRESETS)},
        "fit_range": {"type": "string", "pattern": _PAIR},
        "surrogate_fit_range": {"type": "string", "pattern": _PAIR},
        "q_min": {"type": "string", "pattern": _FLOAT},
        "q_max": {"type": "string", "pattern": _FLOAT},
        "seed": {"type": "string", "pattern": _INT},
        "count": {"type": "string", "pattern": _INT},
        "kind": {"enum": ["shuffle", "phase", "both"]},
        "max_lag": {"type": "string", "pattern": _INT},
        "absolute": {"type": "string", "pattern": _BOOL},
        "lag_range": {"type": "string", "pattern": _PAIR},
        "periods": {"type": "string", "pattern": r"^\d+[smhd]?(,\d+[smhd]?)*$"},
        "bootstrap": {"type": "string", "pattern": _INT},
        "bins": {"type": "string", "pattern": _INT},
        "model": {"enum": ["garch", "gjr", "rgarch", "all"]},
        "burn_in": {"type": "string", "pattern": _INT},
        "draws": {"type": "string", "pattern": _INT},
        "demean": {"type": "string", "pattern": _BOOL},
        "target_acceptance": {"type": "string", "pattern": _FLOAT},
        "adapt_every": {"type": "string", "pattern": _INT},
        "window": {"type": "string", "pattern": _DURATION},
        "step": {"type": "string", "pattern": _DURATION},
        "rolling_scale_count": {"type": "string", "pattern": _INT},
        "rolling_fit_range": {"type": "string", "pattern": _PAIR},
        "threads": {"type": "string", "pattern": _INT},
        "ledger": {"type": "string"},
        "audit_log": {"type": "string"},
    },
}


# ==========================================================
# === Mini-languages =======================================
# ==========================================================
def parse_duration(text) -> int:
    """'90' -> 90 s, '5m' -> 300 s, '1d' -> 86400 s."""
    if isinstance(text, (int, np.integer)):
        return int(text)
    match = re.fullmatch(r"\s*(\d+)\s*([smhd]?)\s*", str(text))
    if not match:
        raise InputError(f"bad duration '{text}' (expected e.g. 60, 1m, 1h, 1d)", stage="config")
    value, unit = match.groups()
    return int(value) * DURATION_UNITS[unit or "s"]


def parse_pair(text) -> Tuple[float, float]:
    """'3000:270000' -> (3000.0, 270000.0)."""
    parts = str(text).split(":")
    if len(parts) != 2:
        raise InputError(f"bad range '{text}' (expected low:high)", stage="config")
    try:
        low, high = float(parts[0]), float(parts[1])
    except ValueError:
        raise InputError(f"bad range '{text}' (expected numbers)", stage="config")
    if not low < high:
        raise InputError(f"range '{text}' must satisfy low < high", stage="config")
    return low, high


def parse_range(text) -> Tuple[float, float, float]:
    """'-25:25:0.2' -> (-25.0, 25.0, 0.2)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise InputError(f"bad grid '{text}' (expected min:max:step)", stage="config")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise InputError(f"bad grid '{text}' (expected numbers)", stage="config")
    if step <= 0 or stop < start:
        raise InputError(f"grid '{text}' needs step > 0 and max >= min", stage="config")
    return start, stop, step


def build_q_grid(text) -> np.ndarray:
    """Uniform q-grid containing both endpoints; values rounded so q=0 is exact."""
    start, stop, step = parse_range(text)
    count = int(round((stop - start) / step))
    if not math.isclose(start + count * step, stop, rel_tol=0, abs_tol=1e-9 * max(1.0, abs(stop))):
        raise InputError(f"grid '{text}': (max - min) is not a multiple of step", stage="config")
    grid = start + step * np.arange(count + 1)
    return np.round(grid, 10) + 0.0


def build_scale_grid(n: int, scale_min: int, scale_max: int, count: int) -> np.ndarray:
    """`count` log-spaced integer scales in [scale_min, scale_max], deduplicated after rounding."""
    high = n // 4 if not scale_max else int(scale_max)
    if high < scale_min:
        raise InputError(
            f"series of length {n} too short for scales starting at {scale_min}", stage="mfdfa"
        )
    grid = np.round(np.geomspace(scale_min, high, int(count))).astype(np.int64)
    return np.unique(grid)


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("true", "yes", "1", "on"):
        return True
    if value in ("false", "no", "0", "off", ""):
        return False
    raise InputError(f"bad boolean '{text}'", stage="config")


# ==========================================================
# === Views passed to the numerical modules ================
# ==========================================================
@dataclass(frozen=True)
class MfdfaConfig:
    """Everything fluctuation_surface / fit_hurst need."""

    q_grid: Tuple[float, ...] = tuple(build_q_grid("-25:25:0.2"))
    scale_min: int = 16
    scale_max: int = 0
    scale_count: int = 40
    detrend_order: int = 3
    fit_range: Optional[Tuple[float, float]] = (3000, 270000)
    q_min: Optional[float] = None
    q_max: Optional[float] = None
    q_zero_tolerance: float = 1e-10
    threads: int = 1

    def scale_grid(self, n: int) -> np.ndarray:
        return build_scale_grid(n, self.scale_min, self.scale_max, self.scale_count)

    def q_array(self) -> np.ndarray:
        return np.asarray(self.q_grid, dtype=float)


@dataclass(frozen=True)
class ChainConfig:
    """Random-walk Metropolis settings."""

    burn_in: int = 20000
    draws: int = 80000
    seed: int = 42
    initial_steps: Optional[Tuple[float, ...]] = None
    target_acceptance: float = 0.4
    adapt_every: int = 100


# ==========================================================
# === RunConfig ============================================
# ==========================================================
class RunConfig(BaseModel):
    """Effective configuration of one CLI run; echoed next to its results."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: str
    input: Optional[str] = None
    output: str = "results"
    base_period: int = 60
    sampling_period: int = 60
    scale: float = 1.0
    normalize: bool = False
    overlapping: bool = False
    drop_gaps: bool = False
    start: Optional[str] = None
    end: Optional[str] = None
    q: str = "-25:25:0.2"
    scale_min: int = 16
    scale_max: int = 0
    scale_count: int = 40
    detrend_order: int = 3
    preset: str = "full"
    fit_range: Optional[str] = None
    surrogate_fit_range: Optional[str] = None
    q_min: Optional[float] = None
    q_max: Optional[float] = None
    seed: int = 42
    count: int = 1
    kind: str = "both"
    max_lag: int = 100
    absolute: bool = False
    lag_range: Optional[str] = None
    periods: str = "1m,5m,15m,30m,1h,2h,6h,12h,1d,2d,7d,14d,28d"
    bootstrap: int = 1000
    bins: int = 101
    model: str = "garch"
    burn_in: int = 20000
    draws: int = 80000
    demean: bool = False
    target_acceptance: float = 0.4
    adapt_every: int = 100
    window: int = 30 * 86400
    step: int = 86400
    rolling_scale_count: int = 20
    rolling_fit_range: Optional[str] = None
    threads: int = 0
    ledger: Optional[str] = None
    audit_log: Optional[str] = None

    @field_validator("base_period", "sampling_period", "window", "step", mode="before")
    @classmethod
    def _durations(cls, value):
        return parse_duration(value)

    @field_validator("normalize", "overlapping", "drop_gaps", "absolute", "demean", mode="before")
    @classmethod
    def _booleans(cls, value):
        return parse_bool(value)

    @field_validator("command")
    @classmethod
    def _command(cls, value):
        if value not in COMMANDS:
            raise ValueError(f"unknown command '{value}'")
        return value

    @field_validator("detrend_order")
    @classmethod
    def _order(cls, value):
        if not 1 <= value <= 5:
            raise ValueError("detrend_order must be between 1 and 5")
        return value

    # --- derived views -------------------------------------
    def fit_ranges(self) -> Tuple[Optional[Tuple[float, float]], Optional[Tuple[float, float]]]:
        if self.preset not in FIT_PRESETS:
            raise InputError(f"unknown preset '{self.preset}'", stage="config")
        original, surrogate = FIT_PRESETS[self.preset]
        if self.fit_range:
            original = parse_pair(self.fit_range)
        if self.surrogate_fit_range:
            surrogate = parse_pair(self.surrogate_fit_range)
        return original, surrogate

    def mfdfa_config(self, surrogate: bool = False, threads: int = 1) -> MfdfaConfig:
        original, phase = self.fit_ranges()
        return MfdfaConfig(
            q_grid=tuple(build_q_grid(self.q)),
            scale_min=self.scale_min,
            scale_max=self.scale_max,
            scale_count=self.scale_count,
            detrend_order=self.detrend_order,
            fit_range=phase if surrogate else original,
            q_min=self.q_min,
            q_max=self.q_max,
            threads=threads,
        )

    def chain_config(self) -> ChainConfig:
        return ChainConfig(
            burn_in=self.burn_in,
            draws=self.draws,
            seed=self.seed,
            target_acceptance=self.target_acceptance,
            adapt_every=self.adapt_every,
        )

    def period_list(self):
        return [parse_duration(p) for p in self.periods.split(",") if p.strip()]

    def digest(self) -> str:
        return hashlib.sha256(echo_config(self).encode()).hexdigest()[:16]


# Command-specific defaults applied before the config file and flags.
COMMAND_DEFAULTS = {
    "garch": {"sampling_period": "1d", "scale": "100"},
}


# ==========================================================
# === File I/O =============================================
# ==========================================================
def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected 'key = value'", stage="config")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key in values:
            raise InputError(f"{source}:{lineno}: duplicate key '{key}'", stage="config")
        values[key] = value
    try:
        validate(instance=values, schema=CONFIG_GRAMMAR)
    except ValidationError as e:
        where = ".".join(str(p) for p in e.path) or "config"
        raise InputError(f"{source}: invalid '{where}': {e.message}", stage="config")
    return values


def read_config_file(path: str) -> dict:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise InputError(f"cannot read config file {path}: {e}", stage="config")
    return parse_config_text(text, source=path)


def build_run_config(command: str, file_values: dict = None, flag_values: dict = None) -> RunConfig:
    """Merge defaults < config file < flags into a validated RunConfig."""
    merged = dict(COMMAND_DEFAULTS.get(command, {}))
    merged.update({k: v for k, v in (file_values or {}).items() if k != "command"})
    merged.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    merged["command"] = command
    try:
        return RunConfig(**merged)
    except ValueError as e:
        raise InputError(f"invalid configuration: {e}", stage="config")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(cfg: RunConfig) -> str:
    """Sorted `key = value` lines; feeding them back reproduces `cfg`."""
    lines = []
    for key, value in sorted(cfg.model_dump().items()):
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"
