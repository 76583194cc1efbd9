"""
rolling.py | mfkit
--------------------------------------------------------------------
Rolling-window MF-DFA: h(2) and delta-h per window, stamped at the
window end, for tracking how multifractality responds to events.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from .audit import log_event, warn
from .config import MfdfaConfig
from .errors import InputError, MfkitError
from .ingest import ReturnSeries
from .mfdfa import analyze
from .workers import parallel_map

STAGE = "rolling"
MIN_WINDOW_SAMPLES = 1000
WINDOW_SCALE_COUNT = 20
WINDOW_FIT_MIN = 100


@dataclass(frozen=True, eq=False)
class RollingResult:
    window_end_timestamps: np.ndarray
    h2: np.ndarray
    delta_h: np.ndarray
    fit_r2: np.ndarray
    window_size: int
    step: int
    window_samples: int
    step_samples: int
    failures: List[Tuple[int, str]] = field(default_factory=list)

    def __len__(self):
        return int(self.h2.size)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame({
            "window_end_timestamp": self.window_end_timestamps,
            "h2": self.h2,
            "delta_h": self.delta_h,
            "fit_r2": self.fit_r2,
        })


def window_config(
    window_samples: int,
    base: MfdfaConfig = None,
    fit_range: Optional[Tuple[float, float]] = None,
    scale_count: int = WINDOW_SCALE_COUNT,
) -> MfdfaConfig:
    """Scales 16..W/4 and fit range [100, W/4] unless overridden."""
    base = base or MfdfaConfig()
    top = window_samples // 4
    return replace(
        base,
        scale_count=scale_count,
        scale_max=top,
        fit_range=fit_range or (WINDOW_FIT_MIN, top),
        threads=1,
    )


def window_starts(n: int, window_samples: int, step_samples: int) -> np.ndarray:
    return np.arange(0, n - window_samples + 1, step_samples, dtype=np.int64)


def _h2_fit_r2(spectrum) -> float:
    hits = np.flatnonzero(np.abs(spectrum.q_grid - 2.0) <= 1e-9)
    if not hits.size or spectrum.r_squared is None:
        return float("nan")
    return float(spectrum.r_squared[hits[0]])


def rolling_mfdfa(
    r: ReturnSeries,
    window: int,
    step: int,
    mfdfa_config: MfdfaConfig = None,
    threads: int = 1,
) -> RollingResult:
    """
    `window` and `step` are durations in seconds, converted to sample counts
    with the series' sampling period. Each window runs the full MF-DFA
    pipeline on its slice; a window whose fit fails yields NaN and a recorded
    reason instead of stopping the scan.
    """
    period = r.sampling_period
    if window % period or step % period:
        raise InputError(
            f"window {window}s and step {step}s must be multiples of the {period}s sampling period",
            stage=STAGE,
        )
    w, k = window // period, step // period
    if k < 1:
        raise InputError("step must be at least one sample", stage=STAGE)
    if w < MIN_WINDOW_SAMPLES:
        raise InputError(f"window of {w} samples is below {MIN_WINDOW_SAMPLES}", stage=STAGE)
    if w > len(r):
        raise InputError(f"window of {w} samples exceeds the series ({len(r)})", stage=STAGE)
    config = replace(mfdfa_config, threads=1) if mfdfa_config else window_config(w)

    starts = window_starts(len(r), w, k)
    log_event("ROLLING", f"{starts.size} windows of {w} samples, step {k}",
              {"windows": starts.size, "window_samples": w, "step_samples": k})

    def one(start):
        try:
            spectrum = analyze(r.slice(start, start + w), config)
        except MfkitError as e:
            return float("nan"), float("nan"), float("nan"), str(e)
        return spectrum.h2, spectrum.delta_h, _h2_fit_r2(spectrum), None

    rows = parallel_map(one, starts, threads)
    failures = [(int(i), reason) for i, (_, _, _, reason) in enumerate(rows) if reason]
    for index, reason in failures:
        warn(STAGE, f"window {index} failed: {reason}", {"window": index})
    return RollingResult(
        window_end_timestamps=r.timestamps[starts + w - 1].copy(),
        h2=np.array([row[0] for row in rows]),
        delta_h=np.array([row[1] for row in rows]),
        fit_r2=np.array([row[2] for row in rows]),
        window_size=int(window),
        step=int(step),
        window_samples=int(w),
        step_samples=int(k),
        failures=failures,
    )
