"""
ingest.py | mfkit
--------------------------------------------------------------------
Loads timestamped price records, regularizes them onto a fixed
base-period grid (forward-filling gaps) and produces log-return
series at any multiple of the base period.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from .audit import log_event
from .errors import InputError

STAGE = "ingest"


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


# ==========================================================
# === Domain types =========================================
# ==========================================================
@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Prices on a regular grid of `base_period` seconds; gap_mask marks filled slots."""

    timestamps: np.ndarray
    prices: np.ndarray
    gap_mask: np.ndarray
    base_period: int
    label: str = "prices"

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen(self.timestamps, np.int64))
        object.__setattr__(self, "prices", _frozen(self.prices, np.float64))
        object.__setattr__(self, "gap_mask", _frozen(self.gap_mask, bool))
        n = self.prices.size
        if self.timestamps.size != n or self.gap_mask.size != n:
            raise InputError("timestamps, prices and gap_mask must share one length", stage=STAGE)
        if self.base_period <= 0:
            raise InputError("base period must be positive", stage=STAGE)
        if n and np.any(np.diff(self.timestamps) != self.base_period):
            raise InputError("timestamps are not on a uniform base-period grid", stage=STAGE)
        if n and not np.all(self.prices > 0):
            bad = int(np.flatnonzero(~(self.prices > 0))[0])
            raise InputError(f"non-positive price at slot {bad}", stage=STAGE)

    def __len__(self):
        return int(self.prices.size)

    @property
    def filled_count(self) -> int:
        return int(self.gap_mask.sum())


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Log-returns; timestamps are the end time of each return interval."""

    values: np.ndarray
    timestamps: np.ndarray
    sampling_period: int
    base_period: int
    scale_factor: float = 1.0
    normalized: bool = False
    overlapping: bool = False
    gap_mask: Optional[np.ndarray] = None
    label: str = "returns"
    seed: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        object.__setattr__(self, "timestamps", _frozen(self.timestamps, np.int64))
        mask = np.zeros(self.values.size, bool) if self.gap_mask is None else self.gap_mask
        object.__setattr__(self, "gap_mask", _frozen(mask, bool))
        if self.timestamps.size != self.values.size or self.gap_mask.size != self.values.size:
            raise InputError("return values, timestamps and gap_mask must share one length", stage=STAGE)

    def __len__(self):
        return int(self.values.size)

    def with_values(self, values, **changes) -> "ReturnSeries":
        return replace(self, values=values, **changes)

    def slice(self, start: int, stop: int) -> "ReturnSeries":
        return replace(
            self,
            values=self.values[start:stop],
            timestamps=self.timestamps[start:stop],
            gap_mask=self.gap_mask[start:stop],
        )


# ==========================================================
# === Loading ==============================================
# ==========================================================
def _to_epoch_seconds(column: pd.Series) -> np.ndarray:
    numeric = pd.to_numeric(column, errors="coerce")
    if numeric.notna().all():
        if not np.all(np.isclose(numeric, np.round(numeric))):
            raise InputError("timestamps must be whole epoch seconds", stage=STAGE)
        return np.round(numeric.to_numpy(dtype=float)).astype(np.int64)
    try:
        parsed = pd.to_datetime(column, utc=True)
    except (ValueError, TypeError) as e:
        raise InputError(f"unparseable timestamp column: {e}", stage=STAGE)
    return (parsed - pd.Timestamp("1970-01-01", tz="UTC")) // pd.Timedelta(seconds=1)


def read_price_table(source) -> pd.DataFrame:
    """Two-column (timestamp, price) table; comma or tab delimited; header optional."""
    try:
        raw = pd.read_csv(
            source, sep=None, engine="python", header=None, comment="#",
            dtype=str, skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError:
        raise InputError(f"empty price file: {source}", stage=STAGE)
    except OSError as e:
        raise InputError(f"cannot read price file {source}: {e}", stage=STAGE)
    if raw.empty:
        raise InputError(f"empty price file: {source}", stage=STAGE)
    if raw.shape[1] < 2:
        raise InputError("price file needs two columns (timestamp, price)", stage=STAGE)
    raw = raw.iloc[:, :2]
    raw.columns = ["timestamp", "price"]
    first_row = 0
    if pd.isna(pd.to_numeric(raw["price"].iloc[0], errors="coerce")):
        first_row = 1  # header line
    table = raw.iloc[first_row:].reset_index(drop=True)
    table.index = table.index + first_row  # keep file row numbers for messages
    if table.empty:
        raise InputError(f"no price records in {source}", stage=STAGE)
    return table


def regularize(timestamps, prices, base_period: int, label: str = "prices") -> PriceSeries:
    """Sort, de-duplicate (last wins) and forward-fill onto the base grid."""
    frame = pd.DataFrame({"t": np.asarray(timestamps, np.int64), "p": np.asarray(prices, float)})
    frame = frame.sort_values("t", kind="mergesort").drop_duplicates("t", keep="last")
    t = frame["t"].to_numpy()
    if t.size == 0:
        raise InputError("no price records", stage=STAGE)
    if np.any(np.diff(t) <= 0):
        raise InputError("timestamps not strictly increasing after sort/dedup", stage=STAGE)
    offsets = t - t[0]
    if np.any(offsets % base_period):
        bad = int(t[np.flatnonzero(offsets % base_period)[0]])
        raise InputError(
            f"timestamp {bad} is off the {base_period}s grid anchored at {int(t[0])}", stage=STAGE
        )
    slots = (offsets // base_period).astype(np.int64)
    n = int(slots[-1]) + 1
    filled = np.full(n, np.nan)
    filled[slots] = frame["p"].to_numpy()
    gap_mask = np.isnan(filled)
    filled = pd.Series(filled).ffill().to_numpy()
    grid = t[0] + base_period * np.arange(n, dtype=np.int64)
    return PriceSeries(grid, filled, gap_mask, base_period, label=label)


def load_prices(source, base_period: int, label: str = None) -> PriceSeries:
    """
    Load (timestamp, price) records and regularize them onto a `base_period` grid.
    Missing slots are forward-filled and flagged in gap_mask.
    """
    table = read_price_table(source)
    prices = pd.to_numeric(table["price"], errors="coerce")
    if prices.isna().any():
        row = int(prices.index[prices.isna()][0])
        raise InputError(f"row {row}: price is not a number", stage=STAGE)
    nonpositive = prices <= 0
    if nonpositive.any():
        row = int(prices.index[nonpositive][0])
        raise InputError(f"row {row}: price {prices[row]} is not positive", stage=STAGE)
    timestamps = _to_epoch_seconds(table["timestamp"])
    series = regularize(
        timestamps, prices.to_numpy(float), base_period,
        label=label or str(getattr(source, "name", source)),
    )
    log_event(
        "INGEST",
        f"Loaded {len(table)} records -> {len(series)} slots, {series.filled_count} forward-filled",
        {"records": len(table), "slots": len(series), "filled": series.filled_count},
    )
    return series


def _to_epoch(value) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    text = str(value).strip()
    if text.lstrip("-").isdigit():
        return int(text)
    stamp = pd.Timestamp(text)
    stamp = stamp.tz_localize("UTC") if stamp.tzinfo is None else stamp.tz_convert("UTC")
    return int((stamp - pd.Timestamp("1970-01-01", tz="UTC")) // pd.Timedelta(seconds=1))


def slice_period(p: PriceSeries, start=None, end=None) -> PriceSeries:
    """Keep slots with start <= t < end (UTC dates or epoch seconds)."""
    keep = np.ones(len(p), bool)
    if start is not None:
        keep &= p.timestamps >= _to_epoch(start)
    if end is not None:
        keep &= p.timestamps < _to_epoch(end)
    if not keep.any():
        raise InputError(f"no data between {start} and {end}", stage=STAGE)
    idx = np.flatnonzero(keep)
    return PriceSeries(
        p.timestamps[idx], p.prices[idx], p.gap_mask[idx], p.base_period,
        label=f"{p.label}[{start or ''}:{end or ''}]",
    )


# ==========================================================
# === Returns ==============================================
# ==========================================================
def compute_returns(
    p: PriceSeries,
    sampling_period: int,
    scale: float = 1.0,
    normalize: bool = False,
    overlapping: bool = False,
    drop_gaps: bool = False,
) -> ReturnSeries:
    """
    Log-returns scale * (ln P(t) - ln P(t - dt)) on non-overlapping dt strides
    (overlapping k-lag differences when `overlapping` is set).
    """
    if sampling_period <= 0 or sampling_period % p.base_period:
        raise InputError(
            f"sampling period {sampling_period}s is not a positive multiple of {p.base_period}s",
            stage=STAGE,
        )
    k = sampling_period // p.base_period
    log_p = np.log(p.prices)
    filled_before = np.concatenate([[0], np.cumsum(p.gap_mask, dtype=np.int64)])

    if overlapping:
        if len(p) < k + 1:
            raise InputError("fewer than 2 usable points for this sampling period", stage=STAGE)
        values = log_p[k:] - log_p[:-k]
        ends = np.arange(k, len(p))
    else:
        usable = (len(p) // k) * k
        ends = np.arange(0, usable, k)
        if ends.size < 2:
            raise InputError("fewer than 2 usable points for this sampling period", stage=STAGE)
        values = np.diff(log_p[ends])
        ends = ends[1:]
    starts = ends - k
    gaps = (filled_before[ends + 1] - filled_before[starts + 1]) > 0
    values = scale * values
    timestamps = p.timestamps[ends]

    if drop_gaps and gaps.any():
        log_event("INGEST", f"Dropping {int(gaps.sum())} returns touching filled slots")
        values, timestamps, gaps = values[~gaps], timestamps[~gaps], gaps[~gaps]
        if values.size < 1:
            raise InputError("no returns left after dropping gaps", stage=STAGE)

    if normalize:
        std = values.std()
        if not std > 0:
            raise InputError("cannot normalize a zero-variance return series", stage=STAGE)
        values = (values - values.mean()) / std

    return ReturnSeries(
        values=values,
        timestamps=timestamps,
        sampling_period=int(sampling_period),
        base_period=p.base_period,
        scale_factor=float(scale),
        normalized=bool(normalize),
        overlapping=bool(overlapping),
        gap_mask=gaps,
        label=p.label,
    )


# ==========================================================
# === Tabular serialization ================================
# ==========================================================
def write_returns(r: ReturnSeries, path: str, header: dict = None):
    meta = {
        "label": r.label,
        "sampling_period": r.sampling_period,
        "base_period": r.base_period,
        "scale_factor": repr(r.scale_factor),
        "normalized": str(r.normalized).lower(),
        "overlapping": str(r.overlapping).lower(),
    }
    if r.seed is not None:
        meta["seed"] = r.seed
    meta.update(r.metadata)
    meta.update(header or {})
    with open(path, "w", newline="") as f:
        for key, value in meta.items():
            f.write(f"# {key}={value}\n")
        pd.DataFrame({"timestamp": r.timestamps, "value": r.values}).to_csv(
            f, index=False, float_format="%.17g", lineterminator="\n"
        )


def read_returns(path: str) -> ReturnSeries:
    meta = {}
    with open(path, "r") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
    table = pd.read_csv(path, comment="#", float_precision="round_trip")
    seed = meta.pop("seed", None)
    known = {"label", "sampling_period", "base_period", "scale_factor", "normalized", "overlapping"}
    return ReturnSeries(
        values=table["value"].to_numpy(float),
        timestamps=table["timestamp"].to_numpy(np.int64),
        sampling_period=int(meta.get("sampling_period", 60)),
        base_period=int(meta.get("base_period", 60)),
        scale_factor=float(meta.get("scale_factor", 1.0)),
        normalized=meta.get("normalized") == "true",
        overlapping=meta.get("overlapping") == "true",
        label=meta.get("label", "returns"),
        seed=int(seed) if seed is not None else None,
        metadata={k: v for k, v in meta.items() if k not in known},
    )
