"""
report.py | mfkit
--------------------------------------------------------------------
Plain-text summaries written next to CSV results. No wall-clock
content, so reruns produce identical files.
"""

from typing import Dict, Sequence

import numpy as np

RULE = "=" * 60


def _num(value, digits: int = 3) -> str:
    if value is None or not np.isfinite(value):
        return "undefined"
    return f"{value:.{digits}f}"


def _header(title: str) -> list:
    return [title, RULE, ""]


# ==========================================================
# === MF-DFA ===============================================
# ==========================================================
def spectrum_summary(spectrum, label: str = "series") -> str:
    lines = _header(f"MF-DFA spectrum: {label}")
    lines.append(f"q range        : {spectrum.q_grid.min():g} .. {spectrum.q_grid.max():g} "
                 f"({spectrum.q_grid.size} values)")
    low, high = spectrum.fit_range
    lines.append(f"fit range      : {low:g} .. {high:g}")
    lines.append(f"h(2)           : {_num(spectrum.h2, 4)}")
    lines.append(f"delta-h        : {_num(spectrum.delta_h, 4)}")
    lines.append(f"alpha range    : {_num(np.nanmin(spectrum.alpha), 4)} .. "
                 f"{_num(np.nanmax(spectrum.alpha), 4)}")
    diagnostics = spectrum.diagnostics or {}
    if diagnostics.get("dropped_scales"):
        lines.append(f"dropped scales : {diagnostics['dropped_scales']}")
    if not diagnostics.get("h_monotone", True):
        lines.append("note           : h(q) is not non-increasing in q")
    if diagnostics.get("f_alpha_above_one"):
        lines.append("note           : f(alpha) exceeds 1 at some points")
    return "\n".join(lines) + "\n"


def decomposition_table(reports: Dict[str, object]) -> str:
    """Columns are labels (e.g. whole period, single years); rows follow the source decomposition."""
    labels = list(reports)
    width = max(10, *(len(label) for label in labels))
    rows = [
        ("h(2)", "h2_orig"),
        ("delta-h", "delta_h_orig"),
        ("delta-h corr", "delta_h_corr"),
        ("delta-h shuf", "delta_h_sh"),
        ("delta-h surr", "delta_h_su"),
        ("R", "ratio_R"),
    ]
    lines = _header("Sources of multifractality")
    lines.append(f"{'':14}" + "".join(f"{label:>{width + 2}}" for label in labels))
    for name, attr in rows:
        cells = "".join(f"{_num(getattr(reports[label], attr)):>{width + 2}}" for label in labels)
        lines.append(f"{name:14}{cells}")
    first = reports[labels[0]]
    lines.append("")
    lines.append(f"delta-h = h({first.q_min:g}) - h({first.q_max:g}); R = corr / shuf")
    return "\n".join(lines) + "\n"


# ==========================================================
# === Volatility ===========================================
# ==========================================================
def volatility_table(fits: Sequence) -> str:
    """Posterior mean(sd) per parameter and model, then AIC and DIC."""
    names = ["omega", "arch_alpha", "garch_beta", "gjr_delta", "rg_gamma"]
    lines = _header("Volatility model estimates")
    lines.append(f"{'':12}" + "".join(f"{f.model:>18}" for f in fits))
    for name in names:
        cells = []
        for fit in fits:
            if name in fit.param_names:
                i = fit.param_names.index(name)
                cells.append(f"{fit.means[i]:.3f}({fit.sds[i]:.3f})")
            else:
                cells.append("---")
        lines.append(f"{name:12}" + "".join(f"{c:>18}" for c in cells))
    for label, attr in (("AIC", "aic"), ("DIC", "dic"), ("acceptance", "acceptance_rate"),
                        ("P(a+b<1)", "stationarity_probability")):
        lines.append(f"{label:12}" + "".join(f"{_num(getattr(f, attr), 3):>18}" for f in fits))
    notes = sorted({note for fit in fits for note in fit.warnings})
    if notes:
        lines.append("")
        lines.extend(f"note: {note}" for note in notes)
    return "\n".join(lines) + "\n"


# ==========================================================
# === Stats / rolling ======================================
# ==========================================================
def moment_summary(scan) -> str:
    lines = _header("Skewness and kurtosis by sampling period")
    lines.append(f"{'period_s':>10}{'n':>10}{'skewness':>12}{'se':>9}{'kurtosis':>12}{'se':>9}")
    for i, dt in enumerate(scan.sampling_periods):
        flag = "" if scan.reliable[i] else "  (unreliable)"
        lines.append(
            f"{int(dt):>10}{int(scan.counts[i]):>10}{_num(scan.skewness[i]):>12}"
            f"{_num(scan.skewness_se[i]):>9}{_num(scan.kurtosis[i]):>12}"
            f"{_num(scan.kurtosis_se[i]):>9}{flag}"
        )
    return "\n".join(lines) + "\n"


def acf_summary(fits: Dict[str, object]) -> str:
    lines = _header("Autocorrelation power-law fits")
    for label, fit in fits.items():
        low, high = fit.fit_range
        lines.append(f"{label}: exponent {_num(fit.exponent, 4)} +/- {_num(fit.exponent_stderr, 4)}, "
                     f"lags {low}..{high}, r2 {_num(fit.r_squared, 4)}")
    return "\n".join(lines) + "\n"


def rolling_summary(result) -> str:
    lines = _header("Rolling MF-DFA")
    lines.append(f"windows        : {len(result)} ({result.window_samples} samples, "
                 f"step {result.step_samples})")
    lines.append(f"failed windows : {len(result.failures)}")
    if len(result) - len(result.failures):
        lines.append(f"h(2) range     : {_num(np.nanmin(result.h2), 4)} .. {_num(np.nanmax(result.h2), 4)}")
        lines.append(f"delta-h range  : {_num(np.nanmin(result.delta_h), 4)} .. "
                     f"{_num(np.nanmax(result.delta_h), 4)}")
        peak = int(np.nanargmax(result.delta_h))
        lines.append(f"delta-h peak   : window ending {int(result.window_end_timestamps[peak])}")
    for index, reason in result.failures:
        lines.append(f"  window {index}: {reason}")
    return "\n".join(lines) + "\n"
