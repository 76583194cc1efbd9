"""
cli.py | mfkit
--------------------------------------------------------------------
Command-line front end: ingest -> stats / mfdfa / surrogate /
volatility / rolling. Every run writes config.echo, CSV tables and
summary.txt into its output directory.

Exit codes: 0 success, 1 user error, 2 internal error.
"""

import argparse
import os
import re
import sys
from contextlib import contextmanager
from typing import List, Optional

import numpy as np
import pandas as pd

from . import mfdfa, report, rolling, stats, surrogate, volatility
from .audit import close_audit_log, log_event, open_audit_log, set_quiet, warn
from .config import (RunConfig, build_run_config, echo_config, parse_pair,
                     read_config_file)
from .errors import ComputationError, InputError, MfkitError, UsageError, diagnose
from .ingest import compute_returns, load_prices, slice_period, write_returns
from .ledger import get_recent_runs, save_run
from .workers import resolve_threads

FLOAT_FORMAT = "%.10g"
_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


# ==========================================================
# === Parser ===============================================
# ==========================================================
class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}", stage="cli")


def _flag(group, name: str, help_text: str, dest: str = None, aliases: tuple = ()):
    group.add_argument(f"--{name}", *aliases, dest=dest or name.replace("-", "_"),
                       default=None, help=help_text)


def _switch(group, name: str, help_text: str):
    group.add_argument(f"--{name}", dest=name.replace("-", "_"), action="store_const",
                       const="true", default=None, help=help_text)


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    data = parent.add_argument_group("data")
    _flag(data, "input", "price file: timestamp,price rows (comma or tab)")
    _flag(data, "output", "output directory (default: results)")
    _flag(data, "base-period", "grid period of the price file (default 1m)")
    _flag(data, "sampling-period", "return sampling period, e.g. 1m, 1h, 1d",
          aliases=("--dt",))
    _flag(data, "scale", "multiply log-returns by this factor")
    _switch(data, "normalize", "zero-mean, unit-variance returns")
    _switch(data, "overlapping", "overlapping k-lag returns")
    _switch(data, "drop-gaps", "drop returns touching forward-filled slots")
    _flag(data, "start", "first timestamp kept (UTC date or epoch seconds)")
    _flag(data, "end", "end of the kept period, exclusive")
    run = parent.add_argument_group("run")
    run.add_argument("--config", dest="config_file", default=None, help="key = value config file")
    _flag(run, "threads", "worker cap (default $MFKIT_THREADS or 1)")
    _flag(run, "seed", "random seed")
    _flag(run, "ledger", "sqlite run history file")
    _flag(run, "audit-log", "JSON-lines audit trail")
    run.add_argument("--quiet", action="store_true", help="no console progress messages")
    return parent


def _mfdfa_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("mfdfa")
    _flag(group, "q", "q-grid min:max:step (default -25:25:0.2)")
    _flag(group, "scale-min", "smallest segment size")
    _flag(group, "scale-max", "largest segment size (0 = N/4)")
    _flag(group, "scale-count", "number of log-spaced scales")
    _flag(group, "detrend-order", "polynomial detrending order 1-5")
    _flag(group, "preset", "fit-range preset: full, year or auto")
    _flag(group, "fit-range", "fit range smin:smax for original and shuffled series")
    _flag(group, "surrogate-fit-range", "fit range for the phase surrogate")
    _flag(group, "q-min", "q for h(q_min) in delta-h")
    _flag(group, "q-max", "q for h(q_max) in delta-h")
    _flag(group, "count", "surrogate realizations per kind")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfkit", description="Multifractal and volatility analysis of price series.")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    common, mf = _common_parent(), _mfdfa_parent()

    commands.add_parser("returns", parents=[common], help="write the log-return series")
    sub = commands.add_parser("distribution", parents=[common], help="normalized return histogram")
    _flag(sub, "bins", "histogram bins")
    sub = commands.add_parser("acf", parents=[common], help="autocorrelation and power-law decay")
    _flag(sub, "max-lag", "largest lag")
    _switch(sub, "absolute", "only the ACF of absolute returns")
    _flag(sub, "lag-range", "power-law fit lags kmin:kmax")
    sub = commands.add_parser("moments", parents=[common], help="skewness/kurtosis vs sampling period")
    _flag(sub, "periods", "comma list of sampling periods")
    _flag(sub, "bootstrap", "bootstrap resamples")
    commands.add_parser("mfdfa", parents=[common, mf], help="generalized Hurst exponents")
    sub = commands.add_parser("surrogate", parents=[common, mf], help="write surrogate series")
    _flag(sub, "kind", "shuffle, phase or both")
    commands.add_parser("decompose", parents=[common, mf], help="sources of multifractality")
    sub = commands.add_parser("garch", parents=[common], help="Bayesian GARCH/GJR/RGARCH fits")
    _flag(sub, "model", "garch, gjr, rgarch or all")
    _flag(sub, "burn-in", "burn-in iterations")
    _flag(sub, "draws", "retained iterations")
    _switch(sub, "demean", "subtract the sample mean first")
    _flag(sub, "target-acceptance", "acceptance rate targeted during burn-in")
    _flag(sub, "adapt-every", "burn-in adaptation interval")
    sub = commands.add_parser("rolling", parents=[common, mf], help="rolling-window h(2) and delta-h")
    _flag(sub, "window", "window duration (default 30d)")
    _flag(sub, "step", "step duration (default 1d)")
    _flag(sub, "rolling-scale-count", "scales per window")
    _flag(sub, "rolling-fit-range", "per-window fit range")

    sub = commands.add_parser("history", help="list recent runs from a ledger")
    sub.add_argument("--ledger", required=True, help="sqlite run history file")
    sub.add_argument("--limit", type=int, default=10)
    return parser


def _attach_negative_values(argv: List[str]) -> List[str]:
    """`--q -25:25:0.2` -> `--q=-25:25:0.2` so argparse does not read the value as an option."""
    out, i = [], 0
    while i < len(argv):
        token = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if token.startswith("--") and "=" not in token and nxt and _NEGATIVE_VALUE.match(nxt):
            out.append(f"{token}={nxt}")
            i += 2
            continue
        out.append(token)
        i += 1
    return out


# ==========================================================
# === Helpers ==============================================
# ==========================================================
@contextmanager
def _stage(name: str):
    """Tag unexpected exceptions with the stage that raised them."""
    try:
        yield
    except MfkitError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        raise ComputationError(f"{type(e).__name__}: {e}", stage=name) from e


def _write_table(table: pd.DataFrame, out_dir: str, name: str):
    table.to_csv(os.path.join(out_dir, name), index=False, float_format=FLOAT_FORMAT,
                 lineterminator="\n")


def _write_text(text: str, out_dir: str, name: str):
    with open(os.path.join(out_dir, name), "w", newline="") as f:
        f.write(text)


def _load(cfg: RunConfig):
    if not cfg.input:
        raise InputError("--input is required", stage="ingest")
    with _stage("ingest"):
        prices = load_prices(cfg.input, cfg.base_period)
        if cfg.start or cfg.end:
            prices = slice_period(prices, cfg.start, cfg.end)
    return prices


def _returns(cfg: RunConfig, prices=None):
    prices = prices if prices is not None else _load(cfg)
    with _stage("ingest"):
        return compute_returns(prices, cfg.sampling_period, cfg.scale, cfg.normalize,
                               cfg.overlapping, cfg.drop_gaps)


# ==========================================================
# === Commands =============================================
# ==========================================================
def _cmd_returns(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    write_returns(r, os.path.join(out_dir, "returns.csv"))
    lines = [
        "Log-returns", report.RULE, "",
        f"count          : {len(r)}",
        f"sampling period: {r.sampling_period}s",
        f"mean           : {r.values.mean():.6g}",
        f"std            : {r.values.std():.6g}",
        f"gap returns    : {int(r.gap_mask.sum())}",
    ]
    _write_text("\n".join(lines) + "\n", out_dir, "summary.txt")
    return {"count": len(r)}


def _cmd_distribution(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    with _stage("stats"):
        centers, density, gaussian = stats.return_histogram(r, cfg.bins)
        skew, kurt = stats.sample_moments(r.values)
    _write_table(pd.DataFrame({"x": centers, "density": density, "gaussian": gaussian}),
                 out_dir, "distribution.csv")
    lines = ["Normalized return distribution", report.RULE, "",
             f"count    : {len(r)}", f"skewness : {skew:.4f}", f"kurtosis : {kurt:.4f}"]
    _write_text("\n".join(lines) + "\n", out_dir, "summary.txt")
    return {"skewness": skew, "kurtosis": kurt}


def _cmd_acf(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    variants = [True] if cfg.absolute else [False, True]
    table, fits = {}, {}
    with _stage("stats"):
        for absolute in variants:
            result = stats.acf(r, cfg.max_lag, absolute=absolute)
            table["lag"] = result.lags
            table["abs_acf" if absolute else "acf"] = result.values
            if cfg.lag_range:
                try:
                    fits[result.series_label] = stats.fit_power_law_acf(result, parse_pair(cfg.lag_range))
                except InputError as e:
                    warn("stats", f"{result.series_label}: {e}")
    _write_table(pd.DataFrame(table), out_dir, "acf.csv")
    _write_text(report.acf_summary(fits), out_dir, "summary.txt")
    return {label: fit.exponent for label, fit in fits.items()}


def _cmd_moments(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    prices = _load(cfg)
    with _stage("stats"):
        scan = stats.moment_scan(prices, cfg.period_list(), cfg.bootstrap, cfg.seed, threads)
    _write_table(pd.DataFrame({
        "sampling_period": scan.sampling_periods, "count": scan.counts,
        "skewness": scan.skewness, "skewness_se": scan.skewness_se,
        "kurtosis": scan.kurtosis, "kurtosis_se": scan.kurtosis_se, "reliable": scan.reliable,
    }), out_dir, "moments.csv")
    _write_text(report.moment_summary(scan), out_dir, "summary.txt")
    return {"periods": len(scan.sampling_periods)}


def _write_spectrum(spectrum, out_dir: str, suffix: str = ""):
    _write_table(mfdfa.spectrum_table(spectrum), out_dir, f"spectrum{suffix}.csv")
    if spectrum.surface is not None:
        _write_table(mfdfa.surface_table(spectrum.surface), out_dir, f"fluctuation{suffix}.csv")


def _cmd_mfdfa(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    with _stage("mfdfa"):
        spectrum = mfdfa.analyze(r, cfg.mfdfa_config(threads=threads))
    _write_spectrum(spectrum, out_dir)
    _write_text(report.spectrum_summary(spectrum, r.label), out_dir, "summary.txt")
    return {"h2": spectrum.h2, "delta_h": spectrum.delta_h}


def _cmd_surrogate(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    kinds = list(surrogate.KINDS) if cfg.kind == "both" else [cfg.kind]
    written = []
    with _stage("surrogate"):
        for kind in kinds:
            series = surrogate.surrogate_ensemble(r, surrogate.SurrogateSpec(kind, cfg.seed, cfg.count))
            for i, s in enumerate(series):
                name = f"surrogate_{kind}.csv" if cfg.count == 1 else f"surrogate_{kind}_{i}.csv"
                write_returns(s, os.path.join(out_dir, name))
                written.append(name)
    lines = ["Surrogate series", report.RULE, "", f"seed  : {cfg.seed}", f"count : {cfg.count}"]
    lines.extend(f"file  : {name}" for name in written)
    _write_text("\n".join(lines) + "\n", out_dir, "summary.txt")
    return {"files": written}


def _cmd_decompose(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    with _stage("surrogate"):
        orig, shuffled, phase, result = surrogate.source_analysis(
            r, cfg.mfdfa_config(threads=threads), cfg.mfdfa_config(surrogate=True, threads=threads),
            seed=cfg.seed, count=cfg.count,
        )
    _write_spectrum(orig, out_dir, "_original")
    _write_spectrum(shuffled, out_dir, "_shuffled")
    _write_spectrum(phase, out_dir, "_phase")
    fields = ["h2_orig", "delta_h_orig", "delta_h_corr", "delta_h_sh", "delta_h_su", "ratio_R",
              "q_min", "q_max"]
    _write_table(pd.DataFrame([{f: getattr(result, f) for f in fields}]), out_dir, "decomposition.csv")
    _write_text(report.decomposition_table({r.label: result}), out_dir, "summary.txt")
    return {"delta_h": result.delta_h_orig, "R": result.ratio_R}


def _cmd_garch(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    models = list(volatility.MODELS) if cfg.model == "all" else [cfg.model]
    fits = []
    with _stage("volatility"):
        for model in models:
            fit = volatility.estimate(model, r, cfg.chain_config(), demean=cfg.demean)
            _write_table(fit.chain_table(), out_dir, f"chain_{model}.csv")
            _write_table(fit.summary_table(), out_dir, f"params_{model}.csv")
            fits.append(fit)
    _write_table(volatility.compare_models(fits), out_dir, "comparison.csv")
    _write_text(report.volatility_table(fits), out_dir, "summary.txt")
    return {f.model: {"aic": f.aic, "dic": f.dic} for f in fits}


def _cmd_rolling(cfg: RunConfig, out_dir: str, threads: int) -> dict:
    r = _returns(cfg)
    with _stage("rolling"):
        fit_range = parse_pair(cfg.rolling_fit_range) if cfg.rolling_fit_range else None
        window_samples = cfg.window // r.sampling_period
        config = rolling.window_config(window_samples, cfg.mfdfa_config(), fit_range,
                                       cfg.rolling_scale_count)
        result = rolling.rolling_mfdfa(r, cfg.window, cfg.step, config, threads)
    _write_table(result.table(), out_dir, "rolling.csv")
    _write_text(report.rolling_summary(result), out_dir, "summary.txt")
    return {"windows": len(result), "failed": len(result.failures)}


HANDLERS = {
    "returns": _cmd_returns,
    "distribution": _cmd_distribution,
    "acf": _cmd_acf,
    "moments": _cmd_moments,
    "mfdfa": _cmd_mfdfa,
    "surrogate": _cmd_surrogate,
    "decompose": _cmd_decompose,
    "garch": _cmd_garch,
    "rolling": _cmd_rolling,
}


def _history(args) -> int:
    runs = get_recent_runs(args.ledger, args.limit)
    if not runs:
        print("No runs recorded.")
    for run in runs:
        print(f"{run['id']:>4}  {run['timestamp']}  {run['command']:<12} {run['status']:<7} "
              f"{run['config_digest']}  {run['output']}")
    return 0


# ==========================================================
# === Entry point ==========================================
# ==========================================================
def _report_failure(error: Exception, context: dict) -> int:
    diagnosis = diagnose(error, context)
    print(f"[CLI-ERROR] {diagnosis['stage']}: {diagnosis['message']}", file=sys.stderr)
    log_event("CLI-ERROR", f"{diagnosis['stage']} failed", diagnosis)
    return diagnosis["exit_code"]


def run(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_attach_negative_values(argv))
        if args.command is None:
            raise UsageError(f"missing command\n{parser.format_usage().rstrip()}", stage="cli")
    except UsageError as e:
        return _report_failure(e, {"argv": argv})
    except SystemExit as e:  # --help
        return int(e.code or 0)

    if args.command == "history":
        try:
            return _history(args)
        except MfkitError as e:
            return _report_failure(e, {"command": "history"})

    set_quiet(args.quiet)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config_file", "quiet")}
    cfg = None
    try:
        file_values = read_config_file(args.config_file) if args.config_file else {}
        cfg = build_run_config(args.command, file_values, flags)
        if cfg.audit_log:
            open_audit_log(cfg.audit_log)
        threads = resolve_threads(cfg.threads or None)
        os.makedirs(cfg.output, exist_ok=True)
        _write_text(echo_config(cfg), cfg.output, "config.echo")
        log_event("CLI", f"{cfg.command} -> {cfg.output} ({threads} thread(s))",
                  {"command": cfg.command, "digest": cfg.digest()})
        summary = HANDLERS[cfg.command](cfg, cfg.output, threads)
    except Exception as e:  # every failure is reported with its stage and exit code
        code = _report_failure(e, {"command": args.command, "stage": "internal"})
        if cfg is not None and cfg.ledger:
            save_run(cfg.ledger, cfg.command, cfg.digest(), "failed", {"error": str(e)}, cfg.output)
        close_audit_log()
        return code

    if cfg.ledger:
        save_run(cfg.ledger, cfg.command, cfg.digest(), "ok", summary, cfg.output)
    log_event("CLI", f"{cfg.command} complete")
    close_audit_log()
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
