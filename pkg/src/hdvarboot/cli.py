"""Command-line entry point.

Subcommands: ``test`` (fit, correct, bootstrap, global + stepdown tests),
``fit`` (fit-only with residual whiteness diagnostics), ``simulate`` (write a
synthetic panel as CSV) and ``mc`` (Monte Carlo experiments). Options resolve
with precedence: command-line flags over ``HDVB_*`` environment variables
over the ``--config`` key=value file over frozen defaults. Reports are JSON
on stdout (or ``--output``); operational errors are JSON on stderr with
distinct exit codes per error class.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, run_bootstrap
from .dgp import ERROR_FAMILIES, PATTERN_KINDS, ErrorSpec, SparsePattern, generate_var_model, simulate_panel
from .errors import (
    BootstrapError,
    ConfigError,
    EstimationError,
    HdvbError,
    InputError,
)
from .inference import global_test, stepdown
from .linproc import companion_of, spectral_radius
from .mc import SCENARIOS, ExperimentSpec, preset_grid, run_covariance_closeness, run_ks_convergence, run_size_experiment
from .types import TimeSeriesPanel, VarModel
from .var_fit import SELECTORS, FitReport, SolverConfig, fit_sparse_var, residual_autocorr_diagnostic, stationarity_correct

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ESTIMATION = 3
EXIT_BOOTSTRAP = 4
EXIT_INTERNAL = 5

ENV_PREFIX = "HDVB_"

_MODE_ALIASES = {"abs": "abs_max", "max": "max", "min": "min"}

# Frozen defaults shared by all subcommands that use them.
DEFAULTS = {
    "lags": None,
    "lags_max": 4,
    "selector": "bic",
    "lambda": 0.0,
    "eps": 0.01,
    "b_reps": 999,
    "alpha": [0.05],
    "mode": "abs",
    "seed": 0,
    "threads": 1,
    "max_lag": 5,
    "n_series": 10,
    "t_obs": 200,
    "pattern": "diagonal",
    "nonzeros": 1,
    "magnitude": 0.5,
    "decay": 1.0,
    "rho": 0.5,
    "error_family": "gaussian",
    "dof": 6,
    "burn_in": None,
    "experiment": "size",
    "scenario": "subgaussian",
    "grid": None,
    "mc_reps": 200,
    "stat_draws": 800,
    "oracle_draws": 4000,
    "shift": 0.0,
    "shift_series": 0,
    "input": None,
    "output": None,
    "csv": None,
    "trace": None,
    "config": None,
}

_FLOAT_LIST_KEYS = {"alpha"}
_INT_KEYS = {"lags", "lags_max", "b_reps", "seed", "threads", "max_lag", "n_series",
             "t_obs", "nonzeros", "dof", "burn_in", "mc_reps", "stat_draws",
             "oracle_draws", "shift_series"}
_FLOAT_KEYS = {"lambda", "eps", "magnitude", "decay", "rho", "shift"}


def _coerce(key: str, raw: str):
    if key in _FLOAT_LIST_KEYS:
        return [float(x) for x in raw.split(",") if x.strip()]
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    return raw


def _load_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = stripped.partition("=")
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    return values


def resolve_options(args: argparse.Namespace, keys: list[str]) -> dict:
    """Merge flag, environment, config-file and default values per key."""
    file_values = {}
    config_path = getattr(args, "config", None) or os.environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        file_values = _load_config_file(config_path)
    resolved = {}
    for key in keys:
        flag = getattr(args, key if key != "lambda" else "lambda_", None)
        if flag is not None:
            resolved[key] = flag
            continue
        env_raw = os.environ.get(ENV_PREFIX + key.upper())
        if env_raw is not None:
            try:
                resolved[key] = _coerce(key, env_raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {ENV_PREFIX}{key.upper()}: {env_raw!r}") from exc
            continue
        if key in file_values:
            try:
                resolved[key] = _coerce(key, file_values[key])
            except ValueError as exc:
                raise ConfigError(f"bad config value for {key}: {file_values[key]!r}") from exc
            continue
        resolved[key] = DEFAULTS[key]
    return resolved


def ingest_csv(path: str, k: int) -> TimeSeriesPanel:
    """Read a rectangular numeric CSV into a panel with k presample rows.

    A non-numeric first row is treated as a header of series labels. Rows are
    time-ordered oldest first. Errors name the offending (row, column) in
    1-based file coordinates.
    """
    if k < 0:
        raise InputError("lag count must be >= 0")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} is empty")

    labels = None
    start = 0
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        labels = [c.strip() for c in rows[0]]
        start = 1
    if start >= len(rows):
        raise InputError(f"{path} has a header but no data rows")

    width = len(rows[start])
    data = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:]):
        file_row = i + start + 1
        if len(row) != width:
            raise InputError(
                f"{path}: ragged row {file_row} has {len(row)} cells, expected {width}"
            )
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError as exc:
                raise InputError(
                    f"{path}: non-numeric cell at row {file_row}, column {j + 1}: {cell!r}"
                ) from exc
            if not math.isfinite(value):
                raise InputError(
                    f"{path}: non-finite cell at row {file_row}, column {j + 1}: {cell!r}"
                )
            data[i, j] = value
    if data.shape[0] < k + 1:
        raise InputError(
            f"{path} has {data.shape[0]} data rows; need at least k+1 = {k + 1}"
        )
    return TimeSeriesPanel(data=data, t_obs=data.shape[0] - k, k_presample=k, labels=labels)


def write_panel_csv(panel: TimeSeriesPanel, path: str) -> None:
    labels = panel.labels or [f"x{j + 1}" for j in range(panel.n_series)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(labels)
        for row in panel.data:
            writer.writerow([repr(float(v)) for v in row])


def _model_summary(report: FitReport, rho_before: float, corrected: VarModel,
                   rho_after: float, selector: str) -> dict:
    return {
        "n": report.model.n,
        "k": report.model.k,
        "rho_before": float(rho_before),
        "rho_after": float(rho_after),
        "corrected": bool(corrected.corrected),
        "correction_factor": float(corrected.correction_factor),
        "per_equation": [
            {
                "penalty": float(e.penalty),
                "df": int(e.df),
                "kkt_violation": float(e.kkt_violation),
                "converged": bool(e.converged),
            }
            for e in report.per_equation
        ],
        "selector_note": f"penalty selector '{selector}' is an implementation "
                         "choice; per-equation penalties are selected independently",
    }


def _fit_pipeline(opts: dict):
    k = opts["lags"] if opts["lags"] is not None else opts["lags_max"]
    panel = ingest_csv(opts["input"], k)
    solver = SolverConfig(fixed_penalty=opts["lambda"], n_workers=opts["threads"])
    report = fit_sparse_var(panel, k, selector=opts["selector"], cfg=solver)
    rho_before = spectral_radius(companion_of(report.model).inner)
    corrected = stationarity_correct(report.model, eps=opts["eps"])
    rho_after = (
        rho_before if not corrected.corrected
        else spectral_radius(companion_of(corrected).inner)
    )
    return panel, report, corrected, rho_before, rho_after


def cmd_test(opts: dict) -> dict:
    """fit -> correct -> bootstrap -> global test + stepdown, one JSON report."""
    if opts["input"] is None:
        raise InputError("test requires --input")
    mode = _MODE_ALIASES.get(opts["mode"], opts["mode"])
    panel, report, corrected, rho_before, rho_after = _fit_pipeline(opts)
    boot_cfg = BootstrapConfig(
        b_reps=opts["b_reps"], statistic_mode=mode, seed=opts["seed"],
        n_workers=opts["threads"],
    )
    run = run_bootstrap(corrected, report.residuals, panel, boot_cfg)

    results = []
    q_obs = None
    p_value = None
    for alpha in opts["alpha"]:
        gt = global_test(panel, run, alpha)
        q_obs, p_value = gt.q_obs, gt.p_value
        entry = {"alpha": float(alpha), "q_crit": float(gt.q_crit), "reject": bool(gt.reject)}
        if mode == "abs_max":
            sd = stepdown(panel, run, alpha)
            trail = sd.to_json_dict()
            if panel.labels:
                for item in trail["rejected"]:
                    item["label"] = panel.labels[item["series"]]
            entry["stepdown"] = trail
        results.append(entry)

    doc = {
        "kind": "test",
        "config": _config_echo(opts),
        "model": _model_summary(report, rho_before, corrected, rho_after, opts["selector"]),
        "q_obs": float(q_obs),
        "p_value": float(p_value),
        "results": results,
        "seed": int(opts["seed"]),
    }
    if panel.labels:
        doc["labels"] = panel.labels
    return doc


def cmd_fit(opts: dict) -> dict:
    """Fit-only subcommand with residual autocorrelation diagnostics."""
    if opts["input"] is None:
        raise InputError("fit requires --input")
    panel, report, corrected, rho_before, rho_after = _fit_pipeline(opts)
    alpha = opts["alpha"][0]
    diag = residual_autocorr_diagnostic(report.residuals, max_lag=opts["max_lag"], alpha=alpha)
    rejections = [
        {
            "series": int(j),
            "lag": int(h + 1),
            "autocorr": float(diag.autocorr[j, h]),
            "z": float(diag.z_stats[j, h]),
            "p": float(diag.p_values[j, h]),
        }
        for j, h in zip(*np.nonzero(diag.reject))
    ]
    doc = {
        "kind": "fit",
        "config": _config_echo(opts),
        "model": _model_summary(report, rho_before, corrected, rho_after, opts["selector"]),
        "diagnostics": {
            "max_lag": int(diag.max_lag),
            "alpha": float(diag.alpha),
            "all_white": bool(diag.all_white),
            "rejections": rejections,
            "degenerate_series": [int(j) for j in np.nonzero(diag.degenerate)[0]],
        },
        "seed": int(opts["seed"]),
    }
    if panel.labels:
        doc["labels"] = panel.labels
    return doc


def cmd_simulate(opts: dict) -> dict:
    """Generate a sparse VAR panel and write it as CSV."""
    if opts["output"] is None:
        raise InputError("simulate requires --output")
    k = opts["lags"] if opts["lags"] is not None else 1
    pattern = SparsePattern(
        kind=opts["pattern"], per_row_nonzeros=opts["nonzeros"],
        magnitude=opts["magnitude"], decay_across_lags=opts["decay"],
    )
    model = generate_var_model(opts["n_series"], k, pattern, opts["rho"], seed=opts["seed"])
    dof = opts["dof"] if opts["error_family"] == "scaled_student_t" else None
    errors = ErrorSpec(family=opts["error_family"], dof=dof)
    panel, _ = simulate_panel(model, opts["t_obs"], errors, burn_in=opts["burn_in"],
                              seed=opts["seed"])
    write_panel_csv(panel, opts["output"])
    return {
        "written": opts["output"],
        "rows": panel.data.shape[0],
        "n_series": panel.n_series,
        "t_obs": panel.t_obs,
        "k_presample": panel.k_presample,
        "seed": int(opts["seed"]),
    }


def _parse_grid(raw: str) -> list[tuple[int, int]]:
    cells = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            n_str, t_str = part.split("x")
            cells.append((int(n_str), int(t_str)))
        except ValueError as exc:
            raise ConfigError(f"bad grid cell {part!r}; expected NxT like 10x200") from exc
    if not cells:
        raise ConfigError("empty grid")
    return cells


def cmd_mc(opts: dict) -> dict:
    """Run one Monte Carlo experiment and emit its report."""
    grid = _parse_grid(opts["grid"]) if opts["grid"] else preset_grid(opts["scenario"])
    k = opts["lags"] if opts["lags"] is not None else 1
    pattern = SparsePattern(
        kind=opts["pattern"], per_row_nonzeros=opts["nonzeros"],
        magnitude=opts["magnitude"], decay_across_lags=opts["decay"],
    )
    spec = ExperimentSpec(
        grid=grid,
        k=k,
        pattern=pattern,
        target_rho=opts["rho"],
        scenario=opts["scenario"],
        dof=opts["dof"],
        b_reps=opts["b_reps"],
        mc_reps=opts["mc_reps"],
        alphas=tuple(opts["alpha"]),
        master_seed=opts["seed"],
        selector=opts["selector"],
        eps_correction=opts["eps"],
        mean_shift=opts["shift"],
        shift_series=opts["shift_series"],
        stat_draws=opts["stat_draws"],
        oracle_draws=opts["oracle_draws"],
        n_workers=opts["threads"],
    )
    trace_rows: list | None = [] if opts["trace"] else None
    if opts["experiment"] == "size":
        report = run_size_experiment(spec, trace=trace_rows)
    elif opts["experiment"] == "ks":
        report = run_ks_convergence(spec)
    elif opts["experiment"] == "cov":
        report = run_covariance_closeness(spec)
    else:
        raise ConfigError(f"unknown experiment {opts['experiment']!r}; choose size, ks or cov")

    if opts["csv"]:
        rows = report.to_csv_rows()
        keys: list[str] = []
        for row in rows:
            for key in row:
                if key not in keys:
                    keys.append(key)
        with open(opts["csv"], "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            writer.writerows(rows)
    if trace_rows is not None and trace_rows:
        with open(opts["trace"], "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(trace_rows[0].keys()))
            writer.writeheader()
            writer.writerows(trace_rows)
    return report.to_json_dict()


def _config_echo(opts: dict) -> dict:
    echo = {}
    for key, value in sorted(opts.items()):
        if key in ("config",) or value is None:
            continue
        echo[key] = value
    return echo


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", default=None)
    parser.add_argument("--output", default=None)
    parser.add_argument("--lags", type=int, default=None)
    parser.add_argument("--lags-max", dest="lags_max", type=int, default=None)
    parser.add_argument("--selector", choices=SELECTORS, default=None)
    parser.add_argument("--lambda", dest="lambda_", type=float, default=None,
                        help="fixed penalty (selector=fixed)")
    parser.add_argument("--eps", type=float, default=None,
                        help="stationarity correction epsilon")
    parser.add_argument("--b-reps", dest="b_reps", type=int, default=None)
    parser.add_argument("--alpha", action="append", type=float, default=None,
                        help="significance level; repeatable")
    parser.add_argument("--mode", choices=sorted(_MODE_ALIASES), default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--config", default=None, help="key = value options file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdvb",
        description="Simultaneous inference on high-dimensional time-series means "
                    "via a sparse VAR and a multiplier bootstrap.",
    )
    parser.add_argument("--version", action="version", version=f"hdvb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="run the full testing pipeline on a CSV panel")
    _add_common(p_test)

    p_fit = sub.add_parser("fit", help="fit only, with residual whiteness diagnostics")
    _add_common(p_fit)
    p_fit.add_argument("--max-lag", dest="max_lag", type=int, default=None)

    p_sim = sub.add_parser("simulate", help="write a simulated sparse VAR panel as CSV")
    _add_common(p_sim)
    for flag, typ in (
        ("--n-series", int), ("--t-obs", int), ("--nonzeros", int),
        ("--magnitude", float), ("--decay", float), ("--rho", float),
        ("--dof", int), ("--burn-in", int),
    ):
        p_sim.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ, default=None)
    p_sim.add_argument("--pattern", choices=PATTERN_KINDS, default=None)
    p_sim.add_argument("--error-family", dest="error_family", choices=ERROR_FAMILIES,
                       default=None)

    p_mc = sub.add_parser("mc", help="run a Monte Carlo experiment")
    _add_common(p_mc)
    p_mc.add_argument("--experiment", choices=("size", "ks", "cov"), default=None)
    p_mc.add_argument("--scenario", choices=SCENARIOS, default=None)
    p_mc.add_argument("--grid", default=None, help="cells as NxT,NxT,...")
    p_mc.add_argument("--mc-reps", dest="mc_reps", type=int, default=None)
    p_mc.add_argument("--stat-draws", dest="stat_draws", type=int, default=None)
    p_mc.add_argument("--oracle-draws", dest="oracle_draws", type=int, default=None)
    p_mc.add_argument("--shift", type=float, default=None)
    p_mc.add_argument("--shift-series", dest="shift_series", type=int, default=None)
    p_mc.add_argument("--csv", default=None, help="also write flat per-cell CSV here")
    p_mc.add_argument("--trace", default=None, help="write per-replication trace CSV here")
    for flag, typ in (("--nonzeros", int), ("--magnitude", float), ("--decay", float),
                      ("--rho", float), ("--dof", int)):
        p_mc.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ, default=None)
    p_mc.add_argument("--pattern", choices=PATTERN_KINDS, default=None)
    return parser


_COMMON_KEYS = ["input", "output", "lags", "lags_max", "selector", "lambda", "eps",
                "b_reps", "alpha", "mode", "seed", "threads"]

_KEYS_BY_COMMAND = {
    "test": _COMMON_KEYS,
    "fit": _COMMON_KEYS + ["max_lag"],
    "simulate": _COMMON_KEYS + ["n_series", "t_obs", "pattern", "nonzeros", "magnitude",
                                "decay", "rho", "error_family", "dof", "burn_in"],
    "mc": _COMMON_KEYS + ["experiment", "scenario", "grid", "mc_reps", "stat_draws",
                          "oracle_draws", "shift", "shift_series", "csv", "trace",
                          "pattern", "nonzeros", "magnitude", "decay", "rho", "dof"],
}

_HANDLERS = {"test": cmd_test, "fit": cmd_fit, "simulate": cmd_simulate, "mc": cmd_mc}


def _emit(doc: dict, output: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _error_exit(exc: Exception, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve_options(args, _KEYS_BY_COMMAND[args.command])
        doc = _HANDLERS[args.command](opts)
        output = opts.get("output")
        if args.command == "simulate":
            output = None  # the CSV went to --output; the summary goes to stdout
        _emit(doc, output)
        return EXIT_OK
    except (InputError, ConfigError) as exc:
        return _error_exit(exc, EXIT_INPUT)
    except EstimationError as exc:
        return _error_exit(exc, EXIT_ESTIMATION)
    except BootstrapError as exc:
        return _error_exit(exc, EXIT_BOOTSTRAP)
    except HdvbError as exc:
        return _error_exit(exc, EXIT_INTERNAL)
    except Exception as exc:  # noqa: BLE001 - map anything else to internal
        return _error_exit(exc, EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
