"""Monte Carlo experiment harness.

Turns the asymptotic guarantees behind the bootstrap into desk-scale
empirical checks: null rejection rates and familywise error of the stepdown
procedure, Kolmogorov-distance trends between the statistic's sampling
distribution and its Gaussian-max reference, and decay of the long-run
covariance estimation error. Every number in a report is a pure function of
the experiment spec, including its master seed; per-cell metadata suffices
to re-run any cell in isolation.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, rng
from .bootstrap import BootstrapConfig, run_bootstrap
from .dgp import ErrorSpec, SparsePattern, generate_var_model, simulate_panel
from .errors import ConfigError, HdvbError
from .inference import global_test, stepdown
from .linproc import (
    EmpiricalDistribution,
    gaussian_max_sample,
    kolmogorov_distance,
    long_run_covariance,
    long_run_matrix,
    max_mean_statistic,
)
from .types import TimeSeriesPanel, VarModel
from .var_fit import SolverConfig, fit_sparse_var, stationarity_correct

SCENARIOS = ("subgaussian", "heavy_tail", "corollary1_poly", "corollary2_exp")

_SCENARIO_FAMILY = {
    "subgaussian": "gaussian",
    "heavy_tail": "scaled_student_t",
    "corollary1_poly": "scaled_student_t",
    "corollary2_exp": "gaussian",
}

# Sub-stream roles under (master_seed, DOMAIN_MC, cell, index, role).
_ROLE_MODEL = 0
_ROLE_SIM = 1
_ROLE_BOOT = 2
_ROLE_STAT = 3
_ROLE_ORACLE = 4
_ROLE_ORACLE_HAT = 5


def preset_grid(scenario: str, t_values=(100, 200, 400), a: float = 0.5) -> list[tuple[int, int]]:
    """(N, T) presets for the two growth-rate regimes.

    ``corollary1_poly`` sets N ~ T^a; ``corollary2_exp`` sets N ~ exp(T^a).
    The other scenarios use a fixed desk-scale cross of N in {10, 50}.
    """
    if scenario == "corollary1_poly":
        return [(max(2, round(t**a)), t) for t in t_values]
    if scenario == "corollary2_exp":
        return [(max(2, round(np.exp(t**a))), t) for t in t_values]
    return [(n, t) for n in (10, 50) for t in t_values]


@dataclass
class ExperimentSpec:
    """Everything a Monte Carlo experiment depends on, seeds included."""

    grid: list  # of (n, t) pairs
    k: int = 1
    pattern: SparsePattern = field(
        default_factory=lambda: SparsePattern(kind="diagonal", per_row_nonzeros=1, magnitude=0.5)
    )
    target_rho: float = 0.5
    scenario: str = "subgaussian"
    dof: int = 6
    b_reps: int = 499
    mc_reps: int = 200
    alphas: tuple = (0.05,)
    master_seed: int = 0
    selector: str = "bic"
    solver: SolverConfig = field(default_factory=SolverConfig)
    eps_correction: float = 0.01
    mean_shift: float = 0.0
    shift_series: int = 0
    stat_draws: int = 800
    oracle_draws: int = 4000
    inject_truth: bool = False
    n_workers: int = 1

    def __post_init__(self):
        if not self.grid:
            raise ConfigError("experiment grid is empty")
        if self.mc_reps < 1:
            raise ConfigError("mc_reps must be >= 1")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha must be in (0, 1), got {a}")

    def error_spec(self) -> ErrorSpec:
        family = _SCENARIO_FAMILY[self.scenario]
        return ErrorSpec(family=family, dof=self.dof if family == "scaled_student_t" else None)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = [[int(n), int(t)] for n, t in self.grid]
        d["alphas"] = [float(a) for a in self.alphas]
        return d


@dataclass
class CellResult:
    """One (N, T) cell's aggregates; unused metric groups stay None."""

    cell_index: int
    n: int
    t: int
    n_reps: int
    n_failures: int
    incomplete: bool
    runtime_s: float
    model_seed: int
    alphas: list | None = None
    global_size: list | None = None
    global_size_se: list | None = None
    fwer: list | None = None
    fwer_se: list | None = None
    power: list | None = None
    ks_stat_oracle: float | None = None
    ks_stat_boot: float | None = None
    ks_boot_oracle_hat: float | None = None
    ks_oracle_hat_oracle: float | None = None
    cov_err_mean: float | None = None
    cov_err_q90: float | None = None


@dataclass
class ExperimentReport:
    kind: str
    spec: ExperimentSpec
    cells: list
    total_runtime_s: float
    software: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "spec": self.spec.to_json_dict(),
            "software": self.software,
            "total_runtime_s": self.total_runtime_s,
            "cells": [
                {k: v for k, v in asdict(c).items() if v is not None} for c in self.cells
            ],
        }

    def to_csv_rows(self) -> list[dict]:
        """Flat rows, one per cell x alpha (single row for alpha-free kinds)."""
        rows = []
        for c in self.cells:
            base = {
                "kind": self.kind, "cell": c.cell_index, "n": c.n, "t": c.t,
                "n_reps": c.n_reps, "n_failures": c.n_failures,
                "runtime_s": round(c.runtime_s, 3),
            }
            if c.alphas:
                for i, a in enumerate(c.alphas):
                    row = dict(base)
                    row["alpha"] = a
                    row["global_size"] = c.global_size[i]
                    row["global_size_se"] = c.global_size_se[i]
                    row["fwer"] = c.fwer[i]
                    row["fwer_se"] = c.fwer_se[i]
                    if c.power is not None:
                        row["power"] = c.power[i]
                    rows.append(row)
            else:
                row = dict(base)
                for key in ("ks_stat_oracle", "ks_stat_boot", "ks_boot_oracle_hat",
                            "ks_oracle_hat_oracle", "cov_err_mean", "cov_err_q90"):
                    val = getattr(c, key)
                    if val is not None:
                        row[key] = val
                rows.append(row)
        return rows


def _software_fingerprint() -> dict:
    return {"hdvarboot": __version__, "numpy": np.__version__}


def _cell_seed(spec: ExperimentSpec, cell: int, index: int, role: int) -> int:
    return rng.mix(spec.master_seed, rng.DOMAIN_MC, cell, index, role)


def _cell_model(spec: ExperimentSpec, cell: int, n: int) -> VarModel:
    return generate_var_model(
        n=n, k=spec.k, pattern=spec.pattern, target_rho=spec.target_rho,
        seed=_cell_seed(spec, cell, 0, _ROLE_MODEL),
    )


def _true_long_run_cov(spec: ExperimentSpec, model: VarModel) -> np.ndarray:
    errors = spec.error_spec()
    sigma_eps = errors.sigma_eps if errors.sigma_eps is not None else np.eye(model.n)
    return long_run_covariance(long_run_matrix(model), sigma_eps)


def _shifted(panel: TimeSeriesPanel, spec: ExperimentSpec) -> TimeSeriesPanel:
    if spec.mean_shift == 0.0:
        return panel
    data = panel.data.copy()
    data[:, spec.shift_series] += spec.mean_shift
    return TimeSeriesPanel(data=data, t_obs=panel.t_obs, k_presample=panel.k_presample,
                           labels=panel.labels)


def _fit_and_bootstrap(spec: ExperimentSpec, model: VarModel, panel: TimeSeriesPanel,
                       boot_seed: int):
    report = fit_sparse_var(panel, spec.k, selector=spec.selector, cfg=spec.solver)
    corrected = stationarity_correct(report.model, eps=spec.eps_correction)
    cfg = BootstrapConfig(b_reps=spec.b_reps, statistic_mode="abs_max", seed=boot_seed)
    run = run_bootstrap(corrected, report.residuals, panel, cfg)
    return report, corrected, run


def _map_reps(spec: ExperimentSpec, n_reps: int, fn) -> list:
    if spec.n_workers > 1:
        with ThreadPoolExecutor(max_workers=spec.n_workers) as pool:
            return list(pool.map(fn, range(n_reps)))
    return [fn(r) for r in range(n_reps)]


def run_size_experiment(spec: ExperimentSpec, trace: list | None = None) -> ExperimentReport:
    """Null rejection rate and stepdown FWER per cell and alpha.

    Simulates under the zero-mean null (plus the configured shift, if any,
    whose series is excluded from the false-rejection count), runs the full
    fit / correct / bootstrap / test pipeline per replication, and reports
    binomial rates with their standard errors.
    """
    t_start = time.perf_counter()
    cells = []
    for cell, (n, t_obs) in enumerate(spec.grid):
        c_start = time.perf_counter()
        model = _cell_model(spec, cell, n)
        errors = spec.error_spec()
        shifted_j = spec.shift_series if spec.mean_shift != 0.0 else None

        reject_g = np.zeros((spec.mc_reps, len(spec.alphas)))
        false_rej = np.zeros_like(reject_g)
        power = np.zeros_like(reject_g)
        failed = np.zeros(spec.mc_reps, dtype=bool)

        def one_rep(r: int):
            try:
                panel, _ = simulate_panel(
                    model, t_obs, errors, seed=_cell_seed(spec, cell, r, _ROLE_SIM)
                )
                panel = _shifted(panel, spec)
                _, _, run = _fit_and_bootstrap(
                    spec, model, panel, _cell_seed(spec, cell, r, _ROLE_BOOT)
                )
                for i, alpha in enumerate(spec.alphas):
                    gt = global_test(panel, run, alpha)
                    sd = stepdown(panel, run, alpha)
                    reject_g[r, i] = gt.reject
                    rejected = set(sd.rejected_indices)
                    nulls = rejected - {shifted_j} if shifted_j is not None else rejected
                    false_rej[r, i] = bool(nulls)
                    if shifted_j is not None:
                        power[r, i] = shifted_j in rejected
                    if trace is not None:
                        trace.append({
                            "cell": cell, "rep": r, "alpha": alpha,
                            "q_obs": gt.q_obs, "q_crit": gt.q_crit,
                            "global_reject": bool(gt.reject),
                            "n_stepdown_rejected": len(rejected),
                        })
            except HdvbError:
                failed[r] = True

        _map_reps(spec, spec.mc_reps, one_rep)
        ok = ~failed
        n_ok = max(int(ok.sum()), 1)
        rate = reject_g[ok].mean(axis=0) if ok.any() else np.full(len(spec.alphas), np.nan)
        fwer = false_rej[ok].mean(axis=0) if ok.any() else np.full(len(spec.alphas), np.nan)
        pw = power[ok].mean(axis=0) if ok.any() else np.full(len(spec.alphas), np.nan)
        se = np.sqrt(rate * (1 - rate) / n_ok)
        fwer_se = np.sqrt(fwer * (1 - fwer) / n_ok)
        cells.append(CellResult(
            cell_index=cell, n=n, t=t_obs, n_reps=spec.mc_reps,
            n_failures=int(failed.sum()),
            incomplete=bool(failed.sum() > 0.01 * spec.mc_reps),
            runtime_s=time.perf_counter() - c_start,
            model_seed=_cell_seed(spec, cell, 0, _ROLE_MODEL),
            alphas=list(spec.alphas),
            global_size=[float(x) for x in rate],
            global_size_se=[float(x) for x in se],
            fwer=[float(x) for x in fwer],
            fwer_se=[float(x) for x in fwer_se],
            power=[float(x) for x in pw] if shifted_j is not None else None,
        ))
    return ExperimentReport(
        kind="size", spec=spec, cells=cells,
        total_runtime_s=time.perf_counter() - t_start,
        software=_software_fingerprint(),
    )


def run_ks_convergence(spec: ExperimentSpec) -> ExperimentReport:
    """Kolmogorov distances between the statistic and its references, per cell.

    Per cell: samples the statistic's sampling distribution across fresh DGP
    draws, samples the Gaussian-max reference from the true long-run
    covariance, and takes one representative fit to produce the bootstrap
    sample and the reference from the estimated covariance.
    """
    t_start = time.perf_counter()
    cells = []
    for cell, (n, t_obs) in enumerate(spec.grid):
        c_start = time.perf_counter()
        model = _cell_model(spec, cell, n)
        errors = spec.error_spec()
        sigma_true = _true_long_run_cov(spec, model)

        stats = np.empty(spec.stat_draws)

        def one_draw(d: int):
            panel, _ = simulate_panel(
                model, t_obs, errors, seed=_cell_seed(spec, cell, d, _ROLE_STAT)
            )
            stats[d] = max_mean_statistic(panel, "abs_max")

        _map_reps(spec, spec.stat_draws, one_draw)
        stat_dist = EmpiricalDistribution(samples=stats)
        oracle = gaussian_max_sample(
            sigma_true, spec.oracle_draws, _cell_seed(spec, cell, 0, _ROLE_ORACLE)
        )

        panel, _ = simulate_panel(
            model, t_obs, errors, seed=_cell_seed(spec, cell, 0, _ROLE_SIM)
        )
        report, corrected, run = _fit_and_bootstrap(
            spec, model, panel, _cell_seed(spec, cell, 0, _ROLE_BOOT)
        )
        sigma_eps_hat = report.residuals.T @ report.residuals / t_obs
        sigma_hat = long_run_covariance(long_run_matrix(corrected), sigma_eps_hat)
        oracle_hat = gaussian_max_sample(
            sigma_hat, spec.oracle_draws, _cell_seed(spec, cell, 0, _ROLE_ORACLE_HAT)
        )
        boot_dist = EmpiricalDistribution(samples=run.q_stats)

        cells.append(CellResult(
            cell_index=cell, n=n, t=t_obs, n_reps=spec.stat_draws, n_failures=0,
            incomplete=False, runtime_s=time.perf_counter() - c_start,
            model_seed=_cell_seed(spec, cell, 0, _ROLE_MODEL),
            ks_stat_oracle=kolmogorov_distance(stat_dist, oracle),
            ks_stat_boot=kolmogorov_distance(stat_dist, boot_dist),
            ks_boot_oracle_hat=kolmogorov_distance(boot_dist, oracle_hat),
            ks_oracle_hat_oracle=kolmogorov_distance(oracle_hat, oracle),
        ))
    return ExperimentReport(
        kind="ks", spec=spec, cells=cells,
        total_runtime_s=time.perf_counter() - t_start,
        software=_software_fingerprint(),
    )


def run_covariance_closeness(spec: ExperimentSpec) -> ExperimentReport:
    """Mean and 90th percentile of ||Sigma_hat - Sigma||_max per cell.

    With ``inject_truth`` the true model and error covariance stand in for
    the estimate (a zero-error control path).
    """
    t_start = time.perf_counter()
    cells = []
    for cell, (n, t_obs) in enumerate(spec.grid):
        c_start = time.perf_counter()
        model = _cell_model(spec, cell, n)
        errors = spec.error_spec()
        sigma_true = _true_long_run_cov(spec, model)
        errs = np.full(spec.mc_reps, np.nan)
        failed = np.zeros(spec.mc_reps, dtype=bool)

        def one_rep(r: int):
            try:
                if spec.inject_truth:
                    sigma_hat = _true_long_run_cov(spec, model)
                else:
                    panel, _ = simulate_panel(
                        model, t_obs, errors, seed=_cell_seed(spec, cell, r, _ROLE_SIM)
                    )
                    report = fit_sparse_var(panel, spec.k, selector=spec.selector,
                                            cfg=spec.solver)
                    corrected = stationarity_correct(report.model, eps=spec.eps_correction)
                    sigma_eps_hat = report.residuals.T @ report.residuals / t_obs
                    sigma_hat = long_run_covariance(long_run_matrix(corrected), sigma_eps_hat)
                errs[r] = float(np.abs(sigma_hat - sigma_true).max())
            except HdvbError:
                failed[r] = True

        _map_reps(spec, spec.mc_reps, one_rep)
        good = errs[~failed & np.isfinite(errs)]
        cells.append(CellResult(
            cell_index=cell, n=n, t=t_obs, n_reps=spec.mc_reps,
            n_failures=int(failed.sum()),
            incomplete=bool(failed.sum() > 0.01 * spec.mc_reps),
            runtime_s=time.perf_counter() - c_start,
            model_seed=_cell_seed(spec, cell, 0, _ROLE_MODEL),
            cov_err_mean=float(good.mean()) if good.size else None,
            cov_err_q90=float(np.quantile(good, 0.9)) if good.size else None,
        ))
    return ExperimentReport(
        kind="cov", spec=spec, cells=cells,
        total_runtime_s=time.perf_counter() - t_start,
        software=_software_fingerprint(),
    )
