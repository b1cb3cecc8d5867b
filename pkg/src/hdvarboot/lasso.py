"""Single-equation lasso solver and penalty selection.

The objective is (1/T) sum_t (y_t - b'X_t)^2 + 2 lambda ||b||_1 throughout;
the factor 2 on the penalty is kept end-to-end rather than converted to the
more common lambda ||b||_1 convention, so closed forms derived from this
objective (soft threshold, lambda_max) apply verbatim. Most libraries scale
the penalty differently; divide their lambda by 2 to compare.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EstimationError, InputError
from ._kernels import cd_lasso

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100_000
KKT_TOL_REL = 1e-6  # relative to lambda_max


@dataclass
class LassoProblem:
    """Design matrix, response and penalty level for one equation."""

    design: np.ndarray
    response: np.ndarray
    penalty: float = 0.0

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.response = np.asarray(self.response, dtype=float).ravel()
        if self.design.ndim != 2:
            raise InputError("design must be 2-D")
        if self.design.shape[0] != self.response.shape[0]:
            raise InputError(
                f"design has {self.design.shape[0]} rows, response has {self.response.shape[0]}"
            )
        if not np.all(np.isfinite(self.design)):
            raise InputError("design contains non-finite entries")
        if not np.all(np.isfinite(self.response)):
            raise InputError("response contains non-finite entries")
        if self.penalty < 0:
            raise InputError("penalty must be >= 0")

    @property
    def t_len(self) -> int:
        return self.design.shape[0]

    @property
    def p_len(self) -> int:
        return self.design.shape[1]


@dataclass
class LassoFit:
    """Solution record; residuals are recomputed from beta at exit."""

    beta: np.ndarray
    penalty: float
    residuals: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_violation: float

    @property
    def df(self) -> int:
        return int(np.count_nonzero(self.beta))


def lambda_max(design: np.ndarray, response: np.ndarray) -> float:
    """Smallest penalty with an all-zero solution: max_p |(1/T) x_p'y|."""
    t_len = design.shape[0]
    return float(np.max(np.abs(design.T @ response)) / t_len) if design.size else 0.0


def _kkt_tol_for(p: LassoProblem) -> float:
    lmax = lambda_max(p.design, p.response)
    return max(KKT_TOL_REL * lmax, 1e-12)


def lasso_fit(p: LassoProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
              warm_start: np.ndarray | None = None, kkt_tol: float | None = None) -> LassoFit:
    """Cyclic coordinate descent on the 2-lambda objective.

    Converges when the largest coefficient change in a sweep is below ``tol``
    and the KKT conditions hold within ``kkt_tol`` (default 1e-6 relative to
    lambda_max). Hitting ``max_iter`` returns the best iterate with
    ``converged=False``. The objective is asserted non-increasing across
    sweeps; a violation indicates a numerical fault and raises.
    """
    if tol <= 0:
        raise InputError("tol must be > 0")
    if kkt_tol is None:
        kkt_tol = _kkt_tol_for(p)
    if warm_start is not None and np.shape(warm_start) != (p.p_len,):
        raise InputError(f"warm start has shape {np.shape(warm_start)}, expected ({p.p_len},)")
    return _fit_raw(np.asfortranarray(p.design), p.response, p.penalty,
                    tol, max_iter, kkt_tol, warm_start)


def _fit_raw(x_cols: np.ndarray, y: np.ndarray, lam: float, tol: float, max_iter: int,
             kkt_tol: float, warm_start: np.ndarray | None) -> LassoFit:
    p_len = x_cols.shape[1]
    beta = np.zeros(p_len) if warm_start is None else np.array(warm_start, dtype=float)
    sweeps, converged, kkt_viol, _, monotone_ok = cd_lasso(
        x_cols, y, lam, tol, kkt_tol, max_iter, beta
    )
    if not monotone_ok:
        raise EstimationError(
            "coordinate descent objective increased across a sweep; "
            "this indicates non-finite or inconsistent inputs"
        )
    t_len = x_cols.shape[0]
    residuals = y - x_cols @ beta
    objective = float(residuals @ residuals / t_len + 2.0 * lam * np.abs(beta).sum())
    return LassoFit(
        beta=beta,
        penalty=float(lam),
        residuals=residuals,
        objective=objective,
        iterations=int(sweeps),
        converged=bool(converged),
        kkt_violation=float(kkt_viol),
    )


def lambda_grid(p: LassoProblem, n_points: int = 20, ratio: float = 0.01) -> np.ndarray:
    """Log-spaced penalties from lambda_max down to ratio * lambda_max."""
    if n_points < 2:
        raise InputError("n_points must be >= 2")
    if not 0.0 < ratio < 1.0:
        raise InputError("ratio must be in (0, 1)")
    lmax = lambda_max(p.design, p.response)
    if lmax == 0.0:
        warnings.warn("response is orthogonal to every regressor; penalty grid is all zeros")
        return np.zeros(n_points)
    return np.geomspace(lmax, ratio * lmax, n_points)


def _path_fits(design: np.ndarray, response: np.ndarray, grid: np.ndarray, tol: float,
               max_iter: int, kkt_tol: float) -> list[LassoFit]:
    """Fits along a penalty path, warm-started from large to small."""
    x_cols = np.asfortranarray(design)
    order = np.argsort(grid)[::-1]
    fits_by_pos: list[LassoFit | None] = [None] * len(grid)
    beta = np.zeros(design.shape[1])
    prev_lam, prev_fit = None, None
    for pos in order:
        lam = float(grid[pos])
        if prev_lam == lam:
            fits_by_pos[pos] = prev_fit  # duplicate penalties share one fit
            continue
        fit = _fit_raw(x_cols, response, lam, tol, max_iter, kkt_tol, beta)
        fits_by_pos[pos] = fit
        beta = fit.beta
        prev_lam, prev_fit = lam, fit
    return fits_by_pos  # type: ignore[return-value]


def select_lambda_bic(p: LassoProblem, grid, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> tuple[float, list[LassoFit]]:
    """Penalty minimizing T log(RSS/T) + log(T) df along the path.

    Ties break toward the larger penalty. Returns the chosen value and the
    path fits in the order of ``grid``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("penalty grid is empty")
    kkt_tol = _kkt_tol_for(p)
    fits = _path_fits(p.design, p.response, grid, tol, max_iter, kkt_tol)
    t_len = p.t_len
    best_lam, best_score = None, math.inf
    for lam, fit in sorted(zip(grid, fits), key=lambda lf: -lf[0]):
        rss = float(fit.residuals @ fit.residuals)
        score = t_len * math.log(max(rss, 1e-300) / t_len) + math.log(t_len) * fit.df
        if score < best_score:
            best_lam, best_score = float(lam), score
    return best_lam, fits


@dataclass
class TscvTable:
    """Validation MSEs from expanding-window cross-validation."""

    grid: np.ndarray
    fold_mse: np.ndarray  # (len(grid), n_folds)
    mean_mse: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean_mse = self.fold_mse.mean(axis=1)


def select_lambda_tscv(p: LassoProblem, grid, n_folds: int = 5, min_train: int = 25,
                       tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER) -> tuple[float, TscvTable]:
    """Expanding-window time series cross-validation over a penalty grid.

    Fold f trains on rows [0, min_train + (f-1) h) and validates on the next
    h = (T - min_train) // n_folds rows; the chosen penalty minimizes mean
    validation MSE with ties toward the larger value.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("penalty grid is empty")
    t_len = p.t_len
    if min_train < 1 or n_folds < 1:
        raise ConfigError("min_train and n_folds must be >= 1")
    if min_train + n_folds > t_len:
        raise ConfigError(
            f"need min_train + n_folds <= T rows, got {min_train} + {n_folds} > {t_len}"
        )
    h = (t_len - min_train) // n_folds
    kkt_tol = _kkt_tol_for(p)
    fold_mse = np.empty((grid.size, n_folds))
    for f in range(n_folds):
        split = min_train + f * h
        val_x = p.design[split : split + h]
        val_y = p.response[split : split + h]
        fits = _path_fits(p.design[:split], p.response[:split], grid, tol, max_iter, kkt_tol)
        for i, fit in enumerate(fits):
            err = val_y - val_x @ fit.beta
            fold_mse[i, f] = float(err @ err) / h
    table = TscvTable(grid=grid.copy(), fold_mse=fold_mse)
    best_lam, best_score = None, math.inf
    for lam, score in sorted(zip(grid, table.mean_mse), key=lambda ls: -ls[0]):
        if score < best_score:
            best_lam, best_score = float(lam), float(score)
    return best_lam, table
