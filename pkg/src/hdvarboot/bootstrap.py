"""Multiplier bootstrap for the fitted VAR.

Each replicate scales every residual row by an independent standard normal
multiplier, rebuilds a pseudo-series through the estimated coefficients from
the original presample, and records the max-mean statistic together with the
per-series bootstrap means (the stepdown procedure reuses the latter).
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ConfigError, InputError, ReplicateError, ShapeError
from ._kernels import bootstrap_chunk_means, var_path
from .linproc import STAT_MODES, EmpiricalDistribution
from .types import TimeSeriesPanel, VarModel


@dataclass
class BootstrapConfig:
    """Replication count, statistic mode, master seed and chunking."""

    b_reps: int = 999
    statistic_mode: str = "abs_max"
    seed: int = 0
    parallel_chunk: int = 64
    n_workers: int = 1

    def __post_init__(self):
        if self.b_reps < 1:
            raise ConfigError("b_reps must be >= 1")
        if self.statistic_mode not in STAT_MODES:
            raise ConfigError(
                f"unknown statistic mode {self.statistic_mode!r}; choose from {STAT_MODES}"
            )
        if self.parallel_chunk < 1:
            raise ConfigError("parallel_chunk must be >= 1")
        if self.n_workers < 1:
            raise ConfigError("n_workers must be >= 1")


@dataclass
class BootstrapRun:
    """Replicate statistics plus the B x N matrix of bootstrap means."""

    q_stats: np.ndarray
    boot_means: np.ndarray
    config: BootstrapConfig
    t_obs: int
    model_fingerprint: str

    @property
    def b_reps(self) -> int:
        return self.q_stats.size

    def to_json_dict(self) -> dict:
        return {
            "b_reps": int(self.b_reps),
            "statistic_mode": self.config.statistic_mode,
            "seed": int(self.config.seed),
            "t_obs": int(self.t_obs),
            "model_fingerprint": self.model_fingerprint,
            "q_stats": [float(q) for q in self.q_stats],
        }


def stats_from_means(means: np.ndarray, t_obs: int, mode: str) -> np.ndarray:
    """Max-mean statistics recomputed from per-series means; rows = replicates."""
    scaled = math.sqrt(t_obs) * np.atleast_2d(means)
    if mode == "abs_max":
        return np.max(np.abs(scaled), axis=1)
    if mode == "max":
        return np.max(scaled, axis=1)
    if mode == "min":
        return np.min(scaled, axis=1)
    raise ConfigError(f"unknown statistic mode {mode!r}")


def model_fingerprint(model: VarModel, residuals: np.ndarray) -> str:
    """SHA-256 over the exact coefficient and residual bytes, for audit."""
    h = hashlib.sha256()
    h.update(np.int64([model.n, model.k, residuals.shape[0]]).tobytes())
    for a in model.a_mats:
        h.update(np.ascontiguousarray(a).tobytes())
    h.update(np.ascontiguousarray(residuals).tobytes())
    return h.hexdigest()


def _initial_state(model: VarModel, panel: TimeSeriesPanel) -> np.ndarray:
    """Flattened (x_0', x_-1', ..., x_{-K+1}') from the panel presample."""
    if panel.k_presample < model.k:
        raise InputError(
            f"panel has {panel.k_presample} presample rows, model needs {model.k}"
        )
    pres = panel.presample[panel.k_presample - model.k :]
    return pres[::-1].ravel()


def replicate_seed(master_seed: int, b: int) -> int:
    """Sub-seed of replicate ``b``; replicates can be replayed individually."""
    return rng.mix(master_seed, rng.DOMAIN_BOOT, b)


def _multipliers(rep_seed: int, t_obs: int) -> np.ndarray:
    return rng.stream(rep_seed, rng.DOMAIN_BOOT).standard_normal(t_obs)


def bootstrap_replicate(model: VarModel, residuals: np.ndarray, panel: TimeSeriesPanel,
                        rep_seed: int, mode: str = "abs_max",
                        return_path: bool = False):
    """One multiplier-bootstrap replicate.

    Draws T multipliers from the counter-based stream keyed by ``rep_seed``,
    scales residual rows by them, rebuilds the series from the original
    presample, and returns ``(q, means)`` (plus the rebuilt path when
    ``return_path``).
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != (panel.t_obs, model.n):
        raise ShapeError(
            f"residuals have shape {residuals.shape}, expected ({panel.t_obs}, {model.n})"
        )
    gam = _multipliers(rep_seed, panel.t_obs)
    path = var_path(model.stacked(), _initial_state(model, panel), residuals * gam[:, None])
    if not np.all(np.isfinite(path)):
        raise ReplicateError(
            "bootstrap recursion produced non-finite values; "
            "the model is likely not stationarity-corrected",
            rep_seed=rep_seed,
        )
    means = path.mean(axis=0)
    q = float(stats_from_means(means, panel.t_obs, mode)[0])
    if return_path:
        return q, means, path
    return q, means


def run_bootstrap(model: VarModel, residuals: np.ndarray, panel: TimeSeriesPanel,
                  cfg: BootstrapConfig) -> BootstrapRun:
    """Execute B replicates with per-replicate streams keyed by (seed, b).

    Replicates are processed in chunks of ``cfg.parallel_chunk``; each
    replicate's multipliers come from its own stream and the recursion is
    scalar per replicate, so results are bit-identical for any chunk size or
    worker count.
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != (panel.t_obs, model.n):
        raise ShapeError(
            f"residuals have shape {residuals.shape}, expected ({panel.t_obs}, {model.n})"
        )
    if not np.all(np.isfinite(residuals)):
        raise InputError("residuals contain non-finite entries")
    b_total = cfg.b_reps
    t_obs, n = residuals.shape
    stacked = model.stacked()
    init_state = _initial_state(model, panel)
    boot_means = np.empty((b_total, n))

    def run_chunk(start: int) -> None:
        stop = min(start + cfg.parallel_chunk, b_total)
        gam = np.empty((stop - start, t_obs))
        for b in range(start, stop):
            gam[b - start] = _multipliers(replicate_seed(cfg.seed, b), t_obs)
        bootstrap_chunk_means(stacked, init_state, residuals, gam,
                              boot_means[start:stop])

    starts = range(0, b_total, cfg.parallel_chunk)
    if cfg.n_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
            list(pool.map(run_chunk, starts))
    else:
        for s in starts:
            run_chunk(s)

    bad = ~np.isfinite(boot_means).all(axis=1)
    if bad.any():
        b_fail = int(np.argmax(bad))
        raise ReplicateError(
            f"replicate {b_fail} produced non-finite values; "
            "the model is likely not stationarity-corrected",
            rep_index=b_fail,
            rep_seed=cfg.seed,
        )
    q_stats = stats_from_means(boot_means, t_obs, cfg.statistic_mode)
    return BootstrapRun(
        q_stats=q_stats,
        boot_means=boot_means,
        config=cfg,
        t_obs=t_obs,
        model_fingerprint=model_fingerprint(model, residuals),
    )


def bootstrap_quantile(run: BootstrapRun, level: float) -> float:
    """Order statistic at 1-based index ceil(B * level) of the sorted Q*."""
    if not 0.0 < level < 1.0:
        raise InputError(f"level must be in (0, 1), got {level}")
    return EmpiricalDistribution(samples=run.q_stats).quantile(level)
