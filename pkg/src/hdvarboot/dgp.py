"""Simulation of sparse stationary VAR processes.

Model generation produces coefficient sets with a requested support pattern
rescaled to a target companion spectral radius; panel simulation iterates the
recursion from zero initial conditions through a burn-in and returns the
observed block together with the errors behind its estimation rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import rng
from .errors import ConfigError, InputError, NonStationaryError
from ._kernels import var_path
from .linproc import companion_of, psd_factor, spectral_radius
from .types import TimeSeriesPanel, VarModel, as_square

ERROR_FAMILIES = ("gaussian", "scaled_student_t", "rademacher_scaled")
PATTERN_KINDS = ("banded", "random_support", "diagonal")

# Rows of error draws per counter-based stream chunk, indexed from the end of
# the simulated history so that runs differing only in burn-in share the
# draws behind every retained row.
_ERR_CHUNK = 64


@dataclass
class ErrorSpec:
    """Innovation distribution for the two moment regimes.

    ``gaussian`` and ``rademacher_scaled`` are sub-gaussian; the
    variance-standardized student t covers the finite-moments regime, with
    ``dof`` controlling how many absolute moments exist (requires dof > 4).
    ``sigma_eps`` is the target N x N error covariance (identity if None).
    """

    family: str = "gaussian"
    dof: int | None = None
    sigma_eps: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in ERROR_FAMILIES:
            raise ConfigError(f"unknown error family {self.family!r}; choose from {ERROR_FAMILIES}")
        if self.family == "scaled_student_t":
            if self.dof is None or self.dof <= 4:
                raise ConfigError("scaled_student_t requires dof > 4")
        if self.sigma_eps is not None:
            self.sigma_eps = as_square(self.sigma_eps, "sigma_eps")

    def factor(self, n: int) -> np.ndarray:
        if self.sigma_eps is None:
            return np.eye(n)
        if self.sigma_eps.shape[0] != n:
            raise ConfigError(f"sigma_eps is {self.sigma_eps.shape[0]}-dimensional, expected {n}")
        return psd_factor(self.sigma_eps)


@dataclass
class SparsePattern:
    """Support layout for generated coefficient matrices.

    ``per_row_nonzeros`` counts nonzeros per row across all K lag blocks;
    ``magnitude`` sets the pre-rescaling entry scale and ``decay_across_lags``
    shrinks entries geometrically in the lag index.
    """

    kind: str = "banded"
    per_row_nonzeros: int = 2
    magnitude: float = 0.5
    decay_across_lags: float = 1.0

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ConfigError(f"unknown pattern kind {self.kind!r}; choose from {PATTERN_KINDS}")
        if self.per_row_nonzeros < 1:
            raise ConfigError("per_row_nonzeros must be >= 1")
        if not 0.0 < self.decay_across_lags <= 1.0:
            raise ConfigError("decay_across_lags must be in (0, 1]")


def _pattern_columns(kind: str, row: int, n: int, k: int, budget: int,
                     gen: np.random.Generator) -> list[int]:
    """Columns of the length-(K N) stacked coefficient row to fill."""
    if kind == "diagonal":
        return [lag * n + row for lag in range(min(budget, k))]
    if kind == "banded":
        cols = []
        for offset in range(n):
            # alternate j, j+1, j-1, j+2, ... (circulant so counts are exact)
            step = (offset + 1) // 2 if offset % 2 else -(offset // 2)
            for lag in range(k):
                cols.append(lag * n + (row + step) % n)
        seen: list[int] = []
        for c in cols:
            if c not in seen:
                seen.append(c)
            if len(seen) == budget:
                break
        return seen
    # random_support
    return list(gen.choice(n * k, size=min(budget, n * k), replace=False))


def generate_var_model(n: int, k: int, pattern: SparsePattern, target_rho: float,
                       seed: int) -> VarModel:
    """Random sparse VAR(K) with companion spectral radius ~ target_rho.

    The support follows ``pattern``; entries are then rescaled so the
    companion radius lands within 1e-6 of ``target_rho``, first by scaling
    the lag-1 block alone and, where that cannot bracket the target, by a
    bisection on one global factor applied to every lag. Deterministic in
    ``seed``.
    """
    if not 0.0 < target_rho < 1.0:
        raise ConfigError(f"target_rho must be in (0, 1), got {target_rho}")
    if pattern.per_row_nonzeros > n * k:
        raise ConfigError(
            f"per_row_nonzeros={pattern.per_row_nonzeros} exceeds row length {n * k}"
        )
    gen = rng.stream(seed, rng.DOMAIN_MODEL)
    stacked = np.zeros((n, k * n))
    for row in range(n):
        cols = _pattern_columns(pattern.kind, row, n, k, pattern.per_row_nonzeros, gen)
        for c in cols:
            lag = c // n
            size = pattern.magnitude * pattern.decay_across_lags**lag
            if pattern.kind == "diagonal":
                value = size  # uniform magnitude; rescaling pins the radius
            else:
                value = size * gen.uniform(0.5, 1.0) * gen.choice([-1.0, 1.0])
            stacked[row, c] = value

    mats = [stacked[:, i * n : (i + 1) * n].copy() for i in range(k)]
    mats = _rescale_to_radius(mats, n, k, target_rho)
    return VarModel(a_mats=mats, n=n, k=k)


def _radius(mats: list[np.ndarray], n: int, k: int) -> float:
    return spectral_radius(companion_of(VarModel(a_mats=mats, n=n, k=k)).inner)


def _rescale_to_radius(mats, n, k, target, tol=1e-6):
    rho0 = _radius(mats, n, k)
    if rho0 == 0.0:
        raise ConfigError("generated pattern has zero spectral radius; cannot rescale")
    if abs(rho0 - target) <= tol:
        return mats

    def scaled_lag1(c):
        return [mats[0] * c] + [m.copy() for m in mats[1:]]

    if k == 1:
        return scaled_lag1(target / rho0)

    # Try the lag-1 scaling first; it may not bracket when later lags dominate.
    f = lambda c: _radius(scaled_lag1(c), n, k) - target
    lo, hi = 0.0, 1.0
    f_hi = f(hi)
    tries = 0
    while f_hi < 0 and tries < 60:
        hi *= 2.0
        f_hi = f(hi)
        tries += 1
    if f(lo) <= 0.0 <= f_hi:
        c = scipy.optimize.brentq(f, lo, hi, xtol=1e-12)
        out = scaled_lag1(c)
        if abs(_radius(out, n, k) - target) <= tol:
            return out

    # Global-factor bisection: radius is monotone in a uniform scale of all lags.
    g = lambda c: _radius([m * c for m in mats], n, k) - target
    lo, hi = 0.0, 1.0
    g_hi = g(hi)
    tries = 0
    while g_hi < 0 and tries < 60:
        hi *= 2.0
        g_hi = g(hi)
        tries += 1
    c = scipy.optimize.brentq(g, lo, hi, xtol=1e-12)
    out = [m * c for m in mats]
    if abs(_radius(out, n, k) - target) > tol:
        raise ConfigError("could not rescale pattern to the target spectral radius")
    return out


def _standardized_draws(spec: ErrorSpec, gen: np.random.Generator, rows: int, n: int) -> np.ndarray:
    """Unit-variance iid draws of the requested family, shape (rows, n)."""
    if spec.family == "gaussian":
        return gen.standard_normal((rows, n))
    if spec.family == "scaled_student_t":
        scale = math.sqrt(spec.dof / (spec.dof - 2.0))
        return gen.standard_t(spec.dof, size=(rows, n)) / scale
    return gen.choice([-1.0, 1.0], size=(rows, n))


def _error_history(spec: ErrorSpec, factor: np.ndarray, seed: int, total: int, n: int) -> np.ndarray:
    """Errors for ``total`` recursion steps, keyed by distance from the end.

    Row r (0 = final step, counting backwards in time) lives in chunk
    r // _ERR_CHUNK of the (seed, chunk)-keyed stream. Extending the burn-in
    prepends chunks without touching the draws behind later rows, which is
    what makes burn-in changes leave the retained sample's innovations
    aligned.
    """
    out = np.empty((total, n))
    n_chunks = (total + _ERR_CHUNK - 1) // _ERR_CHUNK
    for chunk in range(n_chunks):
        gen = rng.stream(seed, rng.DOMAIN_SIM, chunk)
        rows = min(_ERR_CHUNK, total - chunk * _ERR_CHUNK)
        draws = _standardized_draws(spec, gen, rows, n)
        # rows are indexed from the end: chunk c covers r in [c*CHUNK, c*CHUNK+rows)
        hi = total - chunk * _ERR_CHUNK
        out[hi - rows : hi] = draws[::-1]
    return out @ factor.T


def simulate_panel(model: VarModel, t_obs: int, errors: ErrorSpec, burn_in: int | None = None,
                   seed: int = 0) -> tuple[TimeSeriesPanel, np.ndarray]:
    """Simulate T+K observed rows of the VAR plus the T estimation-row errors.

    Starts the recursion from zero initial conditions, discards ``burn_in``
    rows (default 200 + 10 K), and returns the final ``t_obs + K`` rows as a
    panel whose first K rows are the presample. Deterministic in ``seed``.
    """
    if t_obs < 1:
        raise InputError("t_obs must be >= 1")
    if burn_in is None:
        burn_in = 200 + 10 * model.k
    if burn_in < 0:
        raise InputError("burn_in must be >= 0")
    rho = spectral_radius(companion_of(model).inner)
    if rho >= 1.0:
        raise NonStationaryError(
            f"refusing to simulate: companion spectral radius {rho:.6f} >= 1"
        )
    n = model.n
    total = burn_in + model.k + t_obs
    eps = _error_history(errors, errors.factor(n), seed, total, n)
    path = var_path(model.stacked(), np.zeros(model.k * n), eps)
    panel = TimeSeriesPanel(
        data=path[burn_in:].copy(), t_obs=t_obs, k_presample=model.k
    )
    return panel, eps[burn_in + model.k :].copy()
