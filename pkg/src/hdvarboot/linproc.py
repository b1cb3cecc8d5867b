"""Linear-process machinery.

Companion form, spectral radius, inversion of a stationary VAR into its
moving-average coefficients, the long-run covariance of scaled means, the
max-mean test statistic, Monte Carlo sampling of Gaussian maxima, and exact
Kolmogorov distances between empirical distributions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import rng
from .errors import (
    ConvergenceError,
    InputError,
    NonInvertibleError,
    NotPsdError,
    ShapeError,
    SingularSystemError,
)
from .types import TimeSeriesPanel, VarModel, as_matrix, as_square

STAT_MODES = ("abs_max", "max", "min")

# Sides up to this use a dense eigensolve; above it, norm-based iteration.
DENSE_EIG_CUTOFF = 512

_GMAX_CHUNK = 1024


@dataclass
class CompanionMatrix:
    """Companion form of a VAR(K): [A_1 .. A_K] on top, identity subdiagonal."""

    inner: np.ndarray
    n: int
    k: int


@dataclass
class VmaSequence:
    """Truncated moving-average coefficients B_0 .. B_L of an inverted VAR.

    ``coeffs`` has shape (L+1, n, n) with B_0 = I. ``tail_bound`` bounds the
    sum of infinity-norms beyond lag L via the fitted geometric envelope
    ``psi * lam**j``; ``hit_cap`` flags that the lag cap was reached before
    the norms dropped below the truncation tolerance.
    """

    coeffs: np.ndarray
    truncation_lag: int
    tail_bound: float
    envelope: tuple[float, float] = (1.0, 0.0)  # (psi, lam)
    hit_cap: bool = False

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]


@dataclass
class EmpiricalDistribution:
    """Sorted sample of a scalar statistic with quantile and CDF queries."""

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if self.samples.size == 0:
            raise InputError("empirical distribution needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise InputError("empirical distribution contains non-finite samples")

    @property
    def n(self) -> int:
        return self.samples.size

    def quantile(self, q: float) -> float:
        """Order statistic at 1-based index ceil(n q); q=0 -> min, q=1 -> max."""
        if not 0.0 <= q <= 1.0:
            raise InputError(f"quantile level must be in [0, 1], got {q}")
        idx = max(1, math.ceil(self.n * q - 1e-9))
        return float(self.samples[idx - 1])

    def cdf(self, y: float) -> float:
        return float(np.searchsorted(self.samples, y, side="right")) / self.n


def build_companion(a_mats: list[np.ndarray]) -> CompanionMatrix:
    """Assemble the (K n x K n) companion matrix from lag matrices A_1..A_K."""
    if len(a_mats) < 1:
        raise InputError("need at least one lag matrix")
    mats = [as_square(a, f"A_{i + 1}") for i, a in enumerate(a_mats)]
    n = mats[0].shape[0]
    for i, a in enumerate(mats):
        if a.shape != (n, n):
            raise ShapeError(f"A_{i + 1} has shape {a.shape}, expected ({n}, {n})")
    k = len(mats)
    side = k * n
    comp = np.zeros((side, side))
    comp[:n] = np.hstack(mats)
    if k > 1:
        idx = np.arange((k - 1) * n)
        comp[n + idx, idx] = 1.0
    return CompanionMatrix(inner=comp, n=n, k=k)


def companion_of(model: VarModel) -> CompanionMatrix:
    return build_companion(model.a_mats)


def spectral_radius(m: np.ndarray, tol: float = 1e-10, max_iter: int = 100,
                    dense_cutoff: int = DENSE_EIG_CUTOFF) -> float:
    """Largest absolute eigenvalue of a square matrix.

    Uses a dense eigensolve for sides up to ``dense_cutoff``; above that,
    repeated squaring of the infinity-norm sequence ||m^(2^j)||^(1/2^j)
    (Gelfand's formula) with Richardson extrapolation of its limit.
    """
    m = as_square(m, "matrix")
    if tol <= 0:
        raise InputError("tol must be > 0")
    if m.shape[0] <= dense_cutoff:
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    return _spectral_radius_gelfand(m, tol, max_iter)


def _spectral_radius_gelfand(m: np.ndarray, tol: float, max_iter: int) -> float:
    norm = float(np.linalg.norm(m, np.inf))
    if norm == 0.0:
        return 0.0
    work = m / norm
    # After j squarings work holds A^(2^j) / prod c_i^(2^(j-i)); the running
    # sum s_j = sum_{i<=j} log(c_i)/2^i satisfies rho_j = exp(s_j).
    s = math.log(norm)
    weight = 1.0
    prev = math.exp(s)
    for _ in range(max_iter):
        work = work @ work
        weight *= 0.5
        c = float(np.linalg.norm(work, np.inf))
        if c == 0.0:
            return 0.0
        work /= c
        s += weight * math.log(c)
        est = math.exp(s)
        if abs(est - prev) <= tol * max(1.0, est):
            # Richardson extrapolation of the ~1/2^j error in log rho_j.
            return est * est / prev if prev > 0 else est
        prev = est
    raise ConvergenceError(
        f"spectral radius did not converge within {max_iter} squarings", best=prev
    )


def vma_from_var(model: VarModel, tol: float = 1e-10,
                 max_lag_cap: int | None = None) -> VmaSequence:
    """Invert a stationary VAR into moving-average coefficients B_0..B_L.

    B_k is the top-left n x n block of the k-th companion power, computed by
    the equivalent recursion B_k = sum_i A_i B_{k-i}. Truncates at the first
    L with ||B_L||_inf < tol, capped at ``max_lag_cap``.
    """
    if tol <= 0:
        raise InputError("tol must be > 0")
    comp = companion_of(model)
    rho = spectral_radius(comp.inner)
    if rho >= 1.0:
        raise NonInvertibleError(
            f"companion spectral radius {rho:.6f} >= 1; correct the model first"
        )
    if max_lag_cap is None:
        rho_eff = min(max(rho, 1e-6), 1.0 - 1e-9)
        max_lag_cap = 10 * math.ceil(math.log(tol) / math.log(rho_eff))
    max_lag_cap = max(max_lag_cap, model.k + 1)

    n, k = model.n, model.k
    coeffs = [np.eye(n)]
    norms = [1.0]
    hit_cap = False
    while True:
        j = len(coeffs)
        b = np.zeros((n, n))
        for i in range(1, min(j, k) + 1):
            b += model.a_mats[i - 1] @ coeffs[j - i]
        coeffs.append(b)
        norms.append(float(np.linalg.norm(b, np.inf)))
        if norms[-1] < tol:
            break
        if j >= max_lag_cap:
            hit_cap = True
            break

    lag = len(coeffs) - 1
    norms_arr = np.array(norms)
    # Envelope rate: the decay observed over the back half of the sequence,
    # floored at the spectral radius and padded away from it (powers of a
    # defective companion can sit above rho^j transiently), never looser
    # than the midpoint (1 + rho) / 2.
    lam = (1.0 + rho) / 2.0
    pos = np.nonzero(norms_arr > 0.0)[0]
    back = pos[pos >= lag // 2]
    if back.size >= 2 and norms_arr[back[0]] > 0.0:
        fit = (norms_arr[back[-1]] / norms_arr[back[0]]) ** (1.0 / (back[-1] - back[0]))
        fit = max(fit, rho)
        lam = min(lam, fit + 0.02 * (1.0 - fit))
    with np.errstate(divide="ignore"):
        psi = float(np.max(norms_arr / lam ** np.arange(lag + 1)))
    # Exactly-zero tail: once k consecutive coefficients vanish, all later do.
    if lag + 1 >= k and np.all(norms_arr[lag + 1 - k :] == 0.0):
        tail_bound = 0.0
    else:
        tail_bound = psi * lam ** (lag + 1) / (1.0 - lam)
    return VmaSequence(
        coeffs=np.array(coeffs),
        truncation_lag=lag,
        tail_bound=tail_bound,
        envelope=(psi, lam),
        hit_cap=hit_cap,
    )


def long_run_matrix(model: VarModel) -> np.ndarray:
    """(I - sum_k A_k)^{-1} by direct linear solve."""
    s = np.eye(model.n)
    for a in model.a_mats:
        s = s - a
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(s, check_finite=False)
    pivots = np.abs(np.diag(lu))
    min_piv = float(pivots.min()) if pivots.size else 0.0
    scale = max(1.0, float(np.abs(s).max()))
    if min_piv <= 1e-13 * scale:
        raise SingularSystemError(
            f"I - sum(A_k) is numerically singular (smallest pivot {min_piv:.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), np.eye(model.n), check_finite=False)


def long_run_covariance(b1: np.ndarray, sigma_eps: np.ndarray) -> np.ndarray:
    """B(1) Sigma_eps B(1)', symmetrized to remove round-off asymmetry."""
    b1 = as_square(b1, "b1")
    sigma_eps = as_square(sigma_eps, "sigma_eps")
    if b1.shape != sigma_eps.shape:
        raise ShapeError(f"shape mismatch: b1 {b1.shape} vs sigma_eps {sigma_eps.shape}")
    m = b1 @ sigma_eps @ b1.T
    return (m + m.T) / 2.0


def max_mean_statistic(panel: TimeSeriesPanel, mode: str = "abs_max") -> float:
    """Extreme of sqrt(T) times the per-series means of the estimation rows.

    ``abs_max`` is the two-sided statistic max_j |sqrt(T) xbar_j|; ``max``
    and ``min`` are its signed one-sided variants.
    """
    if mode not in STAT_MODES:
        raise InputError(f"unknown statistic mode {mode!r}; choose from {STAT_MODES}")
    scaled = math.sqrt(panel.t_obs) * panel.estimation.mean(axis=0)
    if mode == "abs_max":
        return float(np.max(np.abs(scaled)))
    if mode == "max":
        return float(np.max(scaled))
    return float(np.min(scaled))


def psd_factor(sigma: np.ndarray, neg_tol: float = 1e-8) -> np.ndarray:
    """Factor F with F F' = sigma for a symmetric PSD matrix.

    Eigendecomposition-based so it tolerates semi-definiteness: eigenvalues
    below 1e-12 * ||sigma||_max are truncated to zero; an eigenvalue below
    -neg_tol * ||sigma||_max raises ``NotPsdError``.
    """
    sigma = as_square(sigma, "sigma")
    if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-8 * max(1.0, np.abs(sigma).max())):
        raise InputError("sigma must be symmetric")
    scale = float(np.abs(sigma).max())
    if scale == 0.0:
        return np.zeros_like(sigma)
    w, v = np.linalg.eigh((sigma + sigma.T) / 2.0)
    if w.min() < -neg_tol * scale:
        raise NotPsdError(
            f"sigma has negative eigenvalue {w.min():.3e} below tolerance"
        )
    w = np.where(w < 1e-12 * scale, 0.0, w)
    return v * np.sqrt(w)


def gaussian_max_sample(sigma: np.ndarray, draws: int, seed: int) -> EmpiricalDistribution:
    """Monte Carlo draws of ||z||_inf with z ~ N(0, sigma).

    Draws are generated in fixed-size chunks, each from its own counter-based
    stream keyed by (seed, chunk index), so the sample is bit-identical no
    matter how chunks are scheduled across workers.
    """
    if draws < 1:
        raise InputError("draws must be >= 1")
    factor = psd_factor(sigma)
    n = factor.shape[0]
    out = np.empty(draws)
    pos = 0
    chunk = 0
    while pos < draws:
        take = min(_GMAX_CHUNK, draws - pos)
        g = rng.stream(seed, rng.DOMAIN_GMAX, chunk).standard_normal((take, n))
        z = g @ factor.T
        out[pos : pos + take] = np.max(np.abs(z), axis=1)
        pos += take
        chunk += 1
    return EmpiricalDistribution(samples=out)


def kolmogorov_distance(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Exact sup-norm distance between two empirical CDFs.

    Evaluated over the merged jump points of both step functions, where the
    supremum is attained; no grid parameter is involved.
    """
    xs = np.concatenate([a.samples, b.samples])
    fa = np.searchsorted(a.samples, xs, side="right") / a.n
    fb = np.searchsorted(b.samples, xs, side="right") / b.n
    return float(np.max(np.abs(fa - fb)))
