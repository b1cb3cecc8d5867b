"""Shared data containers: observed panels and VAR coefficient sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ShapeError


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and return ``x`` as a finite 2-D float array."""
    m = np.asarray(x, dtype=float)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} contains non-finite entries")
    return m


def as_square(x, name: str = "matrix") -> np.ndarray:
    m = as_matrix(x, name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    return m


@dataclass
class TimeSeriesPanel:
    """Observed ``(t_obs + k_presample) x n`` data block.

    The first ``k_presample`` rows are presample values used to form lagged
    regressors; all statistics are computed from the remaining ``t_obs``
    estimation rows. Rows are time-ordered oldest first.
    """

    data: np.ndarray
    t_obs: int
    k_presample: int
    labels: list[str] | None = None

    def __post_init__(self):
        self.data = as_matrix(self.data, "panel data")
        if self.t_obs < 1:
            raise InputError(f"panel needs at least one estimation row, got t_obs={self.t_obs}")
        if self.k_presample < 0:
            raise InputError("k_presample must be >= 0")
        if self.data.shape[0] != self.t_obs + self.k_presample:
            raise ShapeError(
                f"panel has {self.data.shape[0]} rows, expected "
                f"t_obs + k_presample = {self.t_obs + self.k_presample}"
            )
        if self.labels is not None and len(self.labels) != self.data.shape[1]:
            raise ShapeError(
                f"{len(self.labels)} labels for {self.data.shape[1]} series"
            )

    @property
    def n_series(self) -> int:
        return self.data.shape[1]

    @property
    def presample(self) -> np.ndarray:
        return self.data[: self.k_presample]

    @property
    def estimation(self) -> np.ndarray:
        """The ``t_obs x n`` block statistics are computed from."""
        return self.data[self.k_presample :]


@dataclass
class VarModel:
    """Lag coefficient matrices ``A_1 .. A_K`` of an N-dimensional VAR(K).

    ``corrected`` records whether the uniform-shrinkage stationarity
    correction was applied; ``correction_factor`` is the total multiplicative
    factor applied to every coefficient entry (1.0 when uncorrected).
    """

    a_mats: list[np.ndarray]
    n: int
    k: int
    corrected: bool = False
    correction_factor: float = 1.0

    def __post_init__(self):
        if self.k != len(self.a_mats):
            raise ShapeError(f"got {len(self.a_mats)} lag matrices for k={self.k}")
        if self.k < 1:
            raise InputError("VAR order must be >= 1")
        self.a_mats = [as_square(a, f"A_{i + 1}") for i, a in enumerate(self.a_mats)]
        for i, a in enumerate(self.a_mats):
            if a.shape != (self.n, self.n):
                raise ShapeError(f"A_{i + 1} has shape {a.shape}, expected ({self.n}, {self.n})")
        if not 0.0 < self.correction_factor <= 1.0:
            raise InputError(f"correction_factor must be in (0, 1], got {self.correction_factor}")

    def stacked(self) -> np.ndarray:
        """The ``n x (k n)`` block row ``[A_1 ... A_K]``."""
        return np.hstack(self.a_mats)

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, n: int, k: int, **kwargs) -> "VarModel":
        stacked = as_matrix(stacked, "stacked coefficients")
        if stacked.shape != (n, k * n):
            raise ShapeError(f"stacked coefficients have shape {stacked.shape}, expected ({n}, {k * n})")
        mats = [stacked[:, i * n : (i + 1) * n].copy() for i in range(k)]
        return cls(a_mats=mats, n=n, k=k, **kwargs)
