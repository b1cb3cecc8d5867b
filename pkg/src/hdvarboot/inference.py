"""Simultaneous hypothesis tests on high-dimensional means.

The global test compares the observed max-mean statistic against a bootstrap
order-statistic critical value. The stepdown procedure then identifies which
series reject: it repeatedly removes rejected series and recomputes the
restricted critical value from the stored bootstrap means, reusing the same
replicates throughout, which keeps the procedure non-conservative under
cross-series correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bootstrap import BootstrapRun, bootstrap_quantile
from .errors import ConfigError, InputError
from .linproc import EmpiricalDistribution, max_mean_statistic
from .types import TimeSeriesPanel


@dataclass
class GlobalTestResult:
    reject: bool
    q_obs: float
    q_crit: float
    p_value: float
    alpha: float


@dataclass
class StepdownResult:
    """Audit trail of the stepdown procedure.

    ``rejected`` lists (series index, iteration rejected, observed statistic)
    ordered by iteration then index; ``retained`` is the surviving set. One
    critical value is recorded per iteration, including the final iteration
    in which nothing was rejected.
    """

    rejected: list[tuple[int, int, float]]
    retained: list[int]
    critical_values: list[float]
    alpha: float
    iterations: int

    @property
    def rejected_indices(self) -> list[int]:
        return [r[0] for r in self.rejected]

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "iterations": self.iterations,
            "critical_values": [float(c) for c in self.critical_values],
            "rejected": [
                {"series": int(j), "iteration": int(it), "observed": float(q)}
                for j, it, q in self.rejected
            ],
            "retained": [int(j) for j in self.retained],
        }


def _check_match(panel: TimeSeriesPanel, run: BootstrapRun):
    if run.boot_means.shape[1] != panel.n_series:
        raise ConfigError(
            f"bootstrap run has {run.boot_means.shape[1]} series, panel has {panel.n_series}"
        )
    if run.t_obs != panel.t_obs:
        raise ConfigError(
            f"bootstrap run was built for T={run.t_obs}, panel has T={panel.t_obs}"
        )


def global_test(panel: TimeSeriesPanel, run: BootstrapRun, alpha: float,
                mode: str | None = None) -> GlobalTestResult:
    """Reject the joint zero-mean null when q_obs exceeds the B(1-alpha) order statistic.

    The p-value uses the add-one convention (1 + #{Q* >= q_obs}) / (B + 1).
    ``mode`` may restate the expected statistic mode; it must match the run's.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must be in (0, 1)")
    _check_match(panel, run)
    if mode is not None and mode != run.config.statistic_mode:
        raise ConfigError(
            f"requested statistic mode {mode!r} but the run used "
            f"{run.config.statistic_mode!r}"
        )
    q_obs = max_mean_statistic(panel, run.config.statistic_mode)
    q_crit = bootstrap_quantile(run, 1.0 - alpha)
    p_value = (1.0 + float(np.sum(run.q_stats >= q_obs))) / (run.b_reps + 1.0)
    return GlobalTestResult(
        reject=bool(q_obs > q_crit), q_obs=q_obs, q_crit=q_crit,
        p_value=p_value, alpha=alpha,
    )


def stepdown(panel: TimeSeriesPanel, run: BootstrapRun, alpha: float) -> StepdownResult:
    """Stepdown multiple testing over the per-series scaled means.

    Requires the two-sided abs-max statistic. Iterates: restrict the stored
    bootstrap means to the surviving set, take the B(1-alpha) order statistic
    of the restricted maxima as the critical value, and reject every survivor
    whose observed |sqrt(T) xbar_j| strictly exceeds it. No re-simulation is
    performed; the same replicates are reused in every iteration.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must be in (0, 1)")
    _check_match(panel, run)
    if run.config.statistic_mode != "abs_max":
        raise ConfigError(
            "stepdown is defined for the two-sided abs_max statistic, "
            f"but the run used {run.config.statistic_mode!r}"
        )
    obs = math.sqrt(panel.t_obs) * panel.estimation.mean(axis=0)
    abs_obs = np.abs(obs)
    abs_boot = np.abs(math.sqrt(run.t_obs) * run.boot_means)

    surviving = list(range(panel.n_series))
    rejected: list[tuple[int, int, float]] = []
    critical_values: list[float] = []
    iteration = 0
    while surviving:
        iteration += 1
        restricted_q = abs_boot[:, surviving].max(axis=1)
        crit = EmpiricalDistribution(samples=restricted_q).quantile(1.0 - alpha)
        critical_values.append(crit)
        newly = [j for j in surviving if abs_obs[j] > crit]
        if not newly:
            break
        rejected.extend((j, iteration, float(abs_obs[j])) for j in newly)
        surviving = [j for j in surviving if j not in newly]
    return StepdownResult(
        rejected=rejected,
        retained=surviving,
        critical_values=critical_values,
        alpha=alpha,
        iterations=iteration,
    )
