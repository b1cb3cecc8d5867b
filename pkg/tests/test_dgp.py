import math

import numpy as np
import pytest
import scipy.stats

from hdvarboot import ErrorSpec, SparsePattern, VarModel, generate_var_model, simulate_panel
from hdvarboot.errors import ConfigError, NonStationaryError
from hdvarboot.linproc import build_companion, long_run_covariance, spectral_radius, vma_from_var

from util import companion_radius


class TestErrorSpec:
    def test_student_t_needs_dof_above_four(self):
        with pytest.raises(ConfigError):
            ErrorSpec(family="scaled_student_t", dof=4)
        ErrorSpec(family="scaled_student_t", dof=6)

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            ErrorSpec(family="cauchy")


class TestSparsePattern:
    def test_decay_bounds(self):
        with pytest.raises(ConfigError):
            SparsePattern(decay_across_lags=0.0)
        with pytest.raises(ConfigError):
            SparsePattern(decay_across_lags=1.5)


class TestGenerateVarModel:
    def test_scalar_diagonal(self):
        pat = SparsePattern(kind="diagonal", per_row_nonzeros=1, magnitude=0.9)
        model = generate_var_model(1, 1, pat, target_rho=0.5, seed=0)
        np.testing.assert_allclose(model.a_mats[0], [[0.5]], atol=1e-12)

    def test_diagonal_radius_is_max_entry(self):
        pat = SparsePattern(kind="diagonal", per_row_nonzeros=1, magnitude=0.3)
        model = generate_var_model(3, 1, pat, target_rho=0.6, seed=1)
        a = model.a_mats[0]
        assert np.count_nonzero(a - np.diag(np.diag(a))) == 0
        assert np.max(np.abs(np.diag(a))) == pytest.approx(0.6, abs=1e-6)

    @pytest.mark.parametrize("kind", ["banded", "random_support", "diagonal"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_target_radius_hit(self, kind, seed):
        pat = SparsePattern(kind=kind, per_row_nonzeros=2, magnitude=0.5,
                            decay_across_lags=0.8)
        model = generate_var_model(10, 2, pat, target_rho=0.7, seed=seed)
        assert companion_radius(model) == pytest.approx(0.7, abs=1e-6)

    def test_support_budget_respected(self):
        pat = SparsePattern(kind="random_support", per_row_nonzeros=3, magnitude=0.4)
        model = generate_var_model(6, 2, pat, target_rho=0.5, seed=4)
        stacked = model.stacked()
        assert np.all((stacked != 0).sum(axis=1) <= 3)

    def test_infeasible_budget_rejected(self):
        pat = SparsePattern(kind="random_support", per_row_nonzeros=7, magnitude=0.4)
        with pytest.raises(ConfigError):
            generate_var_model(2, 3, pat, target_rho=0.5, seed=0)

    def test_deterministic(self):
        pat = SparsePattern(kind="random_support", per_row_nonzeros=2, magnitude=0.4)
        a = generate_var_model(5, 2, pat, target_rho=0.6, seed=9)
        b = generate_var_model(5, 2, pat, target_rho=0.6, seed=9)
        for ma, mb in zip(a.a_mats, b.a_mats):
            np.testing.assert_array_equal(ma, mb)

    def test_bad_target(self):
        pat = SparsePattern()
        with pytest.raises(ConfigError):
            generate_var_model(3, 1, pat, target_rho=1.2, seed=0)


class TestSimulatePanel:
    def test_white_noise_covariance(self):
        model = VarModel(a_mats=[np.zeros((3, 3))], n=3, k=1)
        panel, errs = simulate_panel(model, 20000, ErrorSpec(), seed=2)
        cov = np.cov(panel.estimation.T)
        np.testing.assert_allclose(cov, np.eye(3), atol=0.05)
        np.testing.assert_allclose(panel.estimation, errs)

    def test_ar1_variance_oracle(self):
        # Var = sigma^2 / (1 - a^2) = 4/3; tolerance 3 SEs of the variance estimate
        t_len = 40000
        model = VarModel(a_mats=[np.array([[0.5]])], n=1, k=1)
        panel, _ = simulate_panel(model, t_len, ErrorSpec(), seed=3)
        x = panel.estimation[:, 0]
        target = 1.0 / (1.0 - 0.25)
        # Var(s^2) ~ 2 sigma^4 / T_eff with T_eff = T (1-a^2)/(1+a^2) for AR(1)
        se = math.sqrt(2.0 * target**2 / (t_len * (1 - 0.25) / (1 + 0.25)))
        assert abs(x.var() - target) <= 3.0 * se

    def test_deterministic(self):
        model = VarModel(a_mats=[0.4 * np.eye(2)], n=2, k=1)
        p1, e1 = simulate_panel(model, 100, ErrorSpec(), seed=11)
        p2, e2 = simulate_panel(model, 100, ErrorSpec(), seed=11)
        np.testing.assert_array_equal(p1.data, p2.data)
        np.testing.assert_array_equal(e1, e2)

    def test_nonstationary_refused(self):
        model = VarModel(a_mats=[np.array([[1.05]])], n=1, k=1)
        with pytest.raises(NonStationaryError):
            simulate_panel(model, 50, ErrorSpec(), seed=0)

    def test_errors_align_to_estimation_rows(self):
        model = VarModel(a_mats=[np.array([[0.7]])], n=1, k=1)
        panel, errs = simulate_panel(model, 200, ErrorSpec(), seed=5)
        recon = panel.data[1:, 0] - 0.7 * panel.data[:-1, 0]
        np.testing.assert_allclose(recon, errs[:, 0], atol=1e-12)

    def test_lag0_autocovariance_matches_vma_implied(self):
        model = VarModel(a_mats=[np.array([[0.5, 0.2], [0.1, 0.3]])], n=2, k=1)
        vma = vma_from_var(model)
        implied = sum(b @ b.T for b in vma.coeffs)  # sigma_eps = I
        panel, _ = simulate_panel(model, 60000, ErrorSpec(), seed=6)
        sample = np.cov(panel.estimation.T, bias=True)
        np.testing.assert_allclose(sample, implied, atol=4.0 * implied.max() / math.sqrt(60000 / 6))

    def test_student_t_standardized(self):
        model = VarModel(a_mats=[np.zeros((2, 2))], n=2, k=1)
        _, errs = simulate_panel(model, 60000, ErrorSpec(family="scaled_student_t", dof=6),
                                 seed=7)
        # unit target variance within 3 SEs; t_6 has excess kurtosis 3
        se = math.sqrt((2.0 + 3.0) / 60000)
        for j in range(2):
            assert abs(errs[:, j].var() - 1.0) <= 3.0 * se

    def test_rademacher_values(self):
        model = VarModel(a_mats=[np.zeros((1, 1))], n=1, k=1)
        _, errs = simulate_panel(model, 500, ErrorSpec(family="rademacher_scaled"), seed=8)
        assert set(np.unique(errs)) <= {-1.0, 1.0}

    def test_error_cross_correlation(self):
        rho = 0.6
        sig = np.array([[1.0, rho], [rho, 1.0]])
        model = VarModel(a_mats=[np.zeros((2, 2))], n=2, k=1)
        _, errs = simulate_panel(model, 40000, ErrorSpec(sigma_eps=sig), seed=9)
        got = np.corrcoef(errs.T)[0, 1]
        assert got == pytest.approx(rho, abs=0.02)

    def test_burn_in_invariance(self):
        # shared end-indexed error streams: the same seed with a longer burn-in
        # yields statistically indistinguishable samples (KS test at 1%)
        model = VarModel(a_mats=[np.array([[0.8]])], n=1, k=1)
        p_short, _ = simulate_panel(model, 4000, ErrorSpec(), burn_in=500, seed=10)
        p_long, _ = simulate_panel(model, 4000, ErrorSpec(), burn_in=1000, seed=10)
        ks = scipy.stats.ks_2samp(p_short.estimation[:, 0], p_long.estimation[:, 0])
        assert ks.pvalue > 0.01
        # moments agree closely because the retained-window innovations coincide
        assert abs(p_short.estimation.mean() - p_long.estimation.mean()) < 0.05
        assert abs(p_short.estimation.var() - p_long.estimation.var()) < 0.2

    def test_burn_in_shares_retained_innovations(self):
        model = VarModel(a_mats=[np.array([[0.5]])], n=1, k=1)
        _, e_short = simulate_panel(model, 300, ErrorSpec(), burn_in=64, seed=12)
        _, e_long = simulate_panel(model, 300, ErrorSpec(), burn_in=640, seed=12)
        np.testing.assert_array_equal(e_short, e_long)
