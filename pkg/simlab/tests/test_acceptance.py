"""
Monte Carlo acceptance runs at desk scale (n=500 per site, 200 replications unless
stated). Select with ``pytest -m slow``.
"""

import os

import numpy as np
import pytest

from fusion.config import EstimationConfig
from fusion.estimators import run_eco_ate
from fusion.federation import source_round1
from fusion.federation.protocol import protocol_feature_spec
from fusion.services.covariate_shift import fit_covariate_tilt
from fusion.services.gradient import GradientContext, ShiftFamily
from fusion.services.nuisance import TargetModels, fit_nuisances
from fusion.services.outcome_shift import WeightModel, estimate_normalizer
from simlab.enums import EstimatorName, ExecutorKind
from simlab.services.monte_carlo import run_monte_carlo
from simlab.services.scenario import (
    EPSILON_GRID,
    TRUE_ATE,
    SimScenario,
    sample_scenario,
    true_basis,
    true_values,
)

pytestmark = [pytest.mark.slow, pytest.mark.timeout(7200)]

WORKERS = max((os.cpu_count() or 2) - 1, 1)
DESK_ESTIMATORS = [
    EstimatorName.TARGET_ONLY,
    EstimatorName.NAIVE,
    EstimatorName.ECO_ATE_ALL,
    EstimatorName.ECO_ATE_ALL_OVERPARAM,
    EstimatorName.ORACLE,
]
_CACHE = {}


def desk_results(epsilon, n=500, replications=200):
    key = (epsilon, n, replications)
    if key not in _CACHE:
        scenario = SimScenario(
            epsilon,
            n=n,
            seed=2024,
            estimators=[str(name) for name in DESK_ESTIMATORS],
            replications=replications,
        )
        _CACHE[key] = run_monte_carlo(
            scenario,
            workers=WORKERS,
            executor=ExecutorKind.PROCESS,
            config=EstimationConfig(),
        )
    return _CACHE[key]


def estimates(results, estimator):
    rows = results[(results["estimator"] == estimator) & (results["failed"] == 0)]
    return rows["estimate"].to_numpy(dtype=float)


def mc_standard_error(values):
    return values.std(ddof=1) / np.sqrt(values.shape[0])


class TestConsistency:
    """Test unbiasedness of ECO-ATE at the analytic truth."""

    @pytest.mark.parametrize("epsilon", [0.0, 0.5, 1.1])
    def test_eco_ate_all_unbiased(self, epsilon):
        """Test |mean − 1| ≤ 3 MC standard errors."""
        values = estimates(desk_results(epsilon), EstimatorName.ECO_ATE_ALL)

        assert abs(values.mean() - TRUE_ATE) <= 3 * mc_standard_error(values)

    def test_overparametrized_bases(self):
        """Test that enlarged bases stay unbiased and beat the target alone."""
        results = desk_results(1.0)
        values = estimates(results, EstimatorName.ECO_ATE_ALL_OVERPARAM)
        target_only = estimates(results, EstimatorName.TARGET_ONLY)

        assert abs(values.mean() - TRUE_ATE) <= 3 * mc_standard_error(values)
        assert values.var(ddof=1) <= 1.10 * target_only.var(ddof=1)


class TestEfficiency:
    """Test variance comparisons between estimators."""

    @pytest.mark.parametrize("epsilon", EPSILON_GRID)
    def test_no_negative_transfer(self, epsilon):
        """Test that using the sources never inflates the variance past 10%."""
        results = desk_results(epsilon)
        fused = estimates(results, EstimatorName.ECO_ATE_ALL)
        target_only = estimates(results, EstimatorName.TARGET_ONLY)

        assert fused.var(ddof=1) <= 1.10 * target_only.var(ddof=1)

    @pytest.mark.parametrize("epsilon", [0.0, 1.0])
    def test_privacy_cost(self, epsilon):
        """Test that the federated variance is within 15% of the pooled oracle."""
        results = desk_results(epsilon)
        fused = estimates(results, EstimatorName.ECO_ATE_ALL)
        oracle = estimates(results, EstimatorName.ORACLE)

        assert fused.var(ddof=1) / oracle.var(ddof=1) <= 1.15


class TestNaiveFusion:
    """Test the behavior of pooling without outcome-shift correction."""

    def test_biased_under_outcome_shift(self):
        """Test a bias beyond 5 MC standard errors at epsilon = 1.1."""
        values = estimates(desk_results(1.1), EstimatorName.NAIVE)

        assert abs(values.mean() - TRUE_ATE) > 5 * mc_standard_error(values)

    def test_best_without_shift(self):
        """Test unbiasedness and the smallest variance at epsilon = 0."""
        results = desk_results(0.0)
        values = estimates(results, EstimatorName.NAIVE)

        assert abs(values.mean() - TRUE_ATE) <= 3 * mc_standard_error(values)
        for name in DESK_ESTIMATORS:
            assert values.var(ddof=1) <= estimates(results, name).var(ddof=1)


class TestCoverage:
    """Test nominal coverage at the full sample size."""

    @pytest.mark.parametrize("epsilon", [0.0, 1.0])
    def test_eco_ate_all_coverage(self, epsilon):
        """Test coverage in [0.92, 0.98] over 500 replications with n=2000."""
        results = desk_results(epsilon, n=2000, replications=500)
        rows = results[
            (results["estimator"] == EstimatorName.ECO_ATE_ALL) & (results["failed"] == 0)
        ]

        assert 0.92 <= rows["covered"].mean() <= 0.98


class TestBetaRecovery:
    """Test recovery of the outcome-shift parameters."""

    @pytest.mark.parametrize("epsilon", [0.5, 1.0])
    def test_source_two(self, epsilon):
        """Test that β̂ of source 2 averages within 0.15 of −epsilon."""
        scenario = SimScenario(epsilon, n=2000, k=2, seed=99)
        config = EstimationConfig()
        betas = []
        for replicate in range(50):
            target, _, source = sample_scenario(scenario, replicate)
            report = run_eco_ate(target, [(source, true_basis("2"))], config)
            diagnostics = report.diagnostics["sources"]["2"]
            assert diagnostics["residual"] < 1e-8
            betas.append(diagnostics["beta"][0])

        assert np.mean(betas) == pytest.approx(-epsilon, abs=0.15)


class TestEfficientScore:
    """Test the efficient score at the true β on one large sample."""

    def test_pooled_mean_is_zero(self):
        """Test that every pooled ℓ̇* component lies within 4 MC standard errors of 0."""
        scenario = SimScenario(1.0, n=20000, k=3, seed=7)
        datasets = sample_scenario(scenario, 0)
        target, sources = datasets[0], datasets[1:]
        _, betas = true_values(scenario)
        config = EstimationConfig()
        feature_spec = protocol_feature_spec(target.dimension, config)
        target_models = TargetModels(target, config)
        bases = {data.site_id: true_basis(data.site_id) for data in sources}
        weights = WeightModel(bases, {site_id: betas[site_id] for site_id in bases})
        lambdas, normalizers = {}, {}
        for data in sources:
            site_id = data.site_id
            summary = source_round1(data, bases[site_id], config, feature_spec)
            lambdas[site_id] = fit_covariate_tilt(
                target, summary.moments, data.n, feature_spec
            )
            normalizers[site_id] = estimate_normalizer(
                target,
                weights,
                site_id,
                betas[site_id],
                target_models.regression,
                config.normalizer_floor,
            )
        sizes = {data.site_id: data.n for data in datasets}
        family = ShiftFamily(sizes, weights, normalizers, lambdas)
        nuisances, _ = fit_nuisances(family, target_models, config)

        scores = np.vstack(
            [
                GradientContext(family, nuisances, data, config).efficient_score()
                for data in datasets
            ]
        )

        standard_errors = scores.std(axis=0, ddof=1) / np.sqrt(scores.shape[0])
        assert scores.shape == (4 * 20000, 4)
        assert np.all(np.abs(scores.mean(axis=0)) <= 4 * standard_errors)
