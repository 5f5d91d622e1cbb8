import numpy as np
import pytest

from simlab.enums import EstimatorName, Profile
from simlab.exceptions import InvalidShapeError, SimulationError
from simlab.factories import SimScenarioFactory
from simlab.services.scenario import (
    PROFILES,
    TRUE_ATE,
    SimScenario,
    gamma_shape,
    overparam_basis,
    sample_scenario,
    true_basis,
    true_values,
)


class TestSimScenario:
    """Test scenario construction and validation."""

    def test_default_estimators_follow_k(self):
        """Test that single-source estimators beyond k are left out."""
        scenario = SimScenario(0.5, k=1)

        assert EstimatorName.ECO_ATE_1 in scenario.estimators
        assert EstimatorName.ECO_ATE_2 not in scenario.estimators
        assert scenario.source_ids == ["1"]

    def test_estimator_needs_absent_source(self):
        """Test that an estimator for source 3 needs k = 3."""
        with pytest.raises(SimulationError):
            SimScenario(0.5, k=2, estimators=["eco_ate_3"])

    @pytest.mark.parametrize(
        "overrides",
        [
            {"n": 20},
            {"k": 0},
            {"k": 4},
            {"seed": -1},
            {"replications": 0},
            {"estimators": ["magic"]},
        ],
    )
    def test_invalid_fields(self, overrides):
        """Test rejection of small n, bad k, negative seeds and unknown estimators."""
        with pytest.raises(SimulationError):
            SimScenario(0.5, **overrides)

    def test_infinite_epsilon(self):
        """Test that epsilon must be finite."""
        with pytest.raises(SimulationError):
            SimScenario(float("inf"))

    def test_profile_with_overrides(self):
        """Test that profile sizes apply unless overridden."""
        scenario = SimScenario.from_profile(Profile.FULL, 1.0, replications=10)

        assert scenario.n == PROFILES[Profile.FULL]["n"]
        assert scenario.replications == 10

    def test_dict_round_trip(self):
        """Test that the dictionary form rebuilds an equal scenario."""
        scenario = SimScenarioFactory(overparametrized=True)

        assert SimScenario.from_dict(scenario.to_dict()) == scenario
        assert scenario.replace(epsilon=1.0).epsilon == 1.0


class TestSampleScenario:
    """Test the data-generating process."""

    def test_sites_and_support(self):
        """Test site ids, sizes and the covariate support."""
        scenario = SimScenarioFactory(n=300)

        datasets = sample_scenario(scenario, 0)

        assert [data.site_id for data in datasets] == ["0", "1", "2", "3"]
        for data in datasets:
            assert data.n == 300
            assert np.all((data.X > 1.0) & (data.X < 2.0))
            assert np.all(data.Y > 0)

    def test_target_outcome_mean(self):
        """Test that E[Y | a, S=0] = 1 + a."""
        target = sample_scenario(SimScenarioFactory(n=20000, k=1), 0)[0]

        assert target.Y[target.A == 0].mean() == pytest.approx(1.0, abs=0.03)
        assert target.Y[target.A == 1].mean() == pytest.approx(2.0, abs=0.04)

    def test_replicates_are_reproducible(self):
        """Test that a replication depends on the seed and index only."""
        scenario = SimScenarioFactory(seed=3)

        first = sample_scenario(scenario, 5)
        second = sample_scenario(scenario.replace(replications=50), 5)
        other = sample_scenario(scenario, 6)

        np.testing.assert_array_equal(first[2].Y, second[2].Y)
        assert not np.array_equal(first[2].Y, other[2].Y)

    def test_non_positive_shape(self):
        """Test that a large epsilon gives an invalid Gamma shape."""
        scenario = SimScenarioFactory(epsilon=4.5)

        with pytest.raises(InvalidShapeError) as error:
            sample_scenario(scenario, 0)

        assert error.value.details["min_shape"] <= 0

    def test_gamma_shapes(self):
        """Test the site-specific shapes at x = 1.5, a = 1."""
        X, A = np.array([[1.5]]), np.array([1.0])

        assert gamma_shape(0, X, A, 1.0)[0] == pytest.approx(6.0)
        assert gamma_shape(1, X, A, 1.0)[0] == pytest.approx(4.5)
        assert gamma_shape(2, X, A, 1.0)[0] == pytest.approx(5.0)
        assert gamma_shape(3, X, A, 1.0)[0] == pytest.approx(4.5)


class TestTruths:
    """Test the analytic truths and bases."""

    def test_true_betas(self):
        """Test β of each source at epsilon = 1."""
        ate, betas = true_values(SimScenarioFactory(epsilon=1.0))

        assert ate == TRUE_ATE
        np.testing.assert_array_equal(betas["1"], [-0.5, -0.5])
        np.testing.assert_array_equal(betas["2"], [-1.0])
        np.testing.assert_array_equal(betas["3"], [-1.0])

    def test_overparametrized_betas_pad_zeros(self):
        """Test that the enlarged bases have zero extra coefficients."""
        scenario = SimScenarioFactory(epsilon=1.0, k=2)

        _, betas = true_values(scenario, overparametrized=True)

        assert sorted(betas) == ["1", "2"]
        np.testing.assert_array_equal(betas["2"], [-1.0, 0.0, 0.0])
        assert len(overparam_basis("2")) == 3

    def test_true_basis_forms(self):
        """Test the weight basis of every source."""
        assert true_basis("1").forms == ["x1*log(y)", "x1*a*log(y)"]
        assert true_basis("2").forms == ["a*log(y)"]
        assert true_basis("3").forms == ["x1*a*log(y)"]
