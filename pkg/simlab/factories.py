from datetime import timedelta

import factory

from django.utils import timezone

from simlab.enums import EstimatorName, RunStatus
from simlab.models import ReplicationResult, SimulationRun
from simlab.services.scenario import SimScenario


class SimScenarioFactory(factory.Factory):
    """Factory for small, fast SimScenario instances."""

    epsilon = 0.5
    n = 200
    k = 3
    seed = factory.Sequence(lambda index: 7 + index)
    estimators = factory.LazyFunction(
        lambda: [EstimatorName.TARGET_ONLY.value, EstimatorName.ECO_ATE_ALL.value]
    )
    overparametrized = False
    fusion_weighting = None
    replications = 4

    class Meta:
        model = SimScenario


class SimulationRunFactory(factory.django.DjangoModelFactory):
    """Factory for creating SimulationRun instances."""

    scenario = factory.LazyFunction(lambda: SimScenarioFactory().to_dict())
    estimation = factory.LazyFunction(dict)
    status = RunStatus.COMPLETED
    build_id = "0.1.0+test"
    replications = 2
    started_at = factory.LazyFunction(timezone.now)
    finished_at = factory.LazyAttribute(lambda o: o.started_at + timedelta(seconds=3))

    class Meta:
        model = SimulationRun


class ReplicationResultFactory(factory.django.DjangoModelFactory):
    """Factory for creating ReplicationResult instances with a covering interval."""

    run = factory.SubFactory(SimulationRunFactory)
    estimator = EstimatorName.ECO_ATE_ALL.value
    epsilon = factory.LazyAttribute(lambda o: o.run.scenario["epsilon"])
    seed = factory.LazyAttribute(lambda o: o.run.scenario["seed"])
    replicate = factory.Sequence(lambda index: index)
    estimate = 1.0
    se = 0.1
    ci_lo = factory.LazyAttribute(lambda o: o.estimate - 1.96 * o.se)
    ci_hi = factory.LazyAttribute(lambda o: o.estimate + 1.96 * o.se)
    covered = True
    sources_used = "1;2;3"
    failed = False

    class Meta:
        model = ReplicationResult
