import factory
import numpy as np

from fusion.datasets import SiteDataset


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(3)
    return [np.random.default_rng(child) for child in children]


class SiteDatasetFactory(factory.Factory):
    """Factory for creating SiteDataset instances.

    Covariates are 1 + Beta(4, 5), treatment is Bernoulli(0.5) and the outcome is
    Gamma with shape 2·x1·(1 + a)·``shape_scale`` and rate 2·x1, so E[Y | a, x] =
    (1 + a)·``shape_scale``. Extra covariates beyond x1 are noise.
    """

    site_id = factory.Sequence(lambda index: str(index + 1))
    X = factory.LazyAttribute(
        lambda o: 1.0 + _streams(o.seed)[0].beta(4.0, 5.0, size=(o.n, o.dimension))
    )
    A = factory.LazyAttribute(lambda o: _streams(o.seed)[1].binomial(1, 0.5, size=o.n))
    Y = factory.LazyAttribute(
        lambda o: _streams(o.seed)[2].gamma(
            2.0 * o.X[:, 0] * (1.0 + o.A) * o.shape_scale, 1.0 / (2.0 * o.X[:, 0])
        )
    )

    class Meta:
        model = SiteDataset

    class Params:
        n = 200
        dimension = 1
        seed = factory.Sequence(lambda index: 1000 + index)
        shape_scale = 1.0


class TargetDatasetFactory(SiteDatasetFactory):
    """Factory for the target site (id ``"0"``)."""

    site_id = "0"
