"""
Simulation scenarios: the data-generating process, its analytic truths and the
weight bases of the three sources.

Covariates are 1 + Beta(0.5·s + 4, 5) at site s, treatment is Bernoulli(0.5) and the
outcome is Gamma with rate 2x and shape

    (2 − ε/2·1(s=1))·(x + x·a) − ε·1(s=2)·a − ε·1(s=3)·x·a

so the target mean of Y given (a, x) is 1 + a and the ATE is 1 for every ε. With a
shared rate the density ratio of a source to the target is an exponential tilt in
log y, which gives each source a distinct weight basis.
"""

import numpy as np

from common.expr import BasisVector
from fusion.datasets import TARGET_SITE, SiteDataset
from simlab.enums import EstimatorName, Profile
from simlab.exceptions import InvalidShapeError, SimulationError

EPSILON_GRID = (0.0, 0.5, 0.7, 1.0, 1.1)

PROFILES = {
    Profile.DESK: {"n": 500, "replications": 200},
    Profile.FULL: {"n": 2000, "replications": 1000},
}

TRUE_ATE = 1.0

TRUE_FORMS = {
    "1": ("x1*log(y)", "x1*a*log(y)"),
    "2": ("a*log(y)",),
    "3": ("x1*a*log(y)",),
}

# Redundant terms with true coefficient 0.
OVERPARAM_FORMS = {
    "1": ("log(y)", "a*log(y)"),
    "2": ("x1*log(y)", "x1*a*log(y)"),
    "3": ("log(y)", "x1*log(y)"),
}

SOURCE_ESTIMATORS = {
    EstimatorName.ECO_ATE_1: "1",
    EstimatorName.ECO_ATE_2: "2",
    EstimatorName.ECO_ATE_3: "3",
}


class SimScenario:
    """One cell of the simulation grid.

    Parameters
    ----------
    epsilon : float
        Strength of the outcome shift between the target and the sources
    n : int
        Records per site (at least 50)
    k : int
        Number of sources, 1 to 3; sources are ``"1"`` .. ``"k"``
    seed : int
        Non-negative base seed of the replication streams
    estimators : list, optional
        Estimator names; defaults to every estimator the ``k`` sources support
    overparametrized : bool
        Run every ECO-ATE variant with the enlarged bases
    fusion_weighting : str, optional
        Overrides the configured fusion weighting
    replications : int
        Monte Carlo replications of a run
    """

    def __init__(
        self,
        epsilon,
        n=500,
        k=3,
        seed=0,
        estimators=None,
        overparametrized=False,
        fusion_weighting=None,
        replications=200,
    ):
        self.epsilon = float(epsilon)
        self.n = int(n)
        self.k = int(k)
        self.seed = int(seed)
        self.overparametrized = bool(overparametrized)
        self.fusion_weighting = fusion_weighting
        self.replications = int(replications)
        if estimators is None:
            estimators = [
                name
                for name in EstimatorName.values
                if name not in SOURCE_ESTIMATORS or int(SOURCE_ESTIMATORS[name]) <= self.k
            ]
        self.estimators = [str(name) for name in estimators]
        self._validate()

    def _validate(self):
        if not np.isfinite(self.epsilon):
            raise SimulationError(f"epsilon must be finite, got {self.epsilon}")
        if self.n < 50:
            raise SimulationError(f"n must be at least 50, got {self.n}")
        if not 1 <= self.k <= 3:
            raise SimulationError(f"k must lie between 1 and 3, got {self.k}")
        if self.seed < 0:
            raise SimulationError(f"seed must be non-negative, got {self.seed}")
        if self.replications < 1:
            raise SimulationError("replications must be at least 1")
        unknown = [name for name in self.estimators if name not in EstimatorName.values]
        if unknown:
            raise SimulationError(
                f"Unknown estimator '{unknown[0]}'",
                details={"choices": list(EstimatorName.values)},
            )
        for name in self.estimators:
            source = SOURCE_ESTIMATORS.get(name)
            if source is not None and int(source) > self.k:
                raise SimulationError(
                    f"{name} needs source {source}, scenario has k={self.k}"
                )

    @classmethod
    def from_profile(cls, profile, epsilon, **overrides):
        """Scenario with the sizes of a named profile, then ``overrides``."""
        values = dict(PROFILES[Profile(profile)])
        given = {key: value for key, value in overrides.items() if value is not None}
        values.update(given)
        return cls(epsilon, **values)

    @property
    def source_ids(self):
        return [str(site) for site in range(1, self.k + 1)]

    def replace(self, **overrides):
        values = self.to_dict()
        values.update(overrides)
        return type(self)(**values)

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            "estimators": list(self.estimators),
            "overparametrized": self.overparametrized,
            "fusion_weighting": self.fusion_weighting,
            "replications": self.replications,
        }

    @classmethod
    def from_dict(cls, values):
        return cls(**values)

    def __eq__(self, other):
        return isinstance(other, SimScenario) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return (
            f"SimScenario(epsilon={self.epsilon}, n={self.n}, k={self.k}, "
            f"seed={self.seed})"
        )


def gamma_shape(site, X, A, epsilon):
    """Gamma shape of every record of ``site`` (0 is the target)."""
    x = X[:, 0]
    scale = 2.0 - epsilon / 2.0 if site == 1 else 2.0
    shape = scale * (x + x * A)
    if site == 2:
        shape = shape - epsilon * A
    elif site == 3:
        shape = shape - epsilon * x * A
    return shape


def replicate_streams(scn, replicate):
    """Independent generators of the target and every source for one replication.

    Streams depend on ``(seed, replicate)`` only, so replications can run in any
    order on any worker.
    """
    children = np.random.SeedSequence([scn.seed, int(replicate)]).spawn(scn.k + 1)
    return [np.random.default_rng(child) for child in children]


def sample_scenario(scn, replicate):
    """Draw the target and the ``k`` source datasets of one replication.

    Parameters
    ----------
    scn : SimScenario
        Scenario to sample
    replicate : int
        Replication index

    Returns
    -------
    list of SiteDataset
        Target (site ``"0"``) followed by sources ``"1"`` .. ``"k"``

    Raises
    ------
    InvalidShapeError
        If some record gets a non-positive Gamma shape
    """
    datasets = []
    for site, rng in enumerate(replicate_streams(scn, replicate)):
        X = 1.0 + rng.beta(0.5 * site + 4.0, 5.0, size=(scn.n, 1))
        A = rng.binomial(1, 0.5, size=scn.n).astype(float)
        shape = gamma_shape(site, X, A, scn.epsilon)
        if np.any(shape <= 0):
            raise InvalidShapeError(
                f"epsilon={scn.epsilon} gives a non-positive Gamma shape at site {site}",
                details={"site": site, "min_shape": float(shape.min())},
            )
        Y = rng.gamma(shape, 1.0 / (2.0 * X[:, 0]))
        site_id = TARGET_SITE if site == 0 else str(site)
        datasets.append(SiteDataset(site_id, X, A, Y))
    return datasets


def true_basis(source_id, overparametrized=False):
    """Weight basis of a source, optionally enlarged with zero-coefficient terms."""
    forms = list(TRUE_FORMS[str(source_id)])
    if overparametrized:
        forms.extend(OVERPARAM_FORMS[str(source_id)])
    return BasisVector.parse(forms, 1)


def overparam_basis(source_id):
    return true_basis(source_id, overparametrized=True)


def true_values(scn, overparametrized=False):
    """Analytic ATE and the true β of every source.

    Returns
    -------
    tuple
        ``(ate, betas)`` with ``betas`` mapping source ids to arrays ordered like
        ``true_basis(source_id, overparametrized)``
    """
    epsilon = scn.epsilon
    betas = {
        "1": np.array([-epsilon / 2.0, -epsilon / 2.0]),
        "2": np.array([-epsilon]),
        "3": np.array([-epsilon]),
    }
    betas = {site_id: betas[site_id] for site_id in scn.source_ids}
    if overparametrized:
        betas = {
            site_id: np.concatenate([beta, np.zeros(len(OVERPARAM_FORMS[site_id]))])
            for site_id, beta in betas.items()
        }
    return TRUE_ATE, betas
