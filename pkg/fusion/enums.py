"""Enum classes for the fusion app."""

from django.db import models


class FusionWeighting(models.TextChoices):
    """How per-site gradient summaries are averaged in the final estimate."""

    UNIFORM = "uniform", "Uniform 1/(k+1)"
    SIZE = "size", "Size-weighted n_s/n"


class SourcePolicy(models.TextChoices):
    """What to do with a source whose shift estimation fails or times out."""

    EXCLUDE = "exclude", "Exclude with warning"
    ABORT = "abort", "Abort estimation"


class ScoreCentering(models.TextChoices):
    """Estimator for E[xi | a, x, S = s_obs] inside the efficient score."""

    KERNEL = "kernel", "Site-local kernel regression"
    BROADCAST = "broadcast", "Broadcast alignment model"


class BetaMethod(models.TextChoices):
    """Estimating equation for the outcome-shift parameters."""

    MOMENTS = "moments", "Moment matching"
    LIKELIHOOD = "likelihood", "Conditional likelihood score"


class SiteRole(models.TextChoices):
    TARGET = "target", "Target"
    SOURCE = "source", "Source"


class MessageKind(models.TextChoices):
    """Protocol rounds; each also names a transport directory."""

    ROUND1 = "round1", "Round 1 uplink"
    BROADCAST = "broadcast", "Target broadcast"
    ROUND2 = "round2", "Round 2 uplink"
