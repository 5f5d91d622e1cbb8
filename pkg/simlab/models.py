from django.db import models

from simlab.enums import RunStatus


class Timestamped(models.Model):
    """Abstract base adding creation and modification times."""

    created = models.DateTimeField(auto_now_add=True)
    modified = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True


class SimulationRun(Timestamped):
    """Model representing one Monte Carlo run of a simulation scenario.

    The scenario is stored as its JSON dictionary together with the build identifier
    and the timings, which is enough to rerun it byte for byte.
    """

    scenario = models.JSONField()
    estimation = models.JSONField(default=dict, blank=True)
    status = models.CharField(
        max_length=20, choices=RunStatus.choices, default=RunStatus.PENDING
    )
    build_id = models.CharField(max_length=100, blank=True, default="")
    replications = models.PositiveIntegerField(default=0)
    failure_count = models.PositiveIntegerField(default=0)
    started_at = models.DateTimeField(null=True, blank=True)
    finished_at = models.DateTimeField(null=True, blank=True)
    error = models.TextField(blank=True, default="")

    class Meta:
        ordering = ["-created"]
        db_table = "simlab_simulationrun"

    def __str__(self):
        return f"Run {self.pk} (epsilon={self.epsilon}, {self.status})"

    @property
    def epsilon(self):
        return self.scenario.get("epsilon")

    @property
    def duration_seconds(self):
        """Return the wall time of the run.

        Returns
        -------
        float or None
            Seconds between start and finish, None while the run is unfinished
        """
        if self.started_at is None or self.finished_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()


class ReplicationResult(Timestamped):
    """One estimator's report on one replication of a run."""

    run = models.ForeignKey(
        SimulationRun, on_delete=models.CASCADE, related_name="results"
    )
    estimator = models.CharField(max_length=50)
    epsilon = models.FloatField()
    seed = models.BigIntegerField()
    replicate = models.PositiveIntegerField()
    estimate = models.FloatField(null=True, blank=True)
    se = models.FloatField(null=True, blank=True)
    ci_lo = models.FloatField(null=True, blank=True)
    ci_hi = models.FloatField(null=True, blank=True)
    covered = models.BooleanField(null=True, blank=True)
    sources_used = models.CharField(max_length=255, blank=True, default="")
    failed = models.BooleanField(default=False)
    error = models.TextField(blank=True, default="")

    class Meta:
        ordering = ["run", "replicate", "estimator"]
        unique_together = ["run", "estimator", "epsilon", "replicate"]
        db_table = "simlab_replicationresult"

    def __str__(self):
        return f"{self.estimator} #{self.replicate} (run {self.run_id})"
