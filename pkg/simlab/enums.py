"""Enum classes for the simlab app."""

from django.db import models


class EstimatorName(models.TextChoices):
    """Estimators a simulation can run on every replication."""

    TARGET_ONLY = "target_only", "Target-only AIPW"
    NAIVE = "naive", "Naive fusion"
    ECO_ATE_1 = "eco_ate_1", "ECO-ATE with source 1"
    ECO_ATE_2 = "eco_ate_2", "ECO-ATE with source 2"
    ECO_ATE_3 = "eco_ate_3", "ECO-ATE with source 3"
    ECO_ATE_ALL = "eco_ate_all", "ECO-ATE with every source"
    ECO_ATE_ALL_OVERPARAM = "eco_ate_all_overparam", "ECO-ATE, enlarged bases"
    ORACLE = "oracle", "Oracle pooled ECO-ATE"
    META_IVW = "meta_ivw", "Inverse-variance meta-analysis"


class ExecutorKind(models.TextChoices):
    """How replications are spread over workers."""

    PROCESS = "process", "Process pool"
    THREAD = "thread", "Thread pool"


class Profile(models.TextChoices):
    DESK = "desk", "Desk scale (n=500, 200 replications)"
    FULL = "full", "Full scale (n=2000, 1000 replications)"


class RunStatus(models.TextChoices):
    """Processing status choices for SimulationRun."""

    PENDING = "pending", "Pending"
    RUNNING = "running", "Running"
    COMPLETED = "completed", "Completed"
    FAILED = "failed", "Failed"
