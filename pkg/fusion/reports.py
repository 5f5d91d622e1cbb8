"""
Estimate reports shared by every estimator and by the federation protocol.
"""

import json

import numpy as np

Z_95 = 1.96

RESULT_COLUMNS = [
    "estimator",
    "epsilon",
    "seed",
    "replicate",
    "estimate",
    "se",
    "ci_lo",
    "ci_hi",
    "covered",
    "sources_used",
    "failed",
    "error",
]


def to_plain(value):
    """Convert numpy containers and scalars to JSON-ready Python values."""
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


class EstimateReport:
    """Point estimate of the target ATE with its 95% confidence interval.

    Parameters
    ----------
    estimator : str
        Estimator name (``eco_ate``, ``target_only``, ``naive``, ...)
    estimate : float
        Point estimate in outcome units
    se : float
        Standard error (non-negative)
    sources_used : list, optional
        Source ids whose data entered the estimate
    diagnostics : dict, optional
        β̂, clamp counts, overlap ratios, solver iterations, exclusions
    n_total : int, optional
        Number of records across the sites used
    """

    def __init__(
        self, estimator, estimate, se, sources_used=None, diagnostics=None, n_total=None
    ):
        se = float(se)
        if se < 0 or not np.isfinite(se):
            raise ValueError(f"Standard error must be finite and non-negative, got {se}")
        self.estimator = estimator
        self.estimate = float(estimate)
        self.se = se
        self.sources_used = list(sources_used or [])
        self.diagnostics = to_plain(diagnostics or {})
        self.n_total = n_total

    @property
    def ci(self):
        return (self.estimate - Z_95 * self.se, self.estimate + Z_95 * self.se)

    def covers(self, truth):
        lower, upper = self.ci
        return lower <= truth <= upper

    def to_dict(self):
        lower, upper = self.ci
        return {
            "estimator": self.estimator,
            "estimate": self.estimate,
            "se": self.se,
            "ci": [lower, upper],
            "sources_used": self.sources_used,
            "n_total": self.n_total,
            "diagnostics": self.diagnostics,
        }

    def to_json(self):
        """Canonical JSON; identical inputs give identical bytes."""
        return json.dumps(
            self.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False
        )

    @classmethod
    def from_dict(cls, payload):
        return cls(
            payload["estimator"],
            payload["estimate"],
            payload["se"],
            payload.get("sources_used"),
            payload.get("diagnostics"),
            payload.get("n_total"),
        )

    def to_row(self, epsilon=None, seed=None, replicate=None, truth=None):
        """One results-table row."""
        lower, upper = self.ci
        return {
            "estimator": self.estimator,
            "epsilon": epsilon,
            "seed": seed,
            "replicate": replicate,
            "estimate": self.estimate,
            "se": self.se,
            "ci_lo": lower,
            "ci_hi": upper,
            "covered": None if truth is None else int(self.covers(truth)),
            "sources_used": ";".join(self.sources_used),
            "failed": 0,
            "error": "",
        }

    def __str__(self):
        lower, upper = self.ci
        used = ", ".join(self.sources_used) or "none"
        return (
            f"{self.estimator}: estimate={self.estimate:.6f} se={self.se:.6f} "
            f"95% CI=[{lower:.6f}, {upper:.6f}] sources={used}"
        )

    def __repr__(self):
        return f"EstimateReport({self.estimator!r}, {self.estimate!r}, {self.se!r})"


def failure_row(estimator, error, epsilon=None, seed=None, replicate=None):
    """Results-table row for an estimator that raised."""
    row = {column: None for column in RESULT_COLUMNS}
    row.update(
        {
            "estimator": estimator,
            "epsilon": epsilon,
            "seed": seed,
            "replicate": replicate,
            "sources_used": "",
            "failed": 1,
            "error": str(error),
        }
    )
    return row
