from django.conf import settings

from common.exceptions import ConfigurationError
from fusion.enums import BetaMethod, FusionWeighting, ScoreCentering, SourcePolicy


class EstimationConfig:
    """Estimation knobs shared by every site of one protocol run.

    Defaults come from ``settings.ECO_ATE``; ``replace`` returns a copy with selected
    fields overridden (CLI flags, config files, test fixtures).
    """

    FIELDS = {
        "sieve_degree": int,
        "ridge": float,
        "propensity_clamp": float,
        "kernel_bandwidth": float,
        "fusion_weighting": str,
        "source_policy": str,
        "overlap_warn_ratio": float,
        "normalizer_floor": float,
        "pinv_tol": float,
        "score_centering": str,
        "round_timeout": float,
        "feature_degree": int,
        "beta_method": str,
    }

    DEFAULTS = {
        "sieve_degree": 3,
        "ridge": 1e-8,
        "propensity_clamp": 0.01,
        "kernel_bandwidth": None,
        "fusion_weighting": FusionWeighting.UNIFORM.value,
        "source_policy": SourcePolicy.EXCLUDE.value,
        "overlap_warn_ratio": 100.0,
        "normalizer_floor": 1e-6,
        "pinv_tol": 1e-10,
        "score_centering": ScoreCentering.KERNEL.value,
        "round_timeout": 60.0,
        "feature_degree": 2,
        "beta_method": BetaMethod.MOMENTS.value,
    }

    CHOICES = {
        "fusion_weighting": FusionWeighting.values,
        "source_policy": SourcePolicy.values,
        "score_centering": ScoreCentering.values,
        "beta_method": BetaMethod.values,
    }

    def __init__(self, **values):
        unknown = set(values) - set(self.FIELDS)
        if unknown:
            raise ConfigurationError(
                f"Unknown estimation setting '{sorted(unknown)[0]}'",
                details={"unknown": sorted(unknown)},
            )
        merged = {**self.DEFAULTS, **values}
        for name, caster in self.FIELDS.items():
            value = merged[name]
            if value is not None:
                try:
                    value = caster(value)
                except (TypeError, ValueError) as exc:
                    raise ConfigurationError(
                        f"Invalid value for '{name}': {value!r}"
                    ) from exc
            if name in self.CHOICES and value not in self.CHOICES[name]:
                raise ConfigurationError(
                    f"Invalid value for '{name}': {value!r} "
                    f"(expected one of {', '.join(self.CHOICES[name])})"
                )
            setattr(self, name, value)
        self._validate()

    def _validate(self):
        if self.sieve_degree < 0:
            raise ConfigurationError("'sieve_degree' must be >= 0")
        if not 0 < self.propensity_clamp < 0.5:
            raise ConfigurationError("'propensity_clamp' must lie in (0, 0.5)")
        if self.ridge <= 0:
            raise ConfigurationError("'ridge' must be positive")
        if self.kernel_bandwidth is not None and self.kernel_bandwidth <= 0:
            raise ConfigurationError("'kernel_bandwidth' must be positive")
        if self.normalizer_floor <= 0:
            raise ConfigurationError("'normalizer_floor' must be positive")

    @classmethod
    def from_settings(cls, **overrides):
        """Build from ``settings.ECO_ATE`` with keyword overrides."""
        configured = getattr(settings, "ECO_ATE", {})
        values = {}
        for name in cls.FIELDS:
            key = name.upper()
            if key in configured:
                values[name] = configured[key]
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def replace(self, **overrides):
        values = self.to_dict()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return type(self)(**values)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.FIELDS}

    def __eq__(self, other):
        return isinstance(other, EstimationConfig) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"EstimationConfig({self.to_dict()})"
