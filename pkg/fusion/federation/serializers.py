"""
Strict schema validation of protocol message payloads.

Every serializer rejects keys it does not declare and every field is typed down to
its scalars, so no field can carry individual-level records between sites.
"""

import numpy as np
from rest_framework import serializers

from common.numerics import SieveBasisSpec
from fusion.enums import (
    BetaMethod,
    FusionWeighting,
    MessageKind,
    ScoreCentering,
    SourcePolicy,
)


class StrictSerializer(serializers.Serializer):
    """Serializer that refuses undeclared keys."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ["Unknown field."] for key in unknown}
                )
        return super().to_internal_value(data)


def vector_field(**kwargs):
    return serializers.ListField(child=serializers.FloatField(), **kwargs)


def matrix_field(**kwargs):
    return serializers.ListField(child=vector_field(allow_empty=True), **kwargs)


def _is_numeric_tree(value):
    if isinstance(value, bool):
        return False
    if isinstance(value, (int, float)):
        return True
    return isinstance(value, list) and all(_is_numeric_tree(item) for item in value)


class NumericArrayField(serializers.Field):
    """Rectangular nested list of finite numbers."""

    default_error_messages = {
        "invalid": "Expected a rectangular nested list of finite numbers.",
    }

    def to_internal_value(self, data):
        if not isinstance(data, list) or not _is_numeric_tree(data):
            self.fail("invalid")
        try:
            array = np.asarray(data, dtype=float)
        except ValueError:
            self.fail("invalid")
        if not np.all(np.isfinite(array)):
            self.fail("invalid")
        return data

    def to_representation(self, value):
        return value


class EnvelopeSerializer(StrictSerializer):
    schema = serializers.CharField()
    kind = serializers.ChoiceField(choices=MessageKind.choices)
    sender = serializers.CharField()
    payload = serializers.DictField()


class Round1Serializer(StrictSerializer):
    """Source -> target: sample size, covariate moments, ξ forms and means."""

    site_id = serializers.CharField()
    n = serializers.IntegerField(min_value=1)
    dimension = serializers.IntegerField(min_value=1)
    moments = vector_field()
    xi_forms = serializers.ListField(child=serializers.CharField(), allow_empty=True)
    xi_mean = vector_field(allow_empty=True)

    def validate(self, attrs):
        if len(attrs["xi_forms"]) != len(attrs["xi_mean"]):
            raise serializers.ValidationError(
                "xi_mean must have one entry per expression in xi_forms"
            )
        return attrs


class Round2DiagnosticsSerializer(StrictSerializer):
    clamped = serializers.IntegerField(min_value=0, required=False)
    overlap_ratio = serializers.FloatField(min_value=0.0, required=False)


class Round2Serializer(StrictSerializer):
    """Site -> target: gradient summaries H, L, I and the variance aggregates."""

    site_id = serializers.CharField()
    n = serializers.IntegerField(min_value=1)
    h = serializers.FloatField()
    l = vector_field(allow_empty=True)  # noqa: E741
    i = matrix_field(allow_empty=True)
    h2 = serializers.FloatField(min_value=0.0)
    hl = vector_field(allow_empty=True)
    diagnostics = Round2DiagnosticsSerializer()

    def validate(self, attrs):
        q = len(attrs["l"])
        if len(attrs["hl"]) != q:
            raise serializers.ValidationError("hl must have the dimension of l")
        if len(attrs["i"]) != q or any(len(row) != q for row in attrs["i"]):
            raise serializers.ValidationError(
                "i must be a square matrix of the dimension of l"
            )
        return attrs


class SiteEntrySerializer(StrictSerializer):
    site_id = serializers.CharField()
    n = serializers.IntegerField(min_value=1)
    probability = serializers.FloatField(min_value=0.0, max_value=1.0)


class WeightEntrySerializer(StrictSerializer):
    site_id = serializers.CharField()
    forms = serializers.ListField(child=serializers.CharField(), allow_empty=True)
    beta = vector_field(allow_empty=True)


class StandardizerSerializer(StrictSerializer):
    center = vector_field()
    scale = vector_field()


class SieveSpecSerializer(StrictSerializer):
    dimension = serializers.IntegerField(min_value=1)
    degree = serializers.IntegerField(min_value=0)
    arm_interaction = serializers.BooleanField()
    pairwise = serializers.BooleanField()


class SieveModelSerializer(StrictSerializer):
    spec = SieveSpecSerializer()
    standardizer = StandardizerSerializer()
    coefficients = NumericArrayField()
    output_shape = serializers.ListField(
        child=serializers.IntegerField(min_value=0), allow_empty=True
    )
    ridge = serializers.FloatField(min_value=0.0)

    def validate(self, attrs):
        terms = SieveBasisSpec.from_payload(attrs["spec"]).n_terms
        expected = (terms,) + tuple(attrs["output_shape"])
        shape = np.shape(attrs["coefficients"])
        if int(np.prod(expected)) == 0:
            matches = shape[:1] == (terms,) and int(np.prod(shape)) == 0
        else:
            matches = shape == expected
        if not matches:
            raise serializers.ValidationError(
                f"coefficients have shape {shape}, expected {expected}"
            )
        return attrs


class LogisticModelSerializer(StrictSerializer):
    coefficients = vector_field()
    standardizer = StandardizerSerializer()


class FeatureSpecSerializer(StrictSerializer):
    dimension = serializers.IntegerField(min_value=1)
    degree = serializers.IntegerField(min_value=1)
    treatment = serializers.BooleanField()


class CovariateShiftSerializer(StrictSerializer):
    feature_spec = FeatureSpecSerializer()
    gamma = vector_field()
    log_normalizer = serializers.FloatField()
    center = vector_field()
    scale = vector_field()


class NormalizerSerializer(StrictSerializer):
    floor = serializers.FloatField(min_value=0.0)
    model = SieveModelSerializer(allow_null=True)


class NuisanceSerializer(StrictSerializer):
    propensity = LogisticModelSerializer()
    outcome = SieveModelSerializer()
    r_wstar = SieveModelSerializer()
    r_wstar_outer = SieveModelSerializer()
    dtilde = SieveModelSerializer()
    dtilde_wstar = SieveModelSerializer()
    xi_alignment = SieveModelSerializer()
    atilde = SieveModelSerializer()
    atilde_wstar = SieveModelSerializer()


class EstimationConfigSerializer(StrictSerializer):
    sieve_degree = serializers.IntegerField(min_value=0)
    ridge = serializers.FloatField(min_value=0.0)
    propensity_clamp = serializers.FloatField(min_value=0.0, max_value=0.5)
    kernel_bandwidth = serializers.FloatField(min_value=0.0, allow_null=True)
    fusion_weighting = serializers.ChoiceField(choices=FusionWeighting.choices)
    source_policy = serializers.ChoiceField(choices=SourcePolicy.choices)
    overlap_warn_ratio = serializers.FloatField(min_value=0.0)
    normalizer_floor = serializers.FloatField(min_value=0.0)
    pinv_tol = serializers.FloatField(min_value=0.0)
    score_centering = serializers.ChoiceField(choices=ScoreCentering.choices)
    round_timeout = serializers.FloatField(min_value=0.0)
    feature_degree = serializers.IntegerField(min_value=1)
    beta_method = serializers.ChoiceField(choices=BetaMethod.choices)


class SourceShiftDiagnosticsSerializer(StrictSerializer):
    beta = vector_field(allow_empty=True, allow_null=True)
    iterations = serializers.IntegerField(min_value=0)
    residual = serializers.FloatField(allow_null=True)
    overlap_ratio = serializers.FloatField(allow_null=True)
    error = serializers.CharField(allow_null=True, allow_blank=True)


class BroadcastDiagnosticsSerializer(StrictSerializer):
    sources = serializers.DictField(child=SourceShiftDiagnosticsSerializer())
    excluded = serializers.DictField(child=serializers.CharField())
    target_clamped = serializers.IntegerField(min_value=0)


class BroadcastSerializer(StrictSerializer):
    """Target -> all: fitted shifts and every broadcast conditional-expectation model."""

    config = EstimationConfigSerializer()
    dimension = serializers.IntegerField(min_value=1)
    sites = SiteEntrySerializer(many=True)
    feature_spec = FeatureSpecSerializer()
    lambdas = serializers.DictField(child=CovariateShiftSerializer())
    weights = WeightEntrySerializer(many=True)
    normalizers = serializers.DictField(child=NormalizerSerializer())
    nuisances = NuisanceSerializer()
    diagnostics = BroadcastDiagnosticsSerializer()


PAYLOAD_SERIALIZERS = {
    MessageKind.ROUND1: Round1Serializer,
    MessageKind.BROADCAST: BroadcastSerializer,
    MessageKind.ROUND2: Round2Serializer,
}
