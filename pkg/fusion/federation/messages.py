"""
Protocol messages and their canonical wire format.

Every message travels as canonical JSON inside an envelope
``{"schema": "eco-ate/1", "kind": ..., "sender": ..., "payload": ...}``. Floats are
written with the shortest repr that round-trips, so decoding and re-encoding a
message reproduces its bytes exactly.
"""

import hashlib
import json

import numpy as np

from common.expr import BasisVector
from common.numerics import LogisticModel, SieveModel
from fusion.config import EstimationConfig
from fusion.enums import MessageKind
from fusion.exceptions import MessageValidationError, SchemaVersionMismatchError
from fusion.federation.serializers import PAYLOAD_SERIALIZERS, EnvelopeSerializer
from fusion.services.covariate_shift import CovariateFeatureSpec, CovariateShiftModel
from fusion.services.gradient import NuisanceModels, ShiftFamily
from fusion.services.outcome_shift import NormalizerModel, WeightModel

SCHEMA_VERSION = "eco-ate/1"


def canonical_json(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(data):
    return hashlib.sha256(data).hexdigest()


def validate_payload(kind, payload):
    """Validate ``payload`` against the schema of ``kind``.

    Raises
    ------
    MessageValidationError
        With the serializer errors in ``details``
    """
    serializer = PAYLOAD_SERIALIZERS[MessageKind(kind)](data=payload)
    if not serializer.is_valid():
        raise MessageValidationError(
            f"Invalid {kind} payload", details={"errors": serializer.errors}
        )
    return serializer.validated_data


def encode_message(message, sender):
    """Envelope and serialize a message object to bytes."""
    payload = message.to_payload()
    validate_payload(message.kind, payload)
    envelope = {
        "schema": SCHEMA_VERSION,
        "kind": str(message.kind),
        "sender": str(sender),
        "payload": payload,
    }
    try:
        return canonical_json(envelope).encode("utf-8")
    except ValueError as exc:
        raise MessageValidationError(
            f"Message from {sender} is not serializable: {exc}"
        ) from exc


def decode_message(data):
    """Parse and validate message bytes.

    Returns
    -------
    tuple
        ``(kind, sender, message)`` with ``message`` a Round1Summary,
        BroadcastPackage or Round2Summary

    Raises
    ------
    SchemaVersionMismatchError
        If the envelope carries another schema version
    MessageValidationError
        If the envelope or payload does not match its schema
    """
    try:
        envelope = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MessageValidationError(f"Undecodable message: {exc}") from exc
    if isinstance(envelope, dict) and envelope.get("schema") != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"Unsupported schema {envelope.get('schema')!r}, expected {SCHEMA_VERSION!r}"
        )
    serializer = EnvelopeSerializer(data=envelope)
    if not serializer.is_valid():
        raise MessageValidationError(
            "Invalid message envelope", details={"errors": serializer.errors}
        )
    kind = MessageKind(envelope["kind"])
    payload = validate_payload(kind, envelope["payload"])
    return kind, envelope["sender"], MESSAGE_TYPES[kind].from_payload(payload)


def _floats(values):
    return [float(value) for value in np.asarray(values, dtype=float).reshape(-1)]


class Round1Summary:
    """Source uplink: n_s, covariate moments φ̄_s, ξ_s forms and their means ξ̄_s."""

    kind = MessageKind.ROUND1

    def __init__(self, site_id, n, dimension, moments, xi_forms, xi_mean):
        self.site_id = str(site_id)
        self.n = int(n)
        self.dimension = int(dimension)
        self.moments = np.asarray(moments, dtype=float).reshape(-1)
        self.xi_forms = list(xi_forms)
        self.xi_mean = np.asarray(xi_mean, dtype=float).reshape(-1)

    def basis(self):
        return BasisVector.parse(self.xi_forms, self.dimension) if self.xi_forms else None

    def to_payload(self):
        return {
            "site_id": self.site_id,
            "n": self.n,
            "dimension": self.dimension,
            "moments": _floats(self.moments),
            "xi_forms": self.xi_forms,
            "xi_mean": _floats(self.xi_mean),
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            payload["site_id"],
            payload["n"],
            payload["dimension"],
            payload["moments"],
            payload["xi_forms"],
            payload["xi_mean"],
        )


class Round2Summary:
    """Site uplink: H_s, L_s, I_s plus h2_s = mean D̂² and hl_s = mean D̂ ℓ̇*."""

    kind = MessageKind.ROUND2

    def __init__(self, site_id, n, h, l, i, h2, hl, diagnostics=None):  # noqa: E741
        self.site_id = str(site_id)
        self.n = int(n)
        self.h = float(h)
        self.l = np.asarray(l, dtype=float).reshape(-1)  # noqa: E741
        q = self.l.shape[0]
        self.i = np.asarray(i, dtype=float).reshape(q, q)
        self.h2 = float(h2)
        self.hl = np.asarray(hl, dtype=float).reshape(q)
        self.diagnostics = dict(diagnostics or {})

    @classmethod
    def from_evaluation(cls, evaluation, diagnostics=None):
        summary = evaluation.summaries()
        return cls(
            evaluation.site_id,
            evaluation.n,
            summary["h"],
            summary["l"],
            summary["i"],
            summary["h2"],
            summary["hl"],
            diagnostics,
        )

    def as_summary(self):
        return {"h": self.h, "l": self.l, "i": self.i, "h2": self.h2, "hl": self.hl}

    def to_payload(self):
        return {
            "site_id": self.site_id,
            "n": self.n,
            "h": self.h,
            "l": _floats(self.l),
            "i": [_floats(row) for row in self.i],
            "h2": self.h2,
            "hl": _floats(self.hl),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            payload["site_id"],
            payload["n"],
            payload["h"],
            payload["l"],
            payload["i"],
            payload["h2"],
            payload["hl"],
            payload["diagnostics"],
        )


class BroadcastPackage:
    """Target broadcast: site sizes, fitted shifts and the nuisance models.

    Parameters
    ----------
    config : EstimationConfig
        Knobs every site must apply identically
    dimension : int
        Covariate dimension d
    site_sizes : dict
        Site id -> n_s, target first, included sources only
    feature_spec : CovariateFeatureSpec
        Basis of the density-ratio tilts
    lambdas : dict
        Source id -> CovariateShiftModel
    weights : WeightModel
        Bases and β̂ of the included sources
    normalizers : dict
        Source id -> NormalizerModel
    nuisance_models : NuisanceModels
        Broadcast conditional expectations
    diagnostics : dict, optional
        β solver and exclusion diagnostics
    """

    kind = MessageKind.BROADCAST

    def __init__(
        self,
        config,
        dimension,
        site_sizes,
        feature_spec,
        lambdas,
        weights,
        normalizers,
        nuisance_models,
        diagnostics=None,
    ):
        self.config = config
        self.dimension = int(dimension)
        self.site_sizes = {str(site_id): int(n) for site_id, n in site_sizes.items()}
        self.feature_spec = feature_spec
        self.lambdas = dict(lambdas)
        self.weights = weights
        self.normalizers = dict(normalizers)
        self.nuisance_models = nuisance_models
        self.diagnostics = dict(diagnostics or {})

    @property
    def target_id(self):
        return next(iter(self.site_sizes))

    @property
    def source_ids(self):
        return list(self.site_sizes)[1:]

    @property
    def probabilities(self):
        total = float(sum(self.site_sizes.values()))
        return {site_id: n / total for site_id, n in self.site_sizes.items()}

    def shift_family(self):
        return ShiftFamily(self.site_sizes, self.weights, self.normalizers, self.lambdas)

    def check_consistency(self):
        from fusion.validators import BroadcastPackageValidator

        BroadcastPackageValidator.check(self)
        return self

    def to_payload(self):
        probabilities = self.probabilities
        return {
            "config": self.config.to_dict(),
            "dimension": self.dimension,
            "sites": [
                {"site_id": site_id, "n": n, "probability": probabilities[site_id]}
                for site_id, n in self.site_sizes.items()
            ],
            "feature_spec": self.feature_spec.to_payload(),
            "lambdas": {
                site_id: model.to_payload() for site_id, model in self.lambdas.items()
            },
            "weights": self.weights.to_payload(),
            "normalizers": {
                site_id: {
                    "floor": normalizer.floor,
                    "model": (
                        None
                        if normalizer.model is None
                        else normalizer.model.to_payload()
                    ),
                }
                for site_id, normalizer in self.normalizers.items()
            },
            "nuisances": {
                name: model.to_payload() for name, model in self.nuisance_models.items()
            },
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_payload(cls, payload):
        dimension = payload["dimension"]
        nuisances = {
            name: SieveModel.from_payload(model)
            for name, model in payload["nuisances"].items()
            if name != "propensity"
        }
        nuisances["propensity"] = LogisticModel.from_payload(
            payload["nuisances"]["propensity"]
        )
        normalizers = {
            site_id: NormalizerModel(
                site_id,
                (
                    None
                    if entry["model"] is None
                    else SieveModel.from_payload(entry["model"])
                ),
                entry["floor"],
            )
            for site_id, entry in payload["normalizers"].items()
        }
        return cls(
            EstimationConfig(**payload["config"]),
            dimension,
            {entry["site_id"]: entry["n"] for entry in payload["sites"]},
            CovariateFeatureSpec.from_payload(payload["feature_spec"]),
            {
                site_id: CovariateShiftModel.from_payload(model)
                for site_id, model in payload["lambdas"].items()
            },
            WeightModel.from_payload(payload["weights"], dimension),
            normalizers,
            NuisanceModels(**nuisances),
            payload["diagnostics"],
        )


MESSAGE_TYPES = {
    MessageKind.ROUND1: Round1Summary,
    MessageKind.BROADCAST: BroadcastPackage,
    MessageKind.ROUND2: Round2Summary,
}
