import json

import pytest

from common.expr import BasisVector
from fusion.config import EstimationConfig
from fusion.enums import MessageKind
from fusion.estimators import run_eco_ate
from fusion.exceptions import (
    MessageValidationError,
    ProtocolError,
    SchemaVersionMismatchError,
    SiteTimeoutError,
)
from fusion.factories import SiteDatasetFactory, TargetDatasetFactory
from fusion.federation import (
    SCHEMA_VERSION,
    FileTransport,
    InMemoryTransport,
    Round2Summary,
    SourceNode,
    TargetNode,
    decode_message,
    encode_message,
    orchestrate,
    site_round2,
    source_round1,
    target_estimate_and_broadcast,
    target_fuse,
)
from fusion.federation.messages import validate_payload
from fusion.validators import BroadcastPackageValidator


def make_sites(k=3):
    target = TargetDatasetFactory(n=300, seed=11)
    basis = BasisVector.parse("a*log(y)", 1)
    sources = [
        (
            SiteDatasetFactory(
                site_id=str(index), n=250, seed=20 + index, shape_scale=1.1
            ),
            basis,
        )
        for index in range(1, k + 1)
    ]
    return target, sources


class TestMessages:
    """Test envelopes and payload validation."""

    def setup_method(self):
        """Set up one source's round-1 summary."""
        _, sources = make_sites(k=1)
        self.data, self.basis = sources[0]
        self.summary = source_round1(self.data, self.basis, EstimationConfig())

    def test_reencoding_is_byte_stable(self):
        """Test that decoding and re-encoding reproduces the bytes."""
        data = encode_message(self.summary, "1")

        kind, sender, message = decode_message(data)

        assert kind == MessageKind.ROUND1
        assert sender == "1"
        assert encode_message(message, sender) == data

    def test_other_schema_is_rejected(self):
        """Test that an envelope of another schema version is refused."""
        envelope = json.loads(encode_message(self.summary, "1"))
        envelope["schema"] = "eco-ate/0"

        with pytest.raises(SchemaVersionMismatchError):
            decode_message(json.dumps(envelope).encode("utf-8"))

    def test_undeclared_field_is_rejected(self):
        """Test that a payload cannot carry extra fields such as records."""
        payload = self.summary.to_payload()
        payload["records"] = [[1.0, 0.0, 2.0]]

        with pytest.raises(MessageValidationError) as error:
            validate_payload(MessageKind.ROUND1, payload)

        assert "records" in error.value.details["errors"]

    def test_xi_mean_must_match_forms(self):
        """Test that ξ̄ needs one entry per expression."""
        payload = self.summary.to_payload()
        payload["xi_mean"] = []

        with pytest.raises(MessageValidationError):
            validate_payload(MessageKind.ROUND1, payload)

    def test_garbage_bytes(self):
        """Test that undecodable bytes are a validation error."""
        with pytest.raises(MessageValidationError):
            decode_message(b"\xff\x00")


class TestTransports:
    """Test delivery, duplicates, timeouts and the file manifest."""

    def test_duplicate_send(self):
        """Test that a site sends at most once per round."""
        transport = InMemoryTransport()
        transport.send(MessageKind.ROUND1, "1", b"{}")

        with pytest.raises(ProtocolError):
            transport.send(MessageKind.ROUND1, "1", b"{}")

    def test_receive_timeout(self):
        """Test that a missing message times out."""
        transport = InMemoryTransport()

        with pytest.raises(SiteTimeoutError):
            transport.receive(MessageKind.ROUND1, "1", timeout=0)

    def test_transcript(self):
        """Test that sends are logged with size and digest."""
        transport = InMemoryTransport()

        entry = transport.send(MessageKind.ROUND2, "2", b"abc")

        assert entry.size == 3
        assert transport.senders(MessageKind.ROUND2) == ["2"]
        assert transport.transcript_rows()[0]["sha256"].startswith("ba7816bf")

    def test_file_transport_delivers(self, tmp_path):
        """Test that another transport on the same directory reads the bytes."""
        FileTransport(tmp_path).send(MessageKind.ROUND1, "3", b"payload")

        reader = FileTransport(tmp_path, poll_interval=0.01)

        assert reader.receive(MessageKind.ROUND1, "3", timeout=1) == b"payload"
        assert reader.senders(MessageKind.ROUND1) == ["3"]
        assert (tmp_path / "round1" / "round1-3.json").exists()

    def test_file_manifest_schema(self, tmp_path):
        """Test that a directory of another schema version is refused."""
        manifest = tmp_path / FileTransport.MANIFEST
        manifest.write_text(json.dumps({"schema": "eco-ate/0"}))

        with pytest.raises(SchemaVersionMismatchError):
            FileTransport(tmp_path)

    def test_manifest_is_written(self, tmp_path):
        """Test that a new directory records the schema version."""
        FileTransport(tmp_path)

        manifest = json.loads((tmp_path / FileTransport.MANIFEST).read_text())
        assert manifest == {"schema": SCHEMA_VERSION}


class TestOrchestration:
    """Test complete protocol runs."""

    def setup_method(self):
        """Set up a target and three shifted sources."""
        self.target, self.sources = make_sites(k=3)

    def test_message_count(self, estimation_config):
        """Test that k = 3 sends exactly 2k + 2 messages."""
        transport = InMemoryTransport()

        report = orchestrate(transport, self.target, self.sources, estimation_config)

        kinds = [entry.kind for entry in transport.transcript]
        assert len(kinds) == 8
        assert kinds.count(MessageKind.ROUND1) == 3
        assert kinds.count(MessageKind.BROADCAST) == 1
        assert transport.senders(MessageKind.ROUND2) == ["0", "1", "2", "3"]
        assert report.sources_used == ["1", "2", "3"]

    def test_matches_in_process_run(self, estimation_config):
        """Test that serialization does not change the estimate."""
        direct = run_eco_ate(self.target, self.sources, estimation_config)

        report = orchestrate(
            InMemoryTransport(), self.target, self.sources, estimation_config
        )

        assert report.estimate == pytest.approx(direct.estimate, rel=1e-12)
        assert report.se == pytest.approx(direct.se, rel=1e-12)

    def test_file_and_memory_transports_agree(self, tmp_path, estimation_config):
        """Test that both transports produce identical reports."""
        sources = self.sources[:1]

        memory = orchestrate(InMemoryTransport(), self.target, sources, estimation_config)
        transport = FileTransport(tmp_path, poll_interval=0.01)
        files = orchestrate(transport, self.target, sources, estimation_config)

        assert files.to_json() == memory.to_json()

    def test_duplicate_site_ids(self):
        """Test that two sites with one id are refused."""
        data, basis = self.sources[0]

        with pytest.raises(ProtocolError):
            orchestrate(InMemoryTransport(), self.target, [(data, basis), (data, basis)])


class TestProtocolSteps:
    """Test the protocol operations called one by one."""

    def setup_method(self):
        """Set up a target, two sources and their round-1 summaries."""
        self.target, self.sources = make_sites(k=2)
        self.config = EstimationConfig()
        self.round1 = [
            source_round1(data, basis, self.config) for data, basis in self.sources
        ]
        self.package = target_estimate_and_broadcast(
            self.target, self.round1, self.config
        )

    def test_steps_match_in_process_run(self):
        """Test that round 2 at every site then fusion gives the in-process estimate."""
        round2 = [site_round2(self.target, self.package)]
        round2.extend(site_round2(data, self.package) for data, _ in self.sources)

        report = target_fuse(round2, self.package, self.target)

        direct = run_eco_ate(self.target, self.sources, self.config)
        assert report.estimate == pytest.approx(direct.estimate, rel=1e-12)
        assert report.se == pytest.approx(direct.se, rel=1e-12)

    def test_missing_round2_summary_is_excluded(self):
        """Test that a silent source is dropped from the fusion."""
        round2 = [
            site_round2(self.target, self.package),
            site_round2(self.sources[0][0], self.package),
        ]

        report = target_fuse(round2, self.package, self.target)

        assert report.sources_used == ["1"]
        assert report.diagnostics["excluded"]["2"] == "no round-2 summary"

    def test_target_summary_is_mandatory(self):
        """Test that fusion without the target's summary fails."""
        round2 = [site_round2(data, self.package) for data, _ in self.sources]

        with pytest.raises(ProtocolError):
            target_fuse(round2, self.package, self.target)

    def test_duplicate_round2_summary(self):
        """Test that a site reporting twice is refused."""
        summary = site_round2(self.target, self.package)

        with pytest.raises(ProtocolError):
            target_fuse([summary, summary], self.package, self.target)


class TestNodes:
    """Test the target's handling of missing sources."""

    def setup_method(self):
        """Set up a target with two sources of which only one reports."""
        self.target, sources = make_sites(k=2)
        self.transport = InMemoryTransport()
        self.config = EstimationConfig()
        data, basis = sources[0]
        SourceNode(data, basis, self.transport, self.config).run_round1()

    def test_missing_source_is_excluded(self):
        """Test that a silent source is excluded at the deadline."""
        node = TargetNode(self.target, self.transport, self.config)

        round1 = node.collect_round1(["1", "2"], timeout=0)

        assert [summary.site_id for summary in round1] == ["1"]
        assert node.excluded == {"2": "no round1 message"}

    def test_missing_source_aborts(self):
        """Test that the abort policy raises at the deadline."""
        config = self.config.replace(source_policy="abort")
        node = TargetNode(self.target, self.transport, config)

        with pytest.raises(SiteTimeoutError):
            node.collect_round1(["1", "2"], timeout=0)

    def test_broadcast_lists_excluded_source(self):
        """Test that the package records the exclusion and omits the source."""
        node = TargetNode(self.target, self.transport, self.config)
        round1 = node.collect_round1(["1", "2"], timeout=0)

        package = node.broadcast(round1)

        assert package.source_ids == ["1"]
        assert package.diagnostics["excluded"]["2"] == "no round1 message"


class TestBroadcastPackageValidator:
    """Test consistency checks of broadcast packages."""

    def setup_method(self):
        """Set up a package for one source."""
        target, sources = make_sites(k=1)
        data, basis = sources[0]
        config = EstimationConfig()
        self.package = target_estimate_and_broadcast(
            target, [source_round1(data, basis, config)], config
        )

    def test_valid_package(self):
        """Test that a freshly built package passes."""
        is_valid, errors = BroadcastPackageValidator.validate(self.package)

        assert is_valid
        assert errors == []

    def test_missing_density_ratio(self):
        """Test that a source without λ̂ is reported."""
        self.package.lambdas = {}

        is_valid, errors = BroadcastPackageValidator.validate(self.package)

        assert not is_valid
        assert any("lambdas" in error for error in errors)
        with pytest.raises(ProtocolError):
            BroadcastPackageValidator.check(self.package)

    def test_alignment_covers_every_membership(self):
        """Test that Ê[ξ | a, x, S=m] is broadcast for the target and the source."""
        assert tuple(self.package.nuisance_models.xi_alignment.output_shape) == (1, 2)


class TestPayloadSchemas:
    """Test that nested diagnostics and model fields are typed down to scalars."""

    def setup_method(self):
        """Set up a round-2 summary and a one-source broadcast package."""
        target, sources = make_sites(k=1)
        data, basis = sources[0]
        config = EstimationConfig()
        self.package = target_estimate_and_broadcast(
            target, [source_round1(data, basis, config)], config
        )
        diagnostics = {"clamped": 0, "overlap_ratio": 1.5}
        self.round2 = Round2Summary(
            "1", 3, 0.1, [0.2], [[1.0]], 0.05, [0.01], diagnostics
        )

    def test_round2_payload_is_valid(self):
        """Test that a regular round-2 payload passes."""
        validated = validate_payload(MessageKind.ROUND2, self.round2.to_payload())

        assert validated["diagnostics"]["clamped"] == 0

    def test_records_in_round2_diagnostics(self):
        """Test that a record list nested in the diagnostics is rejected."""
        payload = self.round2.to_payload()
        payload["diagnostics"]["records"] = [[2.1, 1.0, 1.4], [0.7, 0.0, 1.9]]

        with pytest.raises(MessageValidationError) as error:
            validate_payload(MessageKind.ROUND2, payload)

        assert "diagnostics" in error.value.details["errors"]

    def test_records_as_diagnostic_value(self):
        """Test that a typed diagnostic cannot hold a list."""
        payload = self.round2.to_payload()
        payload["diagnostics"]["clamped"] = [[2.1, 1.0, 1.4]]

        with pytest.raises(MessageValidationError):
            validate_payload(MessageKind.ROUND2, payload)

    def test_broadcast_payload_is_valid(self):
        """Test that a freshly built package passes its schema."""
        validated = validate_payload(MessageKind.BROADCAST, self.package.to_payload())

        assert validated["config"]["source_policy"] == "exclude"

    def test_records_in_broadcast_diagnostics(self):
        """Test that per-source diagnostics refuse undeclared nested fields."""
        payload = self.package.to_payload()
        payload["diagnostics"]["sources"]["1"]["records"] = [[2.1, 1.0, 1.4]]

        with pytest.raises(MessageValidationError):
            validate_payload(MessageKind.BROADCAST, payload)

    def test_records_in_broadcast_config(self):
        """Test that the config refuses undeclared fields."""
        payload = self.package.to_payload()
        payload["config"]["records"] = [[2.1, 1.0, 1.4]]

        with pytest.raises(MessageValidationError):
            validate_payload(MessageKind.BROADCAST, payload)

    def test_coefficients_must_match_sieve_shape(self):
        """Test that model coefficients need the shape of their sieve."""
        payload = self.package.to_payload()
        payload["nuisances"]["outcome"]["coefficients"].append(1.0)

        with pytest.raises(MessageValidationError):
            validate_payload(MessageKind.BROADCAST, payload)

    def test_coefficients_must_be_numeric(self):
        """Test that model coefficients cannot hold strings or ragged rows."""
        payload = self.package.to_payload()
        payload["nuisances"]["r_wstar"]["coefficients"][0] = ["2.1", 1.0]

        with pytest.raises(MessageValidationError):
            validate_payload(MessageKind.BROADCAST, payload)
