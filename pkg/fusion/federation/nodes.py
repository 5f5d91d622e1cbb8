"""
Site endpoints of the protocol: each node owns its records and talks only through a
transport.
"""

import logging

from fusion.config import EstimationConfig
from fusion.enums import MessageKind, SourcePolicy
from fusion.exceptions import MessageValidationError, ProtocolError, SiteTimeoutError
from fusion.federation.messages import decode_message, encode_message
from fusion.federation.protocol import (
    evaluate_site,
    round2_summary,
    site_round2,
    source_round1,
    target_estimate_and_broadcast,
    target_fuse,
)
from fusion.services.nuisance import TargetModels

logger = logging.getLogger(__name__)


class BaseNode:
    """Shared send/receive helpers; ``data`` never leaves the node."""

    def __init__(self, data, transport, config=None):
        self.data = data
        self.transport = transport
        self.config = config or EstimationConfig.from_settings()

    @property
    def site_id(self):
        return self.data.site_id

    def _send(self, kind, message):
        data = encode_message(message, self.site_id)
        return self.transport.send(kind, self.site_id, data)

    def _receive(self, kind, sender, timeout):
        data = self.transport.receive(kind, sender, timeout)
        received, signed_by, message = decode_message(data)
        if received != kind:
            raise MessageValidationError(
                f"Expected a {kind} message, received {received}"
            )
        if signed_by != str(sender):
            raise ProtocolError(
                f"{kind} message signed by {signed_by}, expected {sender}"
            )
        return message


class SourceNode(BaseNode):
    """A source site: round-1 summary, then round-2 summary under the broadcast.

    Parameters
    ----------
    data : SiteDataset
        Source records
    basis : BasisVector or None
        ξ_s of the source's weight function
    transport : BaseTransport
        Channel shared with the target
    config : EstimationConfig, optional
        Feature degree of the round-1 moments
    """

    def __init__(self, data, basis, transport, config=None):
        super().__init__(data, transport, config)
        self.basis = basis
        self.package = None

    def run_round1(self):
        summary = source_round1(self.data, self.basis, self.config)
        return self._send(MessageKind.ROUND1, summary)

    def receive_broadcast(self, target_id, timeout=None):
        self.package = self._receive(MessageKind.BROADCAST, target_id, timeout)
        return self.package

    def run_round2(self, target_id, timeout=None):
        """Evaluate the broadcast and send round 2; excluded sources send nothing."""
        package = self.package or self.receive_broadcast(target_id, timeout)
        if self.site_id not in package.site_sizes:
            logger.info(f"Source {self.site_id} was excluded by the target; no round 2")
            return None
        return self._send(MessageKind.ROUND2, site_round2(self.data, package))


class TargetNode(BaseNode):
    """The target site: collects round 1, broadcasts, evaluates itself and fuses.

    A source missing at a collection deadline is excluded under the ``exclude``
    policy and aborts the run under ``abort``.
    """

    def __init__(self, data, transport, config=None):
        super().__init__(data, transport, config)
        self.package = None
        self.evaluation = None
        self.excluded = {}

    def _collect(self, kind, source_ids, timeout):
        messages = []
        for source_id in source_ids:
            try:
                messages.append(self._receive(kind, source_id, timeout))
            except SiteTimeoutError:
                if self.config.source_policy == SourcePolicy.ABORT:
                    raise
                logger.warning(f"Excluding source {source_id}: no {kind} message")
                self.excluded[source_id] = f"no {kind} message"
        return messages

    def collect_round1(self, source_ids, timeout=None):
        return self._collect(MessageKind.ROUND1, source_ids, timeout)

    def broadcast(self, round1, target_models=None):
        """Build the package from the received round-1 summaries and send it."""
        target_models = target_models or TargetModels(self.data, self.config)
        package = target_estimate_and_broadcast(
            self.data, round1, self.config, target_models
        )
        package.diagnostics.setdefault("excluded", {}).update(self.excluded)
        self._send(MessageKind.BROADCAST, package)
        self.package = package
        return package

    def run_round2(self):
        """Evaluate the target's own records and send its round-2 summary."""
        self.evaluation = evaluate_site(self.data, self.package)
        return self._send(
            MessageKind.ROUND2, round2_summary(self.data, self.package, self.evaluation)
        )

    def fuse(self, timeout=None, estimator="eco_ate"):
        """Collect every site's round-2 summary and fuse them into the report."""
        round2 = [self._receive(MessageKind.ROUND2, self.site_id, timeout)]
        round2.extend(self._collect(MessageKind.ROUND2, self.package.source_ids, timeout))
        return target_fuse(round2, self.package, self.data, self.evaluation, estimator)
