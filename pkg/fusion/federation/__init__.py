"""
Two-round federated protocol: messages, transports, site nodes and the orchestrator.
"""

from fusion.federation.messages import (
    SCHEMA_VERSION,
    BroadcastPackage,
    Round1Summary,
    Round2Summary,
    decode_message,
    encode_message,
)
from fusion.federation.nodes import SourceNode, TargetNode
from fusion.federation.orchestrator import orchestrate
from fusion.federation.protocol import (
    site_round2,
    source_round1,
    target_estimate_and_broadcast,
    target_fuse,
)
from fusion.federation.transports import FileTransport, InMemoryTransport

__all__ = [
    "SCHEMA_VERSION",
    "BroadcastPackage",
    "FileTransport",
    "InMemoryTransport",
    "Round1Summary",
    "Round2Summary",
    "SourceNode",
    "TargetNode",
    "decode_message",
    "encode_message",
    "orchestrate",
    "site_round2",
    "source_round1",
    "target_estimate_and_broadcast",
    "target_fuse",
]
