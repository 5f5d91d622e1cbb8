"""
Transports carrying serialized protocol messages between sites.

A message is addressed by ``(kind, sender)``; each pair is delivered at most once.
Receivers read by the same key. Every send is logged to the transport's transcript
with its size and SHA-256 digest.
"""

import json
import logging
import os
import threading
import time
from abc import ABC, abstractmethod
from pathlib import Path

from fusion.enums import MessageKind
from fusion.exceptions import ProtocolError, SchemaVersionMismatchError, SiteTimeoutError
from fusion.federation.messages import SCHEMA_VERSION, digest

logger = logging.getLogger(__name__)


class TranscriptEntry:
    """One sent message: kind, sender, byte count and digest."""

    __slots__ = ("kind", "sender", "size", "sha256")

    def __init__(self, kind, sender, size, sha256):
        self.kind = kind
        self.sender = sender
        self.size = size
        self.sha256 = sha256

    def to_dict(self):
        return {
            "kind": self.kind,
            "sender": self.sender,
            "size": self.size,
            "sha256": self.sha256,
        }

    def __repr__(self):
        return f"TranscriptEntry({self.kind}, {self.sender}, {self.size}B)"


class BaseTransport(ABC):
    """Abstract duplex channel between the sites of one protocol run."""

    def __init__(self):
        self.transcript = []
        self._lock = threading.Lock()

    def send(self, kind, sender, data):
        """Deliver ``data`` under ``(kind, sender)``.

        Raises
        ------
        ProtocolError
            If the sender already sent a message in this round
        """
        kind = str(MessageKind(kind))
        sender = str(sender)
        with self._lock:
            if self._exists(kind, sender):
                raise ProtocolError(
                    f"Site {sender} already sent its {kind} message",
                    details={"kind": kind, "sender": sender},
                )
            self._store(kind, sender, bytes(data))
            entry = TranscriptEntry(kind, sender, len(data), digest(data))
            self.transcript.append(entry)
        logger.info(
            f"Sent {kind} from site {sender}: {entry.size} bytes "
            f"sha256={entry.sha256[:16]}"
        )
        return entry

    def receive(self, kind, sender, timeout=None):
        """Bytes sent by ``sender`` in round ``kind``, waiting up to ``timeout`` seconds.

        Raises
        ------
        SiteTimeoutError
            If nothing arrives in time
        """
        kind = str(MessageKind(kind))
        data = self._wait(kind, str(sender), timeout)
        if data is None:
            raise SiteTimeoutError(
                f"No {kind} message from site {sender} within {timeout}s",
                details={"kind": kind, "sender": str(sender)},
            )
        return data

    def senders(self, kind):
        """Sorted ids of the sites that have sent in round ``kind``."""
        return sorted(self._senders(str(MessageKind(kind))))

    def transcript_rows(self):
        return [entry.to_dict() for entry in self.transcript]

    @abstractmethod
    def _exists(self, kind, sender):
        pass

    @abstractmethod
    def _store(self, kind, sender, data):
        pass

    @abstractmethod
    def _wait(self, kind, sender, timeout):
        pass

    @abstractmethod
    def _senders(self, kind):
        pass


class InMemoryTransport(BaseTransport):
    """Transport over a dictionary shared by threads of one process."""

    def __init__(self):
        super().__init__()
        self._messages = {}
        self._arrived = threading.Condition(self._lock)

    def _exists(self, kind, sender):
        return (kind, sender) in self._messages

    def _store(self, kind, sender, data):
        self._messages[(kind, sender)] = data
        self._arrived.notify_all()

    def _wait(self, kind, sender, timeout):
        with self._arrived:
            self._arrived.wait_for(lambda: (kind, sender) in self._messages, timeout)
            return self._messages.get((kind, sender))

    def _senders(self, kind):
        with self._lock:
            return [sender for sent, sender in self._messages if sent == kind]


class FileTransport(BaseTransport):
    """Transport over a shared directory: ``<dir>/<kind>/<kind>-<site>.json``.

    A ``manifest.json`` at the root records the schema version; opening a directory
    written under another version fails. Files are written to a temporary name and
    renamed, so readers never observe partial messages.
    """

    MANIFEST = "manifest.json"

    def __init__(self, directory, poll_interval=0.05):
        super().__init__()
        self.directory = Path(directory)
        self.poll_interval = poll_interval
        self.directory.mkdir(parents=True, exist_ok=True)
        self._ensure_manifest()

    def _ensure_manifest(self):
        manifest = self.directory / self.MANIFEST
        if manifest.exists():
            try:
                schema = json.loads(manifest.read_text(encoding="utf-8")).get("schema")
            except (OSError, ValueError) as exc:
                raise ProtocolError(
                    f"Unreadable transport manifest {manifest}: {exc}"
                ) from exc
            if schema != SCHEMA_VERSION:
                raise SchemaVersionMismatchError(
                    f"Directory {self.directory} uses schema {schema!r}, expected "
                    f"{SCHEMA_VERSION!r}"
                )
            return
        temporary = manifest.with_suffix(f".{os.getpid()}.tmp")
        temporary.write_text(json.dumps({"schema": SCHEMA_VERSION}), encoding="utf-8")
        os.replace(temporary, manifest)

    def path(self, kind, sender):
        return self.directory / kind / f"{kind}-{sender}.json"

    def _exists(self, kind, sender):
        return self.path(kind, sender).exists()

    def _store(self, kind, sender, data):
        path = self.path(kind, sender)
        path.parent.mkdir(parents=True, exist_ok=True)
        temporary = path.with_name(f".{path.name}.{os.getpid()}.tmp")
        temporary.write_bytes(data)
        os.replace(temporary, path)

    def _wait(self, kind, sender, timeout):
        path = self.path(kind, sender)
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            if path.exists():
                return path.read_bytes()
            if deadline is not None and time.monotonic() >= deadline:
                return None
            time.sleep(self.poll_interval)

    def _senders(self, kind):
        folder = self.directory / kind
        if not folder.is_dir():
            return []
        prefix = f"{kind}-"
        return [
            path.stem[len(prefix):]
            for path in folder.glob(f"{prefix}*.json")
            if not path.name.startswith(".")
        ]
