"""Single-node persistence for the service.

Documents live one file per id under the data directory (models/ and
notations/); writes go through a temp file and an atomic rename. Running
instances are in-memory only, guarded by per-instance locks and swept by an
idle TTL — losing them on restart is documented behavior.
"""

from __future__ import annotations

import os
import re
import tempfile
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..engine import ProcessInstance

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


def valid_id(doc_id: str) -> bool:
    return bool(_ID_RE.match(doc_id)) and len(doc_id) <= 128


@dataclass
class StoredDocument:
    doc_id: str
    text: str
    created: float
    updated: float


class DocumentRepository:
    """File-backed map id -> canonical XML document."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._meta: dict[str, tuple[float, float]] = {}  # id -> (created, updated)

    def _path(self, doc_id: str) -> Path:
        return self.root / f"{doc_id}.xml"

    def get(self, doc_id: str) -> StoredDocument | None:
        path = self._path(doc_id)
        if not valid_id(doc_id) or not path.exists():
            return None
        with self._lock:
            created, updated = self._meta.get(doc_id, (path.stat().st_mtime, path.stat().st_mtime))
        return StoredDocument(doc_id, path.read_text(encoding="utf-8"), created, updated)

    def put(self, doc_id: str, text: str) -> tuple[StoredDocument, bool]:
        """Atomically write; returns (document, created_now)."""
        path = self._path(doc_id)
        existed = path.exists()
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(text)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        now = time.time()
        with self._lock:
            created = self._meta.get(doc_id, (now, now))[0] if existed else now
            self._meta[doc_id] = (created, now)
        return StoredDocument(doc_id, text, created, now), not existed

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.xml"))


@dataclass
class InstanceEntry:
    instance: ProcessInstance
    model_id: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    created: float = field(default_factory=time.time)
    last_access: float = field(default_factory=time.time)


class InstanceTable:
    """In-memory instance registry with idle TTL."""

    def __init__(self, ttl_seconds: float = 3600.0):
        self.ttl = ttl_seconds
        self._entries: dict[str, InstanceEntry] = {}
        self._lock = threading.Lock()

    def create(self, instance: ProcessInstance, model_id: str) -> str:
        instance_id = uuid.uuid4().hex
        with self._lock:
            self._sweep()
            self._entries[instance_id] = InstanceEntry(instance=instance, model_id=model_id)
        return instance_id

    def get(self, instance_id: str) -> InstanceEntry | None:
        with self._lock:
            self._sweep()
            entry = self._entries.get(instance_id)
            if entry is not None:
                entry.last_access = time.time()
            return entry

    def _sweep(self) -> None:
        deadline = time.time() - self.ttl
        stale = [k for k, e in self._entries.items() if e.last_access < deadline]
        for k in stale:
            del self._entries[k]
