"""Append-only conversation event logs with replay.

One JSON Lines file per conversation; sequence numbers increase strictly
from 1 with no gaps. Serialization is canonical (sorted keys, fixed
separators, no timestamps) so identical runs produce byte-identical logs.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path


class StoreError(ValueError):
    pass


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class Event:
    seq: int
    type: str
    payload: dict

    def to_line(self) -> str:
        return canonical_dumps({"seq": self.seq, "type": self.type, "payload": self.payload})

    @classmethod
    def from_line(cls, line: str) -> "Event":
        raw = json.loads(line)
        return cls(seq=raw["seq"], type=raw["type"], payload=raw["payload"])


class MemoryConversationStore:
    """In-memory store for tests and single-process runs."""

    def __init__(self) -> None:
        self._events: dict[str, list[Event]] = {}
        self._lock = threading.Lock()

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._events)

    def exists(self, conversation_id: str) -> bool:
        with self._lock:
            return conversation_id in self._events

    def count(self, conversation_id: str) -> int:
        with self._lock:
            return len(self._events.get(conversation_id, ()))

    def append(self, conversation_id: str, type: str, payload: dict) -> Event:
        with self._lock:
            events = self._events.setdefault(conversation_id, [])
            event = Event(seq=len(events) + 1, type=type, payload=payload)
            events.append(event)
            return event

    def read(self, conversation_id: str, after: int = 0) -> list[Event]:
        with self._lock:
            events = self._events.get(conversation_id)
            if events is None:
                raise StoreError(f"unknown conversation {conversation_id!r}")
            return [e for e in events if e.seq > after]


class FileConversationStore:
    """Durable store: one append-only JSONL file per conversation."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()
        for path in self.root.glob("*.jsonl"):
            self._counts[path.stem] = sum(
                1 for line in path.read_text(encoding="utf-8").splitlines() if line.strip()
            )

    def _path(self, conversation_id: str) -> Path:
        if "/" in conversation_id or "\\" in conversation_id or not conversation_id:
            raise StoreError(f"bad conversation id {conversation_id!r}")
        return self.root / f"{conversation_id}.jsonl"

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._counts)

    def exists(self, conversation_id: str) -> bool:
        with self._lock:
            return conversation_id in self._counts

    def count(self, conversation_id: str) -> int:
        with self._lock:
            return self._counts.get(conversation_id, 0)

    def append(self, conversation_id: str, type: str, payload: dict) -> Event:
        with self._lock:
            seq = self._counts.get(conversation_id, 0) + 1
            event = Event(seq=seq, type=type, payload=payload)
            with self._path(conversation_id).open("a", encoding="utf-8") as fh:
                fh.write(event.to_line() + "\n")
            self._counts[conversation_id] = seq
            return event

    def read(self, conversation_id: str, after: int = 0) -> list[Event]:
        path = self._path(conversation_id)
        if not path.exists():
            raise StoreError(f"unknown conversation {conversation_id!r}")
        events = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            event = Event.from_line(line)
            if event.seq > after:
                events.append(event)
        return events
