"""Append-only event log: line-delimited JSON, one record per line.

The log is the only durable store. Records carry a strictly increasing,
gapless sequence number; replaying a log reconstructs engine state
deterministically. A corrupt or partial final line (a crash mid-append) is
truncated away with a warning; corruption anywhere else is a hard error,
as is any sequence gap.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

log = logging.getLogger(__name__)

EVENT_KINDS = frozenset({
    "registry_loaded",
    "run_registered",
    "detections_ingested",
    "screening_queued",
    "screening_decided",
    "assignment_created",
    "response_submitted",
    "determination_submitted",
    "incidental_reported",
})


@dataclass(frozen=True)
class EventRecord:
    seq: int
    recorded_at: str
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValidationError(f"unknown event kind {self.kind!r}",
                                  code="invalid_event", field="kind")

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "recorded_at": self.recorded_at,
                           "kind": self.kind, "payload": self.payload},
                          sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        obj = json.loads(line)
        return cls(seq=obj["seq"], recorded_at=obj["recorded_at"],
                   kind=obj["kind"], payload=obj["payload"])


class EventLog:
    """Single-writer append-only log backed by one JSONL file."""

    def __init__(self, path: Path, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = None
        self._next_seq = 1

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def read_all(self) -> list[EventRecord]:
        """Read and validate the whole log, truncating a corrupt tail.

        Raises on sequence gaps or corruption before the final record, so a
        tampered or mis-merged log is never silently accepted.
        """
        if not self.path.exists():
            return []
        raw = self.path.read_bytes()
        records: list[EventRecord] = []
        good_end = 0  # byte offset just past the last fully-valid record
        pos = 0
        line_no = 0
        total = len(raw)
        while pos < total:
            newline_at = raw.find(b"\n", pos)
            end = total if newline_at == -1 else newline_at + 1
            line = raw[pos:total if newline_at == -1 else newline_at]
            line_no += 1
            record = None
            if line.strip():
                try:
                    record = EventRecord.from_json(line.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError, KeyError,
                        ValidationError, TypeError):
                    record = None
            if record is None:
                if raw[end:].strip() == b"" and line.strip() == b"":
                    break  # trailing blank space only
                if raw[end:].strip() == b"":
                    log.warning("event log %s: truncating corrupt tail record after seq %d",
                                self.path, records[-1].seq if records else 0)
                    break
                raise ValidationError(f"event log corrupt at line {line_no}",
                                      code="corrupt_log", field="events")
            expected = records[-1].seq + 1 if records else 1
            if record.seq != expected:
                raise ValidationError(
                    f"event log sequence gap: expected {expected}, found {record.seq}",
                    code="sequence_gap", field="seq")
            records.append(record)
            good_end = end
            pos = end
        if good_end < total:
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        self._next_seq = (records[-1].seq + 1) if records else 1
        return records

    def append(self, kind: str, payload: dict, recorded_at: str) -> EventRecord:
        record = EventRecord(seq=self._next_seq, recorded_at=recorded_at,
                             kind=kind, payload=payload)
        if self._file is None:
            self._file = open(self.path, "ab")
        self._file.write(record.to_json().encode("utf-8") + b"\n")
        self._file.flush()
        if self.fsync:
            os.fsync(self._file.fileno())
        self._next_seq += 1
        return record

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
