"""Append-only session transcript.

Public records model the authenticated classical channel (everyone,
including Eve, may read them; nobody may alter them). Private records are
each party's own audit trail and are what makes a transcript replayable.

Newline-delimited JSON layout: a header line
``{"schema_version": 1, "kind": "qsdc-transcript"}`` followed by one record
per line with keys ``seq_no, actor, event_type, visibility, payload``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

SCHEMA_VERSION = 1

PUBLIC = "public"
PRIVATE = "private"

# classical announcements
SAMPLE_REQUEST = "sample_request"
BASIS_AND_OUTCOME = "basis_and_outcome"
CHECK_RESULT = "check_result"
DECOY_REVEAL = "decoy_reveal"
BELL_RESULT = "bell_result"
CHECK_OP_REVEAL = "check_op_reveal"
ABORT_NOTICE = "abort_notice"

# channel events
TRANSMIT = "transmit"
HOP = "hop"
DELIVER = "deliver"


@dataclass(frozen=True)
class Record:
    seq_no: int
    actor: str
    event_type: str
    visibility: str
    payload: dict

    @property
    def public(self) -> bool:
        return self.visibility == PUBLIC

    def to_dict(self) -> dict:
        return {
            "seq_no": self.seq_no,
            "actor": self.actor,
            "event_type": self.event_type,
            "visibility": self.visibility,
            "payload": self.payload,
        }


class Transcript:
    def __init__(self, records: Iterable[Record] = ()):
        self._records: list[Record] = list(records)

    def log(self, actor: str, event_type: str, payload: dict, public: bool = True) -> Record:
        rec = Record(len(self._records), actor, event_type, PUBLIC if public else PRIVATE, payload)
        self._records.append(rec)
        return rec

    def __iter__(self) -> Iterator[Record]:
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[Record, ...]:
        return tuple(self._records)

    def public(self, event_type: str | None = None) -> list[Record]:
        return [r for r in self._records
                if r.public and (event_type is None or r.event_type == event_type)]

    def select(self, actor: str | None = None, event_type: str | None = None) -> list[Record]:
        return [r for r in self._records
                if (actor is None or r.actor == actor)
                and (event_type is None or r.event_type == event_type)]

    def to_ndjson(self) -> str:
        lines = [json.dumps({"schema_version": SCHEMA_VERSION, "kind": "qsdc-transcript"},
                            sort_keys=True)]
        lines += [json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":"))
                  for r in self._records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ndjson(cls, text: str) -> Transcript:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        if header.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported transcript schema {header.get('schema_version')!r}")
        return cls(Record(**json.loads(ln)) for ln in lines[1:])
