"""Append-only persistence for submitted rankings."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from lesionforge.errors import DuplicateSubmissionError


@dataclass(frozen=True)
class RankingRecord:
    """One rater's unblinded ranking of one set; immutable once stored."""

    session_id: str
    set_id: str
    naturalness: Mapping[str, int]  # method -> rank
    similarity: Mapping[str, int]  # method -> rank; reference-conditioned only
    timestamp: float = field(default_factory=time.time)

    def to_json(self) -> str:
        return json.dumps(
            {
                "session_id": self.session_id,
                "set_id": self.set_id,
                "naturalness": dict(self.naturalness),
                "similarity": dict(self.similarity),
                "timestamp": self.timestamp,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(line: str) -> "RankingRecord":
        data = json.loads(line)
        return RankingRecord(
            session_id=data["session_id"],
            set_id=data["set_id"],
            naturalness={k: int(v) for k, v in data["naturalness"].items()},
            similarity={k: int(v) for k, v in data["similarity"].items()},
            timestamp=float(data["timestamp"]),
        )


class RankingStore:
    """JSON-lines log of ranking records; one line appended per submission.

    Existing lines are loaded at open, so completion state survives service
    restarts. Records are never rewritten.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._records: list[RankingRecord] = []
        self._seen: set[tuple[str, str]] = set()
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = RankingRecord.from_json(line)
                    self._records.append(rec)
                    self._seen.add((rec.session_id, rec.set_id))

    def append(self, record: RankingRecord) -> None:
        key = (record.session_id, record.set_id)
        if key in self._seen:
            raise DuplicateSubmissionError(
                f"session {record.session_id!r} already ranked set {record.set_id!r}"
            )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
        self._records.append(record)
        self._seen.add(key)

    def records(self) -> list[RankingRecord]:
        return list(self._records)

    def completed_sets(self, session_id: str) -> set[str]:
        return {set_id for sid, set_id in self._seen if sid == session_id}

    def __len__(self) -> int:
        return len(self._records)
