# spotsim - Spot market provisioning simulator
# Copyright (C) 2025 The spotsim contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""
Simulation history system for auditing what the broker and provider did
"""
import json
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Deque, Dict, List, Optional

from config import MAX_HISTORY_ITEMS, logger

# =========================
# SIMULATION HISTORY SYSTEM
# =========================

class EventType(Enum):
    """Types of events recorded during a run"""
    SUBMISSION = "submission"
    LEASE = "lease"
    ASSIGN = "assign"
    POSTPONE = "postpone"
    FAILURE = "failure"
    SNAPSHOT = "snapshot"
    MIGRATION = "migration"
    REPLICA = "replica"
    CANCEL = "cancel"
    COMPLETION = "completion"
    VIOLATION = "violation"
    BILLING = "billing"
    TERMINATION = "termination"


@dataclass
class LogEntry:
    """Represents a single entry in the simulation history"""
    time: int
    event_type: EventType
    job_id: Optional[int] = None
    instance_id: Optional[int] = None
    market: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        entry = {
            'time': self.time,
            'event': self.event_type.value,
            'job_id': self.job_id,
            'instance_id': self.instance_id,
            'market': self.market,
        }
        entry.update(self.details)
        return entry


class SimulationHistory:
    """Bounded audit log of one simulation run"""

    def __init__(self, enabled: bool = True, max_items: int = MAX_HISTORY_ITEMS):
        self.enabled = enabled
        self.max_items = max_items
        self.entries: Deque[LogEntry] = deque(maxlen=max_items)
        self.dropped = 0
        self.lock = threading.Lock()

    def add(self, time: int, event_type: EventType, job_id: Optional[int] = None,
            instance=None, **details):
        """Record an event; instance may be an Instance or None"""
        if not self.enabled:
            return
        entry = LogEntry(
            time=time,
            event_type=event_type,
            job_id=job_id,
            instance_id=instance.id if instance is not None else None,
            market=f"{instance.datacenter}/{instance.instance_type}" if instance is not None else details.pop('market', None),
            details=details,
        )
        logger.debug(f"t={time} {event_type.value} job={job_id} instance={entry.instance_id} {details}")
        with self.lock:
            # oldest entries fall off once the log is full
            if len(self.entries) == self.max_items:
                self.dropped += 1
            self.entries.append(entry)

    def get_all(self) -> List[dict]:
        with self.lock:
            return [entry.to_dict() for entry in self.entries]


def write_jsonl(entries: List[dict], path: str, dropped: int = 0) -> int:
    """
    Write one JSON object per line

    Args:
        entries: Event dicts in time order
        path: Output file
        dropped: Oldest entries the bounded log already discarded

    Returns:
        int: number of entries written
    """
    if dropped:
        logger.warning(f"Event log {path} is truncated: {dropped} oldest entries were dropped")
    with open(path, 'w', encoding='utf-8') as f:
        for entry in entries:
            f.write(json.dumps(entry, sort_keys=True) + '\n')
    return len(entries)


def read_jsonl(path: str) -> List[dict]:
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]
