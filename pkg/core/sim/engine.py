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
Discrete-event engine for spotsim
Keeps the virtual clock and dispatches time-ordered events
"""
import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from config import logger
from core.errors import SimulationError


class EventKind(Enum):
    """Kinds of events the engine dispatches"""
    PRICE_CHANGE = "price_change"
    JOB_ARRIVAL = "job_arrival"
    SCHEDULE_PASS = "schedule_pass"
    HOUR_BOUNDARY = "hour_boundary"
    BID_CHECK = "bid_check"
    SNAPSHOT_DONE = "snapshot_done"
    PROVISION_DONE = "provision_done"
    JOB_COMPLETION = "job_completion"


@dataclass(order=True)
class Event:
    """A callback due at fire_time; ties are broken by sequence_id"""
    fire_time: int
    sequence_id: int = 0
    kind: EventKind = field(default=EventKind.SCHEDULE_PASS, compare=False)
    action: Optional[Callable[["Event"], None]] = field(default=None, compare=False)
    payload: Dict[str, Any] = field(default_factory=dict, compare=False)
    cancelled: bool = field(default=False, compare=False)


class EventHandle:
    """Returned by Simulator.schedule, allows cancelling a queued event"""

    def __init__(self, event: Event):
        self.event = event

    @property
    def fire_time(self) -> int:
        return self.event.fire_time

    @property
    def active(self) -> bool:
        return not self.event.cancelled

    def cancel(self):
        self.event.cancelled = True


class Simulator:
    """Single-threaded virtual clock with a heap of pending events"""

    def __init__(self, start_time: int = 0, trace: bool = False):
        if start_time < 0:
            raise SimulationError(f"Start time must be non-negative, got {start_time}")
        self.now = start_time
        self._queue: List[Event] = []
        self._sequence = itertools.count()
        self.dispatched = 0
        self.trace: Optional[List[tuple]] = [] if trace else None

    def schedule(self, event: Event) -> EventHandle:
        """Queue an event; events in the past are rejected"""
        if event.fire_time < self.now:
            raise SimulationError(
                f"Cannot schedule {event.kind.value} at t={event.fire_time}, clock is at {self.now}"
            )
        event.sequence_id = next(self._sequence)
        heapq.heappush(self._queue, event)
        return EventHandle(event)

    def at(self, fire_time: int, kind: EventKind, action: Callable[[Event], None], **payload) -> EventHandle:
        """Shorthand for scheduling a callback at an absolute time"""
        return self.schedule(Event(fire_time=int(fire_time), kind=kind, action=action, payload=payload))

    def after(self, delay: int, kind: EventKind, action: Callable[[Event], None], **payload) -> EventHandle:
        """Shorthand for scheduling a callback relative to the clock"""
        return self.at(self.now + int(delay), kind, action, **payload)

    def cancel(self, handle: Optional[EventHandle]):
        if handle is not None:
            handle.cancel()

    def pending(self) -> int:
        return sum(1 for event in self._queue if not event.cancelled)

    def run_until(self, end: int) -> int:
        """
        Dispatch every event with fire_time <= end, including events that
        handlers schedule along the way

        Returns:
            int: number of events dispatched
        """
        count = 0
        while self._queue and self._queue[0].fire_time <= end:
            event = heapq.heappop(self._queue)
            if event.cancelled:
                continue
            self.now = event.fire_time
            if self.trace is not None:
                self.trace.append((event.fire_time, event.sequence_id, event.kind.value))
            if event.action is not None:
                event.action(event)
            count += 1
        self.now = max(self.now, end)
        self.dispatched += count
        logger.debug(f"Dispatched {count} events, clock at {self.now}")
        return count
