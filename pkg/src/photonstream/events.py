"""Detection-event containers shared by the simulator, the analysis and file I/O."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

PS_PER_NS = 1000


class DetectionEvent(NamedTuple):
    detector: int
    time: float  # ns


@dataclass
class EventStream:
    """Detector clicks as parallel arrays, sorted by time.

    Timestamps are integer picoseconds; :attr:`times_ns` is the float view
    used by the analysis code.
    """

    channel: np.ndarray
    time_ps: np.ndarray

    def __post_init__(self):
        self.channel = np.asarray(self.channel, dtype=np.uint8)
        self.time_ps = np.asarray(self.time_ps, dtype=np.int64)
        if self.channel.shape != self.time_ps.shape:
            raise ValueError("channel and time arrays differ in length")

    def __len__(self) -> int:
        return len(self.time_ps)

    def __iter__(self) -> Iterator[DetectionEvent]:
        for c, t in zip(self.channel, self.time_ps):
            yield DetectionEvent(int(c), t / PS_PER_NS)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return np.array_equal(self.channel, other.channel) and np.array_equal(self.time_ps, other.time_ps)

    @property
    def times_ns(self) -> np.ndarray:
        return self.time_ps / PS_PER_NS

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.time_ps) >= 0))

    def counts(self) -> tuple[int, int]:
        n1 = int(np.count_nonzero(self.channel))
        return len(self) - n1, n1

    @classmethod
    def empty(cls) -> "EventStream":
        return cls(np.zeros(0, np.uint8), np.zeros(0, np.int64))

    @classmethod
    def from_events(cls, events) -> "EventStream":
        """Build from an iterable of ``DetectionEvent`` (times in ns, rounded to ps)."""
        events = list(events)
        ch = np.array([e.detector for e in events], dtype=np.uint8)
        t = np.rint(np.array([e.time for e in events], dtype=float) * PS_PER_NS).astype(np.int64)
        if np.any(ch > 1):
            raise ValueError("detector must be 0 or 1")
        return cls.from_arrays(ch, t)

    @classmethod
    def from_arrays(cls, channel, time_ps) -> "EventStream":
        """Build from unsorted arrays; sorts by (time, channel)."""
        channel = np.asarray(channel, dtype=np.uint8)
        time_ps = np.asarray(time_ps, dtype=np.int64)
        order = np.lexsort((channel, time_ps))
        return cls(channel[order], time_ps[order])
