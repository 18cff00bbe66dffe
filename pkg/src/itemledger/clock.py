"""Clock abstraction.

All event timestamps come from an injected clock so that logs replay
byte-identically and tests can pin time. Timestamps are UTC with
millisecond precision, rendered as ISO-8601 text ending in "Z".
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

ISO_MS = "%Y-%m-%dT%H:%M:%S.%f"


def format_ts(dt: datetime) -> str:
    """Render a UTC datetime as canonical millisecond ISO-8601 text."""
    dt = dt.astimezone(timezone.utc)
    return dt.strftime(ISO_MS)[:-3] + "Z"


def parse_ts(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text).astimezone(timezone.utc)


class SystemClock:
    """Wall clock truncated to millisecond precision."""

    def now(self) -> str:
        return format_ts(datetime.now(timezone.utc))


class TickingClock:
    """Deterministic clock: starts at a fixed instant, advances 1 ms per call."""

    def __init__(self, start: str = "2017-03-06T09:00:00.000Z", step_ms: int = 1):
        self._current = parse_ts(start)
        self._step = timedelta(milliseconds=step_ms)

    def now(self) -> str:
        stamp = format_ts(self._current)
        self._current += self._step
        return stamp


class AnchoredClock:
    """Deterministic clock anchored to a log position.

    Each event sequence number owns a slot of SLOT_MS milliseconds; calls
    between appends count up inside the slot. The same operation script
    therefore yields the same timestamps even across process restarts,
    which is what makes one-shot CLI runs byte-equal to a long-lived
    service against the same store.
    """

    SLOT_MS = 250

    def __init__(self, start: str = "2017-03-06T09:00:00.000Z"):
        self._start = parse_ts(start)
        self._log = None
        self._anchor = -1
        self._calls = 0

    def bind(self, log) -> None:
        self._log = log

    def now(self) -> str:
        anchor = self._log.last_seq if self._log is not None else 0
        if anchor != self._anchor:
            self._anchor = anchor
            self._calls = 0
        offset = anchor * self.SLOT_MS + self._calls
        self._calls += 1
        return format_ts(self._start + timedelta(milliseconds=offset))
