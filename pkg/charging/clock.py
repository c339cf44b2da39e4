"""Issuance-time sources for credentials."""

import threading

from django.utils import timezone


class SystemClock:
    def now(self) -> int:
        return int(timezone.now().timestamp())


class LogicalClock:
    """Monotonic counter used by simulations so transcripts carry no wall-clock data."""

    def __init__(self, start: int = 1_700_000_000):
        self._value = start
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            self._value += 1
            return self._value
