"""Cooperative phase deadlines."""

from __future__ import annotations

import time


class PhaseTimeout(RuntimeError):
    pass


class Deadline:
    """Wall-clock budget checked from inside long loops."""

    def __init__(self, seconds: float | None):
        self.seconds = seconds
        self.end = None if seconds is None else time.monotonic() + seconds

    def expired(self) -> bool:
        return self.end is not None and time.monotonic() > self.end

    def check(self) -> None:
        if self.expired():
            raise PhaseTimeout(f"phase exceeded {self.seconds}s")


NO_DEADLINE = Deadline(None)
