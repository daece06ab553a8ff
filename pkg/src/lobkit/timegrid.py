"""Nanosecond timestamps, trading windows and intraday sampling grids.

Timestamps are integers (nanoseconds since the Unix epoch, UTC) everywhere
in the library; this module owns parsing/formatting and the day/window
arithmetic used by the book sampler and the seasonality code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

NS_PER_SEC = 1_000_000_000
NS_PER_DAY = 86_400 * NS_PER_SEC

_ISO_RE = re.compile(
    r"^(\d{4}-\d{2}-\d{2})[T ](\d{2}:\d{2}:\d{2})(?:\.(\d{1,9}))?"
    r"(Z|[+-]\d{2}:\d{2})?$"
)


def parse_iso_ns(text: str) -> int:
    """Parse an ISO-8601 timestamp with up to nanosecond precision.

    A missing offset is taken as UTC.
    """
    m = _ISO_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not an ISO-8601 timestamp: {text!r}")
    date_part, time_part, frac, offset = m.groups()
    base = datetime.fromisoformat(f"{date_part}T{time_part}")
    if offset and offset != "Z":
        sign = 1 if offset[0] == "+" else -1
        hh, mm = int(offset[1:3]), int(offset[4:6])
        base -= sign * timedelta(hours=hh, minutes=mm)
    base = base.replace(tzinfo=timezone.utc)
    ns = int(base.timestamp()) * NS_PER_SEC
    if frac:
        ns += int(frac.ljust(9, "0"))
    return ns


def format_iso_ns(ts: int) -> str:
    """Format nanoseconds-since-epoch as ISO-8601 with 9 fractional digits."""
    sec, frac = divmod(ts, NS_PER_SEC)
    dt = datetime.fromtimestamp(sec, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{frac:09d}Z"


def day_start_ns(ts: int) -> int:
    """Midnight UTC of the day containing ``ts``."""
    return ts - ts % NS_PER_DAY


def seconds_into_day(ts: int) -> float:
    return (ts % NS_PER_DAY) / NS_PER_SEC


@dataclass(frozen=True)
class TradingWindow:
    """Daily trading window [start, end], as seconds since midnight UTC."""

    start_sec: int
    end_sec: int

    def __post_init__(self):
        if not 0 <= self.start_sec < self.end_sec <= 86_400:
            raise ValueError(
                f"invalid window: start={self.start_sec}s end={self.end_sec}s"
            )

    @classmethod
    def parse(cls, text: str) -> "TradingWindow":
        """Parse ``"HH:MM-HH:MM"``."""
        try:
            lo, hi = text.split("-")
            h1, m1 = (int(x) for x in lo.split(":"))
            h2, m2 = (int(x) for x in hi.split(":"))
        except ValueError as exc:
            raise ValueError(f"expected 'HH:MM-HH:MM', got {text!r}") from exc
        return cls(h1 * 3600 + m1 * 60, h2 * 3600 + m2 * 60)

    def __str__(self) -> str:
        s, e = self.start_sec, self.end_sec
        return f"{s // 3600:02d}:{s % 3600 // 60:02d}-{e // 3600:02d}:{e % 3600 // 60:02d}"

    @property
    def span_sec(self) -> int:
        return self.end_sec - self.start_sec

    def contains(self, ts: int) -> bool:
        sec = seconds_into_day(ts)
        return self.start_sec <= sec <= self.end_sec

    def grid(self, day_start: int, interval_sec: float) -> list[int]:
        """Sampling timestamps for one day: start, start+i, ... up to end
        inclusive."""
        if interval_sec <= 0:
            raise ValueError("interval must be positive")
        step = int(round(interval_sec * NS_PER_SEC))
        t0 = day_start + self.start_sec * NS_PER_SEC
        t1 = day_start + self.end_sec * NS_PER_SEC
        return list(range(t0, t1 + 1, step))
