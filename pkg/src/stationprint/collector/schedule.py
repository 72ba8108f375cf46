"""Recording schedule: 5-second snippets on a two-minute grid, skipping full hours.

Slots sit on odd minutes; minutes {55, 57, 59, 1, 3, 5} are excluded so that no
snippet touches the five minutes before or after a full hour. That yields 24
slots per hour and 576 per day.
"""

from datetime import date, datetime, timedelta, timezone

SNIPPET_SECONDS = 5.0
EXCLUDED_MINUTES = frozenset({55, 57, 59, 1, 3, 5})
SLOT_MINUTES = tuple(m for m in range(1, 60, 2) if m not in EXCLUDED_MINUTES)
SLOTS_PER_HOUR = len(SLOT_MINUTES)  # 24
SLOTS_PER_DAY = 24 * SLOTS_PER_HOUR  # 576


def build_schedule(day: date, hours=range(24)) -> list:
    """Return the slot timestamps (UTC) for `day`, optionally limited to `hours`."""
    base = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
    return [
        base + timedelta(hours=h, minutes=m)
        for h in hours
        for m in SLOT_MINUTES
    ]


def slot_name(slot: datetime) -> str:
    """File-name stem for a slot: HHMM."""
    return f"{slot.hour:02d}{slot.minute:02d}"


def parse_hour_range(text: str) -> range:
    """Parse "A:B" into range(A, B); a single integer means one hour."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        return range(int(lo), int(hi))
    h = int(text)
    return range(h, h + 1)
