"""Calendar classification of days into weekday / weekend / holiday.

The classification is external knowledge (which dates are holidays), so it is
plain user-supplied configuration rather than something inferred from data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

WEEKDAY, WEEKEND, HOLIDAY = "weekday", "weekend", "holiday"
DAY_TYPES = (WEEKDAY, WEEKEND, HOLIDAY)


@dataclass(frozen=True)
class DayTypeCalendar:
    start_date: date
    slots_per_day: int = 48
    weekend_weekdays: frozenset = frozenset({5, 6})  # Sat, Sun
    holidays: frozenset = field(default_factory=frozenset)  # set of date

    def date_of_day(self, day_index: int) -> date:
        return self.start_date + timedelta(days=day_index)

    def day_type_of_date(self, d: date) -> str:
        if d in self.holidays:
            return HOLIDAY
        if d.weekday() in self.weekend_weekdays:
            return WEEKEND
        return WEEKDAY

    def day_type_of_day(self, day_index: int) -> str:
        return self.day_type_of_date(self.date_of_day(day_index))

    def day_of_slot(self, slot: int) -> int:
        return slot // self.slots_per_day

    def day_type_of_slot(self, slot: int) -> str:
        return self.day_type_of_day(self.day_of_slot(slot))

    def to_dict(self) -> dict:
        return {
            "start_date": self.start_date.isoformat(),
            "slots_per_day": self.slots_per_day,
            "weekend_weekdays": sorted(self.weekend_weekdays),
            "holidays": sorted(d.isoformat() for d in self.holidays),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DayTypeCalendar":
        return cls(
            start_date=date.fromisoformat(doc["start_date"]),
            slots_per_day=int(doc.get("slots_per_day", 48)),
            weekend_weekdays=frozenset(doc.get("weekend_weekdays", [5, 6])),
            holidays=frozenset(
                date.fromisoformat(d) for d in doc.get("holidays", [])
            ),
        )
