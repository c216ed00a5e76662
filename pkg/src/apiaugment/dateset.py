"""Template-generated temporal questions whose answers depend on the current date."""

from __future__ import annotations

import calendar
import datetime as dt
import json
import random
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from pathlib import Path

from .evalgen import EvalItem, build_prompt
from .tools.calendar import MONTHS, WEEKDAYS, format_date

N_CURRENT_DATES = 500
RANGE_DAYS = 4 * 365 + 1
FIRST_CURRENT = dt.date(2015, 1, 1)
LAST_CURRENT = dt.date(2024, 12, 31)

ROW_SIZES = {
    "days_between": 400,
    "attribute_ago": 800,
    "attribute_in_days": 800,
    "weekday_on_date": 400,
    "attribute_relative_day": 4000,
    "holiday_attribute": 1800,
    "holiday_distance": 1200,
}

ATTRIBUTES = ("day of the week", "day of the month", "month", "year")
UNITS = ("days", "weeks", "months", "years")
RELATIVE_DAYS = {
    "the day before yesterday": -2, "yesterday": -1, "today": 0,
    "tomorrow": 1, "the day after tomorrow": 2,
}


def nth_weekday(year: int, month: int, weekday: int, n: int) -> dt.date:
    """``n``-th ``weekday`` (Monday=0) of the month; ``n=-1`` is the last one."""
    if n > 0:
        first = dt.date(year, month, 1)
        return first + dt.timedelta(days=(weekday - first.weekday()) % 7 + 7 * (n - 1))
    last = dt.date(year, month, calendar.monthrange(year, month)[1])
    return last - dt.timedelta(days=(last.weekday() - weekday) % 7)


HOLIDAYS: dict[str, Callable[[int], dt.date]] = {
    "New Year's Day": lambda y: dt.date(y, 1, 1),
    "Martin Luther King Jr. Day": lambda y: nth_weekday(y, 1, 0, 3),
    "Washington's Birthday": lambda y: nth_weekday(y, 2, 0, 3),
    "Memorial Day": lambda y: nth_weekday(y, 5, 0, -1),
    "Juneteenth": lambda y: dt.date(y, 6, 19),
    "Independence Day": lambda y: dt.date(y, 7, 4),
    "Labor Day": lambda y: nth_weekday(y, 9, 0, 1),
    "Columbus Day": lambda y: nth_weekday(y, 10, 0, 2),
    "Veterans Day": lambda y: dt.date(y, 11, 11),
    "Thanksgiving": lambda y: nth_weekday(y, 11, 3, 4),
    "Christmas Day": lambda y: dt.date(y, 12, 25),
}


@dataclass(frozen=True)
class DatesetItem:
    question: str
    gold: str
    current_date: dt.date
    template_family: str

    def to_dict(self) -> dict:
        return {"question": self.question, "gold": self.gold,
                "current_date": self.current_date.isoformat(), "template_family": self.template_family}

    def to_eval_item(self, task_id: str) -> EvalItem:
        return EvalItem(task_id, build_prompt("temporal", q=self.question), (self.gold,), "temporal")


def shift_months(d: dt.date, months: int) -> dt.date:
    total = d.year * 12 + d.month - 1 + months
    y, m = divmod(total, 12)
    return dt.date(y, m + 1, min(d.day, calendar.monthrange(y, m + 1)[1]))


def whole_units(earlier: dt.date, later: dt.date, unit: str) -> int:
    """Complete ``unit``s from ``earlier`` to ``later``."""
    days = (later - earlier).days
    if unit == "days":
        return days
    if unit == "weeks":
        return days // 7
    months = (later.year - earlier.year) * 12 + later.month - earlier.month
    if shift_months(earlier, months) > later:
        months -= 1
    return months if unit == "months" else months // 12


def shift(d: dt.date, n: int, unit: str) -> dt.date:
    if unit == "days":
        return d + dt.timedelta(days=n)
    if unit == "weeks":
        return d + dt.timedelta(weeks=n)
    return shift_months(d, n if unit == "months" else 12 * n)


def attribute(d: dt.date, attr: str) -> str:
    if attr == "day of the week":
        return WEEKDAYS[d.weekday()]
    if attr == "day of the month":
        return str(d.day)
    if attr == "month":
        return MONTHS[d.month - 1]
    return str(d.year)


def _plural(n: int, unit: str) -> str:
    return f"{n} {unit[:-1] if n == 1 else unit}"


def _random_day(rng: random.Random, lo: dt.date, hi: dt.date) -> dt.date:
    return lo + dt.timedelta(days=rng.randrange((hi - lo).days + 1))


@dataclass(frozen=True)
class _Anchor:
    current: dt.date
    past: dt.date
    future: dt.date


def _anchors(seed: int) -> list[_Anchor]:
    rng = random.Random(f"dateset:{seed}:dates")
    out = []
    for _ in range(N_CURRENT_DATES):
        cur = _random_day(rng, FIRST_CURRENT, LAST_CURRENT)
        past = _random_day(rng, cur - dt.timedelta(days=RANGE_DAYS), cur - dt.timedelta(days=1))
        future = _random_day(rng, cur + dt.timedelta(days=1), cur + dt.timedelta(days=RANGE_DAYS))
        out.append(_Anchor(cur, past, future))
    return out


def _days_between(a: _Anchor, rng: random.Random) -> DatesetItem:
    if rng.random() < 0.5:
        return DatesetItem(f"How many days ago was {format_date(a.past)}?",
                           str((a.current - a.past).days), a.current, "days_between")
    return DatesetItem(f"How many days are there until {format_date(a.future)}?",
                       str((a.future - a.current).days), a.current, "days_between")


def _attribute_ago(a: _Anchor, rng: random.Random) -> DatesetItem:
    attr = rng.choice(ATTRIBUTES)
    units = [u for u in UNITS if whole_units(a.past, a.current, u) >= 1]
    unit = rng.choice(units)
    n = whole_units(a.past, a.current, unit)
    target = shift(a.current, -n, unit)
    return DatesetItem(f"What {attr} was it {_plural(n, unit)} ago?",
                       attribute(target, attr), a.current, "attribute_ago")


def _attribute_in_days(a: _Anchor, rng: random.Random) -> DatesetItem:
    attr = rng.choice(ATTRIBUTES)
    n = (a.future - a.current).days
    return DatesetItem(f"What {attr} will it be in {_plural(n, 'days')}?",
                       attribute(a.future, attr), a.current, "attribute_in_days")


def _weekday_on_date(a: _Anchor, rng: random.Random) -> DatesetItem:
    if rng.random() < 0.5:
        q, d = f"What day of the week was it on {format_date(a.past)}?", a.past
    else:
        q, d = f"What day of the week is it on {format_date(a.future)}?", a.future
    return DatesetItem(q, WEEKDAYS[d.weekday()], a.current, "weekday_on_date")


def _attribute_relative_day(a: _Anchor, rng: random.Random) -> DatesetItem:
    attr = rng.choice(ATTRIBUTES)
    phrase = rng.choice(list(RELATIVE_DAYS))
    offset = RELATIVE_DAYS[phrase]
    verb = "was" if offset < 0 else "is"
    target = a.current + dt.timedelta(days=offset)
    return DatesetItem(f"What {attr} {verb} it {phrase}?", attribute(target, attr),
                       a.current, "attribute_relative_day")


def _holiday_attribute(a: _Anchor, rng: random.Random) -> DatesetItem:
    attr = rng.choice(ATTRIBUTES[:3])
    name = rng.choice(list(HOLIDAYS))
    day = HOLIDAYS[name](a.current.year)
    verb = "was" if day < a.current else "is"
    return DatesetItem(f"What {attr} {verb} {name} this year?", attribute(day, attr),
                       a.current, "holiday_attribute")


def _holiday_distance(a: _Anchor, rng: random.Random) -> DatesetItem:
    unit = rng.choice(UNITS)
    name = rng.choice(list(HOLIDAYS))
    day = HOLIDAYS[name](a.current.year)
    if day < a.current:
        q = f"How many {unit} ago was {name} this year?"
        n = whole_units(day, a.current, unit)
    else:
        q = f"How many {unit} are there until {name} this year?"
        n = whole_units(a.current, day, unit)
    return DatesetItem(q, str(n), a.current, "holiday_distance")


_BUILDERS = {
    "days_between": _days_between,
    "attribute_ago": _attribute_ago,
    "attribute_in_days": _attribute_in_days,
    "weekday_on_date": _weekday_on_date,
    "attribute_relative_day": _attribute_relative_day,
    "holiday_attribute": _holiday_attribute,
    "holiday_distance": _holiday_distance,
}


def generate_dateset(seed: int = 0) -> list[DatesetItem]:
    """All 9,400 items: each template row cycles through the 500 current dates."""
    anchors = _anchors(seed)
    items = []
    for family, size in ROW_SIZES.items():
        rng = random.Random(f"dateset:{seed}:{family}")
        build = _BUILDERS[family]
        for j in range(size):
            items.append(build(anchors[j % len(anchors)], rng))
    return items


def dateset_eval_items(items: Iterable[DatesetItem]) -> list[EvalItem]:
    return [it.to_eval_item(f"dateset-{i}") for i, it in enumerate(items)]


def write_dateset(items: Iterable[DatesetItem], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for it in items:
            fh.write(json.dumps(it.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n
