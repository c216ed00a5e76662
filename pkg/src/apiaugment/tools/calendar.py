from __future__ import annotations

import datetime as dt
import re

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
MONTHS = ("January", "February", "March", "April", "May", "June", "July",
          "August", "September", "October", "November", "December")


def format_date(d: dt.date) -> str:
    """``August 14, 2020``"""
    return f"{MONTHS[d.month - 1]} {d.day}, {d.year}"


def calendar_now(context_date: dt.date) -> str:
    return f"Today is {WEEKDAYS[context_date.weekday()]}, {format_date(context_date)}."


# /2017/03/09/, 2017-03-09, 2017_3_9 and the compact 20170309
_URL_DATE_RES = (
    re.compile(r"(?<!\d)((?:19|20)\d{2})[/_.-](0?[1-9]|1[0-2])[/_.-](0?[1-9]|[12]\d|3[01])(?!\d)"),
    re.compile(r"(?<!\d)((?:19|20)\d{2})(0[1-9]|1[0-2])(0[1-9]|[12]\d|3[01])(?!\d)"),
)


def date_from_url(url: str | None) -> dt.date | None:
    """First valid year-month-day found in ``url``."""
    if not url:
        return None
    for pattern in _URL_DATE_RES:
        for m in pattern.finditer(url):
            try:
                return dt.date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
            except ValueError:
                continue
    return None
