"""Calendar month keys.

Every record in the pipeline is bucketed by the calendar month of its service
date, so months act as snapshot identifiers and as the ordering axis for the
train/test protocols.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass

from .errors import DataError

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True, order=True)
class MonthKey:
    """A (year, month) pair; ordered chronologically, hashable, printed YYYY-MM."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise DataError(f"month out of range 1..12: {self.month}")
        if not 1900 <= self.year <= 2200:
            raise DataError(f"implausible year: {self.year}")

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    def successor(self) -> "MonthKey":
        if self.month == 12:
            return MonthKey(self.year + 1, 1)
        return MonthKey(self.year, self.month + 1)

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        m = _MONTH_RE.match(text.strip())
        if m is None:
            raise DataError(f"cannot parse month key {text!r}; expected YYYY-MM")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_date(cls, d: _dt.date) -> "MonthKey":
        return cls(d.year, d.month)


def consecutive(a: MonthKey, b: MonthKey) -> bool:
    """True when b is the calendar month immediately after a."""
    return a.successor() == b
