import datetime

import pytest
from hypothesis import given
from hypothesis import strategies as st

from transitlink.errors import DataError
from transitlink.months import MonthKey, consecutive


def test_str_is_zero_padded():
    assert str(MonthKey(2019, 3)) == "2019-03"


def test_parse_roundtrip_and_whitespace():
    assert MonthKey.parse(" 2019-11 ") == MonthKey(2019, 11)


@pytest.mark.parametrize("bad", ["2019-3", "201903", "2019/03", "x", "2019-13"])
def test_parse_rejects_malformed(bad):
    with pytest.raises(DataError):
        MonthKey.parse(bad)


def test_month_range_validated():
    with pytest.raises(DataError):
        MonthKey(2020, 0)
    with pytest.raises(DataError):
        MonthKey(1776, 1)


def test_successor_rolls_over_december():
    assert MonthKey(2019, 12).successor() == MonthKey(2020, 1)
    assert MonthKey(2019, 5).successor() == MonthKey(2019, 6)


def test_ordering_is_chronological():
    assert MonthKey(2019, 12) < MonthKey(2020, 1) < MonthKey(2020, 2)


def test_from_date():
    assert MonthKey.from_date(datetime.date(2021, 7, 30)) == MonthKey(2021, 7)


def test_consecutive():
    assert consecutive(MonthKey(2019, 12), MonthKey(2020, 1))
    assert not consecutive(MonthKey(2019, 12), MonthKey(2020, 2))
    assert not consecutive(MonthKey(2020, 2), MonthKey(2020, 1))


@given(st.integers(1900, 2200), st.integers(1, 12))
def test_parse_inverts_str(year, month):
    key = MonthKey(year, month)
    assert MonthKey.parse(str(key)) == key
