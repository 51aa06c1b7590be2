import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from delaycast.data import (DailySeries, DataError, DuplicateDateError, EmptySeriesError, EventRangeError,
                            EventSeries, RowError, SchemaError, derive_calendar, parse_daily_csv,
                            parse_event_csv, synth_daily, write_daily_csv)
from oracles import zeller_weekday

HEADER = "date,target,pressure,wind_speed,avg_temp,precipitation\n"


def test_parse_three_rows(write_csv):
    p = write_csv("d.csv", HEADER + "2019-01-01,10,1010,5,1,0\n2019-01-02,20,1011,6,2,0.5\n2019-01-03,30,1012,7,3,0\n")
    s = parse_daily_csv(p)
    assert len(s) == 3
    assert list(s.targets) == [10, 20, 30]
    assert s[0].day_of_week == 1 and s[0].season == "winter"


def test_parse_sorts_rows(write_csv):
    p = write_csv("d.csv", HEADER + "2019-01-03,30,1,1,1,0\n2019-01-01,10,1,1,1,0\n")
    assert [r.date.day for r in parse_daily_csv(p)] == [1, 3]


def test_schema_map(write_csv):
    p = write_csv("d.csv", "day,delays,pres,wspd,tavg,prcp\n2019-01-01,5,1,2,3,4\n")
    schema = {"date": "day", "target": "delays", "pressure": "pres", "wind_speed": "wspd",
              "avg_temp": "tavg", "precipitation": "prcp"}
    s = parse_daily_csv(p, schema)
    assert s[0].weather == (1.0, 2.0, 3.0, 4.0)


def test_missing_column_named(write_csv):
    p = write_csv("d.csv", "date,target,pressure,wind_speed,avg_temp\n2019-01-01,1,1,1,1\n")
    with pytest.raises(SchemaError, match="precipitation"):
        parse_daily_csv(p)


def test_bad_cell_reports_line(write_csv):
    p = write_csv("d.csv", HEADER + "2019-01-01,1,1,1,1,0\n2019-01-02,abc,1,1,1,0\n")
    with pytest.raises(RowError) as err:
        parse_daily_csv(p)
    assert err.value.line == 3


def test_duplicate_date(write_csv):
    p = write_csv("d.csv", HEADER + "2019-01-01,1,1,1,1,0\n2019-01-01,2,1,1,1,0\n")
    with pytest.raises(DuplicateDateError):
        parse_daily_csv(p)


def test_negative_target_rejected(write_csv):
    p = write_csv("d.csv", HEADER + "2019-01-01,-1,1,1,1,0\n")
    with pytest.raises(RowError):
        parse_daily_csv(p)


def test_gaps_reported_and_limited(write_csv):
    p = write_csv("d.csv", HEADER + "2019-01-01,1,1,1,1,0\n2019-01-05,1,1,1,1,0\n")
    s = parse_daily_csv(p)
    assert s.gaps() == [(dt.date(2019, 1, 1), dt.date(2019, 1, 5), 3)]
    with pytest.raises(DataError):
        parse_daily_csv(p, max_gap=2)


def test_round_trip_bit_exact(tmp_path):
    s = synth_daily(40, 10, 5, 1, 3, seed=1)
    p = tmp_path / "s.csv"
    write_daily_csv(s, p)
    back = parse_daily_csv(p)
    assert back == s
    p2 = tmp_path / "s2.csv"
    write_daily_csv(back, p2)
    assert p.read_bytes() == p2.read_bytes()


@pytest.mark.parametrize("date, expected", [
    (dt.date(2019, 1, 1), (1, "winter")),
    (dt.date(2020, 6, 15), (0, "summer")),
    (dt.date(2023, 12, 1), (4, "winter")),
])
def test_derive_calendar_examples(date, expected):
    assert derive_calendar(date) == expected


def test_derive_calendar_matches_zeller_for_whole_years():
    d = dt.date(2019, 1, 1)
    while d.year < 2025:
        dow, season = derive_calendar(d)
        assert dow == zeller_weekday(d.year, d.month, d.day)
        assert season == {12: "winter", 1: "winter", 2: "winter", 3: "spring", 4: "spring", 5: "spring",
                          6: "summer", 7: "summer", 8: "summer"}.get(d.month, "fall")
        d += dt.timedelta(days=1)


def test_event_csv_hours(write_csv, origin):
    p = write_csv("e.csv", "timestamp\n2019-01-01T01:00:00\n2019-01-01T02:00:00\n")
    e = parse_event_csv(p, origin)
    assert list(e.times) == [1.0, 2.0]
    assert e.horizon == 2.0


def test_event_csv_sorted_and_end(write_csv, origin):
    p = write_csv("e.csv", "timestamp\n2019-01-01T05:00:00\n2019-01-01T02:00:00\n")
    e = parse_event_csv(p, origin, end=dt.datetime(2019, 1, 2))
    assert list(e.times) == [2.0, 5.0]
    assert e.horizon == 24.0


def test_event_ties_jittered(write_csv, origin):
    p = write_csv("e.csv", "timestamp\n2019-01-01T03:00:00\n2019-01-01T03:00:00\n2019-01-01T03:00:00\n")
    e = parse_event_csv(p, origin)
    assert len(e) == 3
    assert all(b > a for a, b in zip(e.times, e.times[1:]))
    assert e.times[1] - e.times[0] == pytest.approx(1e-6)


def test_event_before_origin(write_csv, origin):
    p = write_csv("e.csv", "timestamp\n2018-12-31T23:00:00\n")
    with pytest.raises(EventRangeError):
        parse_event_csv(p, origin)


def test_empty_event_file(write_csv, origin):
    with pytest.raises(EmptySeriesError):
        parse_event_csv(write_csv("e.csv", "timestamp\n"), origin)


@given(st.lists(st.floats(0, 1000, allow_nan=False), min_size=1, max_size=60))
def test_event_series_invariants(times):
    e = EventSeries.from_times(times)
    assert e.strictly_increasing
    assert e.times[0] >= 0 and e.times[-1] <= e.horizon
    assert len(e) == len(times)


def test_synth_constant_when_all_effects_off():
    s = synth_daily(30, 0, 0, 0, 0, seed=4)
    assert np.all(s.targets == 100.0)


def test_synth_deterministic():
    assert synth_daily(50, 10, 10, 1, 2, seed=9) == synth_daily(50, 10, 10, 1, 2, seed=9)


def test_synth_weekly_means_differ():
    s = synth_daily(700, weekly_amplitude=50, noise_sd=5, seed=1)
    means = [s.targets[s.day_of_week == d].mean() for d in range(7)]
    assert max(means) - min(means) > 50
    assert len({round(m) for m in means}) == 7


def test_synth_minimum_length():
    with pytest.raises(ValueError):
        synth_daily(5)


def test_series_rejects_unsorted():
    s = synth_daily(12, seed=0)
    with pytest.raises(DataError):
        DailySeries(tuple(reversed(s.records)))


def test_daily_counts():
    e = EventSeries.from_times([1, 2, 30, 47.9, 48.0], horizon=72)
    assert list(e.daily_counts()) == [2, 2, 1]
