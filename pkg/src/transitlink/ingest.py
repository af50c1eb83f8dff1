"""Archive ingestion.

Parses raw service archives (rail stop-level CSV and air origin/destination
tables), applies the cleaning rules, and reduces rail services to one
trajectory per service with a final-arrival-delay outcome.

All parsing is streaming and single pass. Record-level problems are collected
with their line numbers and only become fatal past a configurable cap; a
missing required column is always fatal.
"""

from __future__ import annotations

import csv
import datetime as _dt
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .errors import DataError, FormatError
from .months import MonthKey

log = logging.getLogger(__name__)

ERROR_CAP_DEFAULT = 1000

# Values treated as "absent" in any optional cell.
_ABSENT = {"", "nan", "na", "none", "null"}

# Header aliases, lowercased. The archive has shipped under both id headers.
_RAIL_COLUMNS = {
    "rdt-id": "service_id",
    "service id": "service_id",
    "date": "date",
    "type": "service_type",
    "company": "company",
    "completely cancelled": "completely_cancelled",
    "partly cancelled": "partly_cancelled",
    "maximum delay": "maximum_delay",
    "station name": "station_name",
    "arrival time": "arrival_time",
    "arrival delay": "arrival_delay",
    "arrival cancelled": "arrival_cancelled",
    "departure time": "departure_time",
    "departure delay": "departure_delay",
    "departure cancelled": "departure_cancelled",
}

_RAIL_REQUIRED = (
    "service_id",
    "date",
    "service_type",
    "company",
    "completely_cancelled",
    "partly_cancelled",
    "station_name",
    "arrival_time",
    "arrival_delay",
    "arrival_cancelled",
    "departure_time",
    "departure_delay",
    "departure_cancelled",
)

_FLIGHT_COLUMNS = {
    "year": "year",
    "month": "month",
    "source": "source",
    "target": "target",
    "passengers": "passengers",
    "weight": "weight",
}

_FLIGHT_REQUIRED = ("year", "month", "source", "target", "passengers", "weight")


@dataclass(frozen=True)
class StopRecord:
    """One stop of one service, as logged in the rail archive."""

    service_id: str
    date: _dt.date
    service_type: str
    company: str
    completely_cancelled: bool
    partly_cancelled: bool
    station_name: str
    arrival_time: Optional[_dt.datetime]
    arrival_delay_min: Optional[int]
    arrival_cancelled: Optional[bool]
    departure_time: Optional[_dt.datetime]
    departure_delay_min: Optional[int]
    departure_cancelled: Optional[bool]


@dataclass(frozen=True)
class ServiceTrajectory:
    """A whole service reduced to its source/target stations and final outcome.

    final_arrival_delay_min is -1 exactly when the service never logged a final
    arrival delay and the arrival was explicitly not cancelled (an unfinished
    trajectory).
    """

    service_id: str
    month: MonthKey
    source_station: str
    target_station: str
    final_arrival_delay_min: int
    final_arrival_cancelled: bool
    completely_cancelled: bool
    had_intermediate_delay: bool


@dataclass(frozen=True)
class FlightRecord:
    """One (year, month, source, target) row of the air table."""

    year: int
    month: int
    source: str
    target: str
    passengers: int
    weight: int


@dataclass
class IngestStats:
    """Counters and collected record-level issues for one ingest run."""

    rows_read: int = 0
    records_yielded: int = 0
    dropped_company: int = 0
    dropped_type: int = 0
    services_skipped: int = 0
    flights_dropped_self_loop: int = 0
    flights_dropped_zero_weight: int = 0
    negative_arrival_delays_floored: int = 0
    issues: list[tuple[int, str]] = field(default_factory=list)

    def issue(self, line_no: int, message: str, cap: int = ERROR_CAP_DEFAULT) -> None:
        self.issues.append((line_no, message))
        if len(self.issues) > cap:
            raise FormatError(
                f"more than {cap} record-level errors; first: "
                f"line {self.issues[0][0]}: {self.issues[0][1]}"
            )


def _cell(value: Optional[str]) -> Optional[str]:
    """Normalize a raw cell; absent markers collapse to None, never to zero."""
    if value is None:
        return None
    v = value.strip()
    if v.lower() in _ABSENT:
        return None
    return v


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "1", "1.0"):
        return True
    if v in ("false", "0", "0.0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_opt_bool(raw: Optional[str]) -> Optional[bool]:
    v = _cell(raw)
    return None if v is None else _parse_bool(v)


def _parse_flag(raw: Optional[str]) -> bool:
    """Service-level flags: absent means not flagged."""
    v = _cell(raw)
    return False if v is None else _parse_bool(v)


def _parse_minutes(raw: Optional[str]) -> Optional[int]:
    v = _cell(raw)
    if v is None:
        return None
    minutes = float(v)
    if minutes != minutes or minutes in (float("inf"), float("-inf")):
        raise ValueError(f"not a finite delay: {raw!r}")
    return int(round(minutes))


def _parse_date(raw: str) -> _dt.date:
    v = raw.strip()
    try:
        return _dt.datetime.strptime(v, "%d-%m-%Y").date()
    except ValueError:
        pass
    return _dt.date.fromisoformat(v)


_TS_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{1,2})(?::(\d{0,2}))?(?::(\d{0,2}))?"
)


def _parse_timestamp(raw: Optional[str]) -> Optional[_dt.datetime]:
    v = _cell(raw)
    if v is None:
        return None
    try:
        return _dt.datetime.fromisoformat(v)
    except ValueError:
        pass
    # The archive truncates some timestamps mid-field; recover what is there.
    m = _TS_RE.match(v)
    if m is None:
        raise ValueError(f"not a timestamp: {raw!r}")
    year, month, day, hour = (int(m.group(i)) for i in range(1, 5))
    minute = int(m.group(5)) if m.group(5) else 0
    second = int(m.group(6)) if m.group(6) else 0
    return _dt.datetime(year, month, day, hour, minute, second)


def _resolve_header(
    raw_header: Sequence[str], aliases: dict, required: Sequence[str], what: str
) -> dict[str, int]:
    """Map canonical field name -> column index. Order-insensitive."""
    positions: dict[str, int] = {}
    for idx, name in enumerate(raw_header):
        canon = aliases.get(name.strip().lower())
        if canon is not None and canon not in positions:
            positions[canon] = idx
    missing = [c for c in required if c not in positions]
    if missing:
        raise FormatError(f"{what} header is missing columns: {', '.join(sorted(missing))}")
    return positions


def parse_service_archive(
    path: str,
    row_limit: Optional[int] = None,
    error_cap: int = ERROR_CAP_DEFAULT,
    stats: Optional[IngestStats] = None,
) -> Iterator[StopRecord]:
    """Stream StopRecords from a rail archive CSV.

    Empty or NaN delay cells become absent values, never zero. Malformed rows
    are recorded on `stats` with their 1-based line number and skipped; past
    `error_cap` collected issues the run aborts with a format error.
    """
    if stats is None:
        stats = IngestStats()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            raw_header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, no header row") from None
        pos = _resolve_header(raw_header, _RAIL_COLUMNS, _RAIL_REQUIRED, "rail archive")
        for line_no, row in enumerate(reader, start=2):
            if row_limit is not None and stats.rows_read >= row_limit:
                break
            if not row or all(not c.strip() for c in row):
                continue
            stats.rows_read += 1
            try:
                record = _parse_rail_row(row, pos)
            except (ValueError, IndexError) as exc:
                stats.issue(line_no, str(exc), cap=error_cap)
                continue
            stats.records_yielded += 1
            yield record


def _parse_rail_row(row: Sequence[str], pos: dict[str, int]) -> StopRecord:
    def cell(name: str) -> Optional[str]:
        return row[pos[name]]

    service_id = _cell(cell("service_id"))
    if service_id is None:
        raise ValueError("missing service id")
    date_raw = _cell(cell("date"))
    if date_raw is None:
        raise ValueError("missing service date")
    station = _cell(cell("station_name"))
    if station is None:
        raise ValueError("missing station name")

    arrival_delay = _parse_minutes(cell("arrival_delay"))
    if arrival_delay is not None and arrival_delay < 0:
        # An early arrival carries no delay; keep the record rather than drop it.
        arrival_delay = 0

    return StopRecord(
        service_id=service_id,
        date=_parse_date(date_raw),
        service_type=_cell(cell("service_type")) or "",
        company=_cell(cell("company")) or "",
        completely_cancelled=_parse_flag(cell("completely_cancelled")),
        partly_cancelled=_parse_flag(cell("partly_cancelled")),
        station_name=station,
        arrival_time=_parse_timestamp(cell("arrival_time")),
        arrival_delay_min=arrival_delay,
        arrival_cancelled=_parse_opt_bool(cell("arrival_cancelled")),
        departure_time=_parse_timestamp(cell("departure_time")),
        departure_delay_min=_parse_minutes(cell("departure_delay")),
        departure_cancelled=_parse_opt_bool(cell("departure_cancelled")),
    )


def clean_services(
    records: Iterable[StopRecord],
    allowed_companies: Sequence[str] = ("NS",),
    excluded_type_keywords: Sequence[str] = ("bus", "taxi"),
    allowed_types: Optional[set[str]] = None,
    stats: Optional[IngestStats] = None,
) -> Iterator[StopRecord]:
    """Drop non-retained operators and replacement services.

    By default keeps company "NS" and drops any service_type containing "bus"
    or "taxi" (case-insensitive); an explicit allowed_types set overrides the
    keyword rule. Drop counts land on `stats`.
    """
    if stats is None:
        stats = IngestStats()
    companies = {c.lower() for c in allowed_companies}
    keywords = tuple(k.lower() for k in excluded_type_keywords)
    for rec in records:
        if rec.company.lower() not in companies:
            stats.dropped_company += 1
            continue
        kind = rec.service_type.lower()
        if allowed_types is not None:
            if rec.service_type not in allowed_types:
                stats.dropped_type += 1
                continue
        elif any(k in kind for k in keywords):
            stats.dropped_type += 1
            continue
        yield rec


def extract_trajectories(
    records: Iterable[StopRecord],
    stats: Optional[IngestStats] = None,
) -> list[ServiceTrajectory]:
    """Reduce stop streams to one trajectory per service.

    Source is the first stop with a planned departure, target the last stop
    with a planned arrival, ordered by planned time (file order on ties).
    Services that cannot form an edge (fewer than 2 usable stops, no planned
    departure/arrival, or source == target) are skipped with a counted warning.
    """
    if stats is None:
        stats = IngestStats()
    grouped: dict[str, list[StopRecord]] = {}
    order: list[str] = []
    for rec in records:
        if rec.service_id not in grouped:
            grouped[rec.service_id] = []
            order.append(rec.service_id)
        grouped[rec.service_id].append(rec)

    out: list[ServiceTrajectory] = []
    for service_id in order:
        traj = _build_trajectory(service_id, grouped[service_id])
        if traj is None:
            stats.services_skipped += 1
            log.debug("service %s skipped: cannot form a trajectory", service_id)
        else:
            out.append(traj)
    if stats.services_skipped:
        log.warning("skipped %d services that cannot form an edge", stats.services_skipped)
    return out


def _build_trajectory(service_id: str, stops: list[StopRecord]) -> Optional[ServiceTrajectory]:
    usable = [s for s in stops if s.arrival_time is not None or s.departure_time is not None]
    if len(usable) < 2:
        return None

    # Order by planned time; sorted() is stable, so stops sharing a planned
    # minute keep file order (the archive is an as-run log).
    ordered = sorted(usable, key=lambda s: s.departure_time or s.arrival_time)

    source = next((s for s in ordered if s.departure_time is not None), None)
    target = next((s for s in reversed(ordered) if s.arrival_time is not None), None)
    if source is None or target is None:
        return None
    if source.station_name == target.station_name:
        return None

    if target.arrival_delay_min is not None:
        final_delay = target.arrival_delay_min
        final_cancelled = bool(target.arrival_cancelled) if target.arrival_cancelled is not None else False
    elif target.arrival_cancelled is False:
        final_delay = -1  # unfinished: no delay logged, arrival explicitly not cancelled
        final_cancelled = False
    else:
        final_delay = 0
        final_cancelled = True

    intermediate = False
    for s in ordered:
        if s.departure_delay_min is not None and s.departure_delay_min > 0:
            intermediate = True
            break
        if s is not target and s.arrival_delay_min is not None and s.arrival_delay_min > 0:
            intermediate = True
            break

    return ServiceTrajectory(
        service_id=service_id,
        month=MonthKey.from_date(ordered[0].date),
        source_station=source.station_name,
        target_station=target.station_name,
        final_arrival_delay_min=final_delay,
        final_arrival_cancelled=final_cancelled,
        completely_cancelled=any(s.completely_cancelled for s in stops),
        had_intermediate_delay=intermediate,
    )


def parse_flight_table(
    path: str,
    error_cap: int = ERROR_CAP_DEFAULT,
    stats: Optional[IngestStats] = None,
) -> Iterator[FlightRecord]:
    """Stream FlightRecords from an air origin/destination CSV."""
    if stats is None:
        stats = IngestStats()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            raw_header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, no header row") from None
        pos = _resolve_header(raw_header, _FLIGHT_COLUMNS, _FLIGHT_REQUIRED, "flight table")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            stats.rows_read += 1
            try:
                record = _parse_flight_row(row, pos)
            except (ValueError, IndexError) as exc:
                stats.issue(line_no, str(exc), cap=error_cap)
                continue
            stats.records_yielded += 1
            yield record


def _parse_flight_row(row: Sequence[str], pos: dict[str, int]) -> FlightRecord:
    def need(name: str) -> str:
        v = _cell(row[pos[name]])
        if v is None:
            raise ValueError(f"missing {name}")
        return v

    year = int(float(need("year")))
    month = int(float(need("month")))
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range: {month}")
    passengers = int(round(float(need("passengers"))))
    weight = int(round(float(need("weight"))))
    if passengers < 0 or weight < 0:
        raise ValueError("negative count")
    return FlightRecord(
        year=year,
        month=month,
        source=need("source"),
        target=need("target"),
        passengers=passengers,
        weight=weight,
    )


def clean_flights(
    records: Iterable[FlightRecord],
    stats: Optional[IngestStats] = None,
) -> Iterator[FlightRecord]:
    """Drop self-loop rows and rows with zero weight."""
    if stats is None:
        stats = IngestStats()
    for rec in records:
        if rec.source == rec.target:
            stats.flights_dropped_self_loop += 1
            continue
        if rec.weight == 0:
            stats.flights_dropped_zero_weight += 1
            continue
        yield rec
