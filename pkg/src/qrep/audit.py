"""Reproducibility survey over an annotated publication corpus."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Iterable

from .errors import BadEnumValue, BadHeader, InconsistentRecord

HEADER = ["venue", "year", "has_experiment", "source_availability", "has_repro_package"]
BUNDLED_CORPUS = "qse_survey_2019_2021.csv"


class SourceAvailability(str, enum.Enum):
    NONE = "none"
    FORGE = "forge"
    DOI_SAFE = "doi_safe"


@dataclass(frozen=True)
class PaperRecord:
    venue: str
    year: int
    has_experiment: bool
    source_availability: SourceAvailability
    has_repro_package: bool


@dataclass(frozen=True)
class VenueRow:
    venue: str
    year: int
    papers: int
    exp: int
    src: int
    repro: int


@dataclass(frozen=True)
class Summary:
    rows: int
    total_papers: int
    total_exp: int
    total_src: int
    total_repro: int


def _bool(value: str, row: int, column: str) -> bool:
    v = value.strip().lower()
    if v == "true":
        return True
    if v == "false":
        return False
    raise BadEnumValue(row, column, value)


def load_corpus(text: str) -> list[PaperRecord]:
    """Parse the corpus CSV.  Error rows are 1-based file lines; the header is row 1."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != HEADER:
        raise BadHeader(header or [])
    records = []
    for fields in reader:
        row = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(HEADER):
            raise InconsistentRecord(row, f"expected {len(HEADER)} columns, found {len(fields)}")
        venue, year, has_exp, source, has_repro = (f.strip() for f in fields)
        if not venue:
            raise InconsistentRecord(row, "empty venue")
        try:
            year_value = int(year)
        except ValueError:
            raise BadEnumValue(row, "year", year) from None
        try:
            availability = SourceAvailability(source)
        except ValueError:
            raise BadEnumValue(row, "source_availability", source) from None
        record = PaperRecord(venue, year_value, _bool(has_exp, row, "has_experiment"),
                             availability, _bool(has_repro, row, "has_repro_package"))
        if record.has_repro_package and availability is not SourceAvailability.DOI_SAFE:
            raise InconsistentRecord(row, "has_repro_package requires source_availability doi_safe")
        records.append(record)
    return records


def load_bundled_corpus() -> list[PaperRecord]:
    return load_corpus((resources.files("qrep") / "data" / BUNDLED_CORPUS).read_text(encoding="utf-8"))


def aggregate(records: Iterable[PaperRecord]) -> list[VenueRow]:
    tallies: dict[tuple[int, str], list[int]] = {}
    for r in records:
        t = tallies.setdefault((r.year, r.venue), [0, 0, 0, 0])
        t[0] += 1
        t[1] += r.has_experiment
        t[2] += r.source_availability is not SourceAvailability.NONE
        t[3] += r.has_repro_package
    return [VenueRow(venue, year, *counts) for (year, venue), counts in sorted(tallies.items())]


def summarize(rows: Iterable[VenueRow]) -> Summary:
    rows = list(rows)
    return Summary(
        rows=len(rows),
        total_papers=sum(r.papers for r in rows),
        total_exp=sum(r.exp for r in rows),
        total_src=sum(r.src for r in rows),
        total_repro=sum(r.repro for r in rows),
    )


_COLUMNS = ("Venue", "Year", "# Papers", "# Exp", "# Src", "# Repro")


def render_table(rows: list[VenueRow], summary: Summary | None = None) -> str:
    body = [(r.venue, str(r.year), str(r.papers), str(r.exp), str(r.src), str(r.repro)) for r in rows]
    footer = []
    if summary is not None and rows:
        footer = [("Total", "", str(summary.total_papers), str(summary.total_exp),
                   str(summary.total_src), str(summary.total_repro))]
    widths = [max(len(c[i]) for c in [_COLUMNS, *body, *footer]) for i in range(len(_COLUMNS))]

    def fmt(cells) -> str:
        left = [cells[0].ljust(widths[0]), cells[1].ljust(widths[1])]
        right = [c.rjust(w) for c, w in zip(cells[2:], widths[2:])]
        return "  ".join(left + right).rstrip()

    lines = [fmt(_COLUMNS), "  ".join("-" * w for w in widths)]
    lines += [fmt(c) for c in body]
    if footer:
        lines.append("  ".join("-" * w for w in widths))
        lines += [fmt(c) for c in footer]
    return "\n".join(lines) + "\n"


def to_json(rows: list[VenueRow], summary: Summary) -> str:
    return json.dumps({"rows": [asdict(r) for r in rows], "summary": asdict(summary)}, indent=2) + "\n"
