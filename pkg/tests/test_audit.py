import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrep.audit import (
    HEADER,
    PaperRecord,
    SourceAvailability,
    aggregate,
    load_bundled_corpus,
    load_corpus,
    render_table,
    summarize,
)
from qrep.errors import BadEnumValue, BadHeader, InconsistentRecord

HEAD = ",".join(HEADER) + "\n"

# (venue, year, papers, exp, src, repro) as published
PUBLISHED = {
    ("QSA@ICSA", 2021, 4, 2, 1, 0),
    ("Q-SET@QW", 2020, 6, 2, 0, 0),
    ("Q-SET", 2021, 4, 2, 1, 0),
    ("QCS@SAC", 2021, 11, 10, 8, 0),
    ("APEQS@FSE", 2020, 4, 1, 0, 0),
    ("QTOP@Netsys", 2019, 18, 12, 2, 1),
    ("Q-SE@ICSE", 2020, 8, 3, 2, 0),
    ("Q-SE@ICSE", 2021, 8, 3, 1, 1),
}


def as_tuples(rows):
    return {(r.venue, r.year, r.papers, r.exp, r.src, r.repro) for r in rows}


def brute_force(records):
    """Independent tally: one pass per venue-year and per column."""
    out = set()
    for venue, year in {(r.venue, r.year) for r in records}:
        group = [r for r in records if (r.venue, r.year) == (venue, year)]
        out.add((venue, year, len(group),
                 len([r for r in group if r.has_experiment]),
                 len([r for r in group if r.source_availability.value != "none"]),
                 len([r for r in group if r.has_repro_package])))
    return out


def test_valid_row():
    assert load_corpus(HEAD + "QTOP@Netsys,2019,true,forge,false\n") == [
        PaperRecord("QTOP@Netsys", 2019, True, SourceAvailability.FORGE, False)]


def test_bad_enum_value():
    with pytest.raises(BadEnumValue) as exc:
        load_corpus(HEAD + "X,2020,true,github,false\n")
    assert exc.value.row == 2
    assert exc.value.column == "source_availability"


def test_repro_requires_doi_safe_source():
    with pytest.raises(InconsistentRecord):
        load_corpus(HEAD + "X,2020,true,none,true\n")


def test_error_cites_file_row():
    rows = ["A,2020,true,none,false\n"] * 5 + ["A,2020,maybe,none,false\n"]
    with pytest.raises(BadEnumValue) as exc:
        load_corpus(HEAD + "".join(rows))
    assert exc.value.row == 7


@pytest.mark.parametrize("text", ["", "venue,year\n", "venue,year,has_experiment,source,has_repro_package\n"])
def test_bad_header(text):
    with pytest.raises(BadHeader):
        load_corpus(text)


def test_wrong_column_count():
    with pytest.raises(InconsistentRecord):
        load_corpus(HEAD + "A,2020,true\n")


def test_bundled_corpus_reproduces_published_table():
    rows = aggregate(load_bundled_corpus())
    assert as_tuples(rows) == PUBLISHED
    s = summarize(rows)
    assert (s.rows, s.total_papers, s.total_exp, s.total_src, s.total_repro) == (8, 63, 35, 15, 2)


def test_rows_are_sorted_by_year_then_venue():
    rows = aggregate(load_bundled_corpus())
    assert [(r.year, r.venue) for r in rows] == sorted((r.year, r.venue) for r in rows)


def test_empty_corpus():
    rows = aggregate(load_corpus(HEAD))
    assert rows == []
    s = summarize(rows)
    assert (s.rows, s.total_papers, s.total_repro) == (0, 0, 0)
    assert render_table(rows, s).splitlines()[0].split() == ["Venue", "Year", "#", "Papers", "#", "Exp",
                                                              "#", "Src", "#", "Repro"]
    assert len(render_table(rows, s).splitlines()) == 2


def test_single_record():
    r = PaperRecord("V", 2021, True, SourceAvailability.DOI_SAFE, True)
    assert as_tuples(aggregate([r])) == {("V", 2021, 1, 1, 1, 1)}


_records = st.lists(st.builds(
    lambda venue, year, exp, src, repro: PaperRecord(
        venue, year, exp, src, repro and src is SourceAvailability.DOI_SAFE),
    st.sampled_from(["A", "B", "C@D"]), st.integers(2019, 2021), st.booleans(),
    st.sampled_from(list(SourceAvailability)), st.booleans(),
), max_size=40)


@given(_records)
def test_aggregate_matches_brute_force(records):
    assert as_tuples(aggregate(records)) == brute_force(records)


@given(_records, st.randoms())
def test_aggregate_is_order_independent(records, rnd):
    shuffled = list(records)
    rnd.shuffle(shuffled)
    assert aggregate(shuffled) == aggregate(records)


@given(_records)
def test_row_invariants(records):
    rows = aggregate(records)
    for r in rows:
        assert 0 <= r.repro <= r.src <= r.papers
        assert 0 <= r.exp <= r.papers
    assert summarize(rows).total_papers == len(records)
    assert len({(r.venue, r.year) for r in rows}) == len(rows)


def test_csv_round_trip_through_loader():
    rnd = random.Random(5)
    lines = []
    for _ in range(50):
        src = rnd.choice(["none", "forge", "doi_safe"])
        repro = src == "doi_safe" and rnd.random() < 0.5
        lines.append(f"V{rnd.randint(1, 3)},{rnd.randint(2019, 2021)},{str(rnd.random() < .5).lower()},"
                     f"{src},{str(repro).lower()}\n")
    records = load_corpus(HEAD + "".join(lines))
    assert len(records) == 50
    assert as_tuples(aggregate(records)) == brute_force(records)
