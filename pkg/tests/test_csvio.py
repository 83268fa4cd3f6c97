# pylint: skip-file
"""Tests for the shared result-row CSV schema."""

import dataclasses
import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from frilab.csvio import (
    COLUMNS,
    HEADER,
    ResultRow,
    SchemaError,
    format_row,
    lint_file,
    lint_text,
    parse_row,
    read_rows,
    render_csv,
    write_rows,
)


def make_row(**overrides):
    base = dict(
        experiment="crossing",
        d=3,
        u=1.0,
        T=1.0,
        R=8,
        L=None,
        eps=None,
        extra="",
        trials=1000,
        successes=400,
        p_hat=0.4,
        ci_low=0.37,
        ci_high=0.43,
        seed=1,
        shards=1,
        intrusion_tol=1e-6,
    )
    base.update(overrides)
    return ResultRow(**base)


# ---------------------------------------------------------------------------
# schema basics


def test_schema_has_sixteen_columns():
    assert len(COLUMNS) == 16
    assert COLUMNS == (
        "experiment", "d", "u", "T", "R", "L", "eps", "extra",
        "trials", "successes", "p_hat", "ci_low", "ci_high",
        "seed", "shards", "intrusion_tol",
    )
    assert HEADER == ",".join(COLUMNS)


def test_valid_row_constructs():
    row = make_row()
    assert row.p_hat == 0.4
    assert row.L is None


@pytest.mark.parametrize(
    "overrides",
    [
        dict(experiment=""),
        dict(experiment="a,b"),
        dict(extra='say "hi"'),
        dict(extra="two\nlines"),
        dict(d=0),
        dict(u=-0.5),
        dict(u=math.inf),
        dict(T=0.0),
        dict(R=-1),
        dict(L=-2),
        dict(eps=1.5),
        dict(eps=math.nan),
        dict(trials=0),
        dict(successes=-1),
        dict(successes=1001),
        dict(p_hat=math.nan),
        dict(ci_low=0.5, p_hat=0.4),
        dict(ci_high=0.39),
        dict(ci_high=1.2, p_hat=1.1),
        dict(shards=0),
        dict(intrusion_tol=0.0),
        dict(intrusion_tol=-1e-9),
    ],
)
def test_invalid_rows_raise(overrides):
    with pytest.raises(SchemaError):
        make_row(**overrides)


def test_schema_error_is_value_error_and_joins_problems():
    with pytest.raises(SchemaError) as err:
        make_row(d=0, trials=0)
    assert isinstance(err.value, ValueError)
    assert "; " in str(err.value)


def test_optional_fields_allow_none_and_values():
    row = make_row(L=2, eps=0.2, extra="dT=0.05")
    assert row.L == 2
    assert row.eps == 0.2


# ---------------------------------------------------------------------------
# formatting and parsing


def test_format_row_renders_empty_optionals():
    line = format_row(make_row())
    parts = line.split(",")
    assert len(parts) == 16
    assert parts[5] == ""
    assert parts[6] == ""
    assert parts[2] == repr(1.0)


def test_round_trip_exact():
    row = make_row(L=1, eps=0.25, extra="note", u=0.30000000000000004)
    assert parse_row(format_row(row)) == row


def test_parse_row_field_count():
    with pytest.raises(SchemaError, match="16"):
        parse_row("a,b,c")


def test_parse_row_type_errors():
    line = format_row(make_row())
    parts = line.split(",")
    parts[1] = "three"
    with pytest.raises(SchemaError, match="integer"):
        parse_row(",".join(parts))
    parts = line.split(",")
    parts[2] = "fast"
    with pytest.raises(SchemaError, match="number"):
        parse_row(",".join(parts))
    parts = line.split(",")
    parts[2] = "inf"
    with pytest.raises(SchemaError, match="finite"):
        parse_row(",".join(parts))


def test_render_csv_layout():
    text = render_csv([make_row(), make_row(R=16)])
    lines = text.split("\n")
    assert lines[0] == HEADER
    assert len(lines) == 4
    assert lines[-1] == ""
    assert text.endswith("\n")


# ---------------------------------------------------------------------------
# linting and file IO


def test_lint_accepts_conformant_text():
    assert lint_text(render_csv([make_row()])) == []


def test_lint_empty_and_bad_header():
    assert lint_text("") == ["file is empty"]
    problems = lint_text("not,a,header\n")
    assert len(problems) == 1
    assert "bad header" in problems[0]


def test_lint_reports_line_numbers():
    good = format_row(make_row())
    bad = good.replace("crossing", "")
    problems = lint_text("\n".join([HEADER, good, bad]) + "\n")
    assert len(problems) == 1
    assert problems[0].startswith("line 3:")


def test_file_round_trip(tmp_path):
    rows = [make_row(), make_row(L=4, eps=0.1, u=2.5, extra="dT=0.5")]
    path = tmp_path / "results.csv"
    write_rows(path, rows)
    assert lint_file(path) == []
    assert read_rows(path) == rows


def test_read_rows_rejects_bad_file(tmp_path):
    path = tmp_path / "broken.csv"
    path.write_text(HEADER + "\njunk\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        read_rows(path)


def test_lint_file_rejects_non_utf8(tmp_path):
    path = tmp_path / "binary.csv"
    path.write_bytes(b"\xff\xfe\x00broken")
    assert lint_file(path) == ["file is not valid UTF-8"]


# ---------------------------------------------------------------------------
# property: formatting is exactly invertible

_SAFE = st.text(
    alphabet=st.characters(
        min_codepoint=32, max_codepoint=126, blacklist_characters=',"'
    ),
    max_size=12,
)


@st.composite
def result_rows(draw):
    p_hat = draw(st.floats(min_value=0.0, max_value=1.0))
    ci_low = p_hat * draw(st.floats(min_value=0.0, max_value=1.0))
    ci_high = p_hat + (1.0 - p_hat) * draw(
        st.floats(min_value=0.0, max_value=1.0)
    )
    trials = draw(st.integers(min_value=1, max_value=10**9))
    return ResultRow(
        experiment=draw(_SAFE.filter(bool)),
        d=draw(st.integers(min_value=1, max_value=8)),
        u=draw(st.floats(min_value=0.0, max_value=1e6)),
        T=draw(st.floats(min_value=1e-9, max_value=1e6)),
        R=draw(st.integers(min_value=0, max_value=10**6)),
        L=draw(st.one_of(st.none(), st.integers(0, 10**6))),
        eps=draw(st.one_of(st.none(), st.floats(0.0, 1.0))),
        extra=draw(_SAFE),
        trials=trials,
        successes=draw(st.integers(0, trials)),
        p_hat=p_hat,
        ci_low=ci_low,
        ci_high=ci_high,
        seed=draw(st.integers(min_value=0, max_value=2**63 - 1)),
        shards=draw(st.integers(min_value=1, max_value=64)),
        intrusion_tol=draw(st.floats(min_value=1e-12, max_value=1.0)),
    )


@given(result_rows())
@settings(deadline=None, max_examples=80)
def test_round_trip_property(row):
    line = format_row(row)
    back = parse_row(line)
    assert dataclasses.asdict(back) == dataclasses.asdict(row)
    assert lint_text(render_csv([row])) == []
