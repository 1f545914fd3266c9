"""Tests for bit-exact series file round trips and the kv helpers."""

import numpy as np
import pytest

from spcelab.errors import DataError, SeriesParseError
from spcelab.series import TimeSeries
from spcelab.series_io import (
    format_kv_csv,
    format_kv_text,
    parse_kv_text,
    read_series,
    series_text,
    write_series,
)


def make_series(n=50, seed=1, nd_every=7, setting_id="s0"):
    rng = np.random.default_rng(seed)
    x = rng.choice(np.array([1, -1], dtype=np.int8), size=n)
    y = rng.choice(np.array([1, -1], dtype=np.int8), size=n)
    if nd_every:
        x[::nd_every] = 0
        y[::nd_every] = 0
    return TimeSeries(setting_id=setting_id, x=x, y=y)


def test_canonical_text_frozen():
    s = TimeSeries(
        setting_id="a0",
        x=np.array([1, -1, 0], dtype=np.int8),
        y=np.array([-1, -1, 0], dtype=np.int8),
    )
    want = "trial_index,setting_id,x,y\n0,a0,1,-1\n1,a0,-1,-1\n2,a0,ND,ND\n"
    assert series_text(s) == want


def test_round_trip_lossless(tmp_path):
    s = make_series(200, seed=3)
    path = tmp_path / "series_s0.csv"
    write_series(s, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").startswith("trial_index,setting_id,x,y\n")
    back = read_series(path)
    np.testing.assert_array_equal(back.x, s.x)
    np.testing.assert_array_equal(back.y, s.y)
    assert back.setting_id == s.setting_id
    # idempotent: write(read(file)) reproduces the bytes
    path2 = tmp_path / "copy.csv"
    write_series(back, path2)
    assert path2.read_bytes() == raw


def test_read_metadata_passthrough(tmp_path):
    path = tmp_path / "s.csv"
    write_series(make_series(20), path)
    back = read_series(path, model_tag="quantum", run_id="run-abc", seed=5)
    assert back.model_tag == "quantum"
    assert back.run_id == "run-abc"
    assert back.seed == 5


def test_plus_sign_token_accepted(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("trial_index,setting_id,x,y\n0,s0,+1,-1\n", encoding="utf-8")
    back = read_series(path)
    assert back.x[0] == 1 and back.y[0] == -1


@pytest.mark.parametrize(
    "body,row,column",
    [
        ("trial_index,setting_id,x\n", 0, "header"),
        ("trial_index,setting_id,x,y\n", 1, "trial_index"),
        ("trial_index,setting_id,x,y\n1,s0,1,1\n", 1, "trial_index"),
        ("trial_index,setting_id,x,y\nzero,s0,1,1\n", 1, "trial_index"),
        ("trial_index,setting_id,x,y\n0,s0,1,1\n1,s1,1,1\n", 2, "setting_id"),
        ("trial_index,setting_id,x,y\n0,s0,2,1\n", 1, "x"),
        ("trial_index,setting_id,x,y\n0,s0,1,nd\n", 1, "y"),
        ("trial_index,setting_id,x,y\n0,s0,ND,1\n", 1, "y"),
        ("trial_index,setting_id,x,y\n0,s0,1\n", 1, "row"),
        ("", 0, "header"),
    ],
)
def test_parse_errors_name_row_and_column(tmp_path, body, row, column):
    path = tmp_path / "bad.csv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(SeriesParseError) as err:
        read_series(path)
    assert err.value.row == row
    assert err.value.column == column
    assert str(path) in str(err.value)


def test_setting_id_guard():
    s = TimeSeries(setting_id="a,b", x=np.array([1], dtype=np.int8), y=np.array([1], dtype=np.int8))
    with pytest.raises(DataError):
        series_text(s)


def test_kv_round_trip():
    pairs = [("s_value", "-2.8"), ("violation_flag", "true"), ("term.1.setting", "s0")]
    text = format_kv_text(pairs)
    assert text == "s_value = -2.8\nviolation_flag = true\nterm.1.setting = s0\n"
    assert parse_kv_text(text) == dict(pairs)
    csv_form = format_kv_csv(pairs)
    assert csv_form.splitlines()[0] == "key,value"
    assert csv_form.splitlines()[1] == "s_value,-2.8"


def test_kv_parse_errors():
    with pytest.raises(SeriesParseError):
        parse_kv_text("just a line\n")
    with pytest.raises(SeriesParseError):
        parse_kv_text("a = 1\na = 2\n")
    assert parse_kv_text("# comment\n\na = 1\n") == {"a": "1"}
