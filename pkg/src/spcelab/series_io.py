"""Bit-exact reading and writing of outcome time-series files.

Format contract
---------------
One CSV file per setting, UTF-8, LF line endings, header row
``trial_index,setting_id,x,y``.  Outcomes are ``1`` or ``-1``; a
non-detected pair carries the literal token ``ND`` in both outcome
columns.  Trial indices run 0..n-1 in order, so a written file is a
pure function of the series content and round-trips losslessly.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .errors import DataError, SeriesParseError
from .series import ND_TOKEN, TimeSeries

SERIES_HEADER = ("trial_index", "setting_id", "x", "y")
_HEADER_LINE = ",".join(SERIES_HEADER)
_VALID_ID = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.")


def check_setting_id(setting_id: str) -> str:
    """Reject ids that would not survive the CSV round trip."""
    if not setting_id:
        raise DataError("setting_id must be non-empty")
    bad = set(setting_id) - _VALID_ID
    if bad:
        raise DataError(f"setting_id {setting_id!r} contains unsupported characters {sorted(bad)}")
    return setting_id


def series_text(series: TimeSeries) -> str:
    """Render a series to its canonical file content."""
    check_setting_id(series.setting_id)
    sid = series.setting_id
    lines = [_HEADER_LINE]
    x = series.x
    y = series.y
    for i in range(series.n_trials):
        if x[i] == 0:
            lines.append(f"{i},{sid},{ND_TOKEN},{ND_TOKEN}")
        else:
            lines.append(f"{i},{sid},{x[i]:d},{y[i]:d}")
    return "\n".join(lines) + "\n"


def write_series(series: TimeSeries, path) -> str:
    """Write one series file and return its path."""
    text = series_text(series)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return os.fspath(path)


def _parse_outcome(token: str, path, row: int, column: str) -> int:
    if token == ND_TOKEN:
        return 0
    if token == "1" or token == "+1":
        return 1
    if token == "-1":
        return -1
    raise SeriesParseError(path, row, column, f"expected 1, -1 or {ND_TOKEN}, got {token!r}")


def read_series(
    path,
    model_tag: str = "external",
    run_id: str = "",
    seed: Optional[int] = None,
) -> TimeSeries:
    """Parse one series file, enforcing the format contract strictly."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SeriesParseError(path, 0, "header", "empty file")
    if lines[0] != _HEADER_LINE:
        raise SeriesParseError(path, 0, "header", f"expected {_HEADER_LINE!r}, got {lines[0]!r}")
    n = len(lines) - 1
    if n < 1:
        raise SeriesParseError(path, 1, "trial_index", "file contains no trial rows")
    x = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.int8)
    setting_id = None
    for row, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != 4:
            raise SeriesParseError(path, row, "row", f"expected 4 fields, got {len(parts)}")
        idx_tok, sid, x_tok, y_tok = parts
        try:
            idx = int(idx_tok)
        except ValueError:
            raise SeriesParseError(path, row, "trial_index", f"not an integer: {idx_tok!r}") from None
        if idx != row - 1:
            raise SeriesParseError(path, row, "trial_index", f"expected {row - 1}, got {idx}")
        if setting_id is None:
            setting_id = sid
        elif sid != setting_id:
            raise SeriesParseError(
                path, row, "setting_id", f"mixed ids {setting_id!r} and {sid!r} in one file"
            )
        xv = _parse_outcome(x_tok, path, row, "x")
        yv = _parse_outcome(y_tok, path, row, "y")
        if (xv == 0) != (yv == 0):
            raise SeriesParseError(path, row, "y", f"{ND_TOKEN} must appear in both outcome columns")
        x[row - 1] = xv
        y[row - 1] = yv
    return TimeSeries(setting_id=setting_id, x=x, y=y, run_id=run_id, seed=seed, model_tag=model_tag)


def format_kv_text(pairs) -> str:
    """Flat key-value report, one ``key = value`` line per entry."""
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def format_kv_csv(pairs) -> str:
    """The same report as a two-column CSV."""
    lines = ["key,value"]
    for k, v in pairs:
        lines.append(f"{k},{v}")
    return "\n".join(lines) + "\n"


def parse_kv_text(text: str, path="<kv>") -> dict:
    """Parse ``key = value`` lines (comments with '#', blank lines skipped)."""
    out = {}
    for row, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SeriesParseError(path, row, "line", f"expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise SeriesParseError(path, row, "key", "empty key")
        if key in out:
            raise SeriesParseError(path, row, "key", f"duplicate key {key!r}")
        out[key] = value.strip()
    return out
