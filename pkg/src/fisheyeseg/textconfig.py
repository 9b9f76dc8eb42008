"""Key/value text files (INI syntax) holding numeric vectors.

Values are whitespace- or comma-separated numbers::

    [calibration]
    coeffs = 190 -8 3 -1
    eta_C = 1.0
"""

from __future__ import annotations

import configparser
import os
from typing import Mapping

import numpy as np

from .errors import CalibrationError


def read_section(path: str | os.PathLike, section: str) -> dict[str, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case (R_C, eta_C)
    read = parser.read(os.fspath(path))
    if not read:
        raise FileNotFoundError(path)
    if not parser.has_section(section):
        raise CalibrationError(f"{path}: missing [{section}] section")
    return dict(parser.items(section))


def numbers(values: Mapping[str, str], key: str, count: int | None = None) -> np.ndarray:
    if key not in values:
        raise CalibrationError(f"missing key '{key}'")
    try:
        arr = np.array([float(x) for x in values[key].replace(",", " ").split()])
    except ValueError as exc:
        raise CalibrationError(f"key '{key}' is not numeric: {values[key]!r}") from exc
    if count is not None and arr.size != count:
        raise CalibrationError(f"key '{key}' needs {count} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise CalibrationError(f"key '{key}' has non-finite values")
    return arr


def format_values(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def write_section(path: str | os.PathLike, section: str, entries: Mapping[str, str]) -> None:
    lines = [f"[{section}]"]
    lines += [f"{k} = {v}" for k, v in entries.items()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
