"""Readers and writers for the CLI's file formats."""
from __future__ import annotations

import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InputError
from .quantize import to_fraction


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read ({exc})") from exc


def _parse_number(text: str, path, lineno: int) -> Fraction:
    text = text.strip()
    try:
        return to_fraction(text)
    except InputError:
        raise InputError(f"{path}:{lineno}: not a number: {text!r}") from None


def _data_lines(path):
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield lineno, stripped


def read_matrix_csv(path) -> list[list[Fraction]]:
    """One template per line, comma separated decimal literals; ``#`` lines are comments."""
    rows = []
    for lineno, line in _data_lines(path):
        row = [_parse_number(cell, path, lineno) for cell in line.split(",")]
        if rows and len(row) != len(rows[0]):
            raise InputError(f"{path}:{lineno}: expected {len(rows[0])} columns, found {len(row)}")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: no matrix rows found")
    return rows


def _read_f64(path) -> list[float]:
    try:
        data = np.fromfile(path, dtype="<f8")
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: cannot read ({exc})") from exc
    if os.path.getsize(path) % 8:
        raise InputError(f"{path}: size is not a multiple of 8 bytes")
    for i, v in enumerate(data):
        if not math.isfinite(v):
            raise InputError(f"{path}: sample {i} is not finite")
    return [float(v) for v in data]


def read_vector(path, fmt: str = "csv") -> list:
    """A single CSV row (or one value per line), or raw little-endian float64."""
    if fmt == "f64":
        return _read_f64(path)
    values = []
    for lineno, line in _data_lines(path):
        values.extend(_parse_number(cell, path, lineno) for cell in line.split(","))
    if not values:
        raise InputError(f"{path}: empty vector")
    return values


def read_signal(path, fmt: str = "csv") -> list:
    """One sample per line, or raw little-endian float64."""
    if fmt == "f64":
        return _read_f64(path)
    out = []
    for lineno, line in _data_lines(path):
        if "," in line:
            raise InputError(f"{path}:{lineno}: expected one sample per line")
        out.append(_parse_number(line, path, lineno))
    return out


def write_signal_csv(path, samples) -> None:
    atomic_write(path, "".join(f"{float(s)!r}\n" for s in samples))


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
