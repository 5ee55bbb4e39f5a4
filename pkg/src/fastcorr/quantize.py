"""Exact fixed-point representation of template banks.

Entries are stored as integers ``n`` with an implied scale ``base**-digits`` so
that plan arithmetic downstream never touches floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from numbers import Rational, Real
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError


def to_fraction(x) -> Fraction:
    """Convert a number or decimal string to an exact rational.

    Floats convert exactly (their binary value, not their decimal repr).
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        try:
            f = Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a number: {x!r}") from exc
        return f
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, Decimal):
        if not x.is_finite():
            raise InputError(f"non-finite value: {x}")
        return Fraction(x)
    if isinstance(x, (Real, np.floating)):
        xf = float(x)
        if not math.isfinite(xf):
            raise InputError(f"non-finite value: {x}")
        return Fraction(xf)
    raise InputError(f"unsupported numeric type {type(x).__name__}")


@dataclass(frozen=True, order=True)
class QuantizedScalar:
    scaled_value: int
    scale_digits: int
    base: int = 10

    @property
    def value(self) -> Fraction:
        return Fraction(self.scaled_value, self.base**self.scale_digits)

    def __float__(self) -> float:
        return float(self.value)


def quantize(x, digits: int, base: int = 10) -> QuantizedScalar:
    """Round ``x`` to ``digits`` fractional base-``base`` digits, ties to even."""
    if digits < 0:
        raise InputError(f"digits must be >= 0, got {digits}")
    if base < 2:
        raise InputError(f"base must be >= 2, got {base}")
    exact = to_fraction(x)
    # Fraction.__round__ without ndigits rounds half to even
    return QuantizedScalar(round(exact * base**digits), digits, base)


def normalize_rows(matrix) -> np.ndarray:
    """Scale each row of a real matrix to unit Euclidean norm."""
    a = np.array(matrix, dtype=np.float64, ndmin=2)
    if a.ndim != 2:
        raise InputError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix contains non-finite entries")
    out = np.empty_like(a)
    for k, row in enumerate(a):
        norm = math.sqrt(math.fsum(v * v for v in row))
        if norm == 0.0:
            raise InputError(f"row {k} has zero norm and cannot be normalized")
        out[k] = row / norm
    return out


@dataclass(frozen=True)
class QuantizedMatrix:
    """K templates of length m, each entry ``ints[k][i] * base**-digits``."""

    ints: tuple[tuple[int, ...], ...]
    digits: int
    base: int = 10

    def __post_init__(self):
        if not self.ints or not self.ints[0]:
            raise InputError("matrix must have at least one row and one column")
        m = len(self.ints[0])
        for k, row in enumerate(self.ints):
            if len(row) != m:
                raise InputError(f"row {k} has {len(row)} entries, expected {m}")
        if self.digits < 0 or self.base < 2:
            raise InputError(f"invalid quantization (base={self.base}, digits={self.digits})")

    @classmethod
    def from_real(cls, matrix: Iterable[Sequence], digits: int, base: int = 10) -> QuantizedMatrix:
        rows = tuple(
            tuple(quantize(v, digits, base).scaled_value for v in row) for row in matrix
        )
        return cls(rows, digits, base)

    @classmethod
    def from_scaled(cls, ints: Iterable[Sequence[int]], digits: int, base: int = 10) -> QuantizedMatrix:
        return cls(tuple(tuple(int(v) for v in row) for row in ints), digits, base)

    @property
    def K(self) -> int:
        return len(self.ints)

    @property
    def m(self) -> int:
        return len(self.ints[0])

    @property
    def scale(self) -> Fraction:
        return Fraction(1, self.base**self.digits)

    def entry(self, k: int, i: int) -> QuantizedScalar:
        return QuantizedScalar(self.ints[k][i], self.digits, self.base)

    def to_fractions(self) -> list[list[Fraction]]:
        s = self.scale
        return [[v * s for v in row] for row in self.ints]

    def to_floats(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.to_fractions()])

    def row_norms(self) -> np.ndarray:
        """Euclidean norm of each quantized row, correctly rounded from the exact square sum."""
        s2 = self.scale**2
        return np.array([math.sqrt(float(sum(v * v for v in row) * s2)) for row in self.ints])

    def column_magnitudes(self, i: int) -> list[int]:
        """Distinct nonzero |scaled value| in column ``i``, ascending."""
        return sorted({abs(row[i]) for row in self.ints if row[i] != 0})

    def distinct_magnitudes(self) -> list[int]:
        return sorted({abs(v) for row in self.ints for v in row if v != 0})


def to_scaled_integers(matrix: QuantizedMatrix) -> tuple[list[list[int]], Fraction]:
    return [list(row) for row in matrix.ints], matrix.scale


def quantize_templates(matrix, digits: int, base: int = 10, normalize: bool = True) -> QuantizedMatrix:
    """Normalize (in float) then quantize, the order that keeps the digit budget intact."""
    real = normalize_rows(matrix) if normalize else np.array(matrix, dtype=np.float64, ndmin=2)
    return QuantizedMatrix.from_real(real.tolist(), digits, base)
