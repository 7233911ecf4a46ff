"""Signed two's-complement fixed-point storage.

A format ``FixedPointFormat(int_bits=b, frac_bits=k)`` stores a ``b + k`` bit
word; ``b`` counts the sign bit, so the representable range is
``[-2**(b-1), 2**(b-1) - 2**-k]`` in steps of ``2**-k``.
"""
from dataclasses import dataclass

import gmpy2

from .scalars import rational


@dataclass(frozen=True)
class FixedPointFormat:
    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 1:
            raise ValueError("int_bits must be >= 1 (it includes the sign bit)")
        if self.frac_bits < 0:
            raise ValueError("frac_bits must be >= 0")

    @property
    def width(self):
        return self.int_bits + self.frac_bits

    @property
    def min_raw(self):
        return -(1 << (self.width - 1))

    @property
    def max_raw(self):
        return (1 << (self.width - 1)) - 1

    @property
    def max_value(self):
        return gmpy2.mpq(self.max_raw, 1 << self.frac_bits)

    @property
    def min_value(self):
        return gmpy2.mpq(self.min_raw, 1 << self.frac_bits)


@dataclass(frozen=True)
class FixedPoint:
    raw: int
    fmt: FixedPointFormat

    @property
    def value(self):
        return gmpy2.mpq(self.raw, 1 << self.fmt.frac_bits)

    def __str__(self):
        return str(self.value)


def _round_half_even(q):
    num, den = int(q.numerator), int(q.denominator)
    whole, rem = divmod(num, den)
    twice = 2 * rem
    if twice > den or (twice == den and whole % 2 == 1):
        whole += 1
    return whole


def quantize(x, fmt):
    """Round ``x * 2**frac_bits`` to nearest (ties to even) and saturate."""
    scaled = rational(x) * (1 << fmt.frac_bits)
    raw = min(max(_round_half_even(scaled), fmt.min_raw), fmt.max_raw)
    return FixedPoint(raw, fmt)


def quantize_value(x, fmt):
    """Shorthand for ``quantize(x, fmt).value``."""
    return quantize(x, fmt).value
