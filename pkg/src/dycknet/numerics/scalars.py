"""Scalar types: exact rationals, precision-tagged binary floats, and signed infinity.

Rationals are ``gmpy2.mpq`` values (always in lowest terms with a positive
denominator).  ``BigFloat`` wraps an MPFR number together with the precision
it was produced at; every operation rounds once, to nearest, at the larger
precision of its operands, so a value never silently loses bits.
"""
from fractions import Fraction
from functools import lru_cache
from numbers import Rational as _RationalABC

import gmpy2

from ..errors import NumericError

Rational = type(gmpy2.mpq())
_MPFR = type(gmpy2.mpfr())


@lru_cache(maxsize=None)
def context(prec):
    """Round-to-nearest MPFR context at ``prec`` bits (shared, never mutated)."""
    if prec < 2:
        raise NumericError(f"precision must be at least 2 bits, got {prec}")
    return gmpy2.context(precision=prec, round=gmpy2.RoundToNearest)


def rational(value):
    """Coerce ints, fractions, ``"p/q"`` strings and decimal strings to ``Rational``."""
    if isinstance(value, Rational):
        return value
    if isinstance(value, BigFloat):
        return value.exact()
    if isinstance(value, (int, Fraction)):
        return gmpy2.mpq(value)
    if isinstance(value, _RationalABC):
        return gmpy2.mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                return gmpy2.mpq(text)
            return gmpy2.mpq(Fraction(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {value!r}") from exc
    if isinstance(value, float):
        return gmpy2.mpq(Fraction(value))
    raise TypeError(f"cannot convert {type(value).__name__} to Rational")


def is_exact(value):
    return isinstance(value, (int, Rational, Fraction))


class Infinity:
    """Signed infinite gate weight.  Only sign tests are defined on it."""

    __slots__ = ("sign",)

    def __init__(self, sign):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "sign", sign)

    def __setattr__(self, name, value):
        raise AttributeError("Infinity is immutable")

    def __neg__(self):
        return NEG_INF if self.sign > 0 else POS_INF

    def __eq__(self, other):
        return isinstance(other, Infinity) and other.sign == self.sign

    def __hash__(self):
        return hash(("inf", self.sign))

    def __repr__(self):
        return "POS_INF" if self.sign > 0 else "NEG_INF"

    def __str__(self):
        return "+inf" if self.sign > 0 else "-inf"

    def _refuse(self, *_):
        raise NumericError("arithmetic on an infinite weight outside the gate path")

    __add__ = __radd__ = __sub__ = __rsub__ = _refuse
    __mul__ = __rmul__ = __truediv__ = __rtruediv__ = _refuse
    __float__ = _refuse


POS_INF = Infinity(1)
NEG_INF = Infinity(-1)


class BigFloat:
    """Binary floating-point number carrying its mantissa precision in bits."""

    __slots__ = ("_v", "prec")

    def __init__(self, value, prec):
        prec = int(prec)
        if isinstance(value, BigFloat):
            v = context(prec).plus(value._v)
        elif isinstance(value, Fraction):
            v = gmpy2.mpfr(gmpy2.mpq(value), prec)
        elif isinstance(value, (int, Rational, _MPFR, float, str)):
            try:
                v = gmpy2.mpfr(value, prec)
            except ValueError as exc:
                raise ValueError(f"not a decimal literal: {value!r}") from exc
        else:
            raise TypeError(f"cannot convert {type(value).__name__} to BigFloat")
        if not gmpy2.is_finite(v):
            raise NumericError(f"non-finite BigFloat {value!r}")
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "prec", prec)

    @classmethod
    def _wrap(cls, v, prec):
        if not gmpy2.is_finite(v):
            raise NumericError("BigFloat operation produced a non-finite value")
        obj = object.__new__(cls)
        object.__setattr__(obj, "_v", v)
        object.__setattr__(obj, "prec", prec)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("BigFloat is immutable")

    @property
    def mpfr(self):
        return self._v

    def exact(self):
        """The exact rational value of this float."""
        num, den = self._v.as_integer_ratio()
        return gmpy2.mpq(num, den)

    def with_precision(self, prec):
        return BigFloat(self, prec)

    def is_zero(self):
        return self._v == 0

    def sign(self):
        return (self._v > 0) - (self._v < 0)

    # arithmetic -----------------------------------------------------------

    def _operand(self, other):
        if isinstance(other, BigFloat):
            return other._v, max(self.prec, other.prec)
        if isinstance(other, (int, Rational)):
            return other, self.prec
        if isinstance(other, Fraction):
            return gmpy2.mpq(other), self.prec
        if isinstance(other, Infinity):
            other._refuse()
        return None, None

    def __add__(self, other):
        o, p = self._operand(other)
        if o is None:
            return NotImplemented
        return BigFloat._wrap(context(p).add(self._v, o), p)

    __radd__ = __add__

    def __sub__(self, other):
        o, p = self._operand(other)
        if o is None:
            return NotImplemented
        return BigFloat._wrap(context(p).sub(self._v, o), p)

    def __rsub__(self, other):
        o, p = self._operand(other)
        if o is None:
            return NotImplemented
        return BigFloat._wrap(context(p).sub(o, self._v), p)

    def __mul__(self, other):
        o, p = self._operand(other)
        if o is None:
            return NotImplemented
        return BigFloat._wrap(context(p).mul(self._v, o), p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o, p = self._operand(other)
        if o is None:
            return NotImplemented
        if o == 0:
            raise ZeroDivisionError("BigFloat division by zero")
        return BigFloat._wrap(context(p).div(self._v, o), p)

    def __rtruediv__(self, other):
        o, p = self._operand(other)
        if o is None:
            return NotImplemented
        if self._v == 0:
            raise ZeroDivisionError("BigFloat division by zero")
        return BigFloat._wrap(context(p).div(o, self._v), p)

    def __neg__(self):
        return BigFloat._wrap(context(self.prec).minus(self._v), self.prec)

    def __abs__(self):
        return BigFloat._wrap(context(self.prec).abs(self._v), self.prec)

    # comparisons are exact ----------------------------------------------

    def _cmp_value(self, other):
        if isinstance(other, BigFloat):
            return other._v
        if isinstance(other, (int, Rational)):
            return other
        if isinstance(other, Fraction):
            return gmpy2.mpq(other)
        return None

    def __eq__(self, other):
        o = self._cmp_value(other)
        return NotImplemented if o is None else self._v == o

    def __lt__(self, other):
        o = self._cmp_value(other)
        return NotImplemented if o is None else self._v < o

    def __le__(self, other):
        o = self._cmp_value(other)
        return NotImplemented if o is None else self._v <= o

    def __gt__(self, other):
        o = self._cmp_value(other)
        return NotImplemented if o is None else self._v > o

    def __ge__(self, other):
        o = self._cmp_value(other)
        return NotImplemented if o is None else self._v >= o

    def __hash__(self):
        return hash(self._v)

    def __float__(self):
        return float(self._v)

    def __bool__(self):
        return self._v != 0

    def __repr__(self):
        return f"BigFloat('{self}', {self.prec})"

    def __str__(self):
        # shortest decimal that reads back to the same value at this precision
        return str(self._v)

    def __format__(self, spec):
        """Supports ``.Ne`` and ``.Ng`` with one correct decimal rounding; other specs go through float."""
        if not spec:
            return str(self)
        kind = spec[-1]
        head = spec[:-1]
        if kind in "eg" and head.startswith(".") and head[1:].isdigit():
            return _format_decimal(self._v, int(head[1:]), kind)
        return format(float(self), spec)


def _sci_digits(v, ndigits):
    """Sign, ``ndigits`` rounded significant digits and decimal exponent of a nonzero mpfr."""
    digits, exp, _ = v.digits(10, ndigits)
    sign = "-" if digits.startswith("-") else ""
    return sign, digits.lstrip("-"), exp - 1


def _format_decimal(v, prec, kind):
    if kind == "e":
        if v == 0:
            return f"{0:.{prec}e}"
        sign, d, x = _sci_digits(v, prec + 1)
        frac = f".{d[1:]}" if prec else ""
        return f"{sign}{d[0]}{frac}e{x:+03d}"
    prec = max(prec, 1)
    if v == 0:
        return "0"
    sign, d, x = _sci_digits(v, prec)
    if -4 <= x < prec:
        if x >= 0:
            text = d[: x + 1] + "." + d[x + 1:]
        else:
            text = "0." + "0" * (-x - 1) + d
        text = text.rstrip("0").rstrip(".")
        return sign + text
    mant = (d[0] + "." + d[1:]).rstrip("0").rstrip(".")
    return f"{sign}{mant}e{x:+03d}"


def bigfloat(value, prec):
    return value if isinstance(value, BigFloat) and value.prec == prec else BigFloat(value, prec)


def exact_value(x):
    """Exact rational value of any finite scalar."""
    if isinstance(x, Infinity):
        raise NumericError("infinite value has no rational value")
    return rational(x)


# serialization ------------------------------------------------------------

def format_scalar(x):
    """Render a scalar for the JSON formats: ``"p/q"``, a decimal string, or ``"+inf"``."""
    if isinstance(x, Infinity):
        return str(x)
    if isinstance(x, BigFloat):
        return str(x)
    return str(rational(x))


def parse_scalar(text, prec=None, allow_inf=False):
    """Inverse of :func:`format_scalar`.  ``prec`` selects the BigFloat regime."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(text) if isinstance(text, float) else str(text)
    if not isinstance(text, str):
        raise ValueError(f"scalar must be given as a string, got {text!r}")
    t = text.strip().lower()
    if t in ("+inf", "-inf", "inf"):
        if not allow_inf:
            raise ValueError(f"infinite value {text!r} not permitted here")
        return NEG_INF if t.startswith("-") else POS_INF
    if prec is None:
        return rational(t)
    if "/" in t:
        return BigFloat(rational(t), prec)
    return BigFloat(t, prec)
