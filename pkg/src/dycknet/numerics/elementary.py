"""Sigmoid, tanh and their inverses at a requested binary precision.

Every function takes a ``BigFloat`` (its own precision is used), an exact
rational together with ``prec``, or, for :func:`sigmoid`, a signed infinity.
Results carry relative error at most ``2**(1 - prec)``.

Composite formulas are evaluated with guard bits and re-evaluated with twice
as many until both evaluations round to the same ``prec``-bit value.
"""
from functools import lru_cache

import gmpy2

from ..errors import DomainError, NumericError
from .scalars import BigFloat, Infinity, Rational, context, rational

_GUARD = 32
_MAX_WIDENINGS = 8


def _resolve(x, prec):
    """Split ``x`` into (exact-ish MPFR/rational operand, target precision)."""
    if isinstance(x, BigFloat):
        return x.mpfr, prec if prec is not None else x.prec
    if prec is None:
        raise NumericError("an explicit precision is required for exact arguments")
    return rational(x), prec


def _refine(f, arg, prec):
    """Evaluate ``f(arg, working_ctx)`` with widening guard bits until it rounds stably."""
    target = context(prec)
    guard = _GUARD
    previous = target.plus(f(arg, context(prec + guard)))
    for _ in range(_MAX_WIDENINGS):
        guard *= 2
        current = target.plus(f(arg, context(prec + guard)))
        if current == previous:
            return current
        previous = current
    return previous


def _sigmoid_at(x, ctx):
    e = ctx.exp(ctx.minus(x))
    return ctx.div(1, ctx.add(1, e))


def _logit_at(y, ctx):
    one_minus = ctx.sub(1, y)
    if 0.25 <= y <= 0.75:
        # log1p keeps full relative accuracy where y/(1-y) is close to 1
        return ctx.log1p(ctx.div(ctx.sub(ctx.mul(2, y), 1), one_minus))
    return ctx.log(ctx.div(y, one_minus))


@lru_cache(maxsize=8192)
def _sigmoid_cached(x, prec):
    if x == 0:
        return gmpy2.mpfr("0.5", prec)
    return _refine(_sigmoid_at, x, prec)


def sigmoid_raw(x, prec):
    """Sigmoid of an MPFR value, rounded to ``prec`` bits, as a raw MPFR value."""
    return _sigmoid_cached(x, prec)


def sigmoid(x, prec=None):
    """Logistic function ``1 / (1 + exp(-x))``; ``sigmoid(+inf) == 1`` exactly."""
    if isinstance(x, Infinity):
        one = 1 if x.sign > 0 else 0
        return BigFloat(one, prec) if prec is not None else rational(one)
    arg, p = _resolve(x, prec)
    if isinstance(arg, Rational):
        arg = gmpy2.mpfr(arg, p + 2 * _GUARD)
    return BigFloat._wrap(_sigmoid_cached(arg, p), p)


def sigmoid_inv(y, prec=None):
    """Inverse sigmoid ``-ln(1/y - 1)`` for ``0 < y < 1``."""
    arg, p = _resolve(y, prec)
    if not 0 < arg < 1:
        raise DomainError(f"sigmoid_inv needs 0 < y < 1, got {y}")
    if arg == gmpy2.mpq(1, 2):
        return BigFloat(0, p)
    if isinstance(arg, Rational):
        # exact rationals are rounded with ample extra bits before the log
        arg = gmpy2.mpfr(arg, 2 * p + 4 * _GUARD)
    return BigFloat._wrap(_refine(_logit_at, arg, p), p)


def tanh_fn(x, prec=None):
    """Hyperbolic tangent (MPFR, correctly rounded)."""
    arg, p = _resolve(x, prec)
    if isinstance(arg, Rational):
        arg = gmpy2.mpfr(arg, p + 2 * _GUARD)
    return BigFloat._wrap(context(p).tanh(arg), p)


def tanh_inv(y, prec=None):
    """Inverse hyperbolic tangent for ``|y| < 1`` (MPFR, correctly rounded)."""
    arg, p = _resolve(y, prec)
    if not -1 < arg < 1:
        raise DomainError(f"tanh_inv needs |y| < 1, got {y}")
    if isinstance(arg, Rational):
        arg = gmpy2.mpfr(arg, 2 * p + 4 * _GUARD)
    return BigFloat._wrap(context(p).atanh(arg), p)
