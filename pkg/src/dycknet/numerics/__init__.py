"""Numeric substrate: exact rationals, BigFloats, fixed point, elementary functions, linear algebra."""
from .elementary import sigmoid, sigmoid_inv, tanh_fn, tanh_inv
from .fixedpoint import FixedPoint, FixedPointFormat, quantize, quantize_value
from .linalg import Matrix, as_vector, block_diag, det, linear_solve, mat_inverse, matmul, matvec, vstack
from .scalars import (
    NEG_INF,
    POS_INF,
    BigFloat,
    Infinity,
    Rational,
    bigfloat,
    exact_value,
    format_scalar,
    is_exact,
    parse_scalar,
    rational,
)

__all__ = [
    "BigFloat", "FixedPoint", "FixedPointFormat", "Infinity", "Matrix", "NEG_INF", "POS_INF",
    "Rational", "as_vector", "bigfloat", "block_diag", "det", "exact_value", "format_scalar",
    "is_exact", "linear_solve", "mat_inverse", "matmul", "matvec", "parse_scalar", "quantize",
    "quantize_value", "rational", "sigmoid", "sigmoid_inv", "tanh_fn", "tanh_inv", "vstack",
]
