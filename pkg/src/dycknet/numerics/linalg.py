"""Small dense matrices over exact rationals or BigFloats.

Nothing here is tuned for speed beyond skipping structural zeros in
matrix-vector products; the networks built by this package have at most a
few hundred hidden units.
"""
from collections.abc import Sequence

import gmpy2

from ..errors import SingularMatrixError
from .scalars import BigFloat, Infinity, Rational, rational

_ZERO = gmpy2.mpq(0)


def _kind(x):
    if isinstance(x, Infinity):
        return None
    if isinstance(x, BigFloat):
        return "bigfloat"
    return "rational"


def _normalize(x):
    if isinstance(x, (BigFloat, Infinity, Rational)):
        return x
    return rational(x)


class Matrix:
    """Immutable rectangular matrix with explicit dimensions.

    Entries are all exact rationals or all BigFloats; signed infinities may
    appear in either regime (the network types decide where they are legal).
    """

    __slots__ = ("rows", "shape", "regime", "_sparse")

    def __init__(self, rows, ncols=None):
        rows = tuple(tuple(_normalize(x) for x in row) for row in rows)
        if ncols is None:
            if not rows:
                raise ValueError("cannot infer the column count of an empty matrix")
            ncols = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != ncols:
                raise ValueError(f"row {i} has {len(row)} entries, expected {ncols}")
        kinds = {_kind(x) for row in rows for x in row} - {None}
        if len(kinds) > 1:
            raise TypeError("matrix mixes exact rationals and BigFloats")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "shape", (len(rows), ncols))
        object.__setattr__(self, "regime", kinds.pop() if kinds else "rational")
        object.__setattr__(
            self,
            "_sparse",
            tuple(tuple((j, a) for j, a in enumerate(row) if isinstance(a, Infinity) or a != 0) for row in rows),
        )

    def __setattr__(self, name, value):
        raise AttributeError("Matrix is immutable")

    @classmethod
    def zeros(cls, nrows, ncols, zero=_ZERO):
        return cls([[zero] * ncols for _ in range(nrows)], ncols)

    @classmethod
    def identity(cls, n, one=gmpy2.mpq(1), zero=_ZERO):
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)], n)

    @property
    def nrows(self):
        return self.shape[0]

    @property
    def ncols(self):
        return self.shape[1]

    def __getitem__(self, idx):
        i, j = idx
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, Matrix) and self.shape == other.shape and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        body = "; ".join(" ".join(str(x) for x in row) for row in self.rows)
        return f"Matrix[{self.nrows}x{self.ncols}]({body})"

    def row(self, i):
        return self.rows[i]

    def column(self, j):
        return tuple(row[j] for row in self.rows)

    def sparse_row(self, i):
        """``(column, entry)`` pairs for the nonzero entries of row ``i``."""
        return self._sparse[i]

    @property
    def T(self):
        return Matrix(zip(*self.rows), self.nrows) if self.ncols else Matrix([], self.nrows)

    def map(self, f):
        return Matrix([[f(x) for x in row] for row in self.rows], self.ncols)

    def has_infinity(self):
        return any(isinstance(x, Infinity) for row in self.rows for x in row)

    def __matmul__(self, other):
        if isinstance(other, Matrix):
            return matmul(self, other)
        return matvec(self, other)

    def __sub__(self, other):
        _same_shape(self, other)
        return Matrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)], self.ncols)

    def __add__(self, other):
        _same_shape(self, other)
        return Matrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)], self.ncols)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def matvec(m, v, zero=_ZERO):
    """``m @ v`` for a tuple/list ``v``; zero entries on either side are skipped."""
    if len(v) != m.ncols:
        raise ValueError(f"vector of length {len(v)} does not match {m.shape}")
    out = []
    for i in range(m.nrows):
        acc = zero
        for j, a in m.sparse_row(i):
            x = v[j]
            if x != 0:
                acc = acc + a * x
        out.append(acc)
    return tuple(out)


def matmul(a, b):
    if a.ncols != b.nrows:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    cols = [b.column(j) for j in range(b.ncols)]
    rows = []
    for i in range(a.nrows):
        sparse = a.sparse_row(i)
        row = []
        for col in cols:
            acc = _ZERO
            for k, x in sparse:
                y = col[k]
                if y != 0:
                    acc = acc + x * y
            row.append(acc)
        rows.append(row)
    return Matrix(rows, b.ncols)


def block_diag(*blocks, zero=_ZERO):
    n = sum(b.nrows for b in blocks)
    m = sum(b.ncols for b in blocks)
    rows = []
    col0 = 0
    for b in blocks:
        for row in b.rows:
            rows.append([zero] * col0 + list(row) + [zero] * (m - col0 - b.ncols))
        col0 += b.ncols
    return Matrix(rows, m) if n else Matrix([], m)


def vstack(*blocks):
    ncols = {b.ncols for b in blocks}
    if len(ncols) != 1:
        raise ValueError("vstack needs equal column counts")
    return Matrix([row for b in blocks for row in b.rows], ncols.pop())


# elimination ---------------------------------------------------------------

def _require_square(m):
    if m.nrows != m.ncols:
        raise ValueError(f"matrix must be square, got {m.shape}")


def _pivot(col_values, start):
    """Row index of the pivot: first nonzero (exact) or largest magnitude (float)."""
    best, best_abs = None, None
    for r in range(start, len(col_values)):
        x = col_values[r]
        if x == 0:
            continue
        if not isinstance(x, BigFloat):
            return r
        ax = abs(x)
        if best is None or ax > best_abs:
            best, best_abs = r, ax
    return best


def _eliminate(a, b):
    """Gauss-Jordan on ``[a | b]``; returns (det(a), solution rows or None if singular)."""
    n = len(a)
    a = [list(r) for r in a]
    b = [list(r) for r in b]
    det = gmpy2.mpq(1)
    for c in range(n):
        p = _pivot([a[r][c] for r in range(n)], c)
        if p is None:
            return _ZERO, None
        if p != c:
            a[c], a[p] = a[p], a[c]
            b[c], b[p] = b[p], b[c]
            det = -det
        piv = a[c][c]
        det = det * piv
        inv = 1 / piv
        a[c] = [x * inv for x in a[c]]
        b[c] = [x * inv for x in b[c]]
        for r in range(n):
            if r == c:
                continue
            f = a[r][c]
            if f == 0:
                continue
            a[r] = [x - f * y for x, y in zip(a[r], a[c])]
            b[r] = [x - f * y for x, y in zip(b[r], b[c])]
    return det, b


def det(m):
    _require_square(m)
    d, _ = _eliminate(m.rows, [[] for _ in range(m.nrows)])
    return d


def linear_solve(a, b):
    """Solve ``a @ X == b`` for X; ``b`` may be a Matrix or a vector."""
    _require_square(a)
    vector = not isinstance(b, Matrix)
    rhs = [[x] for x in b] if vector else [list(r) for r in b.rows]
    if len(rhs) != a.nrows:
        raise ValueError(f"right-hand side has {len(rhs)} rows, expected {a.nrows}")
    d, x = _eliminate(a.rows, rhs)
    if x is None:
        raise SingularMatrixError(d)
    if vector:
        return tuple(r[0] for r in x)
    return Matrix(x, b.ncols)


def mat_inverse(m):
    _require_square(m)
    zero = _ZERO
    one = gmpy2.mpq(1)
    if m.regime == "bigfloat":
        prec = max(x.prec for row in m.rows for x in row if isinstance(x, BigFloat))
        zero, one = BigFloat(0, prec), BigFloat(1, prec)
    return linear_solve(m, Matrix.identity(m.nrows, one, zero))


def as_vector(values: Sequence):
    return tuple(_normalize(x) for x in values)
