"""GRU semantics over BigFloats, with sign-test gates for infinite weights.

    z_t = σ(Wz x_t + Uz h_{t-1} + bz)
    r_t = σ(Wr x_t + Ur h_{t-1} + br)
    h_t = z_t ∘ h_{t-1} + (1 - z_t) ∘ tanh(Wh x_t + Uh (r_t ∘ h_{t-1}) + bh)
    o_t = f(h_t)

A gate row of ``Uz`` holding ``±inf`` is evaluated as a sign test on the
weighted hidden components instead of as arithmetic on infinities.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import gmpy2

from .automata import Alphabet, DyckSpec, MembershipClass, classify, state_trace, state_trace_bar
from .errors import BoundViolated, DivisionByZero, GateDegenerate, KTooSmall, NumericError, PreconditionError
from .numerics import BigFloat, Infinity, Matrix, bigfloat, format_scalar, parse_scalar
from .numerics.elementary import sigmoid_raw
from .numerics.scalars import context
from .rnn import AcceptanceSet, acceptance_from_json

mpq = gmpy2.mpq


# output functionals ----------------------------------------------------------------

@dataclass(frozen=True)
class Linear:
    """``o = Wo · h + bo``."""

    Wo: tuple
    bo: object = 0

    def __call__(self, h):
        acc = self.bo
        for w, x in zip(self.Wo, h):
            if w != 0 and x != 0:
                acc = acc + w * x
        return acc

    @property
    def width(self):
        return len(self.Wo)

    def with_precision(self, prec):
        return Linear(tuple(bigfloat(w, prec) for w in self.Wo), bigfloat(self.bo, prec))

    def to_json(self):
        return {"type": "linear", "Wo": [[format_scalar(w) for w in self.Wo]], "bo": format_scalar(self.bo)}


@dataclass(frozen=True)
class DyckReadout:
    """``o = |h1| / h2 - h4 - h8 + 2`` on the eight components starting at ``offset``."""

    offset: int = 0

    def __call__(self, h):
        base = self.offset
        h1, h2, h4, h8 = h[base], h[base + 1], h[base + 3], h[base + 7]
        if h2 == 0:
            raise DivisionByZero("readout divides by h2 = 0")
        # the flag terms are exact small integers; keep them apart from the ratio
        return abs(h1) / h2 + (2 - h4 - h8)

    @property
    def width(self):
        return self.offset + 8

    def with_precision(self, prec):
        return self

    def to_json(self):
        return {"type": "dyck", "offset": self.offset}


@dataclass(frozen=True)
class SumReadout:
    parts: tuple

    def __call__(self, h):
        total = None
        for part in self.parts:
            v = part(h)
            total = v if total is None else total + v
        return total

    @property
    def width(self):
        return max(p.width for p in self.parts)

    def with_precision(self, prec):
        return SumReadout(tuple(p.with_precision(prec) for p in self.parts))

    def to_json(self):
        return {"type": "sum", "parts": [p.to_json() for p in self.parts]}


OutputFunctional = Linear | DyckReadout | SumReadout


def output_from_json(data, prec) -> OutputFunctional:
    kind = data.get("type")
    if kind == "linear":
        wo = data["Wo"]
        if wo and isinstance(wo[0], list):
            if len(wo) != 1:
                raise ValueError("Wo must be a single row")
            wo = wo[0]
        return Linear(tuple(parse_scalar(w, prec) for w in wo), parse_scalar(data.get("bo", "0"), prec))
    if kind == "dyck":
        return DyckReadout(int(data.get("offset", 0)))
    if kind == "sum":
        return SumReadout(tuple(output_from_json(p, prec) for p in data["parts"]))
    raise ValueError(f"unknown output functional {kind!r}")


# the network ---------------------------------------------------------------------------

def _finite(m: Matrix, prec, name):
    if m.has_infinity():
        raise NumericError(f"{name} may not contain infinite weights")
    return m.map(lambda x: bigfloat(x, prec))


@dataclass(frozen=True)
class Gru:
    alphabet: Alphabet
    Wz: Matrix
    Uz: Matrix
    Wr: Matrix
    Ur: Matrix
    Wh: Matrix
    Uh: Matrix
    bz: tuple
    br: tuple
    bh: tuple
    h0: tuple
    output: OutputFunctional
    precision: int
    # how the weights were built, so they can be rebuilt at another precision
    meta: dict | None = field(default=None, compare=False)
    _kernel: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        p = int(self.precision)
        if p < 2:
            raise NumericError(f"precision must be at least 2 bits, got {p}")
        m = len(self.h0)
        ns = len(self.alphabet)
        for name in ("Wz", "Wr", "Wh"):
            mat = getattr(self, name)
            if mat.shape != (m, ns):
                raise ValueError(f"{name} has shape {mat.shape}, expected {(m, ns)}")
            object.__setattr__(self, name, _finite(mat, p, name))
        for name in ("Uz", "Ur", "Uh"):
            mat = getattr(self, name)
            if mat.shape != (m, m):
                raise ValueError(f"{name} has shape {mat.shape}, expected {(m, m)}")
            if name != "Uz":
                object.__setattr__(self, name, _finite(mat, p, name))
        object.__setattr__(
            self, "Uz", self.Uz.map(lambda x: x if isinstance(x, Infinity) else bigfloat(x, p))
        )
        for name in ("bz", "br", "bh", "h0"):
            vec = tuple(getattr(self, name))
            if len(vec) != m:
                raise ValueError(f"{name} has {len(vec)} entries, expected {m}")
            if any(isinstance(x, Infinity) for x in vec):
                raise NumericError(f"{name} may not contain infinite values")
            object.__setattr__(self, name, tuple(bigfloat(x, p) for x in vec))
        if self.output.width > m:
            raise ValueError(f"output functional reads {self.output.width} components, hidden size is {m}")
        object.__setattr__(self, "output", self.output.with_precision(p))
        object.__setattr__(self, "precision", p)

    @property
    def hidden_size(self):
        return len(self.h0)


class GruStep(NamedTuple):
    t: int
    symbol: int | None
    z: tuple | None
    r: tuple | None
    h: tuple
    o: object


class _Kernel:
    """Raw MPFR copies of a network's weights, laid out for the update loop.

    Every operation below is the same rounded MPFR call the ``BigFloat``
    operators make, in the same order, so results are bit-identical to
    evaluating the formulas with ``BigFloat`` values.  Gate rows with no
    recurrent weights depend only on the symbol and are evaluated once.
    """

    def __init__(self, gru: "Gru"):
        p = gru.precision
        ctx = context(p)
        self.ctx, self.prec = ctx, p
        m, ns = gru.hidden_size, len(gru.alphabet)

        def raw_rows(mat):
            return [tuple((j, a if isinstance(a, Infinity) else a.mpfr) for j, a in mat.sparse_row(i))
                    for i in range(m)]

        self.uz, self.ur, self.uh = raw_rows(gru.Uz), raw_rows(gru.Ur), raw_rows(gru.Uh)
        self.z_in, self.r_in, self.h_in, self.z_fixed, self.r_fixed = [], [], [], [], []
        for a in range(ns):
            zb = [ctx.add(gru.Wz[i, a].mpfr, gru.bz[i].mpfr) for i in range(m)]
            rb = [ctx.add(gru.Wr[i, a].mpfr, gru.br[i].mpfr) for i in range(m)]
            self.z_in.append(zb)
            self.r_in.append(rb)
            self.h_in.append([ctx.add(gru.Wh[i, a].mpfr, gru.bh[i].mpfr) for i in range(m)])
            self.z_fixed.append([None if self.uz[i] else sigmoid_raw(zb[i], p) for i in range(m)])
            self.r_fixed.append([None if self.ur[i] else sigmoid_raw(rb[i], p) for i in range(m)])
        self.one = gmpy2.mpfr(1, p)
        self.zero = gmpy2.mpfr(0, p)

    def gate(self, acc, row, h, i):
        """Gate value for row ``i``; rows carrying an infinite weight become sign tests."""
        ctx = self.ctx
        signs = 0
        for j, a in row:
            x = h[j]
            if isinstance(a, Infinity):
                if x == 0:
                    raise GateDegenerate(f"infinite gate weight in row {i + 1} reads h{j + 1} = 0")
                s = a.sign if x > 0 else -a.sign
                if signs and s != signs:
                    raise NumericError(f"infinite gate inputs of opposite sign in row {i + 1}")
                signs = s
            elif x != 0:
                acc = ctx.add(acc, ctx.mul(a, x))
        if signs:
            return self.one if signs > 0 else self.zero
        return sigmoid_raw(acc, self.prec)

    def step(self, h, a):
        """``(z, r, h')`` as raw MPFR tuples."""
        ctx, m = self.ctx, len(h)
        zf, rf = self.z_fixed[a], self.r_fixed[a]
        z = [zf[i] if zf[i] is not None else self.gate(self.z_in[a][i], self.uz[i], h, i) for i in range(m)]
        r = [rf[i] if rf[i] is not None else self.gate(self.r_in[a][i], self.ur[i], h, i) for i in range(m)]
        mul, add = ctx.mul, ctx.add
        rh = [mul(ri, hi) for ri, hi in zip(r, h)]
        hin, uh = self.h_in[a], self.uh
        new = []
        for i in range(m):
            zi = z[i]
            if zi == 1:
                new.append(h[i])
                continue
            pre = hin[i]
            for j, w in uh[i]:
                x = rh[j]
                if x:
                    pre = add(pre, mul(w, x))
            if not gmpy2.is_finite(pre):
                raise NumericError("GRU pre-activation is not finite")
            cand = ctx.tanh(pre) if pre else pre
            if zi == 0:
                new.append(cand)
            else:
                new.append(add(mul(zi, h[i]), mul(ctx.sub(1, zi), cand)))
        return z, r, new

    def output(self, out, h):
        """The readout on raw values, with the same rounding steps as on ``BigFloat`` values."""
        ctx = self.ctx
        if isinstance(out, Linear):
            acc = out.bo.mpfr
            for w, x in zip(out.Wo, h):
                if w != 0 and x:
                    acc = ctx.add(acc, ctx.mul(w.mpfr, x))
            return acc
        if isinstance(out, DyckReadout):
            b = out.offset
            if not h[b + 1]:
                raise DivisionByZero("readout divides by h2 = 0")
            flags = ctx.sub(ctx.sub(2, h[b + 3]), h[b + 7])
            return ctx.add(ctx.div(ctx.abs(h[b]), h[b + 1]), flags)
        total = None
        for part in out.parts:
            v = self.output(part, h)
            total = v if total is None else ctx.add(total, v)
        return total


def _kernel(gru: Gru) -> _Kernel:
    k = gru._kernel
    if k is None:
        k = _Kernel(gru)
        object.__setattr__(gru, "_kernel", k)
    return k


def _wrap_all(values, prec):
    return tuple(BigFloat._wrap(v, prec) for v in values)


def gru_step(gru: Gru, h, symbol):
    """One update; returns ``(z, r, h')``."""
    a = gru.alphabet.index(symbol)
    m = gru.hidden_size
    if len(h) != m:
        raise ValueError(f"hidden state has {len(h)} entries, expected {m}")
    p = gru.precision
    raw = [bigfloat(x, p).mpfr for x in h]
    z, r, new = _kernel(gru).step(raw, a)
    return _wrap_all(z, p), _wrap_all(r, p), _wrap_all(new, p)


def gru_run(gru: Gru, word):
    """Final output and the trace ``t = 0..m`` (outputs evaluated at every step)."""
    word = gru.alphabet.encode(word)
    kernel, p = _kernel(gru), gru.precision
    h = [x.mpfr for x in gru.h0]
    trace = [GruStep(0, None, None, None, gru.h0, gru.output(gru.h0))]
    for t, sym in enumerate(word, 1):
        z, r, h = kernel.step(h, sym)
        hb = _wrap_all(h, p)
        trace.append(GruStep(t, sym, _wrap_all(z, p), _wrap_all(r, p), hb, gru.output(hb)))
    return trace[-1].o, tuple(trace)


def gru_final_state(gru: Gru, word):
    """Hidden state after ``word`` without materializing the trace."""
    kernel = _kernel(gru)
    h = [x.mpfr for x in gru.h0]
    for sym in gru.alphabet.encode(word):
        h = kernel.step(h, sym)[2]
    return _wrap_all(h, gru.precision)


def gru_all_outputs(gru: Gru, max_len: int):
    """Yield ``(word, output)`` for every word of length ``<= max_len``.

    Depth-first, so each prefix is evaluated once.
    """
    kernel, p = _kernel(gru), gru.precision
    ns = len(gru.alphabet)
    stack = [((), [x.mpfr for x in gru.h0])]
    while stack:
        word, h = stack.pop()
        yield word, BigFloat._wrap(kernel.output(gru.output, h), p)
        if len(word) < max_len:
            for a in reversed(range(ns)):
                stack.append((word + (a,), kernel.step(h, a)[2]))


def gru_accepts(gru: Gru, accept: AcceptanceSet, word) -> bool:
    return gru.output(gru_final_state(gru, word)) in accept


# precision and the tracking-error bound ---------------------------------------------

def required_precision(n: int, k: int, max_len: int) -> int:
    """``ceil((2k+4) log2(2n+1)) + ceil(log2(max_len+1)) + 32`` bits."""
    if n < 1 or k < 1 or max_len < 0:
        raise ValueError("n and k must be positive and max_len non-negative")
    base = 2 * n + 1
    # ceil(log2(x)) for an integer x >= 1 is (x - 1).bit_length()
    return (base ** (2 * k + 4) - 1).bit_length() + max_len.bit_length() + 32


def tracking_bound(n: int, k: int):
    """``2 (2n+1)^(-2k+7)`` as an exact rational."""
    return 2 * mpq(2 * n + 1) ** (7 - 2 * k)


def check_k(n: int, k: int) -> None:
    """Raise :class:`KTooSmall` unless ``k`` satisfies every margin the Dyck GRU relies on."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    b = mpq(2 * n + 1)
    e = b ** (7 - 2 * k)
    checks = [
        ("5 B^(-2k+7) < 1/B", 5 * e < 1 / b),
        ("2/B - 2 B^(-2k+7) > 1/B", 2 / b - 2 * e > 1 / b),
        ("-1 + 5 B^(-2k+8) + B^(-2k+5) < -1/B", -1 + 5 * b * e + b ** (5 - 2 * k) < -1 / b),
        ("2 - 2 B^(-2k+8) > 1/B", 2 - 2 * b * e > 1 / b),
        ("B^k - B > 0", b ** k - b > 0),
    ]
    if checks[-1][1]:
        checks += [
            ("0.5 - 2n/(B^(k+1) - 1) > 0", mpq(1, 2) - 2 * n / (b ** (k + 1) - 1) > 0),
            ("0.5 + 2n/(B^k - B) < 1", mpq(1, 2) + 2 * n / (b ** k - b) < 1),
        ]
    failed = [name for name, ok in checks if not ok]
    if failed:
        raise KTooSmall(f"k={k} is too small for n={n}: " + "; ".join(failed))


@dataclass(frozen=True)
class ErrorTrace:
    """Exact tracking errors ``(2n+1)^(kt) h_t - s_t - h_0 (2n+1)^(b_t - a_t)`` per step."""

    bound: object
    h1: tuple
    h5: tuple | None = None

    @property
    def max_error(self):
        values = [abs(e) for e in self.h1] + [abs(e) for e in (self.h5 or ())]
        return max(values)

    def violations(self):
        out = [("h1", t, e) for t, e in enumerate(self.h1) if not abs(e) < self.bound]
        if self.h5 is not None:
            out += [("h5", t, e) for t, e in enumerate(self.h5) if not abs(e) < self.bound]
        return out


def _channel_errors(hs, states, opens, closes, start, base, k):
    start = start.exact()
    out = []
    for t, (h, s) in enumerate(zip(hs, states)):
        out.append(base ** (k * t) * h.exact() - s - start * base ** (closes[t] - opens[t]))
    return tuple(out)


def check_error_bound(gru: Gru, word, spec: DyckSpec, k: int, strict: bool = True) -> ErrorTrace:
    """Compare ``h1`` (and ``h5`` on the 8-node network) against the exact stack states.

    Raises :class:`BoundViolated` at the first step whose error is not below
    ``2 (2n+1)^(-2k+7)`` unless ``strict`` is false.
    """
    word = spec.encode(word)
    if classify(word, spec) is MembershipClass.NEITHER:
        raise PreconditionError("the tracking bound only applies to Dyck words and their prefixes")
    base = mpq(spec.base)
    hs = [gru.h0]
    h = gru.h0
    for sym in word:
        h = gru_step(gru, h, sym)[2]
        hs.append(h)
    st = state_trace(word, spec)
    eps1 = _channel_errors([v[0] for v in hs], st.states, st.opens, st.closes, gru.h0[0], base, k)
    eps5 = None
    if gru.hidden_size >= 8:
        sb = state_trace_bar(word, spec)
        eps5 = _channel_errors([v[4] for v in hs], sb.states, sb.opens, sb.closes, gru.h0[4], base, k)
    trace = ErrorTrace(tracking_bound(spec.n, k), eps1, eps5)
    if strict:
        bad = trace.violations()
        if bad:
            channel, t, e = min(bad, key=lambda v: v[1])
            raise BoundViolated(t, e, trace.bound, channel)
    return trace


# serialization ---------------------------------------------------------------------------

_MATRICES = ("Wz", "Uz", "Wr", "Ur", "Wh", "Uh")
_VECTORS = ("bz", "br", "bh", "h0")


def gru_to_json(gru: Gru, accept: AcceptanceSet | None = None) -> dict:
    data = {"model": "gru", "alphabet": list(gru.alphabet), "precision_bits": gru.precision}
    for name in _MATRICES:
        data[name] = [[format_scalar(x) for x in row] for row in getattr(gru, name).rows]
    for name in _VECTORS:
        data[name] = [format_scalar(x) for x in getattr(gru, name)]
    data["output"] = gru.output.to_json()
    if accept is not None:
        data["acceptance"] = accept.to_json()
    if gru.meta is not None:
        data["meta"] = gru.meta
    return data


def gru_from_json(data: dict, precision: int | None = None):
    """Parse a ``"model": "gru"`` document; returns ``(gru, acceptance or None)``."""
    if data.get("model") != "gru":
        raise ValueError(f"expected a gru model, got {data.get('model')!r}")
    p = int(precision if precision is not None else data["precision_bits"])
    alphabet = Alphabet(tuple(data["alphabet"]))
    m = len(data["h0"])
    mats = {}
    for name in _MATRICES:
        rows = [[parse_scalar(x, p, allow_inf=(name == "Uz")) for x in row] for row in data[name]]
        ncols = len(alphabet) if name.startswith("W") else m
        mats[name] = Matrix(rows, ncols)
    vecs = {name: tuple(parse_scalar(x, p) for x in data[name]) for name in _VECTORS}
    gru = Gru(alphabet, **mats, **vecs, output=output_from_json(data["output"], p), precision=p, meta=data.get("meta"))
    accept = acceptance_from_json(data["acceptance"]) if "acceptance" in data else None
    return gru, accept
