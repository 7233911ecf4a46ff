"""Simple ReLU RNNs: exact and fixed-point simulation, acceptance sets, DFA extraction.

    h_t = relu(Wx x_t + Wh h_{t-1} + bh)
    o_t = Wo h_t + bo

``x_t`` is the one-hot of the t-th symbol, so ``Wx x_t`` is a column of ``Wx``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import gmpy2

from .automata import Alphabet, Dfa
from .errors import StateBudgetExceeded
from .numerics import (
    FixedPointFormat,
    Matrix,
    as_vector,
    exact_value,
    format_scalar,
    parse_scalar,
    quantize_value,
    rational,
)

mpq = gmpy2.mpq
_ZERO = mpq(0)


# acceptance sets -------------------------------------------------------------

@dataclass(frozen=True)
class ExactZero:
    def __contains__(self, value):
        return exact_value(value) == 0

    def to_json(self):
        return {"type": "exact_zero"}


@dataclass(frozen=True)
class OpenInterval:
    lo: object
    hi: object

    def __post_init__(self):
        object.__setattr__(self, "lo", rational(self.lo))
        object.__setattr__(self, "hi", rational(self.hi))
        if not self.lo < self.hi:
            raise ValueError("empty interval")

    def __contains__(self, value):
        v = exact_value(value)
        return self.lo < v < self.hi

    def to_json(self):
        return {"type": "open_interval", "lo": str(self.lo), "hi": str(self.hi)}


@dataclass(frozen=True)
class FiniteSet:
    values: frozenset

    def __post_init__(self):
        object.__setattr__(self, "values", frozenset(rational(v) for v in self.values))

    def __contains__(self, value):
        return exact_value(value) in self.values

    def to_json(self):
        return {"type": "finite_set", "values": sorted((str(v) for v in self.values), key=rational)}


AcceptanceSet = ExactZero | OpenInterval | FiniteSet


def acceptance_from_json(data) -> AcceptanceSet:
    kind = data.get("type")
    if kind == "exact_zero":
        return ExactZero()
    if kind == "open_interval":
        return OpenInterval(data["lo"], data["hi"])
    if kind == "finite_set":
        return FiniteSet(frozenset(data["values"]))
    raise ValueError(f"unknown acceptance set type {kind!r}")


# the network ----------------------------------------------------------------------

@dataclass(frozen=True)
class SimpleRnn:
    alphabet: Alphabet
    Wx: Matrix
    Wh: Matrix
    bh: tuple
    Wo: tuple
    bo: object
    h0: tuple
    # per-symbol input offsets and sparse recurrent rows, built on first use
    _kernel: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        m = len(self.h0)
        object.__setattr__(self, "bh", as_vector(self.bh))
        object.__setattr__(self, "Wo", as_vector(self.Wo))
        object.__setattr__(self, "h0", as_vector(self.h0))
        object.__setattr__(self, "bo", rational(self.bo))
        if self.Wx.shape != (m, len(self.alphabet)):
            raise ValueError(f"Wx has shape {self.Wx.shape}, expected {(m, len(self.alphabet))}")
        if self.Wh.shape != (m, m):
            raise ValueError(f"Wh has shape {self.Wh.shape}, expected {(m, m)}")
        if len(self.bh) != m or len(self.Wo) != m:
            raise ValueError("bh and Wo must have one entry per hidden node")
        for mat in (self.Wx, self.Wh):
            if mat.regime != "rational" or mat.has_infinity():
                raise TypeError("simple RNN weights must be finite exact rationals")

    @property
    def hidden_size(self):
        return len(self.h0)


class RnnStep(NamedTuple):
    t: int
    symbol: int | None
    h: tuple
    o: object


def _kernel(rnn: SimpleRnn):
    k = rnn._kernel
    if k is None:
        m = rnn.hidden_size
        offsets = [tuple(rnn.Wx[i, a] + rnn.bh[i] for i in range(m)) for a in range(len(rnn.alphabet))]
        rows = tuple(rnn.Wh.sparse_row(i) for i in range(m))
        k = (offsets, rows)
        object.__setattr__(rnn, "_kernel", k)
    return k


def _step(kernel, h, a):
    offsets, rows = kernel
    out = []
    for base, row in zip(offsets[a], rows):
        acc = base
        for j, w in row:
            x = h[j]
            if x:
                acc += w * x
        out.append(acc if acc > 0 else _ZERO)
    return tuple(out)


def rnn_step(rnn: SimpleRnn, h, symbol) -> tuple:
    a = rnn.alphabet.index(symbol)
    if len(h) != rnn.hidden_size:
        raise ValueError(f"hidden state has {len(h)} entries, expected {rnn.hidden_size}")
    return _step(_kernel(rnn), as_vector(h), a)


def rnn_output(rnn: SimpleRnn, h):
    acc = rnn.bo
    for w, x in zip(rnn.Wo, h):
        if w != 0 and x != 0:
            acc = acc + w * x
    return acc


def rnn_run(rnn: SimpleRnn, word):
    """Final output and the full trace ``t = 0..m``."""
    word = rnn.alphabet.encode(word)
    kernel = _kernel(rnn)
    h = rnn.h0
    trace = [RnnStep(0, None, h, rnn_output(rnn, h))]
    for t, sym in enumerate(word, 1):
        h = _step(kernel, h, sym)
        trace.append(RnnStep(t, sym, h, rnn_output(rnn, h)))
    return trace[-1].o, tuple(trace)


def rnn_final_output(rnn: SimpleRnn, word):
    """Output after ``word`` without keeping the trace."""
    kernel = _kernel(rnn)
    h = rnn.h0
    for sym in rnn.alphabet.encode(word):
        h = _step(kernel, h, sym)
    return rnn_output(rnn, h)


def rnn_all_outputs(rnn: SimpleRnn, max_len: int):
    """Yield ``(word, output)`` for every word of length ``<= max_len``, each prefix evaluated once."""
    kernel = _kernel(rnn)
    ns = len(rnn.alphabet)
    stack = [((), rnn.h0)]
    while stack:
        word, h = stack.pop()
        yield word, rnn_output(rnn, h)
        if len(word) < max_len:
            for a in reversed(range(ns)):
                stack.append((word + (a,), _step(kernel, h, a)))


def rnn_accepts(rnn: SimpleRnn, accept: AcceptanceSet, word) -> bool:
    return rnn_final_output(rnn, word) in accept


def _quantize_vec(h, fmt):
    return tuple(quantize_value(x, fmt) for x in h)


def rnn_run_quantized(rnn: SimpleRnn, word, fmt: FixedPointFormat):
    """Like :func:`rnn_run`, but every hidden value is stored in ``fmt`` after each step."""
    word = rnn.alphabet.encode(word)
    h = _quantize_vec(rnn.h0, fmt)
    trace = [RnnStep(0, None, h, rnn_output(rnn, h))]
    for t, sym in enumerate(word, 1):
        h = _quantize_vec(rnn_step(rnn, h, sym), fmt)
        trace.append(RnnStep(t, sym, h, rnn_output(rnn, h)))
    return trace[-1].o, tuple(trace)


def extract_dfa(rnn: SimpleRnn, fmt: FixedPointFormat, accept: AcceptanceSet, max_states: int = 100_000) -> Dfa:
    """DFA over the quantized hidden states reachable from ``h0``.

    States are named ``q0, q1, ...`` in breadth-first discovery order; a state
    accepts when the output layer maps its hidden vector into ``accept``.
    """
    start = _quantize_vec(rnn.h0, fmt)
    index = {start: 0}
    order = [start]
    delta = []
    queue = deque([start])
    k = len(rnn.alphabet)
    while queue:
        h = queue.popleft()
        row = []
        for sym in range(k):
            nxt = _quantize_vec(rnn_step(rnn, h, sym), fmt)
            if nxt not in index:
                if len(order) >= max_states:
                    raise StateBudgetExceeded(max_states)
                index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            row.append(index[nxt])
        delta.append(tuple(row))
    accepting = frozenset(i for i, h in enumerate(order) if rnn_output(rnn, h) in accept)
    return Dfa(tuple(f"q{i}" for i in range(len(order))), rnn.alphabet, tuple(delta), 0, accepting)


# serialization ----------------------------------------------------------------------

def rnn_to_json(rnn: SimpleRnn, accept: AcceptanceSet | None = None) -> dict:
    data = {
        "model": "simple_rnn",
        "alphabet": list(rnn.alphabet),
        "Wx": [[format_scalar(x) for x in row] for row in rnn.Wx.rows],
        "Wh": [[format_scalar(x) for x in row] for row in rnn.Wh.rows],
        "bh": [format_scalar(x) for x in rnn.bh],
        "Wo": [[format_scalar(x) for x in rnn.Wo]],
        "bo": format_scalar(rnn.bo),
        "h0": [format_scalar(x) for x in rnn.h0],
    }
    if accept is not None:
        data["acceptance"] = accept.to_json()
    return data


def rnn_from_json(data: dict):
    """Parse a ``"model": "simple_rnn"`` document; returns ``(rnn, acceptance or None)``."""
    if data.get("model") != "simple_rnn":
        raise ValueError(f"expected a simple_rnn model, got {data.get('model')!r}")
    alphabet = Alphabet(tuple(data["alphabet"]))
    m = len(data["h0"])
    wo = data["Wo"]
    if wo and isinstance(wo[0], list):
        if len(wo) != 1:
            raise ValueError("Wo must be a single row")
        wo = wo[0]
    rnn = SimpleRnn(
        alphabet,
        Matrix([[parse_scalar(x) for x in row] for row in data["Wx"]], len(alphabet)),
        Matrix([[parse_scalar(x) for x in row] for row in data["Wh"]], m),
        [parse_scalar(x) for x in data["bh"]],
        [parse_scalar(x) for x in wo],
        parse_scalar(data.get("bo", "0")),
        [parse_scalar(x) for x in data["h0"]],
    )
    accept = acceptance_from_json(data["acceptance"]) if "acceptance" in data else None
    return rnn, accept
