"""Constructions of simple RNNs: DFA compilation, the 6-node Dyck recognizer, CFL composition."""
from __future__ import annotations

from dataclasses import dataclass

import gmpy2

from .automata import Dfa, DyckSpec
from .errors import AlphabetMismatch, PreconditionError
from .numerics import Matrix, block_diag, vstack
from .rnn import ExactZero, SimpleRnn

mpq = gmpy2.mpq


@dataclass(frozen=True)
class CflSpec:
    """A context-free language given as D_n ∩ L(regular) over the Dyck alphabet."""

    dyck: DyckSpec
    regular: Dfa

    def __post_init__(self):
        if self.regular.alphabet != self.dyck.alphabet:
            raise AlphabetMismatch(
                f"regular part is over {list(self.regular.alphabet)}, expected {list(self.dyck.alphabet)}"
            )

    @classmethod
    def from_json(cls, data):
        return cls(DyckSpec(int(data["n"])), Dfa.from_json(data["regular"]))

    def to_json(self):
        return {"n": self.dyck.n, "regular": self.regular.to_json()}


def dfa_node(dfa: Dfa, symbol: int, state: int) -> int:
    """Hidden index of the node labelled (symbol, state): symbol-major, state-minor."""
    return symbol * len(dfa.states) + state


def compile_dfa_to_rnn(dfa: Dfa):
    """ReLU RNN with |Q||Σ| one-hot hidden nodes whose {0}-language is L(dfa).

    Node (x, q) fires when the last symbol read was x and the DFA is in q.  It
    receives weight 1 from input x and from every node (x', q') with
    δ(q', x) = q; with bias -1 only the node reached from both sources
    survives the ReLU.  Nodes whose state is rejecting feed the output.
    """
    nq, ns = len(dfa.states), len(dfa.alphabet)
    m = nq * ns
    wx = [[mpq(0)] * ns for _ in range(m)]
    wh = [[mpq(0)] * m for _ in range(m)]
    for x in range(ns):
        for q in range(nq):
            wx[dfa_node(dfa, x, q)][x] = mpq(1)
    for x_prev in range(ns):
        for q in range(nq):
            src = dfa_node(dfa, x_prev, q)
            for x in range(ns):
                wh[dfa_node(dfa, x, dfa.delta[q][x])][src] = mpq(1)
    wo = [mpq(0) if q in dfa.accepting else mpq(1) for x in range(ns) for q in range(nq)]
    h0 = [mpq(0)] * m
    # the proof allows any symbol here; the first one keeps output deterministic
    h0[dfa_node(dfa, 0, dfa.initial)] = mpq(1)
    rnn = SimpleRnn(dfa.alphabet, Matrix(wx, ns), Matrix(wh, m), [mpq(-1)] * m, wo, 0, h0)
    return rnn, ExactZero()


def build_dyck_rnn(spec: DyckSpec):
    """Six-node ReLU RNN whose {0}-language is D_n.

    Nodes 1-2 hold the stack state s_t (one of them is zero), nodes 3 and 5
    flag a closing bracket of the wrong type, nodes 4 and 6 accumulate those
    flags so a violation is never forgotten.
    """
    n = spec.n
    b = mpq(spec.base)
    inv = 1 / b
    opens = range(1, n + 1)
    wx = [
        [2 * i * inv for i in opens] + [-b] * n,
        [-b] * n + [mpq(-2 * i) for i in opens],
        [mpq(0)] * n + [mpq(2 * i) for i in opens],
        [mpq(0)] * (2 * n),
        [-b] * n + [mpq(-2 * i - 1) for i in opens],
        [mpq(0)] * (2 * n),
    ]
    z = mpq(0)
    wh = [
        [inv, inv, z, z, z, z],
        [b, b, z, z, z, z],
        [-b, -b, z, z, z, z],
        [z, z, mpq(1), mpq(1), z, z],
        [b, b, z, z, z, z],
        [z, z, z, z, mpq(1), mpq(1)],
    ]
    rnn = SimpleRnn(spec.alphabet, Matrix(wx, 2 * n), Matrix(wh, 6), [z] * 6, [mpq(1)] * 6, 0, [z] * 6)
    return rnn, ExactZero()


def _nonnegative_output(rnn: SimpleRnn):
    return all(w >= 0 for w in rnn.Wo) and rnn.bo >= 0 and all(x >= 0 for x in rnn.h0)


def compose_cfl_rnn(dyck_rnn: SimpleRnn, dfa_rnn: SimpleRnn):
    """Stack two {0}-recognizers over one alphabet; the output is the sum of both outputs.

    Both outputs must be nonnegative (ReLU hidden states, nonnegative output
    weights) so that the sum vanishes exactly when each part does.
    """
    if dyck_rnn.alphabet != dfa_rnn.alphabet:
        raise AlphabetMismatch("component RNNs are over different alphabets")
    for name, part in (("dyck_rnn", dyck_rnn), ("dfa_rnn", dfa_rnn)):
        if not _nonnegative_output(part):
            raise PreconditionError(f"{name} can produce negative outputs")
    rnn = SimpleRnn(
        dyck_rnn.alphabet,
        vstack(dyck_rnn.Wx, dfa_rnn.Wx),
        block_diag(dyck_rnn.Wh, dfa_rnn.Wh),
        dyck_rnn.bh + dfa_rnn.bh,
        dyck_rnn.Wo + dfa_rnn.Wo,
        dyck_rnn.bo + dfa_rnn.bo,
        dyck_rnn.h0 + dfa_rnn.h0,
    )
    return rnn, ExactZero()


def compile_cfl_rnn(cfl: CflSpec):
    """RNN with 6 + 2nr hidden nodes recognizing D_n ∩ L(cfl.regular)."""
    dyck, _ = build_dyck_rnn(cfl.dyck)
    regular, _ = compile_dfa_to_rnn(cfl.regular)
    return compose_cfl_rnn(dyck, regular)
