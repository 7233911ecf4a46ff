"""Constructions of GRUs: DFA compilation by a linear solve, the 8-node Dyck recognizer, CFL composition."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import gmpy2

from .automata import Alphabet, Dfa, DyckSpec
from .errors import Ambiguous, AlphabetMismatch, PreconditionError, SingularMatrixError
from .gru import DyckReadout, Gru, Linear, SumReadout, check_k, required_precision
from .numerics import (
    POS_INF,
    BigFloat,
    Matrix,
    block_diag,
    det,
    mat_inverse,
    rational,
    sigmoid_inv,
    tanh_inv,
    vstack,
)
from .rnn import OpenInterval
from .rnn_compile import CflSpec

mpq = gmpy2.mpq

DFA_GRU_PRECISION = 128
DFA_GRU_TOLERANCE = mpq(1, 2**16)


@lru_cache(maxsize=4096)
def _logit(y, prec):
    return sigmoid_inv(y, prec)


def _zeros(nrows, ncols, prec):
    return Matrix.zeros(nrows, ncols, BigFloat(0, prec))


# DFA -> GRU ----------------------------------------------------------------------------

@dataclass(frozen=True)
class StateEmbedding:
    """State ``i`` (declaration order) is the vector with 1/4 on block ``i`` of width |Σ|."""

    states: tuple[str, ...]
    alphabet: Alphabet
    vectors: tuple[tuple, ...]

    @property
    def dim(self):
        return len(self.states) * len(self.alphabet)

    def vector(self, state):
        i = self.states.index(state) if isinstance(state, str) else state
        return self.vectors[i]


def state_embedding(dfa: Dfa) -> StateEmbedding:
    ns, nq = len(dfa.alphabet), len(dfa.states)
    quarter, zero = mpq(1, 4), mpq(0)
    vectors = tuple(
        tuple(quarter if i * ns <= k < (i + 1) * ns else zero for k in range(nq * ns)) for i in range(nq)
    )
    return StateEmbedding(dfa.states, dfa.alphabet, vectors)


def reset_targets(ns: int, dim: int) -> Matrix:
    """Exact reset gate values: 0.8 where ``k ≡ j (mod |Σ|)``, else 0.4."""
    return Matrix([[mpq(4, 5) if k % ns == j else mpq(2, 5) for j in range(ns)] for k in range(dim)], ns)


@dataclass(frozen=True)
class DfaGruSystem:
    """The linear system ``Uh C = B`` and its solution."""

    embedding: StateEmbedding
    r: Matrix
    C: Matrix
    B: Matrix
    Uh: Matrix
    det_C: object
    precision: int

    def column(self, state: int, symbol: int) -> int:
        return state * len(self.embedding.alphabet) + symbol


def expected_det(nq: int, ns: int):
    """``0.1^N (|Σ| + 1)^|Q|`` with ``N = |Q||Σ|``."""
    return mpq(1, 10) ** (nq * ns) * (ns + 1) ** nq


def dfa_gru_system(dfa: Dfa, precision: int = DFA_GRU_PRECISION) -> DfaGruSystem:
    emb = state_embedding(dfa)
    ns, nq, n = len(dfa.alphabet), len(dfa.states), emb.dim
    r = reset_targets(ns, n)
    c_cols, b_cols = [], []
    for i in range(nq):
        s_i = emb.vectors[i]
        for j in range(ns):
            c_cols.append([r[k, j] * s_i[k] for k in range(n)])
            s_next = emb.vectors[dfa.delta[i][j]]
            # with z = 1/2 the update is h' = (s_i + tanh(.)) / 2, so tanh(.) must equal 2 s_next - s_i
            b_cols.append([2 * s_next[k] - s_i[k] for k in range(n)])
    c = Matrix(list(zip(*c_cols)), n)
    d = det(c)
    if d == 0:
        raise SingularMatrixError(d)
    c_inv = mat_inverse(c)
    b_exact_args = Matrix(list(zip(*b_cols)), n)
    b = b_exact_args.map(lambda y: tanh_inv(y, precision))
    rows = []
    for a in range(n):
        exact_row = [x.exact() for x in b.row(a)]
        out = []
        for col in range(n):
            acc = mpq(0)
            for k, x in enumerate(exact_row):
                if x != 0:
                    y = c_inv[k, col]
                    if y != 0:
                        acc += x * y
            out.append(BigFloat(acc, precision))
        rows.append(out)
    return DfaGruSystem(emb, r, c, b, Matrix(rows, n), d, precision)


def compile_dfa_to_gru(dfa: Dfa, precision: int = DFA_GRU_PRECISION):
    """GRU with |Q||Σ| hidden nodes whose hidden state after a word is the embedding of the DFA state.

    The update gate is σ(0) = 1/2 everywhere, the reset gate picks out the
    current symbol, and ``Uh`` solves the linear system that sends every
    (state, symbol) pair to the embedding of its successor.  The linear
    readout is 0 on accepting states and 1 on the others.
    """
    sys_ = dfa_gru_system(dfa, precision)
    emb = sys_.embedding
    ns, n = len(dfa.alphabet), emb.dim
    p = precision
    zeros_x, zeros_h = _zeros(n, ns, p), _zeros(n, n, p)
    wr = sys_.r.map(lambda y: _logit(y, p))
    zero_vec = (BigFloat(0, p),) * n
    wo = tuple(
        mpq(0 if i in dfa.accepting else 4, ns) for i in range(len(dfa.states)) for _ in range(ns)
    )
    gru = Gru(
        dfa.alphabet,
        Wz=zeros_x, Uz=zeros_h, Wr=wr, Ur=zeros_h, Wh=zeros_x, Uh=sys_.Uh,
        bz=zero_vec, br=zero_vec, bh=zero_vec,
        h0=emb.vectors[dfa.initial],
        output=Linear(wo, 0),
        precision=p,
        meta={"construction": "dfa-gru", "dfa": dfa.to_json()},
    )
    return gru, OpenInterval(-DFA_GRU_TOLERANCE, DFA_GRU_TOLERANCE)


def decode_state(h, emb: StateEmbedding, tol=mpq(1, 2**20)):
    """Nearest embedded state in the max norm; returns ``(state name, residual)``."""
    if len(h) != emb.dim:
        raise ValueError(f"hidden state has {len(h)} entries, expected {emb.dim}")
    exact_h = [rational(x) for x in h]
    residuals = sorted(
        (max(abs(x - y) for x, y in zip(exact_h, vec)), i) for i, vec in enumerate(emb.vectors)
    )
    best, i = residuals[0]
    if len(residuals) > 1 and residuals[1][0] - best <= rational(tol):
        raise Ambiguous(
            f"states {emb.states[i]!r} and {emb.states[residuals[1][1]]!r} are equally close to the hidden state"
        )
    return emb.states[i], best


# Dyck GRU ---------------------------------------------------------------------------------

def _dyck_gate_columns(spec: DyckSpec, k: int, prec: int):
    n, b = spec.n, mpq(spec.base)
    lo_open = _logit(b ** (-1 - k), prec)
    lo_close = _logit(b ** (1 - k), prec)
    shrink = _logit(b ** (-k), prec)
    zero = BigFloat(0, prec)
    wz_cols, wr_cols = [], []
    for sym in range(2 * n):
        i = spec.kind(sym)
        mirrored = n + 1 - i
        if spec.is_open(sym):
            a = lo_open
            r3 = _logit(mpq(1, 2) - mpq(2 * i) / (b ** (k + 1) - 1), prec)
            r7 = _logit(mpq(1, 2) - mpq(2 * mirrored) / (b ** (k + 1) - 1), prec)
        else:
            a = lo_close
            r3 = _logit(mpq(1, 2) + mpq(2 * i) / (b ** k - b), prec)
            r7 = _logit(mpq(1, 2) + mpq(2 * mirrored) / (b ** k - b), prec)
        wz_cols.append((a, shrink, shrink, zero, a, shrink, shrink, zero))
        wr_cols.append((zero, zero, r3, zero, zero, zero, r7, zero))
    return wz_cols, wr_cols


def _resolve_precision(spec: DyckSpec, k: int, precision, max_len):
    return int(precision) if precision is not None else required_precision(spec.n, k, max_len)


def build_dyck_gru(spec: DyckSpec, k: int = 5, precision: int | None = None, max_len: int = 64):
    """Eight-node GRU whose (0, 1/(2n+1))-language is D_n.

    Nodes 1 and 5 track the rescaled stack state and its type-mirrored twin,
    nodes 2, 3, 6, 7 decay as (2n+1)^(-kt) to supply the reference scale, and
    nodes 4 and 8 latch to 0 once node 1 or 5 turns non-positive.
    """
    check_k(spec.n, k)
    p = _resolve_precision(spec, k, precision, max_len)
    wz_cols, wr_cols = _dyck_gate_columns(spec, k, p)
    zero, one = BigFloat(0, p), BigFloat(1, p)
    uz = [[zero] * 8 for _ in range(8)]
    uz[3][0] = POS_INF
    uz[7][4] = POS_INF
    uh = [[zero] * 8 for _ in range(8)]
    uh[0][1], uh[0][2] = one, -one
    uh[4][5], uh[4][6] = one, -one
    start = BigFloat(3 * mpq(spec.base) ** (7 - 2 * k), p)
    zero_vec = (zero,) * 8
    gru = Gru(
        spec.alphabet,
        Wz=Matrix(list(zip(*wz_cols)), 2 * spec.n),
        Uz=Matrix(uz, 8),
        Wr=Matrix(list(zip(*wr_cols)), 2 * spec.n),
        Ur=_zeros(8, 8, p),
        Wh=_zeros(8, 2 * spec.n, p),
        Uh=Matrix(uh, 8),
        bz=zero_vec, br=zero_vec, bh=zero_vec,
        h0=(start, one, one, one, start, one, one, one),
        output=DyckReadout(0),
        precision=p,
        meta={"construction": "dyck-gru", "n": spec.n, "k": k},
    )
    return gru, OpenInterval(0, mpq(1, spec.base))


def build_dyck_tracker_gru(spec: DyckSpec, k: int = 5, precision: int | None = None, h10=0, max_len: int = 64) -> Gru:
    """Three-node GRU made of the first tracking channel of the Dyck GRU, started at ``h1 = h10``.

    Without the flag node it has no infinite gate, so ``h10 = 0`` is allowed.
    Its linear output is ``h1``.
    """
    check_k(spec.n, k)
    p = _resolve_precision(spec, k, precision, max_len)
    wz_cols, wr_cols = _dyck_gate_columns(spec, k, p)
    zero, one = BigFloat(0, p), BigFloat(1, p)
    uh = [[zero, one, -one], [zero] * 3, [zero] * 3]
    zero_vec = (zero,) * 3
    return Gru(
        spec.alphabet,
        Wz=Matrix([c[:3] for c in wz_cols], 3).T,
        Uz=_zeros(3, 3, p),
        Wr=Matrix([c[:3] for c in wr_cols], 3).T,
        Ur=_zeros(3, 3, p),
        Wh=_zeros(3, 2 * spec.n, p),
        Uh=Matrix(uh, 3),
        bz=zero_vec, br=zero_vec, bh=zero_vec,
        h0=(BigFloat(rational(h10), p), one, one),
        output=Linear((one, zero, zero), zero),
        precision=p,
        meta={"construction": "dyck-tracker-gru", "n": spec.n, "k": k, "h10": str(rational(h10))},
    )


# composition -----------------------------------------------------------------------------------

def compose_cfl_gru(dyck_gru: Gru, dfa_gru: Gru):
    """Stack a Dyck GRU and a DFA GRU; the readout is the Dyck readout plus the DFA's linear readout.

    Both parts run at the larger of the two precisions.
    """
    if dyck_gru.alphabet != dfa_gru.alphabet:
        raise AlphabetMismatch("component GRUs are over different alphabets")
    if not isinstance(dyck_gru.output, DyckReadout) or dyck_gru.hidden_size != 8:
        raise PreconditionError("dyck_gru must be the 8-node Dyck GRU")
    if not isinstance(dfa_gru.output, Linear):
        raise PreconditionError("dfa_gru must have a linear readout")
    p = max(dyck_gru.precision, dfa_gru.precision)
    zero = BigFloat(0, p)

    def bd(name):
        return block_diag(getattr(dyck_gru, name), getattr(dfa_gru, name), zero=zero)

    def vs(name):
        return vstack(getattr(dyck_gru, name), getattr(dfa_gru, name))

    def cat(name):
        return getattr(dyck_gru, name) + getattr(dfa_gru, name)

    readout = SumReadout((DyckReadout(0), Linear((zero,) * 8 + dfa_gru.output.Wo, dfa_gru.output.bo)))
    meta = None
    if dyck_gru.meta and dfa_gru.meta and "dfa" in dfa_gru.meta:
        meta = {
            "construction": "cfl-gru",
            "n": dyck_gru.meta["n"],
            "k": dyck_gru.meta["k"],
            "dfa": dfa_gru.meta["dfa"],
        }
    gru = Gru(
        dyck_gru.alphabet,
        Wz=vs("Wz"), Uz=bd("Uz"), Wr=vs("Wr"), Ur=bd("Ur"), Wh=vs("Wh"), Uh=bd("Uh"),
        bz=cat("bz"), br=cat("br"), bh=cat("bh"), h0=cat("h0"),
        output=readout,
        precision=p,
        meta=meta,
    )
    n = len(dyck_gru.alphabet) // 2
    return gru, OpenInterval(0, mpq(1, 2 * n + 1))


def compile_cfl_gru(cfl: CflSpec, k: int = 5, precision: int | None = None, max_len: int = 64):
    """GRU with 8 + 2nr hidden nodes recognizing D_n ∩ L(cfl.regular)."""
    p = _resolve_precision(cfl.dyck, k, precision, max_len)
    dyck, _ = build_dyck_gru(cfl.dyck, k, p)
    regular, _ = compile_dfa_to_gru(cfl.regular, p)
    return compose_cfl_gru(dyck, regular)


def rebuild_gru(meta: dict, precision: int):
    """Re-run the construction recorded in a weights file at another precision."""
    kind = meta.get("construction")
    if kind == "dyck-gru":
        return build_dyck_gru(DyckSpec(int(meta["n"])), int(meta["k"]), precision)
    if kind == "dyck-tracker-gru":
        spec = DyckSpec(int(meta["n"]))
        return build_dyck_tracker_gru(spec, int(meta["k"]), precision, rational(meta["h10"])), None
    if kind == "dfa-gru":
        return compile_dfa_to_gru(Dfa.from_json(meta["dfa"]), precision)
    if kind == "cfl-gru":
        cfl = CflSpec(DyckSpec(int(meta["n"])), Dfa.from_json(meta["dfa"]))
        return compile_cfl_gru(cfl, int(meta["k"]), precision)
    raise ValueError(f"cannot rebuild construction {kind!r}")
