"""Classical ground truth: alphabets, DFAs, Dyck membership, stack-in-a-scalar states.

Words are tuples of symbol indices.  For a Dyck alphabet over ``n`` bracket
types the canonical order is ``(1 .. (n )1 .. )n``, so index ``i < n`` opens
type ``i + 1`` and index ``n + i`` closes it.  Public functions also accept
symbol names and translate them through the alphabet.
"""
from __future__ import annotations

import enum
import random
from collections import deque
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import gmpy2

from .errors import PreconditionError, UnknownSymbol

mpq = gmpy2.mpq


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if len(set(symbols)) != len(symbols):
            raise ValueError(f"alphabet symbols are not distinct: {symbols}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    @classmethod
    def dyck(cls, n):
        return cls(tuple(f"({i}" for i in range(1, n + 1)) + tuple(f"){i}" for i in range(1, n + 1)))

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, symbol):
        if isinstance(symbol, str):
            try:
                return self._index[symbol]
            except KeyError:
                raise UnknownSymbol(symbol, self.symbols) from None
        if isinstance(symbol, int) and not isinstance(symbol, bool) and 0 <= symbol < len(self.symbols):
            return symbol
        raise UnknownSymbol(symbol, self.symbols)

    def encode(self, word: Iterable) -> tuple[int, ...]:
        """Validate a word of names and/or indices; return it as indices."""
        if isinstance(word, str):
            word = word.split()
        return tuple(self.index(s) for s in word)

    def decode(self, word: Iterable[int]) -> tuple[str, ...]:
        return tuple(self.symbols[self.index(i)] for i in word)

    def format(self, word: Iterable) -> str:
        return " ".join(self.decode(self.encode(word)))


def parse_word(text: str, alphabet: Alphabet) -> tuple[int, ...]:
    """Whitespace-separated tokens, e.g. ``"(1 (2 )2 )1"``."""
    return alphabet.encode(text.split())


# Dyck languages -------------------------------------------------------------

@dataclass(frozen=True)
class DyckSpec:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"Dyck spec needs n >= 1, got {self.n!r}")

    @property
    def base(self):
        """The radix ``2n + 1`` of the stack encoding."""
        return 2 * self.n + 1

    @property
    def alphabet(self):
        return Alphabet.dyck(self.n)

    def is_open(self, symbol):
        return symbol < self.n

    def kind(self, symbol):
        """Bracket type in ``1..n`` of a symbol index."""
        return symbol % self.n + 1

    def open_symbol(self, kind):
        return kind - 1

    def close_symbol(self, kind):
        return self.n + kind - 1

    def encode(self, word):
        return self.alphabet.encode(word)


class MembershipClass(enum.Enum):
    IN_DYCK = "in_dyck"
    IN_PREFIX = "in_prefix"
    NEITHER = "neither"


def _stack_run(word, spec):
    """Final stack of bracket types, or None on underflow/mismatch."""
    stack = []
    for sym in word:
        k = spec.kind(sym)
        if spec.is_open(sym):
            stack.append(k)
        elif not stack or stack.pop() != k:
            return None
    return stack


def classify(word, spec: DyckSpec) -> MembershipClass:
    """Balanced word, proper unbalanced prefix of one, or neither."""
    stack = _stack_run(spec.encode(word), spec)
    if stack is None:
        return MembershipClass.NEITHER
    return MembershipClass.IN_PREFIX if stack else MembershipClass.IN_DYCK


def in_prefix_closure(word, spec: DyckSpec) -> bool:
    """``word`` lies in P_n ∪ D_n."""
    return _stack_run(spec.encode(word), spec) is not None


@dataclass(frozen=True)
class StateTrace:
    """Exact states ``s_0..s_m`` plus open/close counts after each prefix."""

    states: tuple
    opens: tuple[int, ...]
    closes: tuple[int, ...]

    def __len__(self):
        return len(self.states)

    @property
    def final(self):
        return self.states[-1]


def _counts(word, spec):
    opens, closes = [0], [0]
    for sym in word:
        o = spec.is_open(sym)
        opens.append(opens[-1] + o)
        closes.append(closes[-1] + (not o))
    return tuple(opens), tuple(closes)


def state_trace(word, spec: DyckSpec) -> StateTrace:
    """``s_t = s_{t-1}/(2n+1) + 2i/(2n+1)`` on ``(i``, ``(2n+1) s_{t-1} - 2i`` on ``)i``."""
    word = spec.encode(word)
    b = spec.base
    s = [mpq(0)]
    for sym in word:
        i = spec.kind(sym)
        if spec.is_open(sym):
            s.append((s[-1] + 2 * i) / b)
        else:
            s.append(b * s[-1] - 2 * i)
    return StateTrace(tuple(s), *_counts(word, spec))


def state_trace_bar(word, spec: DyckSpec) -> StateTrace:
    """The same recurrence with bracket types mirrored, type ``i`` read as ``n + 1 - i``."""
    word = spec.encode(word)
    mirrored = tuple(
        spec.open_symbol(spec.n + 1 - spec.kind(s)) if spec.is_open(s) else spec.close_symbol(spec.n + 1 - spec.kind(s))
        for s in word
    )
    return state_trace(mirrored, spec)


def state_trace_prime(word, spec: DyckSpec, k: int) -> StateTrace:
    """Rescaled states ``s'_t = s_t (2n+1)^(-kt)`` built from their own recurrence."""
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    word = spec.encode(word)
    b = mpq(spec.base)
    s = [mpq(0)]
    for t, sym in enumerate(word, 1):
        i = spec.kind(sym)
        if spec.is_open(sym):
            s.append(b ** (-1 - k) * s[-1] + 2 * i * b ** (-1 - k * t))
        else:
            s.append(b ** (1 - k) * s[-1] - 2 * i * b ** (-k * t))
    return StateTrace(tuple(s), *_counts(word, spec))


def unique_closer(word, spec: DyckSpec) -> int:
    """Type ``j`` of the only closing bracket that keeps a proper prefix extendable."""
    word = spec.encode(word)
    if classify(word, spec) is not MembershipClass.IN_PREFIX:
        raise PreconditionError("unique_closer needs a proper unbalanced prefix of a Dyck word")
    s = state_trace(word, spec).final
    # 2j/(2n+1) <= s < (2j+1)/(2n+1)
    return int(gmpy2.f_div(s.numerator * spec.base, 2 * s.denominator))


# DFAs -------------------------------------------------------------------------

@dataclass(frozen=True)
class Dfa:
    """Complete DFA with index-based transition table ``delta[state][symbol]``."""

    states: tuple[str, ...]
    alphabet: Alphabet
    delta: tuple[tuple[int, ...], ...]
    initial: int
    accepting: frozenset

    def __post_init__(self):
        states = tuple(str(q) for q in self.states)
        if not states:
            raise ValueError("a DFA needs at least one state")
        if len(set(states)) != len(states):
            raise ValueError("DFA state names must be distinct")
        object.__setattr__(self, "states", states)
        if len(self.delta) != len(states):
            raise ValueError("transition table must have one row per state")
        for q, row in enumerate(self.delta):
            if len(row) != len(self.alphabet):
                raise ValueError(f"transition function is not total at state {states[q]}")
            if any(not 0 <= t < len(states) for t in row):
                raise ValueError(f"transition from {states[q]} leaves the state set")
        object.__setattr__(self, "delta", tuple(tuple(r) for r in self.delta))
        if not 0 <= self.initial < len(states):
            raise ValueError("initial state is not a state")
        acc = frozenset(self.accepting)
        if not acc <= set(range(len(states))):
            raise ValueError("accepting states must be states")
        object.__setattr__(self, "accepting", acc)

    @classmethod
    def from_mapping(cls, states, alphabet, transitions, initial, accepting):
        """Build from names: ``transitions[state][symbol] -> state``."""
        states = tuple(str(q) for q in states)
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(tuple(alphabet))
        index = {q: i for i, q in enumerate(states)}

        def state(name):
            try:
                return index[str(name)]
            except KeyError:
                raise ValueError(f"unknown DFA state {name!r}") from None

        delta = []
        for q in states:
            row_map = transitions.get(q)
            if row_map is None:
                raise ValueError(f"no transitions listed for state {q!r}")
            extra = set(row_map) - set(alphabet.symbols)
            if extra:
                raise UnknownSymbol(sorted(extra)[0], alphabet.symbols)
            try:
                delta.append(tuple(state(row_map[a]) for a in alphabet))
            except KeyError as exc:
                raise ValueError(f"transition function is not total at state {q!r}: missing {exc}") from None
        return cls(states, alphabet, tuple(delta), state(initial), frozenset(state(q) for q in accepting))

    @classmethod
    def from_json(cls, data):
        for key in ("alphabet", "states", "initial", "accepting", "transitions"):
            if key not in data:
                raise ValueError(f"DFA JSON is missing {key!r}")
        return cls.from_mapping(data["states"], data["alphabet"], data["transitions"], data["initial"], data["accepting"])

    def to_json(self):
        return {
            "alphabet": list(self.alphabet.symbols),
            "states": list(self.states),
            "initial": self.states[self.initial],
            "accepting": [self.states[q] for q in sorted(self.accepting)],
            "transitions": {
                self.states[q]: {a: self.states[self.delta[q][j]] for j, a in enumerate(self.alphabet)}
                for q in range(len(self.states))
            },
        }

    def state_index(self, name):
        return self.states.index(str(name))

    def state_sequence(self, word) -> tuple[int, ...]:
        q = self.initial
        seq = [q]
        for a in self.alphabet.encode(word):
            q = self.delta[q][a]
            seq.append(q)
        return tuple(seq)

    def accepts(self, word) -> bool:
        return self.state_sequence(word)[-1] in self.accepting


def run_dfa(dfa: Dfa, word) -> tuple[str, bool]:
    q = dfa.state_sequence(word)[-1]
    return dfa.states[q], q in dfa.accepting


def dfa_difference(a: Dfa, b: Dfa):
    """Shortest word on which the two DFAs disagree, or None if equivalent."""
    if a.alphabet != b.alphabet:
        raise ValueError("DFAs are over different alphabets")
    start = (a.initial, b.initial)
    parent = {start: None}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        p, q = pair
        if (p in a.accepting) != (q in b.accepting):
            word = []
            while parent[pair] is not None:
                pair, sym = parent[pair]
                word.append(sym)
            return tuple(reversed(word))
        for sym in range(len(a.alphabet)):
            nxt = (a.delta[p][sym], b.delta[q][sym])
            if nxt not in parent:
                parent[nxt] = (pair, sym)
                queue.append(nxt)
    return None


def dyck_difference(dfa: Dfa, spec: DyckSpec, max_len: int):
    """Shortest word of length <= max_len where ``dfa`` and D_n disagree, or None."""
    if dfa.alphabet != spec.alphabet:
        raise ValueError("DFA alphabet is not the Dyck alphabet")
    dead = None
    start = (dfa.initial, ())
    parent = {start: None}
    frontier = [start]
    for length in range(max_len + 1):
        nxt_frontier = []
        for node in frontier:
            q, stack = node
            in_dyck = stack == ()
            if (q in dfa.accepting) != in_dyck:
                word = []
                while parent[node] is not None:
                    node, sym = parent[node]
                    word.append(sym)
                return tuple(reversed(word))
            if length == max_len:
                continue
            for sym in range(2 * spec.n):
                if stack is dead:
                    new_stack = dead
                elif spec.is_open(sym):
                    new_stack = stack + (spec.kind(sym),)
                elif stack and stack[-1] == spec.kind(sym):
                    new_stack = stack[:-1]
                else:
                    new_stack = dead
                child = (dfa.delta[q][sym], new_stack)
                if child not in parent:
                    parent[child] = (node, sym)
                    nxt_frontier.append(child)
        frontier = nxt_frontier
    return None


# word generators ----------------------------------------------------------------

def _random_dyck(rng, spec, length):
    word, stack = [], []
    for pos in range(length):
        remaining = length - pos
        if not stack or (len(stack) < remaining and rng.random() < 0.5):
            k = rng.randint(1, spec.n)
            stack.append(k)
            word.append(spec.open_symbol(k))
        else:
            word.append(spec.close_symbol(stack.pop()))
    return word


def _random_prefix(rng, spec, length):
    """Random proper prefix of ``length`` symbols (final depth >= 1)."""
    word, stack = [], []
    for pos in range(length):
        remaining = length - pos
        can_close = bool(stack) and len(stack) + remaining >= 3
        if can_close and rng.random() < 0.5:
            word.append(spec.close_symbol(stack.pop()))
        else:
            k = rng.randint(1, spec.n)
            stack.append(k)
            word.append(spec.open_symbol(k))
    return word


def _closing_suffix(word, spec):
    return [spec.close_symbol(k) for k in reversed(_stack_run(word, spec))]


def _noise(rng, spec, max_len):
    return [rng.randrange(2 * spec.n) for _ in range(rng.randint(1, max_len))]


def _corrupted(rng, spec, max_len):
    length = rng.randint(1, max_len)
    base = _random_dyck(rng, spec, length - length % 2) if length > 1 else []
    if not base:
        return [spec.close_symbol(rng.randint(1, spec.n))]
    pos = rng.randrange(len(base))
    choices = [s for s in range(2 * spec.n) if s != base[pos]]
    base[pos] = rng.choice(choices)
    return base


def _rebalanced(rng, spec, max_len):
    """u )i (i v: a wrong closer undone by its opener, then u closed; s_m returns to 0."""
    budget = max_len - 2
    if spec.n == 1:
        u = _random_dyck(rng, spec, rng.randrange(0, budget + 1, 2)) if budget >= 2 else []
    else:
        ulen = rng.randint(0, budget // 2) if budget >= 2 else 0
        u = _random_prefix(rng, spec, ulen) if ulen else []
    stack = _stack_run(u, spec)
    top = stack[-1] if stack else None
    i = rng.choice([k for k in range(1, spec.n + 1) if k != top])
    word = u + [spec.close_symbol(i), spec.open_symbol(i)] + _closing_suffix(u, spec)
    room = max_len - len(word)
    if room >= 2:
        tail = rng.randrange(0, room + 1, 2)
        word += _random_dyck(rng, spec, tail)
    return word


_NEITHER_STRATEGIES = (_noise, _corrupted, _rebalanced)


def gen_words(spec: DyckSpec, cls: MembershipClass, max_len: int, seed) -> Iterator[tuple[int, ...]]:
    """Endless reproducible stream of words of class ``cls`` with length <= max_len.

    Neither-class words rotate through random noise, a one-symbol corruption
    of a balanced word, and a wrong closer that is later rebalanced.
    """
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    if cls is not MembershipClass.IN_DYCK and max_len < 1:
        raise ValueError(f"no {cls.value} words of length <= {max_len}")
    rng = random.Random(f"{seed}/{cls.value}/{spec.n}/{max_len}")
    turn = 0
    while True:
        if cls is MembershipClass.IN_DYCK:
            word = _random_dyck(rng, spec, rng.randrange(0, max_len + 1, 2))
        elif cls is MembershipClass.IN_PREFIX:
            word = _random_prefix(rng, spec, rng.randint(1, max_len))
        else:
            strategy = _NEITHER_STRATEGIES[turn % 3] if max_len >= 2 else _noise
            turn += 1
            word = strategy(rng, spec, max_len)
            if classify(word, spec) is not cls:
                continue
        word = tuple(word)
        assert classify(word, spec) is cls and len(word) <= max_len
        yield word


def all_words(alphabet_size: int, max_len: int) -> Iterator[tuple[int, ...]]:
    """Every word of length <= max_len in shortlex order."""
    level = [()]
    for _ in range(max_len + 1):
        yield from level
        level = [w + (a,) for w in level for a in range(alphabet_size)]


def walk_words(start, step, alphabet_size: int, max_len: int):
    """Depth-first ``(word, state)`` pairs for every word of length <= max_len.

    ``step(state, symbol)`` is applied once per edge of the prefix tree, so
    each prefix is simulated only once.
    """
    stack = [((), start)]
    while stack:
        word, state = stack.pop()
        yield word, state
        if len(word) < max_len:
            for a in reversed(range(alphabet_size)):
                stack.append((word + (a,), step(state, a)))


def class_counts(words: Sequence, spec: DyckSpec) -> dict:
    counts = {c: 0 for c in MembershipClass}
    for w in words:
        counts[classify(w, spec)] += 1
    return counts
