"""Command-line interface: compile, run, trace, verify, extract.

Exit codes: 0 success, 1 verification mismatch, 2 usage or parse error,
3 numeric failure (k too small, degenerate gate, tracking bound violated).
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .automata import (
    Dfa,
    DyckSpec,
    MembershipClass,
    classify,
    dfa_difference,
    dyck_difference,
    gen_words,
    run_dfa,
)
from .errors import DycknetError, NumericError
from .gru import Gru, gru_from_json, gru_run, gru_to_json, required_precision
from .gru_compile import (
    DFA_GRU_PRECISION,
    build_dyck_gru,
    compile_cfl_gru,
    compile_dfa_to_gru,
    rebuild_gru,
)
from .numerics import BigFloat, FixedPointFormat, rational
from .rnn import SimpleRnn, extract_dfa, rnn_from_json, rnn_run, rnn_to_json
from .rnn_compile import CflSpec, build_dyck_rnn, compile_cfl_rnn, compile_dfa_to_rnn

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

KINDS = ("dfa-rnn", "dyck-rnn", "cfl-rnn", "dfa-gru", "dyck-gru", "cfl-gru")
DEFAULT_K = 5
DEFAULT_MAX_LEN = 64


class UsageError(DycknetError):
    pass


# file helpers ------------------------------------------------------------------------

def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def dump_json(data) -> str:
    return json.dumps(data, indent=2) + "\n"


def _write_output(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


@dataclass
class LoadedModel:
    kind: str  # "rnn" or "gru"
    model: SimpleRnn | Gru
    accept: object

    @property
    def alphabet(self):
        return self.model.alphabet


def _default_gru_precision(meta, stored, max_len):
    if meta and "n" in meta and "k" in meta:
        return max(stored, required_precision(int(meta["n"]), int(meta["k"]), max_len))
    return stored


def model_from_json(data, precision=None, max_len=0) -> LoadedModel:
    """Build a network from a weights document.

    GRUs whose document records how they were built are rebuilt when a
    different precision is asked for; otherwise the stored weights are
    re-read at the requested precision.
    """
    kind = data.get("model") if isinstance(data, dict) else None
    if kind == "simple_rnn":
        rnn, accept = rnn_from_json(data)
        return LoadedModel("rnn", rnn, accept)
    if kind == "gru":
        stored = int(data["precision_bits"])
        meta = data.get("meta")
        p = precision if precision is not None else _default_gru_precision(meta, stored, max_len)
        if p != stored and meta:
            gru, accept = rebuild_gru(meta, p)
            if accept is None and "acceptance" in data:
                accept = gru_from_json(data, p)[1]
        else:
            gru, accept = gru_from_json(data, p)
        return LoadedModel("gru", gru, accept)
    raise UsageError(f"unknown model type {kind!r}")


def load_model(path, precision=None, max_len=0) -> LoadedModel:
    return model_from_json(_read_json(path), precision, max_len)


def _require_accept(loaded):
    if loaded.accept is None:
        raise UsageError("weights file has no acceptance set")
    return loaded.accept


# formatting --------------------------------------------------------------------------------

def _is_terminating(q):
    d = int(q.denominator)
    for f in (2, 5):
        while d % f == 0:
            d //= f
    return d == 1


def format_exact(q) -> str:
    """Exact rational as a finite decimal when possible, else ``p/q``."""
    q = rational(q)
    if q.denominator == 1:
        return str(q.numerator)
    if not _is_terminating(q):
        return str(q)
    digits = 0
    while (q * 10**digits).denominator != 1:
        digits += 1
    scaled = int(q * 10**digits)
    sign = "-" if scaled < 0 else ""
    whole, frac = divmod(abs(scaled), 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}"


def format_value(x) -> str:
    if isinstance(x, BigFloat):
        return f"{x:.2e}"
    return format_exact(x)


def format_output(x) -> str:
    if isinstance(x, BigFloat):
        return f"{x:.3g}"
    return format_exact(x)


def _verdict(o, accept):
    return "ACCEPT" if o in accept else "REJECT"


def format_trace(loaded: LoadedModel, word, gates=False) -> str:
    model = loaded.model
    word = model.alphabet.encode(word)
    lines = []
    if loaded.kind == "rnn":
        o, trace = rnn_run(model, word)
    else:
        o, trace = gru_run(model, word)
    for step in trace:
        vec = " ".join(format_value(x) for x in step.h)
        suffix = "" if step.symbol is None else f"  <- {model.alphabet.symbols[step.symbol]}"
        lines.append(f"h_{step.t} = [{vec}]{suffix}")
        if gates and loaded.kind == "gru" and step.z is not None:
            lines.append(f"z_{step.t} = [{' '.join(format_value(x) for x in step.z)}]")
            lines.append(f"r_{step.t} = [{' '.join(format_value(x) for x in step.r)}]")
    accept = loaded.accept
    tail = f" {_verdict(o, accept)}" if accept is not None else ""
    lines.append(f"o_{len(word)} = {format_output(o)}{tail}")
    return "\n".join(lines) + "\n"


# compile ---------------------------------------------------------------------------------------

def compile_model(kind, spec_data=None, n=None, k=DEFAULT_K, precision=None, max_len=DEFAULT_MAX_LEN) -> dict:
    """Weights document for one of the six constructions."""
    if kind in ("dfa-rnn", "dfa-gru", "cfl-rnn", "cfl-gru") and spec_data is None:
        raise UsageError(f"{kind} needs a spec file")
    if kind in ("dyck-rnn", "dyck-gru") and n is None:
        raise UsageError(f"{kind} needs --n")
    if kind == "dfa-rnn":
        return rnn_to_json(*compile_dfa_to_rnn(Dfa.from_json(spec_data)))
    if kind == "dyck-rnn":
        return rnn_to_json(*build_dyck_rnn(DyckSpec(n)))
    if kind == "cfl-rnn":
        return rnn_to_json(*compile_cfl_rnn(CflSpec.from_json(spec_data)))
    if kind == "dfa-gru":
        return gru_to_json(*compile_dfa_to_gru(Dfa.from_json(spec_data), precision or DFA_GRU_PRECISION))
    if kind == "dyck-gru":
        return gru_to_json(*build_dyck_gru(DyckSpec(n), k, precision, max_len))
    if kind == "cfl-gru":
        return gru_to_json(*compile_cfl_gru(CflSpec.from_json(spec_data), k, precision, max_len))
    raise UsageError(f"unknown kind {kind!r}")


def cmd_compile(args):
    spec_data = _read_json(args.spec) if args.spec else None
    doc = compile_model(args.kind, spec_data, args.n, args.k, args.precision, args.max_len)
    _write_output(dump_json(doc), args.output)
    return EXIT_OK


# run / trace ---------------------------------------------------------------------------------------

def _word_arg(tokens):
    return " ".join(tokens).split()


def cmd_run(args):
    word = _word_arg(args.word)
    loaded = load_model(args.weights, args.precision, len(word))
    accept = _require_accept(loaded)
    if loaded.kind == "rnn":
        o, _ = rnn_run(loaded.model, word)
    else:
        o, _ = gru_run(loaded.model, word)
    print(f"o = {format_output(o)} {_verdict(o, accept)}")
    return EXIT_OK


def cmd_trace(args):
    word = _word_arg(args.word)
    loaded = load_model(args.weights, args.precision, len(word))
    sys.stdout.write(format_trace(loaded, word, gates=args.gates))
    return EXIT_OK


# verify ---------------------------------------------------------------------------------------------

@dataclass
class Mismatch:
    word: str
    expected: bool
    verdict: bool
    output: str


@dataclass
class VerifyReport:
    trials: int
    seed: int
    mismatches: list = field(default_factory=list)
    per_class: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def ok(self):
        return not self.mismatches

    def to_json(self):
        data = asdict(self)
        data["ok"] = self.ok
        return data

    def to_text(self):
        lines = [f"trials: {self.trials}  seed: {self.seed}  elapsed: {self.elapsed:.2f}s"]
        for cls, count in sorted(self.per_class.items()):
            lines.append(f"  {cls}: {count}")
        lines.append(f"mismatches: {len(self.mismatches)}")
        for m in self.mismatches[:20]:
            exp = "accept" if m.expected else "reject"
            got = "accept" if m.verdict else "reject"
            lines.append(f"  [{m.word}] expected {exp}, network says {got} (o = {m.output})")
        lines.append("OK" if self.ok else "FAIL")
        return "\n".join(lines) + "\n"


class Oracle:
    """Reference membership for one of the three spec kinds."""

    def __init__(self, dyck: DyckSpec | None = None, dfa: Dfa | None = None):
        self.dyck = dyck
        self.dfa = dfa
        self.alphabet = dyck.alphabet if dyck is not None else dfa.alphabet

    def label(self, word):
        if self.dyck is not None:
            return classify(word, self.dyck).value
        return "accepted" if run_dfa(self.dfa, word)[1] else "rejected"

    def accepts(self, word):
        ok = True
        if self.dyck is not None:
            ok = classify(word, self.dyck) is MembershipClass.IN_DYCK
        if ok and self.dfa is not None:
            ok = run_dfa(self.dfa, word)[1]
        return ok


def verification_words(oracle: Oracle, trials, max_len, seed):
    """``trials`` words; Dyck-based specs draw round-robin from the three membership classes."""
    if oracle.dyck is not None:
        streams = [gen_words(oracle.dyck, cls, max_len, seed) for cls in MembershipClass]
        return [next(streams[i % 3]) for i in range(trials)]
    rng = random.Random(f"verify/{seed}/{max_len}")
    k = len(oracle.alphabet)
    return [tuple(rng.randrange(k) for _ in range(rng.randint(0, max_len))) for _ in range(trials)]


def _evaluate(loaded, words):
    out = []
    accept = loaded.accept
    for w in words:
        if loaded.kind == "rnn":
            o, _ = rnn_run(loaded.model, w)
        else:
            o, _ = gru_run(loaded.model, w)
        out.append((o in accept, format_output(o)))
    return out


_WORKER = {}


def _worker_init(data, precision, max_len):
    _WORKER["model"] = model_from_json(data, precision, max_len)


def _worker_eval(words):
    return _evaluate(_WORKER["model"], words)


def run_verification(data, oracle: Oracle, trials, max_len, seed, precision=None, jobs=1) -> VerifyReport:
    start = time.perf_counter()
    loaded = model_from_json(data, precision, max_len)
    _require_accept(loaded)
    if loaded.alphabet != oracle.alphabet:
        raise UsageError("weights and spec use different alphabets")
    words = verification_words(oracle, trials, max_len, seed)
    if jobs > 1 and len(words) > jobs:
        chunks = [words[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(jobs, initializer=_worker_init, initargs=(data, precision, max_len)) as pool:
            parts = list(pool.map(_worker_eval, chunks))
        results = {}
        for chunk, part in zip(chunks, parts):
            results.update(zip(chunk, part))
        verdicts = [results[w] for w in words]
    else:
        verdicts = _evaluate(loaded, words)
    report = VerifyReport(trials=len(words), seed=seed)
    for w, (verdict, o) in zip(words, verdicts):
        label = oracle.label(w)
        report.per_class[label] = report.per_class.get(label, 0) + 1
        expected = oracle.accepts(w)
        if verdict != expected:
            report.mismatches.append(Mismatch(oracle.alphabet.format(w), expected, verdict, o))
    report.mismatches.sort(key=lambda m: (len(m.word), m.word))
    report.elapsed = time.perf_counter() - start
    return report


def _oracle_from_args(args):
    if args.dyck is not None:
        return Oracle(dyck=DyckSpec(args.dyck))
    if args.dfa is not None:
        return Oracle(dfa=Dfa.from_json(_read_json(args.dfa)))
    cfl = CflSpec.from_json(_read_json(args.cfl))
    return Oracle(dyck=cfl.dyck, dfa=cfl.regular)


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SEED must be an integer, got {env!r}") from None


def cmd_verify(args):
    oracle = _oracle_from_args(args)
    data = _read_json(args.weights)
    report = run_verification(data, oracle, args.trials, args.max_len, _seed(args), args.precision, args.jobs)
    if args.json:
        sys.stdout.write(dump_json(report.to_json()))
    else:
        sys.stdout.write(report.to_text())
    return EXIT_OK if report.ok else EXIT_MISMATCH


# extract -------------------------------------------------------------------------------------------------

def cmd_extract(args):
    loaded = load_model(args.weights)
    if loaded.kind != "rnn":
        raise UsageError("extraction is defined for simple RNN weights only")
    accept = _require_accept(loaded)
    fmt = FixedPointFormat(args.int_bits, args.frac_bits)
    dfa = extract_dfa(loaded.model, fmt, accept, args.max_states)
    _write_output(dump_json(dfa.to_json()), args.output)
    note = f"extracted {len(dfa.states)} states"
    if args.dyck is not None or args.dfa is not None:
        if args.dyck is not None:
            witness = dyck_difference(dfa, DyckSpec(args.dyck), args.compare_len)
        else:
            witness = dfa_difference(dfa, Dfa.from_json(_read_json(args.dfa)))
            if witness is not None and len(witness) > args.compare_len:
                witness = None
        if witness is None:
            note += f"; agrees with the reference on all words of length <= {args.compare_len}"
        else:
            note += f"; first divergence: [{dfa.alphabet.format(witness)}]"
    print(note, file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return EXIT_OK


# parser -------------------------------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="dycknet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="build network weights from an automaton spec")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("spec", nargs="?", help="DFA or CFL spec JSON (dfa-*, cfl-* kinds)")
    p.add_argument("--n", type=int, help="number of bracket types (dyck-* kinds)")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="GRU scale exponent (default 5)")
    p.add_argument("--precision", type=int, help="GRU working precision in bits")
    p.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN, help="longest word the default GRU precision covers")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_compile)

    for name, func, text in (("run", cmd_run, "print the final output and verdict"),
                             ("trace", cmd_trace, "print the hidden state after every symbol")):
        p = sub.add_parser(name, help=text)
        p.add_argument("weights")
        p.add_argument("word", nargs="*", help='tokens, e.g. "(1 (2 )2 )1"; empty for the empty word')
        p.add_argument("--precision", type=int, help="GRU working precision in bits")
        if name == "trace":
            p.add_argument("--gates", action="store_true", help="also print GRU gate vectors")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="compare a network against a language oracle on generated words")
    p.add_argument("weights")
    spec = p.add_mutually_exclusive_group(required=True)
    spec.add_argument("--dyck", type=int, metavar="N")
    spec.add_argument("--dfa", metavar="FILE")
    spec.add_argument("--cfl", metavar="FILE")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-len", type=int, default=30)
    p.add_argument("--seed", type=int, help="defaults to $SEED, then 0")
    p.add_argument("--precision", type=int, help="GRU working precision (default: enough for --max-len)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("extract", help="extract a DFA from a simple RNN with fixed-point hidden states")
    p.add_argument("weights")
    p.add_argument("--int-bits", type=int, default=16, help="integer bits including the sign bit")
    p.add_argument("--frac-bits", type=int, default=8)
    p.add_argument("--max-states", type=int, default=100_000)
    p.add_argument("--dyck", type=int, metavar="N", help="report the first word where the DFA and D_N differ")
    p.add_argument("--dfa", metavar="FILE", help="report the first word where the two DFAs differ")
    p.add_argument("--compare-len", type=int, default=20)
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DycknetError, ValueError, KeyError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
