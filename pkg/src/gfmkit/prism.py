"""A small subset of the PRISM modelling language, compiled to explicit MDPs.

Supported: ``mdp``; ``const int|double|bool NAME [= expr];``; one module
with bounded integer (and boolean) variables; guarded commands with
probabilistic updates; ``label "name" = expr;``.  Expressions cover
arithmetic, ``mod``/``min``/``max``/``floor``/``ceil``/``pow``, comparisons,
boolean connectives and ``c ? a : b``.

Expressions compile to closures that work elementwise on numpy arrays, so
the reachable state space is explored one breadth-first layer at a time.
The letter of a transition is the label valuation of its source state.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mdp import PROB_TOL, LabeledMDP

MAX_STATES = 1_000_000


class PrismError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d*\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)
  | (?P<string>"[^"]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|\.\.|<=|>=|!=|=>|<=>|[\[\]():;+\-*/=<>&|!?,'{}])
""", re.VERBOSE)

_KEYWORDS = {"mdp", "const", "int", "double", "bool", "module", "endmodule", "init",
             "label", "true", "false", "mod", "min", "max", "floor", "ceil", "pow"}
_UNSUPPORTED = {"dtmc", "ctmc", "pta", "global", "rewards", "endrewards", "formula",
                "system", "endsystem", "init", "endinit", "nondeterministic",
                "probabilistic", "stochastic", "clock", "invariant", "endinvariant"}


def _tokenize(text: str) -> list:
    tokens, pos, line = [], 0, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PrismError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append((kind, m.group(), line))
        line += m.group().count("\n")
        pos = m.end()
    tokens.append(("eof", "", line))
    return tokens


Expr = Callable[[list], object]


@dataclass
class _Command:
    action: str
    guard: Expr
    branches: list  # (prob expr, {var index: expr})
    line: int


@dataclass
class _Model:
    consts: dict = field(default_factory=dict)
    var_names: list = field(default_factory=list)
    lows: list = field(default_factory=list)
    highs: list = field(default_factory=list)
    inits: list = field(default_factory=list)
    commands: list = field(default_factory=list)
    labels: list = field(default_factory=list)  # (name, expr)


def _where(c, a, b):
    if np.ndim(c) == 0 and np.ndim(a) == 0 and np.ndim(b) == 0:
        return a if c else b
    return np.where(c, a, b)


_BINARY = {
    "+": np.add, "-": np.subtract, "*": np.multiply, "/": np.true_divide,
    "=": np.equal, "!=": np.not_equal, "<": np.less, "<=": np.less_equal,
    ">": np.greater, ">=": np.greater_equal,
    "&": np.logical_and, "|": np.logical_or,
    "=>": lambda a, b: np.logical_or(np.logical_not(a), b),
    "<=>": np.equal,
}
_FUNCS = {"mod": (2, np.mod), "min": (2, np.minimum), "max": (2, np.maximum),
          "floor": (1, np.floor), "ceil": (1, np.ceil), "pow": (2, np.power)}


class _Parser:
    def __init__(self, text: str, overrides: dict):
        self.toks = _tokenize(text)
        self.i = 0
        self.overrides = dict(overrides)
        self.model = _Model()

    # -- token helpers --
    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def at(self, value: str) -> bool:
        return self.peek()[1] == value and self.peek()[0] in ("op", "ident")

    def expect(self, value: str):
        tok = self.next()
        if tok[1] != value:
            raise PrismError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2])
        return tok

    def ident(self) -> str:
        kind, value, line = self.next()
        if kind != "ident" or value in _KEYWORDS:
            raise PrismError(f"expected a name, found {value!r}", line)
        return value

    # -- top level --
    def parse(self) -> _Model:
        kind, value, line = self.next()
        if value != "mdp":
            if value in _UNSUPPORTED:
                raise PrismError(f"unsupported model type {value!r}", line)
            raise PrismError("model must start with 'mdp'", line)
        modules = 0
        while self.peek()[0] != "eof":
            kind, value, line = self.peek()
            if value == "const":
                self.const()
            elif value == "module":
                if modules:
                    raise PrismError("only one module is supported", line)
                modules += 1
                self.module()
            elif value == "label":
                self.label()
            elif value in _UNSUPPORTED:
                raise PrismError(f"unsupported construct {value!r}", line)
            else:
                raise PrismError(f"unexpected {value!r}", line)
        if not modules:
            raise PrismError("no module found")
        unused = set(self.overrides) - set(self.model.consts)
        if unused:
            raise PrismError(f"override for undeclared constant(s) {sorted(unused)}")
        return self.model

    def const(self):
        _, _, line = self.expect("const")
        ctype = "int"
        if self.peek()[1] in ("int", "double", "bool"):
            ctype = self.next()[1]
        name = self.ident()
        expr = None
        if self.at("="):
            self.next()
            expr = self.expr()
        self.expect(";")
        if name in self.overrides:
            value = self.overrides[name]
        elif expr is None:
            raise PrismError(f"constant {name} has no value; pass it as an override", line)
        else:
            value = self.constant(expr, line)
        if ctype == "int":
            if float(value) != int(value):
                raise PrismError(f"constant {name} must be an integer", line)
            value = int(value)
        elif ctype == "double":
            value = float(value)
        else:
            value = bool(value)
        self.model.consts[name] = value

    def constant(self, expr: Expr, line: int):
        try:
            value = expr([])
        except IndexError:
            raise PrismError("constant expression refers to a variable", line) from None
        return value.item() if isinstance(value, np.generic) else value

    def module(self):
        self.expect("module")
        self.ident()
        while not self.at("endmodule"):
            kind, value, line = self.peek()
            if value == "[":
                self.command()
            elif kind == "ident" and self.peek(1)[1] == ":":
                self.variable()
            elif kind == "eof":
                raise PrismError("missing endmodule", line)
            else:
                raise PrismError(f"unsupported construct {value!r} in module", line)
        self.expect("endmodule")

    def variable(self):
        _, _, line = self.peek()
        name = self.ident()
        self.expect(":")
        if self.at("bool"):
            self.next()
            lo, hi = 0, 1
        else:
            self.expect("[")
            lo = self.constant(self.expr(), line)
            self.expect("..")
            hi = self.constant(self.expr(), line)
            self.expect("]")
        init = lo
        if self.at("init"):
            self.next()
            init = self.constant(self.expr(), line)
        self.expect(";")
        if int(lo) != lo or int(hi) != hi or lo > hi:
            raise PrismError(f"bad range for {name}", line)
        if not lo <= int(init) <= hi:
            raise PrismError(f"initial value of {name} outside its range", line)
        m = self.model
        m.var_names.append(name)
        m.lows.append(int(lo)), m.highs.append(int(hi)), m.inits.append(int(init))

    def command(self):
        _, _, line = self.expect("[")
        action = ""
        if not self.at("]"):
            action = self.ident()
        self.expect("]")
        guard = self.expr()
        self.expect("->")
        branches = []
        while True:
            prob = None
            start = self.i
            # A branch is ``prob : update`` or a bare update.
            if not (self.at("true") or self.at("(")):
                prob = self.expr()
                self.expect(":")
            else:
                try:
                    prob = self.expr()
                    if not self.at(":"):
                        raise PrismError("not a probability")
                    self.expect(":")
                except PrismError:
                    self.i = start
                    prob = None
            branches.append((prob if prob is not None else (lambda env: 1.0), self.update()))
            if self.at("+"):
                self.next()
                continue
            break
        self.expect(";")
        self.model.commands.append(_Command(action, guard, branches, line))

    def update(self) -> dict:
        if self.at("true"):
            self.next()
            return {}
        assigns = {}
        while True:
            _, _, line = self.expect("(")
            name = self.ident()
            if name not in self.model.var_names:
                raise PrismError(f"update of unknown variable {name!r}", line)
            self.expect("'")
            self.expect("=")
            assigns[self.model.var_names.index(name)] = self.expr()
            self.expect(")")
            if self.at("&"):
                self.next()
                continue
            return assigns

    def label(self):
        _, _, line = self.expect("label")
        kind, value, line = self.next()
        if kind != "string":
            raise PrismError("label name must be a string", line)
        self.expect("=")
        expr = self.expr()
        self.expect(";")
        self.model.labels.append((value[1:-1], expr))

    # -- expressions, lowest precedence first --
    def expr(self) -> Expr:
        cond = self.binary(0)
        if self.at("?"):
            self.next()
            a = self.expr()
            self.expect(":")
            b = self.expr()
            return lambda env: _where(cond(env), a(env), b(env))
        return cond

    _LEVELS = [("<=>",), ("=>",), ("|",), ("&",), ("=", "!="), ("<", "<=", ">", ">="),
               ("+", "-"), ("*", "/")]

    def binary(self, level: int) -> Expr:
        if level == len(self._LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        while self.peek()[0] == "op" and self.peek()[1] in self._LEVELS[level]:
            op = self.next()[1]
            right = self.binary(level + 1)
            left = (lambda f, g, fn: lambda env: fn(f(env), g(env)))(left, right, _BINARY[op])
        return left

    def unary(self) -> Expr:
        kind, value, line = self.peek()
        if value == "!" and kind == "op":
            self.next()
            inner = self.unary()
            return lambda env: np.logical_not(inner(env))
        if value == "-" and kind == "op":
            self.next()
            inner = self.unary()
            return lambda env: np.negative(inner(env))
        return self.atom()

    def atom(self) -> Expr:
        kind, value, line = self.next()
        if kind == "num":
            num = float(value) if any(ch in value for ch in ".eE") else int(value)
            return lambda env: num
        if value == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if value in ("true", "false"):
            truth = value == "true"
            return lambda env: truth
        if value in _FUNCS:
            arity, fn = _FUNCS[value]
            self.expect("(")
            args = [self.expr()]
            while self.at(","):
                self.next()
                args.append(self.expr())
            self.expect(")")
            if len(args) != arity:
                raise PrismError(f"{value} takes {arity} argument(s)", line)
            if arity == 1:
                (f,) = args
                return lambda env: fn(f(env))
            f, g = args
            return lambda env: fn(f(env), g(env))
        if kind == "ident":
            if value in self.model.consts:
                const = self.model.consts[value]
                return lambda env: const
            if value in self.model.var_names:
                idx = self.model.var_names.index(value)
                return lambda env: env[idx]
            if value in self.overrides:
                const = self.overrides[value]
                return lambda env: const
            raise PrismError(f"unknown identifier {value!r}", line)
        raise PrismError(f"unexpected {value!r} in expression", line)


def _broadcast(x, n: int, dtype) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim == 0:
        return np.full(n, arr.item(), dtype=dtype)
    return arr.astype(dtype, copy=False)


class _Space:
    """Mixed-radix encoding of variable valuations."""

    def __init__(self, m: _Model):
        self.lows = np.array(m.lows, dtype=np.int64)
        sizes = np.array(m.highs, dtype=np.int64) - self.lows + 1
        self.sizes = sizes
        self.strides = np.ones(len(sizes), dtype=np.int64)
        for i in range(len(sizes) - 2, -1, -1):
            self.strides[i] = self.strides[i + 1] * sizes[i + 1]

    def decode(self, codes: np.ndarray) -> list:
        return [(codes // st) % sz + lo for st, sz, lo in zip(self.strides, self.sizes, self.lows)]

    def encode(self, vals: list) -> np.ndarray:
        code = np.zeros(len(vals[0]) if vals else 0, dtype=np.int64)
        for v, st, lo in zip(vals, self.strides, self.lows):
            code += (v - lo) * st
        return code


def _successors(model: _Model, space: _Space, codes: np.ndarray):
    """Vectorised command evaluation.

    Returns per-(state, command, branch) arrays: source position, command
    index, branch index, probability, successor code.
    """
    n = len(codes)
    vals = space.decode(codes)
    out = []
    for k, cmd in enumerate(model.commands):
        enabled = _broadcast(cmd.guard(vals), n, bool)
        if not enabled.any():
            continue
        pos = np.nonzero(enabled)[0]
        sub = [v[pos] for v in vals]
        total = np.zeros(len(pos))
        for b, (prob, assigns) in enumerate(cmd.branches):
            p = _broadcast(prob(sub), len(pos), float)
            if np.any(p < 0):
                raise PrismError("negative probability", cmd.line)
            total += p
            new = list(sub)
            for var, e in assigns.items():
                value = np.asarray(e(sub))
                if value.dtype.kind == "f" and np.any(value != np.round(value)):
                    raise PrismError(f"non-integer value for {model.var_names[var]}", cmd.line)
                value = _broadcast(value, len(pos), np.int64)
                lo, hi = model.lows[var], model.highs[var]
                if np.any((value < lo) | (value > hi)):
                    raise PrismError(f"update leaves the range of {model.var_names[var]}", cmd.line)
                new[var] = value
            keep = p > 0
            out.append((pos[keep], np.full(int(keep.sum()), k), np.full(int(keep.sum()), b),
                        p[keep], space.encode([v[keep] for v in new])))
        if np.any(np.abs(total - 1.0) > PROB_TOL):
            raise PrismError("command probabilities do not sum to 1", cmd.line)
    return out


def parse_prism_subset(text: str, consts: Optional[dict] = None,
                       max_states: int = MAX_STATES) -> LabeledMDP:
    model = _Parser(text, consts or {}).parse()
    if not model.var_names:
        raise PrismError("the module declares no variables")
    if not model.commands:
        raise PrismError("the module has no commands")
    space = _Space(model)
    init = space.encode([np.array([v]) for v in model.inits])

    # Breadth-first exploration, one layer at a time.
    order = [init]
    seen = init.copy()
    frontier = init
    total = 1
    while len(frontier):
        parts = _successors(model, space, frontier)
        if not parts:
            break
        succ = np.unique(np.concatenate([part[4] for part in parts]))
        fresh = succ[~np.isin(succ, seen, assume_unique=True)]
        if len(fresh) == 0:
            break
        total += len(fresh)
        if total > max_states:
            raise PrismError(f"state space exceeds {max_states} states")
        seen = np.union1d(seen, fresh)
        order.append(fresh)
        frontier = fresh
    codes = np.concatenate(order)
    n = len(codes)
    sorter = np.argsort(codes)
    sorted_codes = codes[sorter]

    def state_id(c: np.ndarray) -> np.ndarray:
        return sorter[np.searchsorted(sorted_codes, c)]

    # Transitions, re-evaluated on the full state list in BFS order.
    parts = _successors(model, space, codes)
    src = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    cmd = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    br = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, np.int64)
    prob = np.concatenate([p[3] for p in parts]) if parts else np.zeros(0)
    dst = state_id(np.concatenate([p[4] for p in parts])) if parts else np.zeros(0, np.int64)

    # Deadlocked states get a self-loop, as PRISM does by default.
    has_move = np.zeros(n, bool)
    has_move[src] = True
    dead = np.nonzero(~has_move)[0]
    deadlock_cmd = len(model.commands)
    src = np.concatenate([src, dead])
    cmd = np.concatenate([cmd, np.full(len(dead), deadlock_cmd)])
    br = np.concatenate([br, np.zeros(len(dead), np.int64)])
    prob = np.concatenate([prob, np.ones(len(dead))])
    dst = np.concatenate([dst, dead])

    entry_order = np.lexsort((br, cmd, src))
    src, cmd, prob, dst = src[entry_order], cmd[entry_order], prob[entry_order], dst[entry_order]
    new_choice = np.ones(len(src), bool)
    new_choice[1:] = (src[1:] != src[:-1]) | (cmd[1:] != cmd[:-1])
    choice_first = np.nonzero(new_choice)[0]
    trans_start = np.append(choice_first, len(src))
    choice_src = src[choice_first]
    choice_start = np.searchsorted(choice_src, np.arange(n + 1))
    action_names = [c.action or f"_{k}" for k, c in enumerate(model.commands)] + ["deadlock"]
    choice_names = tuple(action_names[k] for k in cmd[choice_first])

    vals = space.decode(codes)
    state_letter = np.zeros(n, dtype=np.int64)
    for i, (_, expr) in enumerate(model.labels):
        state_letter |= _broadcast(expr(vals), n, bool).astype(np.int64) << i
    names = tuple(",".join(str(int(v[s])) for v in vals) for s in range(n))
    return LabeledMDP(
        aps=tuple(name for name, _ in model.labels), state_names=names, initial=0,
        choice_start=choice_start.astype(np.int64), choice_names=choice_names,
        trans_start=trans_start.astype(np.int64), dst=dst.astype(np.int64), prob=prob,
        letter=state_letter[src])


def read_prism_file(path, consts: Optional[dict] = None) -> LabeledMDP:
    with open(path) as fh:
        return parse_prism_subset(fh.read(), consts)
