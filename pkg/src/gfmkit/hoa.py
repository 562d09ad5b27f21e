"""Reading and writing the HOA v1 format (transition-based Buchi subset)."""
from __future__ import annotations

import re
from typing import Callable

from .automata import MAX_APS, BuchiAutomaton

_TOKEN = re.compile(r'''
    (?P<ws>\s+)
  | (?P<comment>/\*)
  | (?P<header>[A-Za-z_][A-Za-z0-9_-]*:)
  | (?P<marker>--BODY--|--END--|--ABORT--)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_@][A-Za-z0-9_-]*)
  | (?P<punct>[\[\]{}()!&|])
''', re.VERBOSE)


class HoaError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos, line = 0, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise HoaError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        if kind == "comment":
            depth, i = 1, m.end()
            while depth:
                if i >= len(text):
                    raise HoaError("unterminated comment", line)
                if text.startswith("/*", i):
                    depth, i = depth + 1, i + 2
                elif text.startswith("*/", i):
                    depth, i = depth - 1, i + 2
                else:
                    i += 1
            line += text.count("\n", pos, i)
            pos = i
            continue
        if kind != "ws":
            tokens.append((kind, m.group(), line))
        line += m.group().count("\n")
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def line(self) -> int | None:
        if self.i < len(self.tokens):
            return self.tokens[self.i][2]
        return self.tokens[-1][2] if self.tokens else None

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, self.line)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise HoaError("unexpected end of input", self.line)
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise HoaError(f"expected {want}, found {tok[1]!r}", tok[2])
        return tok

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok[0] == kind and (value is None or tok[1] == value)

    # -- label formulas ------------------------------------------------------

    def formula(self, num_aps: int) -> Callable[[int], bool]:
        left = self.conjunction(num_aps)
        while self.at("punct", "|"):
            self.next()
            right = self.conjunction(num_aps)
            left = (lambda f, g: lambda v: f(v) or g(v))(left, right)
        return left

    def conjunction(self, num_aps: int):
        left = self.unary(num_aps)
        while self.at("punct", "&"):
            self.next()
            right = self.unary(num_aps)
            left = (lambda f, g: lambda v: f(v) and g(v))(left, right)
        return left

    def unary(self, num_aps: int):
        kind, value, line = self.next()
        if kind == "punct" and value == "!":
            inner = self.unary(num_aps)
            return lambda v: not inner(v)
        if kind == "punct" and value == "(":
            inner = self.formula(num_aps)
            self.expect("punct", ")")
            return inner
        if kind == "ident" and value == "t":
            return lambda v: True
        if kind == "ident" and value == "f":
            return lambda v: False
        if kind == "int":
            ap = int(value)
            if ap >= num_aps:
                raise HoaError(f"undeclared atomic proposition {ap}", line)
            return lambda v: bool(v >> ap & 1)
        if kind == "ident" and value.startswith("@"):
            raise HoaError("aliases are not supported", line)
        raise HoaError(f"malformed label near {value!r}", line)


_KNOWN_OPTIONAL = {"name:", "tool:", "properties:", "acc-name:"}


def parse_hoa(text: str) -> BuchiAutomaton:
    """Parse a HOA v1 automaton with ``Acceptance: 1 Inf(0)``.

    Edge labels are expanded into explicit letters.  State-based acceptance
    marks are moved onto every outgoing edge of the marked state.
    """
    p = _Parser(text)
    p.expect("header", "HOA:")
    version = p.next()
    if version[1] != "v1":
        raise HoaError(f"unsupported HOA version {version[1]!r}", version[2])
    num_states = None
    start: list[int] = []
    aps: list[str] | None = None
    acceptance_seen = False
    while not p.at("marker", "--BODY--"):
        kind, value, line = p.next()
        if kind is None:
            raise HoaError("missing --BODY--", line)
        if kind != "header":
            raise HoaError(f"expected a header item, found {value!r}", line)
        if value == "States:":
            num_states = int(p.expect("int")[1])
        elif value == "Start:":
            start.append(int(p.expect("int")[1]))
            if p.at("punct", "&"):
                raise HoaError("conjunctive initial states are not supported", line)
        elif value == "AP:":
            count = int(p.expect("int")[1])
            if count > MAX_APS:
                raise HoaError(f"{count} atomic propositions exceed the limit of {MAX_APS}", line)
            aps = [p.expect("string")[1][1:-1] for _ in range(count)]
        elif value == "Acceptance:":
            acceptance_seen = True
            got = []
            while p.peek()[0] not in ("header", "marker", None):
                got.append(p.next()[1])
            if got != ["1", "Inf", "(", "0", ")"]:
                raise HoaError(f"unsupported acceptance {' '.join(got)!r}", line)
        elif value in _KNOWN_OPTIONAL or value[0].islower():
            while p.peek()[0] not in ("header", "marker", None):
                p.next()
        else:
            raise HoaError(f"unsupported header item {value}", line)
    if not acceptance_seen:
        raise HoaError("missing Acceptance header", p.line)
    if not start:
        raise HoaError("no Start state", p.line)
    aps = aps or []
    p.expect("marker", "--BODY--")

    transitions = []
    names: dict[int, str] = {}
    state_acc: set[int] = set()
    edges_by_state: dict[int, list] = {}
    current = None
    while not p.at("marker", "--END--"):
        kind, value, line = p.next()
        if kind is None:
            raise HoaError("missing --END--", line)
        if kind == "header" and value == "State:":
            if p.at("punct", "["):
                raise HoaError("state labels are not supported", line)
            current = int(p.expect("int")[1])
            if p.at("string"):
                names[current] = p.next()[1][1:-1]
            if p.at("punct", "{"):
                if _acc_sets(p):
                    state_acc.add(current)
            edges_by_state.setdefault(current, [])
        elif kind == "punct" and value == "[":
            if current is None:
                raise HoaError("edge outside a state", line)
            label = p.formula(len(aps))
            p.expect("punct", "]")
            dst_tok = p.expect("int")
            if p.at("punct", "&"):
                raise HoaError("universal branching is not supported", dst_tok[2])
            acc = _acc_sets(p) if p.at("punct", "{") else False
            edges_by_state[current].append((label, int(dst_tok[1]), acc, dst_tok[2]))
        elif kind == "int":
            raise HoaError("edges without labels are not supported", line)
        else:
            raise HoaError(f"unexpected {value!r} in body", line)
    p.expect("marker", "--END--")

    if num_states is None:
        mentioned = set(edges_by_state) | set(start)
        mentioned |= {d for es in edges_by_state.values() for _, d, _, _ in es}
        num_states = max(mentioned) + 1
    letters = range(1 << len(aps))
    for q, edges in edges_by_state.items():
        if not 0 <= q < num_states:
            raise HoaError(f"state {q} out of range", None)
        for label, dst, acc, line in edges:
            if not 0 <= dst < num_states:
                raise HoaError(f"edge target {dst} out of range", line)
            for a in letters:
                if label(a):
                    transitions.append((q, a, dst, acc or q in state_acc))
    for q in start:
        if not 0 <= q < num_states:
            raise HoaError(f"start state {q} out of range", None)
    state_names = None
    if names:
        state_names = tuple(names.get(q, str(q)) for q in range(num_states))
    return BuchiAutomaton.build(tuple(aps), num_states, start, transitions, state_names)


def _acc_sets(p: _Parser) -> bool:
    p.expect("punct", "{")
    marked = False
    while not p.at("punct", "}"):
        kind, value, line = p.next()
        if kind != "int" or value != "0":
            raise HoaError(f"acceptance set {value!r} not declared", line)
        marked = True
    p.expect("punct", "}")
    return marked


def _cube(letter: int, num_aps: int) -> str:
    if num_aps == 0:
        return "t"
    return "&".join(str(i) if letter >> i & 1 else f"!{i}" for i in range(num_aps))


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_hoa(aut: BuchiAutomaton, name: str | None = None) -> str:
    lines = ["HOA: v1"]
    if name:
        lines.append(f"name: {_quote(name)}")
    lines.append(f"States: {aut.num_states}")
    lines.extend(f"Start: {q}" for q in sorted(aut.initial))
    lines.append(" ".join([f"AP: {len(aut.aps)}"] + [_quote(ap) for ap in aut.aps]))
    lines += ["acc-name: Buchi", "Acceptance: 1 Inf(0)",
              "properties: trans-labels explicit-labels trans-acc", "--BODY--"]
    k = len(aut.aps)
    for q in range(aut.num_states):
        head = f"State: {q}"
        if aut.state_names:
            head += " " + _quote(aut.state_names[q])
        lines.append(head)
        for a, d, acc in aut.out_edges[q]:
            lines.append(f"[{_cube(a, k)}] {d}" + (" {0}" if acc else ""))
    lines.append("--END--")
    return "\n".join(lines) + "\n"


def read_hoa_file(path) -> BuchiAutomaton:
    with open(path) as fh:
        return parse_hoa(fh.read())
