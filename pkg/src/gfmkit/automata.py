"""Transition-based nondeterministic Buchi automata.

Letters are valuations of the automaton's atomic propositions, encoded as
integers: bit ``i`` of a letter is the truth value of ``aps[i]``.  The
alphabet is always the full set ``range(2 ** len(aps))``.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .graphs import backward_reach, bits, scc_labels

Letter = int
Transition = tuple  # (src, letter, dst, accepting)

MAX_APS = 20


class AutomatonError(ValueError):
    pass


def letter_from_bits(text: str) -> Letter:
    """``"10"`` means ``aps[0]`` true, ``aps[1]`` false."""
    if any(c not in "01" for c in text):
        raise ValueError(f"bad letter bits {text!r}")
    return sum(1 << i for i, c in enumerate(text) if c == "1")


def letter_to_bits(letter: Letter, width: int) -> str:
    return "".join("1" if letter >> i & 1 else "0" for i in range(width))


@dataclass(frozen=True)
class LassoWord:
    """The ultimately periodic word ``prefix . cycle^omega``."""

    prefix: tuple[Letter, ...]
    cycle: tuple[Letter, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "cycle", tuple(self.cycle))
        if not self.cycle:
            raise ValueError("lasso cycle must be nonempty")

    def unrolled(self, times: int = 1) -> LassoWord:
        return LassoWord(self.prefix + self.cycle * times, self.cycle)

    def letter_at(self, i: int) -> Letter:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.cycle[(i - len(self.prefix)) % len(self.cycle)]


@dataclass(frozen=True, eq=False)
class BuchiAutomaton:
    aps: tuple[str, ...]
    num_states: int
    initial: frozenset[int]
    transitions: tuple[Transition, ...]
    state_names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "aps", tuple(self.aps))
        object.__setattr__(self, "initial", frozenset(self.initial))
        trans = tuple(sorted((int(s), int(a), int(d), bool(acc)) for s, a, d, acc in self.transitions))
        object.__setattr__(self, "transitions", trans)
        if self.state_names is not None:
            object.__setattr__(self, "state_names", tuple(self.state_names))
            if len(self.state_names) != self.num_states:
                raise AutomatonError("state_names length differs from num_states")
        if len(self.aps) > MAX_APS:
            raise AutomatonError(f"too many atomic propositions ({len(self.aps)} > {MAX_APS})")
        if not self.initial:
            raise AutomatonError("initial state set is empty")
        n = self.num_states
        if any(not 0 <= q < n for q in self.initial):
            raise AutomatonError("initial state out of range")
        seen = set()
        for s, a, d, _ in trans:
            if not (0 <= s < n and 0 <= d < n):
                raise AutomatonError(f"transition ({s}, {a}, {d}) references an invalid state")
            if not 0 <= a < self.alphabet_size:
                raise AutomatonError(f"letter {a} outside alphabet of size {self.alphabet_size}")
            if (s, a, d) in seen:
                raise AutomatonError(f"duplicate transition ({s}, {a}, {d})")
            seen.add((s, a, d))

    @classmethod
    def build(cls, aps: Sequence[str], num_states: int, initial: Iterable[int],
              transitions: Iterable[Transition], state_names=None) -> BuchiAutomaton:
        """Like the constructor, but merges duplicate triples (accepting wins)."""
        merged: dict[tuple[int, int, int], bool] = {}
        for s, a, d, acc in transitions:
            merged[s, a, d] = merged.get((s, a, d), False) or bool(acc)
        return cls(tuple(aps), num_states, frozenset(initial),
                   tuple((s, a, d, acc) for (s, a, d), acc in merged.items()), state_names)

    @property
    def alphabet_size(self) -> int:
        return 1 << len(self.aps)

    @property
    def letters(self) -> range:
        return range(self.alphabet_size)

    @property
    def accepting(self) -> frozenset[tuple[int, int, int]]:
        return self._accepting

    @cached_property
    def _accepting(self) -> frozenset:
        return frozenset((s, a, d) for s, a, d, acc in self.transitions if acc)

    @cached_property
    def succ(self) -> dict[tuple[int, int], tuple[tuple[int, bool], ...]]:
        """``(state, letter) -> ((dst, accepting), ...)`` for present pairs."""
        out = defaultdict(list)
        for s, a, d, acc in self.transitions:
            out[s, a].append((d, acc))
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def out_edges(self) -> tuple[tuple[tuple[int, int, bool], ...], ...]:
        """Per state: ``((letter, dst, accepting), ...)``."""
        out = [[] for _ in range(self.num_states)]
        for s, a, d, acc in self.transitions:
            out[s].append((a, d, acc))
        return tuple(tuple(x) for x in out)

    def successors(self, state: int, letter: Letter) -> tuple[tuple[int, bool], ...]:
        return self.succ.get((state, letter), ())

    def name(self, q: int) -> str:
        return self.state_names[q] if self.state_names else str(q)

    def same_as(self, other: BuchiAutomaton) -> bool:
        """Structural equality under the identity state bijection."""
        return (self.aps == other.aps and self.num_states == other.num_states
                and self.initial == other.initial and self.transitions == other.transitions)

    def __eq__(self, other):
        return isinstance(other, BuchiAutomaton) and self.same_as(other)

    def __hash__(self):
        return hash((self.aps, self.num_states, self.initial, self.transitions))

    def __repr__(self):
        return (f"BuchiAutomaton(aps={self.aps}, states={self.num_states}, "
                f"initial={sorted(self.initial)}, transitions={len(self.transitions)})")


def is_deterministic(aut: BuchiAutomaton) -> bool:
    if len(aut.initial) != 1:
        return False
    return all(len(v) <= 1 for v in aut.succ.values())


def is_complete(aut: BuchiAutomaton) -> bool:
    return all((q, a) in aut.succ for q in range(aut.num_states) for a in aut.letters)


def reachable_closure(aut: BuchiAutomaton, start: Iterable[int]) -> set[int]:
    seen = set(start)
    stack = list(seen)
    while stack:
        q = stack.pop()
        for _, d, _ in aut.out_edges[q]:
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return seen


def limit_deterministic_partition(aut: BuchiAutomaton) -> tuple[set[int], set[int]]:
    """Smallest successor-closed set containing every accepting transition's
    endpoints (the deterministic part), and its complement."""
    seeds = {s for s, _, _ in aut.accepting} | {d for _, _, d in aut.accepting}
    final = reachable_closure(aut, seeds)
    return set(range(aut.num_states)) - final, final


def is_limit_deterministic(aut: BuchiAutomaton) -> bool:
    initial_part, final = limit_deterministic_partition(aut)
    if not aut.initial <= initial_part:
        # initial state inside the accepting part: only a fully deterministic
        # automaton qualifies
        return is_deterministic(aut)
    return all(len(aut.successors(q, a)) <= 1 for q in final for a in aut.letters)


def branching_degree(aut: BuchiAutomaton) -> int:
    return max((len(v) for v in aut.succ.values()), default=0)


def make_complete(aut: BuchiAutomaton) -> BuchiAutomaton:
    """Route every missing (state, letter) pair to a fresh rejecting sink."""
    if is_complete(aut):
        return aut
    sink = aut.num_states
    extra = [(q, a, sink, False) for q in range(aut.num_states) for a in aut.letters
             if (q, a) not in aut.succ]
    extra += [(sink, a, sink, False) for a in aut.letters]
    names = aut.state_names + ("sink",) if aut.state_names else None
    return BuchiAutomaton(aut.aps, aut.num_states + 1, aut.initial, aut.transitions + tuple(extra), names)


def trim(aut: BuchiAutomaton) -> BuchiAutomaton:
    """Drop states unreachable from the initial set, renumbering in BFS order."""
    order: list[int] = []
    index: dict[int, int] = {}
    for q in sorted(aut.initial):
        index[q] = len(order)
        order.append(q)
    i = 0
    while i < len(order):
        for _, d, _ in aut.out_edges[order[i]]:
            if d not in index:
                index[d] = len(order)
                order.append(d)
        i += 1
    trans = [(index[s], a, index[d], acc) for s, a, d, acc in aut.transitions if s in index]
    names = tuple(aut.state_names[q] for q in order) if aut.state_names else None
    return BuchiAutomaton(aut.aps, len(order), frozenset(index[q] for q in aut.initial), tuple(trans), names)


def rename_aps(aut: BuchiAutomaton, names: Sequence[str]) -> BuchiAutomaton:
    """Same automaton over renamed atomic propositions (positions kept)."""
    if len(names) != len(aut.aps):
        raise AutomatonError(f"expected {len(aut.aps)} names, got {len(names)}")
    return BuchiAutomaton(tuple(names), aut.num_states, aut.initial, aut.transitions, aut.state_names)


def random_nba(rng, num_states: int, num_aps: int = 2, density: float = 0.3,
               accepting: float = 0.3, initial: int = 1) -> BuchiAutomaton:
    """Random NBA; ``rng`` is a ``random.Random``.  Each (q, a, q') triple is a
    transition with probability ``density`` and accepting with ``accepting``."""
    trans = []
    for q in range(num_states):
        for a in range(1 << num_aps):
            for d in range(num_states):
                if rng.random() < density:
                    trans.append((q, a, d, rng.random() < accepting))
    init = rng.sample(range(num_states), min(initial, num_states))
    aps = tuple(f"p{i}" for i in range(num_aps))
    return BuchiAutomaton.build(aps, num_states, init, trans)


def random_dba(rng, num_states: int, num_aps: int = 2, accepting: float = 0.3) -> BuchiAutomaton:
    """Random complete deterministic automaton."""
    trans = [(q, a, rng.randrange(num_states), rng.random() < accepting)
             for q in range(num_states) for a in range(1 << num_aps)]
    aps = tuple(f"p{i}" for i in range(num_aps))
    return BuchiAutomaton.build(aps, num_states, [0], trans)


# -- lasso membership ---------------------------------------------------------

def _check_word(aut: BuchiAutomaton, word: LassoWord):
    for a in itertools.chain(word.prefix, word.cycle):
        if not 0 <= a < aut.alphabet_size:
            raise AutomatonError(f"letter {a} outside alphabet of size {aut.alphabet_size}")


def accepts_lasso(aut: BuchiAutomaton, word: LassoWord) -> bool:
    """Decide membership of ``prefix . cycle^omega``.

    Reads the prefix with a subset simulation, then searches the product of
    the automaton with the cycle positions for a reachable cycle through an
    accepting transition.
    """
    _check_word(aut, word)
    current = set(aut.initial)
    for a in word.prefix:
        current = {d for q in current for d, _ in aut.successors(q, a)}
        if not current:
            return False
    v = word.cycle
    k = len(v)

    def edges(node):
        q, i = node
        for d, acc in aut.successors(q, v[i]):
            yield (d, (i + 1) % k), acc

    start = [(q, 0) for q in current]
    reach = set(start)
    stack = list(start)
    while stack:
        node = stack.pop()
        for nxt, _ in edges(node):
            if nxt not in reach:
                reach.add(nxt)
                stack.append(nxt)
    # an accepting edge u -> w lies on a cycle iff w reaches u
    for node in reach:
        for nxt, acc in edges(node):
            if acc and _reaches(edges, nxt, node):
                return True
    return False


def _reaches(edges, src, dst) -> bool:
    seen = {src}
    stack = [src]
    while stack:
        node = stack.pop()
        if node == dst:
            return True
        for nxt, _ in edges(node):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


class _BitAutomaton:
    """Bitmask view used by the bounded language comparison."""

    def __init__(self, aut: BuchiAutomaton):
        self.n = aut.num_states
        self.init = sum(1 << q for q in aut.initial)
        self.all_succ = [[0] * aut.alphabet_size for _ in range(self.n)]
        self.acc_succ = [[0] * aut.alphabet_size for _ in range(self.n)]
        for s, a, d, acc in aut.transitions:
            self.all_succ[s][a] |= 1 << d
            if acc:
                self.acc_succ[s][a] |= 1 << d

    def post(self, mask: int, a: Letter) -> int:
        out = 0
        for q in bits(mask):
            out |= self.all_succ[q][a]
        return out

    def good_for_cycle(self, v: Sequence[Letter]) -> int:
        """States from which ``v^omega`` is accepted."""
        n = self.n
        src, dst, acc_edges = [], [], []
        for q in range(n):
            plain, acc = 1 << q, 0
            for a in v:
                new_plain = new_acc = 0
                for p in bits(plain):
                    new_plain |= self.all_succ[p][a]
                    new_acc |= self.acc_succ[p][a]
                for p in bits(acc):
                    new_acc |= self.all_succ[p][a]
                plain, acc = new_plain, new_acc
            for p in bits(plain):
                src.append(q)
                dst.append(p)
            acc_edges.extend((q, p) for p in bits(acc))
        comp = scc_labels(n, src, dst)
        on_cycle = {q for q, p in acc_edges if comp[q] == comp[p]}
        if not on_cycle:
            return 0
        good = backward_reach(n, src, dst, on_cycle)
        return sum(1 << int(q) for q in np.flatnonzero(good))


MAX_LASSOS = 10 ** 7


class BoundTooLarge(AutomatonError):
    pass


def iter_lassos(alphabet_size: int, bound: int) -> Iterator[LassoWord]:
    """All lassos with ``|cycle| <= bound`` and ``|prefix| <= bound``, shortest first."""
    letters = range(alphabet_size)
    for vlen in range(1, bound + 1):
        for v in itertools.product(letters, repeat=vlen):
            for ulen in range(bound + 1):
                for u in itertools.product(letters, repeat=ulen):
                    yield LassoWord(u, v)


def bounded_language_equal(a: BuchiAutomaton, b: BuchiAutomaton, max_bound: int = 4) -> LassoWord | None:
    """Compare languages on all lassos up to ``B = min(|Qa|*|Qb|, max_bound)``.

    Returns ``None`` when no lasso within the bound separates the automata,
    otherwise the first separating lasso (cycle length, then prefix length,
    then lexicographic order).  This is a bounded test, not a decision
    procedure.
    """
    if a.aps != b.aps:
        raise AutomatonError("automata have different atomic propositions")
    bound = min(a.num_states * b.num_states, max_bound)
    k = a.alphabet_size
    geometric = sum(k ** i for i in range(bound + 1))
    count = (geometric - 1) * geometric
    if count > MAX_LASSOS:
        raise BoundTooLarge(f"{count} lassos exceed the enumeration limit of {MAX_LASSOS}")
    ba, bb = _BitAutomaton(a), _BitAutomaton(b)
    letters = range(k)
    # prefixes in enumeration order, with the subset reached by each
    prefixes: list[tuple[tuple[int, ...], int, int]] = [((), ba.init, bb.init)]
    level = prefixes[:]
    for _ in range(bound):
        nxt = []
        for u, ma, mb in level:
            for x in letters:
                nxt.append((u + (x,), ba.post(ma, x), bb.post(mb, x)))
        prefixes.extend(nxt)
        level = nxt
    for vlen in range(1, bound + 1):
        for v in itertools.product(letters, repeat=vlen):
            ga, gb = ba.good_for_cycle(v), bb.good_for_cycle(v)
            for u, ma, mb in prefixes:
                if bool(ma & ga) != bool(mb & gb):
                    return LassoWord(u, v)
    return None
