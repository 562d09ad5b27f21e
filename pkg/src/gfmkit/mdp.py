"""Labelled MDPs, the explicit text format, and the product with an automaton.

An MDP is stored in compressed form.  Choices of state ``s`` are the
indices ``choice_start[s]:choice_start[s+1]``; entries of choice ``c`` are
``trans_start[c]:trans_start[c+1]`` in the ``dst``/``prob``/``letter``
arrays.  A letter is a bitmask over ``aps``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .automata import BuchiAutomaton

PROB_TOL = 1e-9
REJECT = -1  # marker for the rejecting sink in induced chains


class MDPError(ValueError):
    pass


def _segments(starts: np.ndarray) -> np.ndarray:
    """Owner index of every element given CSR start offsets."""
    counts = np.diff(starts)
    return np.repeat(np.arange(len(counts)), counts)


@dataclass(frozen=True, eq=False)
class LabeledMDP:
    aps: tuple
    state_names: tuple
    initial: int
    choice_start: np.ndarray
    choice_names: tuple
    trans_start: np.ndarray
    dst: np.ndarray
    prob: np.ndarray
    letter: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    @property
    def num_choices(self) -> int:
        return len(self.choice_names)

    def choices(self, s: int) -> range:
        return range(self.choice_start[s], self.choice_start[s + 1])

    def entries(self, c: int) -> range:
        return range(self.trans_start[c], self.trans_start[c + 1])

    def choice_source(self) -> np.ndarray:
        return _segments(self.choice_start)

    def entry_choice(self) -> np.ndarray:
        return _segments(self.trans_start)

    def source_letters(self) -> Optional[np.ndarray]:
        """Per-state letter if every transition reads its source's letter."""
        src = self.choice_source()[self.entry_choice()]
        per_state = np.full(self.num_states, -1, dtype=np.int64)
        per_state[src] = self.letter
        if np.all(per_state[src] == self.letter):
            return per_state
        return None

    def state_index(self, name: str) -> int:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise MDPError(f"unknown state {name!r}") from None


class MDPBuilder:
    """Collects states, choices and entries, then validates."""

    def __init__(self, aps: Sequence[str]):
        self.aps = tuple(aps)
        self.names: list[str] = []
        self.index: dict = {}
        self.choices: list[list] = []  # per state: list of (name, [(dst, p, letter)])

    def state(self, name) -> int:
        i = self.index.get(name)
        if i is None:
            i = self.index[name] = len(self.names)
            self.names.append(str(name))
            self.choices.append([])
        return i

    def add_choice(self, s: int, name: str, entries: Iterable[tuple]) -> None:
        self.choices[s].append((name, list(entries)))

    def build(self, initial: int) -> LabeledMDP:
        choice_start = [0]
        names, trans_start = [], [0]
        dst, prob, letter = [], [], []
        for s, choices in enumerate(self.choices):
            if not choices:
                raise MDPError(f"state {self.names[s]!r} has no outgoing transitions")
            for name, entries in choices:
                merged: dict = {}
                for d, p, a in entries:
                    if p < 0:
                        raise MDPError(f"negative probability in {self.names[s]!r}/{name}")
                    if p > 0:
                        merged[(d, a)] = merged.get((d, a), 0.0) + p
                total = sum(merged.values())
                if abs(total - 1.0) > PROB_TOL:
                    raise MDPError(f"probabilities of {self.names[s]!r}/{name} sum to {total}")
                for (d, a), p in sorted(merged.items()):
                    dst.append(d), prob.append(p), letter.append(a)
                names.append(name)
                trans_start.append(len(dst))
            choice_start.append(len(names))
        return LabeledMDP(self.aps, tuple(self.names), initial,
                          np.array(choice_start, dtype=np.int64), tuple(names),
                          np.array(trans_start, dtype=np.int64), np.array(dst, dtype=np.int64),
                          np.array(prob, dtype=np.float64), np.array(letter, dtype=np.int64))


# -- explicit text format --------------------------------------------------

_NUMBER = re.compile(r"^\d+(\.\d*)?([eE][-+]?\d+)?$|^\d+/\d+$")


def _parse_prob(tok: str, line: int) -> float:
    if not _NUMBER.match(tok):
        raise MDPError(f"line {line}: bad probability {tok!r}")
    if "/" in tok:
        num, den = tok.split("/")
        return int(num) / int(den)
    return float(tok)


def _parse_letter(tok: str, aps: tuple, line: int) -> int:
    if tok.startswith("{") and tok.endswith("}"):
        letter = 0
        for name in filter(None, (t.strip() for t in tok[1:-1].split(","))):
            if name not in aps:
                raise MDPError(f"line {line}: unknown atomic proposition {name!r}")
            letter |= 1 << aps.index(name)
        return letter
    if len(tok) != len(aps) or set(tok) - {"0", "1"}:
        raise MDPError(f"line {line}: letter {tok!r} does not match the {len(aps)} declared APs")
    return sum(1 << i for i, ch in enumerate(tok) if ch == "1")


def parse_explicit(text: str) -> LabeledMDP:
    """Read the ``mdp-explicit 1`` line format.

    Lines: ``ap <name>...``, ``init <state>``,
    ``trans <s> <action> <prob> <s'> <letter>``, where the letter is a 0/1
    string in AP order (or a set such as ``{a,b}``).  ``#`` starts a comment.
    """
    lines = [(i + 1, ln.split("#", 1)[0].split()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, toks) for i, toks in lines if toks]
    if not lines or lines[0][1] != ["mdp-explicit", "1"]:
        raise MDPError("missing header 'mdp-explicit 1'")
    aps: tuple = ()
    init = None
    trans = []
    for line, toks in lines[1:]:
        kw = toks[0]
        if kw == "ap":
            aps = aps + tuple(toks[1:])
        elif kw == "init":
            if len(toks) != 2 or init is not None:
                raise MDPError(f"line {line}: exactly one init state expected")
            init = toks[1]
        elif kw == "trans":
            if len(toks) != 6:
                raise MDPError(f"line {line}: trans needs 5 fields")
            trans.append((line, toks[1:]))
        else:
            raise MDPError(f"line {line}: unknown record {kw!r}")
    if init is None:
        raise MDPError("no init state")
    if len(set(aps)) != len(aps):
        raise MDPError("duplicate atomic proposition")
    b = MDPBuilder(aps)
    b.state(init)
    grouped: dict = {}
    targets = []
    for line, (s, act, p, d, bits) in trans:
        si = b.state(s)
        grouped.setdefault((si, act), []).append((d, _parse_prob(p, line), _parse_letter(bits, aps, line)))
        targets.append((line, d))
    for line, d in targets:
        if d not in b.index:
            raise MDPError(f"line {line}: dangling state {d!r} has no outgoing transitions")
    for (si, act), entries in grouped.items():
        b.add_choice(si, act, [(b.index[d], p, a) for d, p, a in entries])
    for s, name in enumerate(b.names):
        if not b.choices[s]:
            raise MDPError(f"dangling state {name!r} has no outgoing transitions")
    return b.build(b.index[init])


def write_explicit(m: LabeledMDP) -> str:
    out = ["mdp-explicit 1", "ap " + " ".join(m.aps), f"init {m.state_names[m.initial]}"]
    for s in range(m.num_states):
        for c in m.choices(s):
            for j in m.entries(c):
                bits = "".join("1" if m.letter[j] >> i & 1 else "0" for i in range(len(m.aps)))
                out.append(f"trans {m.state_names[s]} {m.choice_names[c]} {float(m.prob[j])!r} "
                           f"{m.state_names[m.dst[j]]} {bits}")
    return "\n".join(out) + "\n"


# -- product -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductMDP:
    """Reachable part of MDP x automaton; state 0 is ``(s0, q0)``.

    Product choice ``c`` pairs MDP choice ``choice_mdp[c]`` with automaton
    successor ``choice_q[c]``.  Its entries may carry less than full mass;
    the remainder is lost to rejection.
    """

    mdp: LabeledMDP
    automaton: BuchiAutomaton
    state_mdp: np.ndarray
    state_aut: np.ndarray
    choice_start: np.ndarray
    choice_mdp: np.ndarray
    choice_q: np.ndarray
    trans_start: np.ndarray
    dst: np.ndarray
    prob: np.ndarray
    mark: np.ndarray

    initial = 0

    @property
    def num_states(self) -> int:
        return len(self.state_mdp)

    @property
    def num_choices(self) -> int:
        return len(self.choice_mdp)

    def choices(self, s: int) -> range:
        return range(self.choice_start[s], self.choice_start[s + 1])

    def entries(self, c: int) -> range:
        return range(self.trans_start[c], self.trans_start[c + 1])

    def choice_source(self) -> np.ndarray:
        return _segments(self.choice_start)

    def entry_choice(self) -> np.ndarray:
        return _segments(self.trans_start)

    def choice_mass(self) -> np.ndarray:
        if len(self.prob) == 0:
            return np.zeros(self.num_choices)
        return np.add.reduceat(self.prob, self.trans_start[:-1]) if self.num_choices else np.zeros(0)

    def full_choices(self) -> np.ndarray:
        return self.choice_mass() >= 1.0 - PROB_TOL

    def state_label(self, v: int) -> str:
        s, q = int(self.state_mdp[v]), int(self.state_aut[v])
        return f"({self.mdp.state_names[s]},{self.automaton.name(q)})"

    def action_label(self, c: int) -> str:
        return f"({self.mdp.choice_names[self.choice_mdp[c]]},{self.automaton.name(int(self.choice_q[c]))})"


def letter_projection(mdp_aps: Sequence[str], aut_aps: Sequence[str]) -> list[int]:
    """Index in ``mdp_aps`` of every automaton AP."""
    missing = [ap for ap in aut_aps if ap not in mdp_aps]
    if missing:
        raise MDPError(f"automaton APs {missing} are not labels of the MDP")
    return [list(mdp_aps).index(ap) for ap in aut_aps]


def project_letters(letters: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    out = np.zeros_like(letters)
    for i, pos in enumerate(positions):
        out |= ((letters >> pos) & 1) << i
    return out


def product(m: LabeledMDP, a: BuchiAutomaton) -> ProductMDP:
    """Reachable product, numbered breadth-first from ``(s0, q0)``."""
    if len(a.initial) != 1:
        raise MDPError("the product needs an automaton with a single initial state")
    (q0,) = a.initial
    k = a.num_states
    proj = project_letters(m.letter, letter_projection(m.aps, a.aps))
    entry_choice = m.entry_choice()
    choice_src = m.choice_source()

    # Automaton moves grouped by (q, q'): letter sets and accepting-letter sets.
    moves: dict = {}
    for q, letter, q2, acc in a.transitions:
        allowed, accepting = moves.setdefault((q, q2), (np.zeros(a.alphabet_size, bool),
                                                        np.zeros(a.alphabet_size, bool)))
        allowed[letter] = True
        accepting[letter] |= acc

    # Candidate product choices over all (s, q) pairs, before pruning.
    c_state, c_mdp, c_q, e_start_parts, e_dst, e_prob, e_mark, e_owner = [], [], [], [], [], [], [], []
    offset = 0
    for (q, q2), (allowed, accepting) in sorted(moves.items()):
        hit = allowed[proj]
        if not hit.any():
            continue
        idx = np.nonzero(hit)[0]
        chosen = np.unique(entry_choice[idx])
        n_new = len(chosen)
        c_state.append(choice_src[chosen] * k + q)
        c_mdp.append(chosen)
        c_q.append(np.full(n_new, q2, dtype=np.int64))
        # map each hit entry to its new product-choice id
        local = np.searchsorted(chosen, entry_choice[idx]) + offset
        e_owner.append(local)
        e_dst.append(m.dst[idx] * k + q2)
        e_prob.append(m.prob[idx])
        e_mark.append(accepting[proj[idx]])
        offset += n_new
    if offset == 0:
        return _empty_product(m, a, q0)
    c_state = np.concatenate(c_state)
    c_mdp = np.concatenate(c_mdp)
    c_q = np.concatenate(c_q)
    e_owner = np.concatenate(e_owner)
    e_dst = np.concatenate(e_dst)
    e_prob = np.concatenate(e_prob)
    e_mark = np.concatenate(e_mark)

    # Reachability over the flat (s, q) space.
    n_flat = m.num_states * k
    start = m.initial * k + q0
    graph = csr_matrix((np.ones(len(e_dst), dtype=np.int8), (c_state[e_owner], e_dst)),
                       shape=(n_flat, n_flat))
    order = breadth_first_order(graph, start, directed=True, return_predecessors=False)
    new_id = np.full(n_flat, -1, dtype=np.int64)
    new_id[order] = np.arange(len(order))

    keep_c = new_id[c_state] >= 0
    c_ids = np.nonzero(keep_c)[0]
    c_order = c_ids[np.lexsort((c_q[c_ids], c_mdp[c_ids], new_id[c_state[c_ids]]))]
    c_new = np.full(len(c_state), -1, dtype=np.int64)
    c_new[c_order] = np.arange(len(c_order))
    keep_e = c_new[e_owner] >= 0
    e_ids = np.nonzero(keep_e)[0]
    e_order = e_ids[np.lexsort((new_id[e_dst[e_ids]], c_new[e_owner[e_ids]]))]

    n = len(order)
    owners_sorted = new_id[c_state[c_order]]
    choice_start = np.searchsorted(owners_sorted, np.arange(n + 1))
    e_owner_sorted = c_new[e_owner[e_order]]
    trans_start = np.searchsorted(e_owner_sorted, np.arange(len(c_order) + 1))
    return ProductMDP(
        mdp=m, automaton=a,
        state_mdp=order // k, state_aut=order % k,
        choice_start=choice_start.astype(np.int64),
        choice_mdp=c_mdp[c_order], choice_q=c_q[c_order],
        trans_start=trans_start.astype(np.int64),
        dst=new_id[e_dst[e_order]], prob=e_prob[e_order], mark=e_mark[e_order])


def _empty_product(m: LabeledMDP, a: BuchiAutomaton, q0: int) -> ProductMDP:
    z = np.zeros(0, dtype=np.int64)
    return ProductMDP(m, a, np.array([m.initial]), np.array([q0]), np.array([0, 0]), z, z,
                      np.array([0]), z, np.zeros(0), np.zeros(0, dtype=bool))


# -- strategies and induced chains ---------------------------------------------

@dataclass(frozen=True, eq=False)
class PositionalStrategy:
    """Global product-choice index per product state (-1 where undefined)."""

    choice: np.ndarray

    def validate(self, p: ProductMDP, states: Optional[Iterable[int]] = None) -> None:
        states = range(p.num_states) if states is None else states
        for v in states:
            c = int(self.choice[v])
            if p.choice_start[v] == p.choice_start[v + 1]:
                continue  # no move available: the run is rejected here
            if not p.choice_start[v] <= c < p.choice_start[v + 1]:
                raise MDPError(f"strategy has no valid choice for product state {p.state_label(v)}")


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Chain over ``n`` states plus ``reject`` (index ``n``), as CSR arrays.

    ``states`` maps chain indices back to product states.
    """

    states: np.ndarray
    row_start: np.ndarray
    dst: np.ndarray
    prob: np.ndarray
    mark: np.ndarray

    @property
    def reject(self) -> int:
        return len(self.states)

    @property
    def size(self) -> int:
        return len(self.states) + 1


def induced_chain(p: ProductMDP, sigma: PositionalStrategy, reachable_only: bool = True) -> MarkovChain:
    """Markov chain of ``sigma`` with missing mass routed to a rejecting sink.

    With ``reachable_only`` only states reachable from the initial state are
    explored, so a strategy need only be defined there.
    """
    if reachable_only:
        order, seen = [p.initial], {p.initial: 0}
        i = 0
        while i < len(order):
            v = order[i]
            i += 1
            if p.choice_start[v] == p.choice_start[v + 1]:
                continue
            c = int(sigma.choice[v])
            if not p.choice_start[v] <= c < p.choice_start[v + 1]:
                raise MDPError(f"strategy has no valid choice for product state {p.state_label(v)}")
            for j in p.entries(c):
                d = int(p.dst[j])
                if d not in seen:
                    seen[d] = len(order)
                    order.append(d)
        states = np.array(order, dtype=np.int64)
        local = seen.__getitem__
    else:
        sigma.validate(p)
        states = np.arange(p.num_states)
        local = int
    n = len(states)
    row_start, dst, prob, mark = [0], [], [], []
    for v in states:
        v = int(v)
        mass = 0.0
        if p.choice_start[v] < p.choice_start[v + 1]:
            c = int(sigma.choice[v])
            for j in p.entries(c):
                dst.append(local(int(p.dst[j])))
                prob.append(float(p.prob[j]))
                mark.append(bool(p.mark[j]))
                mass += float(p.prob[j])
        if mass < 1.0 - PROB_TOL:
            dst.append(n), prob.append(1.0 - mass), mark.append(False)
        row_start.append(len(dst))
    dst.append(n), prob.append(1.0), mark.append(False)
    row_start.append(len(dst))
    return MarkovChain(states, np.array(row_start), np.array(dst, dtype=np.int64),
                       np.array(prob), np.array(mark, dtype=bool))


def random_mdp(rng, num_states: int, aps: Sequence[str] = ("a", "b"), max_choices: int = 3,
               max_succ: int = 3, source_labelled: bool = False) -> LabeledMDP:
    """Random MDP for tests; probabilities are multiples of 1/8."""
    b = MDPBuilder(aps)
    for s in range(num_states):
        b.state(s)
    nletters = 1 << len(aps)
    state_letter = [rng.randrange(nletters) for _ in range(num_states)]
    for s in range(num_states):
        for c in range(rng.randint(1, max_choices)):
            succ = rng.sample(range(num_states), rng.randint(1, min(max_succ, num_states)))
            cuts = sorted(rng.sample(range(1, 8), len(succ) - 1)) if len(succ) > 1 else []
            parts = [(hi - lo) / 8 for lo, hi in zip([0] + cuts, cuts + [8])]
            entries = []
            for d, pr in zip(succ, parts):
                letter = state_letter[s] if source_labelled else rng.randrange(nletters)
                entries.append((d, pr, letter))
            b.add_choice(s, f"c{c}", entries)
    return b.build(0)
