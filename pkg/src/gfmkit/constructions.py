"""Subset and breakpoint constructions: SLDBA and slim automata.

Sets of input-automaton states are frozensets at the API surface.  A
breakpoint state is a pair ``(S, S2)`` where ``S2`` holds the states reached
through an accepting transition since the last reset.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .automata import AutomatonError, BuchiAutomaton, Letter, make_complete

MAX_JUMP_IMAGE = 16

StateSet = frozenset
BreakpointState = tuple  # (frozenset, frozenset)


class JumpBlowUp(AutomatonError):
    pass


@dataclass(frozen=True)
class BreakpointStep:
    target: Optional[BreakpointState]  # None when undefined
    accepting: bool = False

    @property
    def defined(self) -> bool:
        return self.target is not None


UNDEFINED = BreakpointStep(None, False)


def subset_image(aut: BuchiAutomaton, states: Iterable[int], letter: Letter) -> StateSet:
    return frozenset(d for q in states for d, _ in aut.successors(q, letter))


def accepting_image(aut: BuchiAutomaton, states: Iterable[int], letter: Letter) -> StateSet:
    return frozenset(d for q in states for d, acc in aut.successors(q, letter) if acc)


def raw_breakpoint(aut: BuchiAutomaton, state: BreakpointState, letter: Letter) -> BreakpointState:
    s, s2 = state
    return subset_image(aut, s, letter), subset_image(aut, s2, letter) | accepting_image(aut, s, letter)


def breakpoint_step(aut: BuchiAutomaton, state: BreakpointState, letter: Letter) -> BreakpointStep:
    r, r2 = raw_breakpoint(aut, state, letter)
    if not r:
        return UNDEFINED
    if r != r2:
        return BreakpointStep((r, r2), False)
    return BreakpointStep((r2, frozenset()), True)


def promote(aut: BuchiAutomaton, state: BreakpointState, letter: Letter) -> BreakpointStep:
    s, s2 = state
    image = subset_image(aut, s2, letter) | accepting_image(aut, s, letter)
    if not image:
        return UNDEFINED
    return BreakpointStep((image, frozenset()), True)


def jump_transitions(aut: BuchiAutomaton, states: Iterable[int], letter: Letter,
                     singleton_only: bool = False) -> set[BreakpointState]:
    image = sorted(subset_image(aut, states, letter))
    if singleton_only:
        return {(frozenset([q]), frozenset()) for q in image}
    if len(image) > MAX_JUMP_IMAGE:
        raise JumpBlowUp(f"jump from a subset with {len(image)} successors "
                         f"(limit {MAX_JUMP_IMAGE})")
    out = set()
    for k in range(1, len(image) + 1):
        for combo in itertools.combinations(image, k):
            out.add((frozenset(combo), frozenset()))
    return out


def format_set(s: Iterable[int]) -> str:
    return "{" + ",".join(str(q) for q in sorted(s)) + "}"


def state_label(state) -> str:
    """Canonical name: ``{0,1}`` for subset states, ``({0,1},{0})`` for breakpoint states."""
    if isinstance(state, frozenset):
        return format_set(state)
    s, s2 = state
    return f"({format_set(s)},{format_set(s2)})"


class _Builder:
    """Reachable exploration that numbers states in discovery order."""

    def __init__(self):
        self.index: dict = {}
        self.order: list = []
        self.queue: deque = deque()
        self.transitions: list = []

    def add(self, state) -> int:
        if state not in self.index:
            self.index[state] = len(self.order)
            self.order.append(state)
            self.queue.append(state)
        return self.index[state]

    def edge(self, src, letter, dst, acc):
        self.transitions.append((self.index[src], letter, self.add(dst), acc))

    def result(self, aut: BuchiAutomaton, initial) -> BuchiAutomaton:
        names = tuple(state_label(s) for s in self.order)
        return BuchiAutomaton.build(aut.aps, len(self.order), [self.index[initial]],
                                    self.transitions, names)


def build_sldba(aut: BuchiAutomaton, singleton_jumps: bool = False,
                complete: bool = False) -> BuchiAutomaton:
    """Subset part, jump transitions, and deterministic breakpoint part."""
    b = _Builder()
    init = frozenset(aut.initial)
    b.add(init)
    while b.queue:
        state = b.queue.popleft()
        for a in aut.letters:
            if isinstance(state, frozenset):
                img = subset_image(aut, state, a)
                if img:
                    b.edge(state, a, img, False)
                for target in sorted(jump_transitions(aut, state, a, singleton_jumps),
                                     key=lambda t: (len(t[0]), sorted(t[0]))):
                    b.edge(state, a, target, False)
            else:
                step = breakpoint_step(aut, state, a)
                if step.defined:
                    b.edge(state, a, step.target, step.accepting)
    out = b.result(aut, init)
    return make_complete(out) if complete else out


def build_slim(aut: BuchiAutomaton, complete: bool = False,
               promote_from_empty: bool = False) -> BuchiAutomaton:
    """Breakpoint transitions plus promotions; at most two successors per letter.

    Promotions are only offered from states whose second set is nonempty, so
    a jump needs at least one accepting transition of evidence.  With
    ``promote_from_empty=True`` they are offered wherever ``promote`` is
    defined.
    """
    b = _Builder()
    init = (frozenset(aut.initial), frozenset())
    b.add(init)
    while b.queue:
        state = b.queue.popleft()
        for a in aut.letters:
            step = breakpoint_step(aut, state, a)
            if step.defined:
                b.edge(state, a, step.target, step.accepting)
            if not state[1] and not promote_from_empty:
                continue
            jump = promote(aut, state, a)
            if jump.defined:
                b.edge(state, a, jump.target, True)
    out = b.result(aut, init)
    return make_complete(out) if complete else out
