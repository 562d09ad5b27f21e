"""Maximum parity games with colors on edges.

Player 0 (even) is the duplicator in the simulation games, player 1 (odd)
the spoiler.  A play is won by player 0 when the largest color seen
infinitely often is even.  A player who is stuck in a state without
outgoing edges loses.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .graphs import scc_labels

EVEN, ODD = 0, 1
MAX_COLOR = 2
BRUTE_FORCE_LIMIT = 9


class GameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ParityGame:
    """``owner[v]`` is 0 or 1; ``edges`` holds ``(src, dst, color)`` triples."""

    owner: tuple
    edges: tuple
    names: Optional[tuple] = None

    def __post_init__(self):
        n = len(self.owner)
        if any(o not in (EVEN, ODD) for o in self.owner):
            raise GameError("owners must be 0 or 1")
        for s, d, c in self.edges:
            if not (0 <= s < n and 0 <= d < n):
                raise GameError(f"edge {s}->{d} leaves the state space")
            if not 0 <= c <= MAX_COLOR:
                raise GameError(f"color {c} out of range")
        if self.names is not None and len(self.names) != n:
            raise GameError("one name per state expected")

    @classmethod
    def from_sets(cls, states_even: Iterable[int], states_odd: Iterable[int],
                  edges: Iterable[tuple]) -> "ParityGame":
        even, odd = set(states_even), set(states_odd)
        if even & odd:
            raise GameError("a state cannot belong to both players")
        n = len(even | odd)
        if even | odd != set(range(n)):
            raise GameError("states must be numbered 0..n-1")
        return cls(tuple(ODD if v in odd else EVEN for v in range(n)), tuple(edges))

    @property
    def num_states(self) -> int:
        return len(self.owner)

    @property
    def states_even(self) -> frozenset:
        return frozenset(v for v, o in enumerate(self.owner) if o == EVEN)

    @property
    def states_odd(self) -> frozenset:
        return frozenset(v for v, o in enumerate(self.owner) if o == ODD)

    def out_edges(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.owner]
        for i, (s, _, _) in enumerate(self.edges):
            out[s].append(i)
        return out

    def name(self, v: int) -> str:
        return self.names[v] if self.names else str(v)


@dataclass
class Solution:
    """Winning regions and positional strategies (state -> edge index)."""

    winning_even: frozenset
    winning_odd: frozenset
    strategy_even: dict = field(default_factory=dict)
    strategy_odd: dict = field(default_factory=dict)

    def winner(self, v: int) -> int:
        return EVEN if v in self.winning_even else ODD

    def strategy(self, player: int) -> dict:
        return self.strategy_even if player == EVEN else self.strategy_odd


# -- Zielonka recursion on edge colors ----------------------------------------

class _Solver:
    def __init__(self, g: ParityGame):
        n = g.num_states
        self.owner = g.owner
        # Dead ends move to a sink that is won by the opponent.
        self.sink = {EVEN: n, ODD: n + 1}  # sink won by that player
        src, dst, col = [], [], []
        for s, d, c in g.edges:
            src.append(s), dst.append(d), col.append(c)
        self.real_edges = len(src)
        has_out = [False] * n
        for s in src:
            has_out[s] = True
        for v in range(n):
            if not has_out[v]:
                src.append(v), dst.append(self.sink[1 - g.owner[v]]), col.append(0)
        for player, color in ((EVEN, 2), (ODD, 1)):
            src.append(self.sink[player]), dst.append(self.sink[player]), col.append(color)
        self.owner = tuple(g.owner) + (EVEN, ODD)
        self.src, self.dst, self.col = src, dst, col
        total = n + 2
        self.out: list[list[int]] = [[] for _ in range(total)]
        self.inn: list[list[int]] = [[] for _ in range(total)]
        for i, (s, d) in enumerate(zip(src, dst)):
            self.out[s].append(i)
            self.inn[d].append(i)
        self.n = n

    def attractor(self, alive: set, cap: int, player: int, targets: set,
                  color: Optional[int] = None) -> tuple[set, dict]:
        """States in ``alive`` from which ``player`` forces reaching ``targets``
        or, when ``color`` is given, taking an edge of that color."""
        src, dst, col, owner = self.src, self.dst, self.col, self.owner
        attr = set(targets)
        strat: dict = {}
        count: dict = {}
        queue = deque(attr)

        def live(e):
            return col[e] <= cap and dst[e] in alive

        if color is not None:
            for v in alive:
                if v in attr:
                    continue
                edges = [e for e in self.out[v] if live(e)]
                hits = [e for e in edges if col[e] == color]
                if owner[v] == player:
                    if hits:
                        attr.add(v)
                        strat[v] = hits[0]
                        queue.append(v)
                else:
                    count[v] = len(edges) - len(hits)
                    if count[v] == 0:
                        attr.add(v)
                        queue.append(v)
        while queue:
            w = queue.popleft()
            for e in self.inn[w]:
                u = src[e]
                if u in attr or u not in alive or col[e] > cap:
                    continue
                if owner[u] == player:
                    attr.add(u)
                    strat[u] = e
                    queue.append(u)
                else:
                    if color is not None and col[e] == color:
                        continue
                    if u not in count:
                        count[u] = sum(1 for f in self.out[u] if live(f))
                        if color is not None:
                            count[u] -= sum(1 for f in self.out[u] if live(f) and col[f] == color)
                    count[u] -= 1
                    if count[u] == 0:
                        attr.add(u)
                        queue.append(u)
        return attr, strat

    def solve(self, alive: set, cap: int) -> tuple[set, set, dict, dict]:
        """Return (win_even, win_odd, strategy_even, strategy_odd) on ``alive``."""
        win = {EVEN: set(), ODD: set()}
        strat: dict = {EVEN: {}, ODD: {}}
        alive = set(alive)
        while alive:
            d = max((self.col[e] for v in alive for e in self.out[v]
                     if self.col[e] <= cap and self.dst[e] in alive), default=None)
            if d is None:
                raise AssertionError("subgame without edges")
            p = d % 2
            a, a_strat = self.attractor(alive, cap, p, set(), color=d)
            sub = alive - a
            if sub:
                w0, w1, s0, s1 = self.solve(sub, d - 1)
                sub_win = {EVEN: w0, ODD: w1}
                sub_strat = {EVEN: s0, ODD: s1}
            else:
                sub_win = {EVEN: set(), ODD: set()}
                sub_strat = {EVEN: {}, ODD: {}}
            if not sub_win[1 - p]:
                win[p] |= alive
                strat[p].update(sub_strat[p])
                strat[p].update(a_strat)
                return _merge(win, strat)
            q = 1 - p
            b, b_strat = self.attractor(alive, cap, q, sub_win[q])
            win[q] |= b
            strat[q].update(sub_strat[q])
            strat[q].update(b_strat)
            alive -= b
        return _merge(win, strat)


def _merge(win, strat):
    return win[EVEN], win[ODD], strat[EVEN], strat[ODD]


def solve(g: ParityGame) -> Solution:
    """Winning regions and positional winning strategies."""
    s = _Solver(g)
    everything = set(range(g.num_states + 2))
    w0, w1, s0, s1 = s.solve(everything, MAX_COLOR)
    n = g.num_states

    def clean(region, strat):
        return {v: e for v, e in strat.items() if v < n and v in region and e < s.real_edges}

    w0 = frozenset(v for v in w0 if v < n)
    w1 = frozenset(v for v in w1 if v < n)
    return Solution(w0, w1, clean(w0, s0), clean(w1, s1))


# -- Brute force oracle ------------------------------------------------------

def _play_winner(g: ParityGame, choice: Sequence[Optional[int]], start: int) -> int:
    """Winner of the play fixed by one edge choice per state."""
    seen: dict[int, int] = {}
    trace: list[int] = []
    v = start
    while v not in seen:
        e = choice[v]
        if e is None:
            return 1 - g.owner[v]
        seen[v] = len(trace)
        trace.append(e)
        v = g.edges[e][1]
    top = max(g.edges[e][2] for e in trace[seen[v]:])
    return top % 2


def brute_force_solve(g: ParityGame) -> Solution:
    """Enumerate all positional strategy pairs.  Only for tiny games."""
    n = g.num_states
    if n > BRUTE_FORCE_LIMIT:
        raise GameError(f"brute force is limited to {BRUTE_FORCE_LIMIT} states, got {n}")
    out = g.out_edges()
    options = {p: [v for v in range(n) if g.owner[v] == p and out[v]] for p in (EVEN, ODD)}

    def strategies(p):
        vs = options[p]
        for combo in itertools.product(*(out[v] for v in vs)):
            yield dict(zip(vs, combo))

    best: dict = {}
    regions: dict = {}
    for p in (EVEN, ODD):
        q = 1 - p
        opponent = list(strategies(q))
        winning_sets = []
        for mine in strategies(p):
            won = set(range(n))
            for theirs in opponent:
                choice = [mine.get(v, theirs.get(v)) for v in range(n)]
                won = {v for v in won if _play_winner(g, choice, v) == p}
                if not won:
                    break
            winning_sets.append((mine, won))
        region = set().union(*(w for _, w in winning_sets))
        regions[p] = frozenset(region)
        uniform = next(m for m, w in winning_sets if w == region)
        best[p] = {v: e for v, e in uniform.items() if v in region}
    if regions[EVEN] & regions[ODD] or len(regions[EVEN] | regions[ODD]) != n:
        raise AssertionError("positional determinacy violated")
    return Solution(regions[EVEN], regions[ODD], best[EVEN], best[ODD])


# -- Strategy checking ----------------------------------------------------------

def strategy_wins(g: ParityGame, player: int, strategy: dict, region: Iterable[int]) -> bool:
    """Check that ``strategy`` wins every play from ``region`` for ``player``.

    Fixing the strategy leaves a one-player graph for the opponent, who wins
    if he can leave the region, strand the player, or reach a cycle whose top
    color has his parity.
    """
    region = set(region)
    opp = 1 - player
    out = g.out_edges()
    src, dst, col = [], [], []
    for v in region:
        if g.owner[v] == player:
            e = strategy.get(v)
            if e is None or g.edges[e][0] != v:
                return False
            edges = [e]
        else:
            edges = out[v]
        for e in edges:
            _, d, c = g.edges[e]
            if d not in region:
                return False
            src.append(v), dst.append(d), col.append(c)
    idx = {v: i for i, v in enumerate(sorted(region))}
    n = len(idx)
    for top in range(MAX_COLOR + 1):
        if top % 2 != opp:
            continue
        keep = [i for i, c in enumerate(col) if c <= top]
        s = np.array([idx[src[i]] for i in keep], dtype=np.int64)
        d = np.array([idx[dst[i]] for i in keep], dtype=np.int64)
        labels = scc_labels(n, s, d)
        for i in keep:
            if col[i] == top and labels[idx[src[i]]] == labels[idx[dst[i]]]:
                return False
    return True


def dump_game(g: ParityGame) -> str:
    """One line per edge: ``src owner -> dst : color``."""
    who = ("even", "odd")
    return "".join(f"{g.name(s)} {who[g.owner[s]]} -> {g.name(d)} : {c}\n" for s, d, c in g.edges)


def random_game(rng, num_states: int, max_out: int = 3, dead_end_prob: float = 0.1) -> ParityGame:
    """Random game for tests and oracles; ``rng`` is a ``random.Random``."""
    owner = tuple(rng.randrange(2) for _ in range(num_states))
    edges = []
    for v in range(num_states):
        if rng.random() < dead_end_prob:
            continue
        for d in rng.sample(range(num_states), rng.randint(1, min(max_out, num_states))):
            edges.append((v, d, rng.randrange(MAX_COLOR + 1)))
    return ParityGame(owner, tuple(edges))
