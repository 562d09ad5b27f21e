"""Simulation parity games between Buchi automata and GFM certification.

The spoiler plays one automaton, the duplicator the other.  Three games of
increasing duplicator power are built:

* ``SIM0``: classical fair simulation.
* ``SIM1``: the spoiler must claim one accepting edge she will repeat
  forever; only that edge scores for her afterwards.
* ``SIM2``: as ``SIM1``, but the duplicator may replace the claim by the
  edge the spoiler just took.

Under the ``"free"`` update rule a claim change costs nothing, which lets a
duplicator that never accepts dodge a spoiler cycling through two accepting
edges.  The default ``"charged"`` rule scores 1 for a claim change on a
non-accepting duplicator move, so only finitely many free changes remain.

Game states are built lazily from the initial pairs.  Spoiler states are
owned by the odd player, duplicator states by the even player.
"""
from __future__ import annotations

import enum
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

from .automata import AutomatonError, BuchiAutomaton, is_deterministic
from .constructions import build_sldba, build_slim
from .parity import EVEN, ODD, ParityGame, solve

DEFAULT_BUDGET = 5_000_000
UPDATE_RULES = ("charged", "free")
BUDGET_ENV = "GFMKIT_BUDGET"


class SimLevel(enum.IntEnum):
    SIM0 = 0
    SIM1 = 1
    SIM2 = 2

    def __str__(self) -> str:
        return f"sim{self.value}"


class BudgetExceeded(RuntimeError):
    def __init__(self, level: SimLevel, budget: int):
        self.level = level
        self.budget = budget
        super().__init__(f"{level} game exceeds the budget of {budget} states")


def default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    return int(raw) if raw else DEFAULT_BUDGET


def _check_alphabets(spoiler: BuchiAutomaton, duplicator: BuchiAutomaton) -> None:
    if tuple(spoiler.aps) != tuple(duplicator.aps):
        raise AutomatonError(f"alphabet mismatch: {list(spoiler.aps)} vs {list(duplicator.aps)}")


@dataclass
class SimGame:
    """A built simulation game plus the bookkeeping to read it back."""

    level: SimLevel
    game: ParityGame
    keys: list          # game state id -> structured key
    index: dict         # structured key -> id

    def initial_id(self, qs: int, qd: int) -> int:
        return self.index[("s", qs, qd)]


def _build(level: SimLevel, spoiler: BuchiAutomaton, duplicator: BuchiAutomaton,
           budget: Optional[int], update: str = "charged") -> SimGame:
    """Explore the game from all pairs of initial states.

    Keys: ``("s", qs, qd)`` and ``("S", qs, qd, e)`` are spoiler states;
    ``("d", qs, qd, a)`` and ``("D", qs, qd, x, e)`` are duplicator states,
    where ``e`` is the claimed spoiler edge and ``x`` is the letter (SIM1)
    or the edge just taken (SIM2).  Edges are ``(src, letter, dst)``.
    """
    _check_alphabets(spoiler, duplicator)
    if update not in UPDATE_RULES:
        raise ValueError(f"unknown update rule {update!r}; choose from {UPDATE_RULES}")
    charged = update == "charged"
    budget = default_budget() if budget is None else budget
    s_out = spoiler.out_edges
    d_succ = duplicator.succ
    keys: list = []
    index: dict = {}
    owner: list = []
    edges: list = []

    def intern(key) -> int:
        i = index.get(key)
        if i is None:
            if len(keys) >= budget:
                raise BudgetExceeded(level, budget)
            i = len(keys)
            index[key] = i
            keys.append(key)
            owner.append(ODD if key[0] in ("s", "S") else EVEN)
        return i

    for qs in sorted(spoiler.initial):
        for qd in sorted(duplicator.initial):
            intern(("s", qs, qd))
    pos = 0
    while pos < len(keys):
        key = keys[pos]
        src = pos
        pos += 1
        kind = key[0]
        if kind == "s":
            _, qs, qd = key
            for a, qs2, acc in s_out[qs]:
                if level == SimLevel.SIM0:
                    edges.append((src, intern(("d", qs2, qd, a)), 1 if acc else 0))
                    continue
                edges.append((src, intern(("d", qs2, qd, a)), 0))
                if acc:
                    e = (qs, a, qs2)
                    x = a if level == SimLevel.SIM1 else e
                    edges.append((src, intern(("D", qs2, qd, x, e)), 0))
        elif kind == "d":
            _, qs, qd, a = key
            for qd2, acc in d_succ.get((qd, a), ()):
                color = 2 if acc and level == SimLevel.SIM0 else 0
                edges.append((src, intern(("s", qs, qd2)), color))
        elif kind == "S":
            _, qs, qd, e = key
            for a, qs2, _ in s_out[qs]:
                taken = (qs, a, qs2)
                x = a if level == SimLevel.SIM1 else taken
                edges.append((src, intern(("D", qs2, qd, x, e)), 1 if taken == e else 0))
        else:
            _, qs, qd, x, e = key
            a = x if level == SimLevel.SIM1 else x[1]
            for qd2, acc in d_succ.get((qd, a), ()):
                color = 2 if acc else 0
                edges.append((src, intern(("S", qs, qd2, e)), color))
                if level == SimLevel.SIM2 and x != e:
                    cost = color if acc or not charged else 1
                    edges.append((src, intern(("S", qs, qd2, x)), cost))
    game = ParityGame(tuple(owner), tuple(edges), tuple(_label(k) for k in keys))
    return SimGame(level, game, keys, index)


def _edge_label(e) -> str:
    return f"({e[0]},{e[1]},{e[2]})"


def _label(key) -> str:
    kind = key[0]
    if kind == "s":
        return f"({key[1]},{key[2]})"
    if kind == "d":
        return f"({key[1]},{key[2]},{key[3]})"
    if kind == "S":
        return f"({key[1]},{key[2]},{_edge_label(key[3])})"
    x = key[3] if isinstance(key[3], int) else _edge_label(key[3])
    return f"({key[1]},{key[2]},{x},{_edge_label(key[4])})"


def build_sim0(spoiler: BuchiAutomaton, duplicator: BuchiAutomaton,
               budget: Optional[int] = None) -> SimGame:
    return _build(SimLevel.SIM0, spoiler, duplicator, budget)


def build_sim1(spoiler: BuchiAutomaton, duplicator: BuchiAutomaton,
               budget: Optional[int] = None) -> SimGame:
    return _build(SimLevel.SIM1, spoiler, duplicator, budget)


def build_sim2(spoiler: BuchiAutomaton, duplicator: BuchiAutomaton,
               budget: Optional[int] = None, update: str = "charged") -> SimGame:
    return _build(SimLevel.SIM2, spoiler, duplicator, budget, update)


_BUILDERS = {SimLevel.SIM0: build_sim0, SimLevel.SIM1: build_sim1, SimLevel.SIM2: build_sim2}


def build_game(level: SimLevel, spoiler, duplicator, budget=None) -> SimGame:
    return _BUILDERS[SimLevel(level)](spoiler, duplicator, budget)


@dataclass
class Decision:
    holds: bool
    level: SimLevel
    game_states: int
    game_edges: int
    # spoiler initial state -> chosen duplicator initial state (winning pairs only)
    matches: dict = field(default_factory=dict)
    # duplicator game-state key -> successor key, on the reachable winning part
    witness: dict = field(default_factory=dict)


def decide(level: SimLevel, spoiler: BuchiAutomaton, duplicator: BuchiAutomaton,
           budget: Optional[int] = None, update: str = "charged") -> Decision:
    """Does the duplicator simulate the spoiler at ``level``?

    True iff every spoiler initial state has a duplicator initial state
    from which the pair is won by the duplicator.
    """
    level = SimLevel(level)
    if level == SimLevel.SIM2:
        sg = build_sim2(spoiler, duplicator, budget, update)
    else:
        sg = build_game(level, spoiler, duplicator, budget)
    sol = solve(sg.game)
    matches = {}
    for qs in sorted(spoiler.initial):
        for qd in sorted(duplicator.initial):
            if sg.initial_id(qs, qd) in sol.winning_even:
                matches[qs] = qd
                break
    holds = len(matches) == len(spoiler.initial)
    witness = _witness(sg, sol, matches) if holds else {}
    return Decision(holds, level, sg.game.num_states, len(sg.game.edges), matches, witness)


def _witness(sg: SimGame, sol, matches: dict) -> dict:
    g = sg.game
    out = g.out_edges()
    seen = set()
    stack = [sg.initial_id(qs, qd) for qs, qd in matches.items()]
    witness = {}
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        if g.owner[v] == EVEN:
            e = sol.strategy_even[v]
            nxt = [g.edges[e][1]]
            witness[sg.keys[v]] = sg.keys[nxt[0]]
        else:
            nxt = [g.edges[e][1] for e in out[v]]
        stack.extend(nxt)
    return witness


# -- certification ------------------------------------------------------------

REFERENCES = ("sldba", "slim")


@dataclass
class LevelReport:
    level: str
    holds: Optional[bool]
    game_states: Optional[int]
    seconds: float


@dataclass
class CertificationReport:
    input: str
    reference: str
    verdict: str
    levels: list = field(default_factory=list)
    reference_states: Optional[int] = None

    @property
    def certified(self) -> bool:
        return self.verdict in ("det", "sim0", "sim1", "sim2")

    def to_dict(self) -> dict:
        return asdict(self)


def certify_gfm(a: BuchiAutomaton, reference: Union[str, BuchiAutomaton] = "sldba",
                budget: Optional[int] = None, name: str = "", update: str = "charged"
                ) -> CertificationReport:
    """Check whether ``a`` simulates a GFM reference of the same language.

    ``reference`` is ``"sldba"``, ``"slim"`` or a caller-supplied automaton
    the caller vouches for.  A ``nosim`` verdict does not show that ``a`` is
    not good for MDPs.
    """
    if isinstance(reference, str):
        if reference not in REFERENCES:
            raise ValueError(f"unknown reference {reference!r}; choose from {REFERENCES}")
        ref_name = reference
    else:
        ref_name = "given"
    report = CertificationReport(name, ref_name, "nosim")
    if is_deterministic(a):
        report.verdict = "det"
        return report
    if reference == "sldba":
        ref = build_sldba(a)
    elif reference == "slim":
        ref = build_slim(a)
    else:
        ref = reference
    report.reference_states = ref.num_states
    for level in SimLevel:
        start = time.perf_counter()
        try:
            d = decide(level, ref, a, budget, update)
        except BudgetExceeded as exc:
            report.levels.append(LevelReport(str(level), None, exc.budget,
                                             time.perf_counter() - start))
            report.verdict = f"timeout({level})"
            return report
        report.levels.append(LevelReport(str(level), d.holds, d.game_states,
                                         time.perf_counter() - start))
        if d.holds:
            report.verdict = str(level)
            return report
    return report
