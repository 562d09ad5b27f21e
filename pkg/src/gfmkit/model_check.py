"""End components, maximal reachability, and PSat / PSemSat on products.

Everything works on the compressed ``ProductMDP`` arrays.  Choices whose
mass is below one leak to rejection, so they never belong to an end
component and count as losing mass in reachability.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, dijkstra
from scipy.sparse.linalg import spsolve

from .automata import BuchiAutomaton, bounded_language_equal, LassoWord
from .mdp import (LabeledMDP, MarkovChain, MDPError, PositionalStrategy, ProductMDP, induced_chain,
                  product)

DEFAULT_TOL = 1e-9
MAX_ITERATIONS = 1_000_000


class ReferenceMismatch(ValueError):
    """The reference automaton is not language-equivalent to the input."""

    def __init__(self, word: LassoWord):
        self.word = word
        super().__init__(f"reference mismatch: the automata disagree on {word}")


@dataclass(frozen=True)
class EndComponent:
    states: frozenset
    choices: frozenset  # allowed global product-choice ids

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class CheckResult:
    value: float
    strategy: PositionalStrategy
    residual: float
    iterations: int = 0
    values: Optional[np.ndarray] = None
    product: Optional[ProductMDP] = None
    mecs: int = 0
    aecs: int = 0

    def report(self) -> dict:
        out = {"value": self.value, "iterations": self.iterations, "residual": self.residual}
        if self.product is not None:
            out.update({"mecs": self.mecs, "aecs": self.aecs,
                        "product_states": self.product.num_states,
                        "product_choices": self.product.num_choices})
        return out


def _graph(n: int, src: np.ndarray, dst: np.ndarray) -> csr_matrix:
    return csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))


# -- end components --------------------------------------------------------------

def max_end_components(p: ProductMDP) -> list[EndComponent]:
    """Maximal end components by repeated SCC refinement."""
    n = p.num_states
    if n == 0 or p.num_choices == 0:
        return []
    c_src = p.choice_source()
    e_choice = p.entry_choice()
    alive = p.full_choices()
    while True:
        ids = np.nonzero(alive[e_choice])[0]
        _, labels = connected_components(_graph(n, c_src[e_choice[ids]], p.dst[ids]),
                                         directed=True, connection="strong")
        # A choice survives when every successor is in its source's SCC.
        same = labels[p.dst] == labels[c_src[e_choice]]
        bad = np.zeros(p.num_choices, bool)
        np.logical_or.at(bad, e_choice, ~same)
        still = alive & ~bad
        if np.array_equal(still, alive):
            break
        alive = still
    alive_ids = np.nonzero(alive)[0]
    groups: dict = {}
    for c in alive_ids:
        groups.setdefault(int(labels[c_src[c]]), []).append(int(c))
    out = [EndComponent(frozenset(int(c_src[c]) for c in cs), frozenset(cs))
           for cs in groups.values()]
    out.sort(key=lambda ec: min(ec.states))
    return out


def accepting_mecs(p: ProductMDP, mecs: Optional[list] = None) -> list[EndComponent]:
    if mecs is None:
        mecs = max_end_components(p)
    marked = np.zeros(p.num_choices, bool)
    np.logical_or.at(marked, p.entry_choice(), p.mark)
    return [ec for ec in mecs if any(marked[c] for c in ec.choices)]


# -- maximal reachability --------------------------------------------------------

def _backward(n: int, src: np.ndarray, dst: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Mask of states with a path into ``targets`` along (src -> dst) edges."""
    mask = np.zeros(n, bool)
    if not targets.any():
        return mask
    # Reverse edges plus a virtual root pointing at every target.
    root = n
    t = np.nonzero(targets)[0]
    rs = np.concatenate([dst, np.full(len(t), root)])
    rd = np.concatenate([src, t])
    order = breadth_first_order(_graph(n + 1, rs, rd), root, directed=True,
                                return_predecessors=False)
    mask[order[order < n]] = True
    return mask


def _bfs_distance(n: int, src: np.ndarray, dst: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Number of edges from each state to ``targets`` (inf when unreachable)."""
    root = n
    t = np.nonzero(targets)[0]
    rs = np.concatenate([dst, np.full(len(t), root)])
    rd = np.concatenate([src, t])
    dist = dijkstra(_graph(n + 1, rs, rd), indices=root, unweighted=True)
    return dist[:n] - 1


def _first_per_state(p: ProductMDP, mask: np.ndarray) -> np.ndarray:
    """Lowest choice index with ``mask`` set, per state (-1 if none)."""
    big = np.iinfo(np.int64).max
    out = np.full(p.num_states, -1, dtype=np.int64)
    has = p.choice_start[1:] > p.choice_start[:-1]
    if not has.any():
        return out
    cand = np.where(mask, np.arange(p.num_choices), big)
    first = np.minimum.reduceat(cand, p.choice_start[:-1][has])
    first[first == big] = -1
    out[has] = first
    return out


@dataclass
class _Arrays:
    n: int
    c_src: np.ndarray
    e_choice: np.ndarray
    full: np.ndarray


def _arrays(p: ProductMDP) -> _Arrays:
    return _Arrays(p.num_states, p.choice_source(), p.entry_choice(), p.full_choices())


def _prob0(p: ProductMDP, a: _Arrays, target: np.ndarray) -> np.ndarray:
    """States from which the target is unreachable under every strategy."""
    return ~_backward(a.n, a.c_src[a.e_choice], p.dst, target)


def _prob1(p: ProductMDP, a: _Arrays, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """States with a strategy reaching ``target`` almost surely, and the
    choices that stay inside that set."""
    region = np.ones(a.n, bool)
    while True:
        # Choices with full mass whose successors all stay in the region.
        inside = region[p.dst]
        ok = a.full.copy()
        np.logical_and.at(ok, a.e_choice, inside)
        ok &= region[a.c_src]
        ids = np.nonzero(ok[a.e_choice])[0]
        new = _backward(a.n, a.c_src[a.e_choice[ids]], p.dst[ids], target) | target
        new &= region
        if np.array_equal(new, region):
            return region, ok
        region = new


def _choice_values(p: ProductMDP, a: _Arrays, x: np.ndarray) -> np.ndarray:
    if p.num_choices == 0:
        return np.zeros(0)
    contrib = p.prob * x[p.dst]
    return np.add.reduceat(contrib, p.trans_start[:-1]) if len(contrib) else np.zeros(p.num_choices)


def _state_max(p: ProductMDP, values: np.ndarray, default: float = 0.0) -> np.ndarray:
    n = p.num_states
    out = np.full(n, default)
    has = p.choice_start[1:] > p.choice_start[:-1]
    if has.any() and len(values):
        red = np.maximum.reduceat(values, p.choice_start[:-1][has])
        out[has] = red
    return out


def _reach_strategy(p: ProductMDP, a: _Arrays, x: np.ndarray, target: np.ndarray,
                    slack: float) -> np.ndarray:
    """Among near-optimal choices, pick one that moves closer to the target.

    Distances are BFS ranks over near-optimal choices, so the induced chain
    cannot stall in a region of equal value.  Ties go to the lowest index.
    """
    qv = _choice_values(p, a, x)
    best = x[a.c_src]
    optimal = qv >= best - slack
    ids = np.nonzero(optimal[a.e_choice])[0]
    dist = _bfs_distance(a.n, a.c_src[a.e_choice[ids]], p.dst[ids], target)
    # A choice is "progressing" when some successor is strictly closer.
    succ_dist = dist[p.dst]
    min_succ = np.full(p.num_choices, np.inf)
    if len(succ_dist):
        np.minimum.at(min_succ, a.e_choice, succ_dist)
    progressing = optimal & (min_succ < dist[a.c_src])
    choice = _first_per_state(p, progressing)
    fallback = _first_per_state(p, optimal)
    choice = np.where(choice >= 0, choice, fallback)
    has = p.choice_start[1:] > p.choice_start[:-1]
    return np.where((choice < 0) & has, p.choice_start[:-1], choice)


def max_reach_prob(p: ProductMDP, target: Iterable[int] | np.ndarray,
                   tol: float = DEFAULT_TOL, max_iterations: int = MAX_ITERATIONS) -> CheckResult:
    """Maximal probability of reaching ``target`` from every product state.

    Graph-based precomputation fixes the exact 0 and 1 states; value
    iteration runs on the rest until the sup-norm change drops below tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _arrays(p)
    tmask = np.zeros(a.n, bool)
    if isinstance(target, np.ndarray) and target.dtype == bool:
        tmask |= target
    else:
        tmask[list(target)] = True
    zero = _prob0(p, a, tmask)
    one, one_choices = _prob1(p, a, tmask)
    x = np.where(one, 1.0, 0.0)
    free = ~(zero | one)
    iterations, residual = 0, 0.0
    if free.any():
        while iterations < max_iterations:
            iterations += 1
            nx = _state_max(p, _choice_values(p, a, x))
            nx = np.where(free, nx, x)
            residual = float(np.max(np.abs(nx - x)))
            x = nx
            if residual < tol:
                break
    # Strategy: inside the prob-1 region stay on safe choices and approach
    # the target; elsewhere follow near-optimal progress.
    choice = _reach_strategy(p, a, x, tmask, slack=max(10 * tol, 1e-12))
    if one.any():
        safe_ids = np.nonzero(one_choices[a.e_choice])[0]
        dist = _bfs_distance(a.n, a.c_src[a.e_choice[safe_ids]], p.dst[safe_ids], tmask)
        min_succ = np.full(p.num_choices, np.inf)
        np.minimum.at(min_succ, a.e_choice, dist[p.dst])
        good = one_choices & (min_succ < dist[a.c_src])
        safe = _first_per_state(p, good)
        inner = one & ~tmask
        choice[inner] = safe[inner]
    return CheckResult(float(x[p.initial]), PositionalStrategy(choice), residual,
                       iterations, values=x, product=p)


# -- PSat -------------------------------------------------------------------------

def _aec_strategy(p: ProductMDP, aecs: Sequence[EndComponent], choice: np.ndarray) -> None:
    """Inside each AEC pick allowed choices that lead towards a marked one.

    States owning a marked allowed choice take it; the others are settled by
    a backward breadth-first sweep over allowed choices.
    """
    marked = np.zeros(p.num_choices, bool)
    np.logical_or.at(marked, p.entry_choice(), p.mark)
    c_src = p.choice_source()
    for ec in aecs:
        allowed = sorted(ec.choices)
        preds: dict = {}
        for c in allowed:
            for j in p.entries(c):
                preds.setdefault(int(p.dst[j]), []).append(c)
        settled = set()
        queue = deque()
        for c in allowed:
            v = int(c_src[c])
            if marked[c] and v not in settled:
                settled.add(v)
                choice[v] = c
                queue.append(v)
        while queue:
            w = queue.popleft()
            for c in preds.get(w, ()):
                v = int(c_src[c])
                if v not in settled:
                    settled.add(v)
                    choice[v] = c
                    queue.append(v)
        if settled != set(ec.states):
            raise AssertionError("accepting end component is not strongly connected")


def product_psat(p: ProductMDP, tol: float = DEFAULT_TOL, exact: bool = True) -> CheckResult:
    """PSat on an already built product."""
    mecs = max_end_components(p)
    aecs = accepting_mecs(p, mecs)
    target = np.zeros(p.num_states, bool)
    for ec in aecs:
        target[list(ec.states)] = True
    res = max_reach_prob(p, target, tol)
    choice = res.strategy.choice.copy()
    _aec_strategy(p, aecs, choice)
    res.strategy = PositionalStrategy(choice)
    res.mecs, res.aecs = len(mecs), len(aecs)
    if exact:
        # Replace the iterate by the exact value of the extracted strategy.
        exact_value = strategy_value(p, res.strategy)
        res.residual = max(res.residual, abs(exact_value - res.value)) if res.iterations else 0.0
        res.value = exact_value
    return res


def psat(m: LabeledMDP, a: BuchiAutomaton, tol: float = DEFAULT_TOL, exact: bool = True) -> CheckResult:
    """Optimal probability that the product run is accepting."""
    return product_psat(product(m, a), tol, exact)


def psemsat_via_reference(m: LabeledMDP, a: BuchiAutomaton, ref: BuchiAutomaton,
                          tol: float = DEFAULT_TOL, check_language: bool = True,
                          max_bound: int = 4) -> CheckResult:
    """Semantic satisfaction probability of ``a``'s language, computed on a
    good-for-MDPs reference automaton with the same language.

    The product commits to an automaton successor together with the action,
    before the outcome is sampled.  If letters depend on the outcome, even a
    deterministic automaton has to guess, so the reference would not give the
    semantic value.  Such MDPs are rejected.
    """
    if m.source_letters() is None:
        raise MDPError("PSemSat via a reference needs letters determined by the source state")
    if check_language:
        word = bounded_language_equal(a, ref, max_bound=max_bound)
        if word is not None:
            raise ReferenceMismatch(word)
    return psat(m, ref, tol)


@dataclass
class Refutation:
    refuted: bool
    gap: float
    psat: CheckResult
    psemsat: CheckResult

    @property
    def verdict(self) -> str:
        return f"refuted(gap={self.gap:.6g})" if self.refuted else "consistent"


def refute_gfm_on_instance(m: LabeledMDP, a: BuchiAutomaton, ref: BuchiAutomaton,
                           tol: float = DEFAULT_TOL, check_language: bool = True) -> Refutation:
    """Compare PSat of ``a`` with PSemSat obtained through ``ref``."""
    syn = psat(m, a, tol)
    sem = psemsat_via_reference(m, a, ref, tol, check_language)
    gap = sem.value - syn.value
    return Refutation(gap > max(10 * tol, 1e-6), gap, syn, sem)


# -- exact evaluation of a fixed strategy ---------------------------------------

def chain_acceptance(chain: MarkovChain) -> np.ndarray:
    """Probability, per chain state, of eventually cycling through marks.

    A bottom SCC is accepting when it contains a marked transition; the
    probability of reaching accepting bottom SCCs solves a linear system.
    """
    n = chain.size
    owner = np.repeat(np.arange(n), np.diff(chain.row_start))
    graph = _graph(n, owner, chain.dst)
    _, labels = connected_components(graph, directed=True, connection="strong")
    leaves = labels[chain.dst] != labels[owner]
    comps = labels.max() + 1
    not_bottom = np.zeros(comps, bool)
    np.logical_or.at(not_bottom, labels[owner], leaves)
    marked = np.zeros(comps, bool)
    internal = ~leaves & chain.mark
    np.logical_or.at(marked, labels[owner], internal)
    good = ~not_bottom & marked
    target = good[labels]
    can = _backward(n, owner, chain.dst, target)
    x = np.where(target, 1.0, 0.0)
    solve = can & ~target
    if solve.any():
        idx = np.nonzero(solve)[0]
        local = np.full(n, -1)
        local[idx] = np.arange(len(idx))
        sel = solve[owner]
        rows, cols, vals = local[owner[sel]], chain.dst[sel], chain.prob[sel]
        inner = solve[cols]
        mat = csr_matrix((-vals[inner], (rows[inner], local[cols[inner]])), shape=(len(idx), len(idx)))
        mat = mat + csr_matrix((np.ones(len(idx)), (np.arange(len(idx)), np.arange(len(idx)))),
                               shape=(len(idx), len(idx)))
        rhs = np.zeros(len(idx))
        into_target = target[cols]
        np.add.at(rhs, rows[into_target], vals[into_target])
        sol = spsolve(mat.tocsc(), rhs)
        x[idx] = np.clip(np.atleast_1d(sol), 0.0, 1.0)
    return x


def strategy_value(p: ProductMDP, sigma: PositionalStrategy) -> float:
    """Exact acceptance probability from the initial state under ``sigma``."""
    chain = induced_chain(p, sigma, reachable_only=True)
    return float(chain_acceptance(chain)[0])


def enumerate_positional_psat(p: ProductMDP, limit: int = 200_000) -> float:
    """Best value over all positional strategies; test oracle for tiny products."""
    import itertools

    ranges = [list(p.choices(v)) or [-1] for v in range(p.num_states)]
    count = 1
    for r in ranges:
        count *= len(r)
    if count > limit:
        raise ValueError(f"{count} positional strategies exceed the limit of {limit}")
    best = 0.0
    for combo in itertools.product(*ranges):
        best = max(best, strategy_value(p, PositionalStrategy(np.array(combo, dtype=np.int64))))
    return best
