"""Tabular Q-learning on the product of a labelled MDP and a Buchi automaton.

Reward scheme: whenever the agent traverses an accepting product
transition, the episode ends with reward 1 with probability ``1 - zeta``;
otherwise it continues with reward 0.  The expected return of a strategy
therefore approaches its acceptance probability as ``zeta`` tends to 1.
Returns are undiscounted.  Hitting ``ep_len`` is a time limit, not a
terminal state, so the last update still bootstraps.
"""
from __future__ import annotations

import csv
import random
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, TextIO

import numpy as np

from .automata import BuchiAutomaton
from .mdp import (LabeledMDP, MarkovChain, MDPError, PositionalStrategy, ProductMDP,
                  letter_projection, project_letters)
from .model_check import chain_acceptance

State = tuple  # (mdp state, automaton state)
TIE_BREAKS = ("lowest", "random")


@dataclass(frozen=True)
class Hyperparams:
    zeta: float = 0.99
    epsilon: float = 0.1
    alpha: float = 0.1
    tol: float = 0.01
    ep_len: int = 200
    ep_count: int = 5000
    seed: int = 0
    eval_every: int = 0  # 0 disables periodic policy evaluation
    tie_break: str = "lowest"  # behaviour ties: "lowest" index or uniformly "random"

    def __post_init__(self):
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")
        for name in ("epsilon", "alpha"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")
        if self.ep_len < 1 or self.ep_count < 1:
            raise ValueError("ep_len and ep_count must be at least 1")
        if self.eval_every < 0:
            raise ValueError("eval_every must be non-negative")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")

    @classmethod
    def parse(cls, text: str, **overrides) -> "Hyperparams":
        """Read ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"line {lineno}: unknown hyperparameter {key!r}")
            kind = types[key]
            if kind in (int, "int"):
                values[key] = int(value)
            elif kind in (float, "float"):
                values[key] = float(value)
            else:
                values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def load(cls, path, **overrides) -> "Hyperparams":
        with open(path) as fh:
            return cls.parse(fh.read(), **overrides)

    def dump(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


class ProductEnv:
    """Episodic environment over product states ``(s, q)``.

    An action is a pair (MDP choice, automaton successor).  Letters are read
    from the source state, so the automaton move does not depend on the
    sampled successor.
    """

    def __init__(self, m: LabeledMDP, a: BuchiAutomaton, zeta: float):
        if len(a.initial) != 1:
            raise MDPError("the environment needs an automaton with a single initial state")
        letters = m.source_letters()
        if letters is None:
            raise MDPError("transition letters must be determined by the source state")
        self.mdp, self.automaton, self.zeta = m, a, zeta
        self.letter = project_letters(letters, letter_projection(m.aps, a.aps)).tolist()
        self.choice_start = m.choice_start.tolist()
        self.trans_start = m.trans_start.tolist()
        self.dst = m.dst.tolist()
        self.cum = [0.0] * len(self.dst)
        for c in range(m.num_choices):
            acc = 0.0
            for j in range(self.trans_start[c], self.trans_start[c + 1]):
                acc += float(m.prob[j])
                self.cum[j] = acc
        self.initial: State = (m.initial, next(iter(a.initial)))
        self._actions: dict = {}

    def actions(self, state: State) -> list:
        """``[(mdp choice, q', accepting), ...]`` ordered by choice then ``q'``."""
        acts = self._actions.get(state)
        if acts is None:
            s, q = state
            moves = sorted(self.automaton.successors(q, self.letter[s]))
            acts = [(c, q2, acc) for c in range(self.choice_start[s], self.choice_start[s + 1])
                    for q2, acc in moves]
            self._actions[state] = acts
        return acts

    def automaton_choices(self, state: State) -> int:
        s, q = state
        return len(self.automaton.successors(q, self.letter[s]))

    def sample(self, c: int, rng: random.Random) -> int:
        lo, hi = self.trans_start[c], self.trans_start[c + 1]
        u = rng.random() * self.cum[hi - 1]
        for j in range(lo, hi):
            if u < self.cum[j]:
                return self.dst[j]
        return self.dst[hi - 1]

    def step(self, state: State, action: int, rng: random.Random) -> tuple[State, float, bool]:
        c, q2, acc = self.actions(state)[action]
        s2 = self.sample(c, rng)
        if acc and rng.random() >= self.zeta:
            return (s2, q2), 1.0, True
        return (s2, q2), 0.0, False


def make_env(m: LabeledMDP, a: BuchiAutomaton, hp: Hyperparams) -> ProductEnv:
    return ProductEnv(m, a, hp.zeta)


def greedy_index(values, tol: float) -> int:
    """Lowest index whose value is within ``tol`` of the maximum."""
    best = max(values)
    for i, v in enumerate(values):
        if v >= best - tol:
            return i
    return 0


@dataclass
class QPolicy:
    q: dict
    tol: float

    def action(self, state: State, num_actions: int) -> int:
        values = self.q.get(state)
        if not values:
            return 0  # unvisited: lowest index
        return greedy_index(values, self.tol)


@dataclass
class LearningRun:
    policy: QPolicy
    returns: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)  # (episode, probability)
    steps: int = 0

    def first_success(self, threshold: float) -> Optional[int]:
        for episode, value in self.evaluations:
            if value >= threshold:
                return episode
        return None

    def write_curve(self, fh: TextIO) -> None:
        evals = dict(self.evaluations)
        w = csv.writer(fh)
        w.writerow(["episode", "return", "evaluated_probability"])
        for i, r in enumerate(self.returns, 1):
            w.writerow([i, r, evals.get(i, "")])


def q_learning(env: ProductEnv, hp: Hyperparams) -> LearningRun:
    """Epsilon-greedy tabular Q-learning, reproducible for a fixed seed."""
    rng = random.Random(hp.seed)
    q: dict = {}
    run = LearningRun(QPolicy(q, hp.tol))
    eps, alpha, tol = hp.epsilon, hp.alpha, hp.tol
    random_ties = hp.tie_break == "random"
    actions = env.actions
    for episode in range(1, hp.ep_count + 1):
        state = env.initial
        ret = 0.0
        for _ in range(hp.ep_len):
            acts = actions(state)
            if not acts:
                break  # the automaton has no move: the run is lost
            values = q.get(state)
            if values is None:
                values = q[state] = [0.0] * len(acts)
            if rng.random() < eps:
                i = rng.randrange(len(acts))
            elif random_ties:
                best = max(values) - tol
                ties = [k for k, v in enumerate(values) if v >= best]
                i = ties[0] if len(ties) == 1 else ties[rng.randrange(len(ties))]
            else:
                i = greedy_index(values, tol)
            nxt, reward, done = env.step(state, i, rng)
            run.steps += 1
            if done:
                target = reward
            else:
                nv = q.get(nxt)
                if nv is None:
                    nv = [0.0] * len(actions(nxt))
                    if nv:
                        q[nxt] = nv
                target = reward + (max(nv) if nv else 0.0)
            values[i] += alpha * (target - values[i])
            ret += reward
            if done:
                break
            state = nxt
        run.returns.append(ret)
        if hp.eval_every and (episode % hp.eval_every == 0 or episode == hp.ep_count):
            run.evaluations.append((episode, evaluate_policy(env, run.policy)))
    return run


def greedy_chain(env: ProductEnv, pol: QPolicy) -> tuple[MarkovChain, list]:
    """Chain induced by the greedy policy, explored from the initial state.

    Returns the chain and the ``(s, q)`` pair of every chain state; the
    chain's ``states`` field holds positions into that list.
    """
    index = {env.initial: 0}
    order = [env.initial]
    rows: list = []
    i = 0
    while i < len(order):
        state = order[i]
        i += 1
        acts = env.actions(state)
        row = []
        if acts:
            c, q2, acc = acts[pol.action(state, len(acts))]
            prev = 0.0
            for j in range(env.trans_start[c], env.trans_start[c + 1]):
                nxt = (env.dst[j], q2)
                if nxt not in index:
                    index[nxt] = len(order)
                    order.append(nxt)
                row.append((index[nxt], env.cum[j] - prev, acc))
                prev = env.cum[j]
        rows.append(row)
    n = len(order)
    row_start, dst, prob, mark = [0], [], [], []
    for row in rows:
        if row:
            for d, p, m in row:
                dst.append(d), prob.append(p), mark.append(m)
        else:
            dst.append(n), prob.append(1.0), mark.append(False)
        row_start.append(len(dst))
    dst.append(n), prob.append(1.0), mark.append(False)
    row_start.append(len(dst))
    chain = MarkovChain(np.arange(n), np.array(row_start), np.array(dst, dtype=np.int64),
                        np.array(prob), np.array(mark, dtype=bool))
    return chain, order


def evaluate_policy(env: ProductEnv, pol: QPolicy) -> float:
    """Exact acceptance probability of the greedy policy."""
    chain, _ = greedy_chain(env, pol)
    return float(chain_acceptance(chain)[0])


def policy_to_strategy(p: ProductMDP, env: ProductEnv, pol: QPolicy):
    """Positional product strategy matching the greedy policy.

    Environment actions and product choices share the (choice, q') order.
    """
    choice = np.full(p.num_states, -1, dtype=np.int64)
    for v in range(p.num_states):
        lo, hi = p.choice_start[v], p.choice_start[v + 1]
        if lo == hi:
            continue
        state = (int(p.state_mdp[v]), int(p.state_aut[v]))
        acts = env.actions(state)
        if len(acts) != hi - lo:
            raise AssertionError("environment and product disagree on available actions")
        choice[v] = lo + pol.action(state, len(acts))
    return PositionalStrategy(choice)
