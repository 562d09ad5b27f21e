import io
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gfmkit import fixtures
from gfmkit.automata import BuchiAutomaton, random_nba, rename_aps
from gfmkit.constructions import build_sldba, build_slim, jump_transitions
from gfmkit.mdp import MDPBuilder, MDPError, product, random_mdp
from gfmkit.model_check import psat, strategy_value
from gfmkit.prism import parse_prism_subset
from gfmkit.rl import (Hyperparams, QPolicy, evaluate_policy, greedy_chain, greedy_index,
                       make_env, policy_to_strategy, q_learning)


def one_state_mdp():
    b = MDPBuilder(("p",))
    b.add_choice(b.state("s"), "go", [(0, 1.0, 1)])
    return b.build(0)


def accepting_loop():
    return BuchiAutomaton(("p",), 1, frozenset([0]), ((0, 0, 0, True), (0, 1, 0, True)))


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(zeta=1.0)
    with pytest.raises(ValueError):
        Hyperparams(epsilon=0.0)
    with pytest.raises(ValueError):
        Hyperparams(ep_len=0)
    with pytest.raises(ValueError):
        Hyperparams(tie_break="first")


def test_hyperparams_config_round_trip():
    hp = Hyperparams(zeta=0.9, alpha=0.3, seed=7, tie_break="random")
    assert Hyperparams.parse(hp.dump()) == hp
    text = "# comment\nzeta = 0.5\nep-len = 10\n"
    assert Hyperparams.parse(text, seed=3) == Hyperparams(zeta=0.5, ep_len=10, seed=3)
    with pytest.raises(ValueError, match="unknown"):
        Hyperparams.parse("gamma = 0.9")
    with pytest.raises(ValueError, match="key = value"):
        Hyperparams.parse("zeta")


def test_greedy_index_ties_go_to_lowest():
    assert greedy_index([0.5, 0.505, 0.2], tol=0.01) == 0
    assert greedy_index([0.5, 0.6, 0.6], tol=0.0) == 1


def test_single_accepting_loop_converges_to_one():
    hp = Hyperparams(zeta=0.5, epsilon=0.1, alpha=0.1, ep_len=50, ep_count=400, seed=1)
    env = make_env(one_state_mdp(), accepting_loop(), hp)
    run = q_learning(env, hp)
    (q,) = run.policy.q.values()
    assert abs(q[0] - 1.0) < 0.05
    assert evaluate_policy(env, run.policy) == 1.0


def test_no_accepting_transitions_give_zero_return():
    a = BuchiAutomaton(("p",), 1, frozenset([0]), ((0, 0, 0, False), (0, 1, 0, False)))
    hp = Hyperparams(ep_len=20, ep_count=30)
    env = make_env(one_state_mdp(), a, hp)
    run = q_learning(env, hp)
    assert sum(run.returns) == 0
    assert run.steps == 20 * 30
    assert evaluate_policy(env, run.policy) == 0.0


def test_env_needs_source_letters():
    b = MDPBuilder(("p",))
    b.add_choice(b.state("s"), "flip", [(0, 0.5, 1), (0, 0.5, 0)])
    with pytest.raises(MDPError):
        make_env(b.build(0), accepting_loop(), Hyperparams())


def test_reproducible_traces():
    m = random_mdp(random.Random(4), 6, aps=("p0",), source_labelled=True)
    a = build_slim(random_nba(random.Random(5), 3, 1, density=0.5))
    hp = Hyperparams(ep_len=30, ep_count=50, seed=11, tie_break="random")
    r1 = q_learning(make_env(m, a, hp), hp)
    r2 = q_learning(make_env(m, a, hp), hp)
    assert r1.returns == r2.returns and r1.policy.q == r2.policy.q


@settings(max_examples=25)
@given(st.integers(0, 10**6))
def test_learned_policy_never_beats_optimum(seed):
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(1, 6), aps=("p0",), max_choices=2, source_labelled=True)
    a = build_slim(random_nba(rng, rng.randint(1, 3), 1, density=0.5))
    hp = Hyperparams(ep_len=20, ep_count=40, seed=seed)
    env = make_env(m, a, hp)
    run = q_learning(env, hp)
    value = evaluate_policy(env, run.policy)
    assert value <= psat(m, a).value + 1e-9
    # the lazily explored chain agrees with the strategy on the full product
    p = product(m, a)
    assert abs(strategy_value(p, policy_to_strategy(p, env, run.policy)) - value) < 1e-9


def test_eager_jumps_lose_when_the_letter_alternates():
    # p flips every step, so a jump into the FG p part always dies
    b = MDPBuilder(("p",))
    s0, s1 = b.state("s0"), b.state("s1")
    b.add_choice(s0, "go", [(s1, 1.0, 0)])
    b.add_choice(s1, "go", [(s0, 1.0, 1)])
    m = b.build(s0)
    sldba = rename_aps(fixtures.automaton("fg_p_sldba"), ["p"])
    env = make_env(m, sldba, Hyperparams())
    jump_first = {}
    for state in [(s0, 0), (s1, 0)]:
        acts = env.actions(state)
        jumps = [i for i, (_, q2, _) in enumerate(acts) if q2 != 0]
        jump_first[state] = [float(i in jumps) for i in range(len(acts))]
    assert evaluate_policy(env, QPolicy(jump_first, 0.0)) == 0.0


def test_greedy_chain_routes_stuck_states_to_reject():
    sldba = rename_aps(fixtures.automaton("fg_p_sldba"), ["p"])
    b = MDPBuilder(("p",))
    b.add_choice(b.state("s"), "go", [(0, 1.0, 0)])
    env = make_env(b.build(0), sldba, Hyperparams())
    chain, order = greedy_chain(env, QPolicy({}, 0.0))
    assert order[0] == env.initial
    assert chain.size == len(order) + 1


def test_curve_csv():
    hp = Hyperparams(zeta=0.5, ep_len=5, ep_count=4, eval_every=2)
    run = q_learning(make_env(one_state_mdp(), accepting_loop(), hp), hp)
    buf = io.StringIO()
    run.write_curve(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "episode,return,evaluated_probability"
    assert len(lines) == 5
    assert lines[2].endswith(",1.0") and lines[1].endswith(",")


def test_milk_branching_counts():
    milk = parse_prism_subset(fixtures.read_text("milk.prism"))
    conj = fixtures.fg_conjunction_nba(5)
    slim = build_slim(conj)
    sldba = build_sldba(conj, singleton_jumps=True)
    hp = Hyperparams()
    slim_env, sldba_env = make_env(milk, slim, hp), make_env(milk, sldba, hp)

    def reachable(env):
        seen, stack = {env.initial}, [env.initial]
        while stack:
            s, q = stack.pop()
            for c, q2, _ in env.actions((s, q)):
                for j in range(env.trans_start[c], env.trans_start[c + 1]):
                    nxt = (env.dst[j], q2)
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
        return seen

    assert max(slim_env.automaton_choices(v) for v in reachable(slim_env)) <= 2
    s0, q0 = sldba_env.initial
    subset = sldba.state_names[q0]
    letter = sldba_env.letter[s0]
    jumps = jump_transitions(conj, range(1), letter, singleton_only=True)
    assert subset == "{0}"
    assert sldba_env.automaton_choices(sldba_env.initial) == 1 + len(jumps) > 2
