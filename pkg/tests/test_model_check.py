import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gfmkit import fixtures
from gfmkit.automata import random_dba, random_nba, rename_aps
from gfmkit.constructions import build_sldba, build_slim
from gfmkit.mdp import MDPBuilder, MDPError, parse_explicit, product, random_mdp
from gfmkit.model_check import (ReferenceMismatch, accepting_mecs, chain_acceptance,
                                enumerate_positional_psat, max_end_components, max_reach_prob,
                                product_psat, psat, psemsat_via_reference, refute_gfm_on_instance,
                                strategy_value)


@pytest.fixture(scope="module")
def coin():
    return parse_explicit(fixtures.read_text("fig1_coin.mdpx"))


def small_product(seed):
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(1, 4), aps=("p0", "p1"), max_choices=2, max_succ=2)
    a = random_nba(rng, rng.randint(1, 3), 2, density=0.3)
    return product(m, a)


def test_fig1_values(coin):
    a = fixtures.automaton("fig1_nba")
    univ = fixtures.automaton("universal_dba")
    assert psat(coin, a).value == 0.0
    assert psemsat_via_reference(coin, a, univ).value == 1.0
    r = refute_gfm_on_instance(coin, a, univ)
    assert r.refuted and r.gap == 1.0 and r.verdict == "refuted(gap=1)"


def test_fig1_product_has_no_end_components(coin):
    p = product(coin, fixtures.automaton("fig1_nba"))
    assert max_end_components(p) == []


def test_reference_must_match_language(coin):
    a = fixtures.automaton("fig1_nba")
    other = rename_aps(fixtures.automaton("fg_p_nba"), ["a"])
    with pytest.raises(ReferenceMismatch):
        psemsat_via_reference(coin, a, other)


def test_single_state_self_loop():
    b = MDPBuilder(("p",))
    b.add_choice(b.state("s"), "go", [(0, 1.0, 1)])
    m = b.build(0)
    fg = rename_aps(fixtures.automaton("fg_p_nba"), ["p"])
    res = psat(m, fg)
    assert res.value == 1.0
    assert strategy_value(res.product, res.strategy) == 1.0


def test_reachability_on_biased_walk():
    # s0 -> goal w.p. 1/3, back to s0 w.p. 1/3, to trap w.p. 1/3
    b = MDPBuilder(("g",))
    s0, goal, trap = b.state("s0"), b.state("goal"), b.state("trap")
    b.add_choice(s0, "go", [(s0, 1 / 3, 0), (goal, 1 / 3, 0), (trap, 1 / 3, 0)])
    b.add_choice(goal, "stay", [(goal, 1.0, 1)])
    b.add_choice(trap, "stay", [(trap, 1.0, 0)])
    m = b.build(s0)
    gf = rename_aps(fixtures.automaton("universal_dba"), ["g"])
    p = product(m, gf)
    target = np.array([m.state_names[int(s)] == "goal" for s in p.state_mdp])
    res = max_reach_prob(p, target, tol=1e-12)
    assert abs(res.values[0] - 0.5) < 1e-9


def test_tol_must_be_positive():
    p = small_product(1)
    with pytest.raises(ValueError):
        max_reach_prob(p, np.zeros(p.num_states, bool), tol=0)


@given(st.integers(0, 10**6))
def test_psat_matches_positional_enumeration(seed):
    p = small_product(seed)
    try:
        oracle = enumerate_positional_psat(p, limit=3000)
    except ValueError:
        return
    res = product_psat(p)
    assert abs(res.value - oracle) < 1e-7
    assert abs(strategy_value(p, res.strategy) - res.value) < 1e-9


@given(st.integers(0, 10**6))
def test_end_components_are_closed(seed):
    p = small_product(seed)
    src = p.choice_source()
    for ec in max_end_components(p):
        for c in ec.choices:
            assert src[c] in ec.states
            assert all(int(p.dst[j]) in ec.states for j in p.entries(c))
            assert p.choice_mass()[c] >= 1 - 1e-9
    assert len(accepting_mecs(p)) <= len(max_end_components(p))


@given(st.integers(0, 10**6))
def test_deterministic_automata_are_consistent(seed):
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(1, 6), aps=("p0", "p1"), source_labelled=True)
    d = random_dba(rng, rng.randint(1, 3), 2)
    r = refute_gfm_on_instance(m, d, build_slim(d))
    assert r.gap == 0.0 or abs(r.gap) <= 1e-7


@given(st.integers(0, 10**6))
def test_sldba_and_slim_agree(seed):
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(1, 5), aps=("p0",), max_choices=2, source_labelled=True)
    a = random_nba(rng, rng.randint(1, 3), 1, density=0.4)
    assert abs(psat(m, build_slim(a)).value - psat(m, build_sldba(a)).value) < 1e-7


def test_chain_acceptance_counts_marked_bottom_components():
    from gfmkit.mdp import MarkovChain
    # 0 -> 1 (marked loop) or 2 (unmarked loop), equally likely; 3 is reject
    chain = MarkovChain(np.arange(3), np.array([0, 2, 3, 4, 5]),
                        np.array([1, 2, 1, 2, 3]), np.array([0.5, 0.5, 1, 1, 1]),
                        np.array([False, False, True, False, False]))
    assert np.allclose(chain_acceptance(chain)[:3], [0.5, 1.0, 0.0])


def test_report_fields(coin):
    rep = psat(coin, fixtures.automaton("universal_dba")).report()
    assert {"value", "mecs", "aecs", "product_states"} <= rep.keys()


def test_outcome_letters_make_a_deterministic_automaton_guess():
    # one fair coin whose outcome is the letter; the automaton remembers it
    b = MDPBuilder(("p",))
    s = b.state("s")
    b.add_choice(s, "flip", [(s, 0.5, 1), (s, 0.5, 0)])
    m = b.build(s)
    from gfmkit.automata import BuchiAutomaton
    last = BuchiAutomaton(("p",), 2, frozenset([0]),
                          ((0, 0, 0, True), (0, 1, 1, True), (1, 0, 0, True), (1, 1, 1, True)))
    # the successor is committed before the outcome, so half the mass leaks every step
    assert psat(m, last).value == 0.0
    with pytest.raises(MDPError):
        psemsat_via_reference(m, last, last)
