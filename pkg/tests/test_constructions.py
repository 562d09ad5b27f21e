import random

import pytest
from hypothesis import given, strategies as st

from gfmkit import fixtures
from gfmkit.automata import (bounded_language_equal, branching_degree, is_complete,
                             is_deterministic, is_limit_deterministic, random_nba)
from gfmkit.constructions import (JumpBlowUp, breakpoint_step, build_sldba, build_slim,
                                  jump_transitions, promote)
from gfmkit.simulation import SimLevel, decide


def fs(*xs):
    return frozenset(xs)


@st.composite
def nbas(draw):
    rng = random.Random(draw(st.integers(0, 10**6)))
    return random_nba(rng, rng.randint(1, 4), rng.randint(1, 2),
                      density=rng.choice([0.2, 0.3, 0.4]), accepting=0.3)


def names(a):
    return {a.name(q) for q in range(a.num_states)}


def test_breakpoint_step_waits_then_resets():
    fg = fixtures.automaton("fg_p_nba")  # 0 -t-> 0, 0 -p-> 1, 1 -p-> 1 accepting
    step = breakpoint_step(fg, (fs(0, 1), fs(1)), 1)
    assert step.defined and not step.accepting
    assert step.target == (fs(0, 1), fs(1))
    step = breakpoint_step(fg, (fs(1), fs()), 1)
    assert step.accepting and step.target == (fs(1), fs())


def test_breakpoint_step_undefined_on_empty_image():
    fg = fixtures.automaton("fg_p_nba")
    assert not breakpoint_step(fg, (fs(1), fs()), 0).defined


def test_promote_moves_second_set_into_first():
    fg = fixtures.automaton("fg_p_nba")
    step = promote(fg, (fs(0, 1), fs(1)), 1)
    assert step.defined and step.accepting
    assert step.target == (fs(1), fs())


def test_jump_transitions_enumerate_subsets():
    fg = fixtures.automaton("fg_p_nba")
    assert jump_transitions(fg, [0], 1) == {(fs(0), fs()), (fs(1), fs()), (fs(0, 1), fs())}
    assert jump_transitions(fg, [0], 1, singleton_only=True) == {(fs(0), fs()), (fs(1), fs())}


def test_jump_blow_up_guard():
    with pytest.raises(JumpBlowUp):
        build_sldba(fixtures.fg_conjunction_nba(5))


def test_fig3_slim_has_two_states():
    slim = build_slim(fixtures.automaton("fig3_nba"))
    assert names(slim) == {"({0,1},{})", "({0,1},{0})"}
    assert is_deterministic(slim)


def test_fig3_literal_promotions_add_a_state():
    literal = build_slim(fixtures.automaton("fig3_nba"), promote_from_empty=True)
    assert literal.num_states == 3


def test_fg_p_slim_shape():
    slim = build_slim(fixtures.automaton("fg_p_nba"))
    assert slim.num_states == 4
    assert branching_degree(slim) == 2
    # the promotion to ({1},{}) sits beside an accepting self-loop
    assert not is_limit_deterministic(slim)


def test_fg_p_sldba_reachable_states():
    sldba = build_sldba(fixtures.automaton("fg_p_nba"))
    assert sldba.num_states == 6
    assert is_limit_deterministic(sldba)


def test_complete_flag_adds_sink():
    slim = build_slim(fixtures.automaton("fg_p_nba"), complete=True)
    assert is_complete(slim)


def test_fg_conjunction_constructions():
    a = fixtures.fg_conjunction_nba(3)
    slim = build_slim(a)
    assert branching_degree(slim) <= 2
    assert bounded_language_equal(a, slim, max_bound=2) is None


@given(nbas(), st.booleans())
def test_slim_branching_at_most_two(a, literal):
    assert branching_degree(build_slim(a, promote_from_empty=literal)) <= 2


@given(nbas(), st.booleans())
def test_slim_preserves_language(a, literal):
    assert bounded_language_equal(a, build_slim(a, promote_from_empty=literal), max_bound=3) is None


@given(nbas())
def test_sldba_preserves_language_and_is_limit_deterministic(a):
    sldba = build_sldba(a)
    assert bounded_language_equal(a, sldba, max_bound=3) is None
    assert is_limit_deterministic(sldba)


@given(nbas(), st.booleans())
def test_slim_simulates_sldba(a, literal):
    slim = build_slim(a, promote_from_empty=literal)
    assert decide(SimLevel.SIM0, build_sldba(a), slim).holds
