import random

import pytest
from hypothesis import given, strategies as st

from gfmkit.parity import (EVEN, ODD, GameError, ParityGame, brute_force_solve, dump_game,
                           random_game, solve, strategy_wins)


@st.composite
def games(draw, max_states=7):
    rng = random.Random(draw(st.integers(0, 10**6)))
    return random_game(rng, rng.randint(1, max_states))


def test_validation():
    with pytest.raises(GameError):
        ParityGame((0, 2), ())
    with pytest.raises(GameError):
        ParityGame((0,), ((0, 0, 3),))
    with pytest.raises(GameError):
        ParityGame((0,), ((0, 1, 0),))
    with pytest.raises(GameError):
        ParityGame.from_sets([0], [0], [])


def test_dead_end_loses_for_owner():
    g = ParityGame((EVEN, ODD), ())
    sol = solve(g)
    assert sol.winning_odd == {0} and sol.winning_even == {1}


def test_top_color_decides():
    # even owns 0 and may loop with color 2 or move to 1, whose only loop has color 1
    g = ParityGame((EVEN, ODD), ((0, 0, 2), (0, 1, 0), (1, 1, 1)))
    sol = solve(g)
    assert sol.winning_even == {0} and sol.winning_odd == {1}
    assert sol.strategy_even[0] == 0


def test_odd_avoids_even_cycle():
    g = ParityGame((ODD, EVEN), ((0, 1, 0), (0, 0, 1), (1, 0, 2)))
    sol = solve(g)
    # odd can loop on 0 forever with color 1
    assert sol.winner(0) == ODD and sol.winner(1) == ODD


def test_from_sets_and_dump():
    g = ParityGame.from_sets([0], [1], [(0, 1, 2), (1, 0, 0)])
    assert g.states_even == {0} and g.states_odd == {1}
    assert dump_game(g) == "0 even -> 1 : 2\n1 odd -> 0 : 0\n"


@given(games())
def test_solver_matches_brute_force(g):
    a, b = solve(g), brute_force_solve(g)
    assert a.winning_even == b.winning_even
    assert a.winning_odd == b.winning_odd


@given(games())
def test_regions_partition_and_strategies_win(g):
    sol = solve(g)
    assert sol.winning_even | sol.winning_odd == set(range(g.num_states))
    assert not sol.winning_even & sol.winning_odd
    assert strategy_wins(g, EVEN, sol.strategy_even, sol.winning_even)
    assert strategy_wins(g, ODD, sol.strategy_odd, sol.winning_odd)


def test_strategy_wins_rejects_a_losing_strategy():
    g = ParityGame((EVEN,), ((0, 0, 1), (0, 0, 2)))
    assert strategy_wins(g, EVEN, {0: 1}, {0})
    assert not strategy_wins(g, EVEN, {0: 0}, {0})


def test_brute_force_size_limit():
    with pytest.raises(GameError):
        brute_force_solve(ParityGame((EVEN,) * 10, ()))
