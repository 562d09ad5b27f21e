import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gfmkit import fixtures
from gfmkit.automata import random_nba
from gfmkit.mdp import (MDPBuilder, MDPError, PositionalStrategy, induced_chain,
                        letter_projection, parse_explicit, product, random_mdp, write_explicit)

COIN = fixtures.read_text("fig1_coin.mdpx")


@st.composite
def mdps(draw, source_labelled=False):
    rng = random.Random(draw(st.integers(0, 10**6)))
    return random_mdp(rng, rng.randint(1, 5), aps=("p0", "p1"), source_labelled=source_labelled)


def test_parse_coin():
    m = parse_explicit(COIN)
    assert m.aps == ("a",)
    assert m.state_names == ("s_a", "s_b")
    assert m.num_choices == 2
    assert m.source_letters().tolist() == [1, 0]
    assert np.allclose(m.prob, 0.5)


def test_set_letters_and_fractions():
    m = parse_explicit("mdp-explicit 1\nap x y\ninit s\ntrans s go 1/2 s {x,y}\ntrans s go 1/2 s {}\n")
    assert sorted(m.letter.tolist()) == [0, 3]


@pytest.mark.parametrize("text, fragment", [
    ("ap a\n", "header"),
    ("mdp-explicit 1\nap a\ninit s\ntrans s go 0.5 s 1\n", "sum"),
    ("mdp-explicit 1\nap a\ninit s\ntrans s go 1 t 1\n", "dangling"),
    ("mdp-explicit 1\nap a\ninit s\ntrans s go 1 s 11\n", "declared"),
    ("mdp-explicit 1\nap a\ninit s\ntrans s go 1 s {b}\n", "unknown"),
    ("mdp-explicit 1\nap a\ntrans s go 1 s 1\n", "init"),
    ("mdp-explicit 1\nap a\ninit s\ntrans s go x s 1\n", "probability"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(MDPError, match=fragment):
        parse_explicit(text)


def test_builder_rejects_state_without_choices():
    b = MDPBuilder(("a",))
    b.state("s")
    with pytest.raises(MDPError):
        b.build(0)


@given(mdps())
def test_explicit_round_trip(m):
    back = parse_explicit(write_explicit(m))
    assert back.state_names == m.state_names
    assert np.array_equal(back.choice_start, m.choice_start)
    assert np.array_equal(back.dst, m.dst)
    assert np.allclose(back.prob, m.prob)
    assert np.array_equal(back.letter, m.letter)


def test_letter_projection():
    assert letter_projection(("x", "a", "y"), ("y", "a")) == [2, 1]
    with pytest.raises(MDPError):
        letter_projection(("a",), ("b",))


def test_product_of_coin_and_fig1():
    p = product(parse_explicit(COIN), fixtures.automaton("fig1_nba"))
    assert p.state_mdp[0] == 0 and p.state_aut[0] == 0
    assert p.num_states >= 2
    assert p.state_label(0).startswith("(s_a,")


def test_product_requires_single_initial_state():
    fig3 = fixtures.automaton("fig3_nba")
    m = parse_explicit(COIN)
    with pytest.raises(MDPError):
        product(m, fig3)


@given(mdps(), st.integers(0, 10**6))
def test_product_mass_and_marks(m, seed):
    a = random_nba(random.Random(seed), 3, 2, density=0.4)
    p = product(m, a)
    mass = p.choice_mass()
    assert np.all(mass <= 1 + 1e-9)
    # a product choice never carries more mass than its MDP choice
    assert np.all(mass > 0)
    for c in range(p.num_choices):
        q, mc = int(p.choice_q[c]), int(p.choice_mdp[c])
        s = int(p.state_mdp[p.choice_source()[c]])
        assert mc in m.choices(s)
        for j in p.entries(c):
            assert p.state_aut[p.dst[j]] == q


@given(mdps(), st.integers(0, 10**6))
def test_induced_chain_rows_are_stochastic(m, seed):
    a = random_nba(random.Random(seed), 3, 2, density=0.4)
    p = product(m, a)
    sigma = PositionalStrategy(np.array([p.choice_start[v] if p.choice_start[v] < p.choice_start[v + 1]
                                         else -1 for v in range(p.num_states)], dtype=np.int64))
    chain = induced_chain(p, sigma)
    sums = np.add.reduceat(chain.prob, chain.row_start[:-1])
    assert np.allclose(sums, 1.0)
    full = induced_chain(p, sigma, reachable_only=False)
    assert full.size >= chain.size


def test_random_mdp_source_labelled():
    m = random_mdp(random.Random(3), 6, source_labelled=True)
    assert m.source_letters() is not None
