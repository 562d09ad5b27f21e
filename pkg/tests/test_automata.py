import random

import pytest
from hypothesis import given, strategies as st

from gfmkit import fixtures
from gfmkit.automata import (AutomatonError, BuchiAutomaton, LassoWord, accepts_lasso,
                             bounded_language_equal, branching_degree, is_complete,
                             is_deterministic, is_limit_deterministic, iter_lassos,
                             letter_from_bits, letter_to_bits, make_complete, random_nba,
                             rename_aps, trim)
from gfmkit.hoa import HoaError, parse_hoa, write_hoa


def word(prefix, cycle):
    return LassoWord(tuple(prefix), tuple(cycle))


@st.composite
def nbas(draw, max_states=4, max_aps=2):
    seed = draw(st.integers(0, 10**6))
    rng = random.Random(seed)
    return random_nba(rng, rng.randint(1, max_states), rng.randint(1, max_aps),
                      density=rng.choice([0.2, 0.4]), accepting=0.4)


def test_letter_bits_round_trip():
    assert letter_from_bits("10") == 1
    assert letter_from_bits("01") == 2
    assert letter_to_bits(6, 3) == "011"
    with pytest.raises(ValueError):
        letter_from_bits("1x")


def test_lasso_needs_cycle():
    with pytest.raises(ValueError):
        LassoWord((0,), ())


def test_constructor_validation():
    with pytest.raises(AutomatonError):
        BuchiAutomaton(("a",), 1, frozenset(), ())
    with pytest.raises(AutomatonError):
        BuchiAutomaton(("a",), 1, frozenset([0]), ((0, 2, 0, False),))
    with pytest.raises(AutomatonError):
        BuchiAutomaton(("a",), 1, frozenset([0]), ((0, 0, 1, False),))
    with pytest.raises(AutomatonError):
        BuchiAutomaton(("a",), 1, frozenset([0]), ((0, 0, 0, False), (0, 0, 0, True)))


def test_build_merges_duplicates():
    a = BuchiAutomaton.build(("a",), 1, [0], [(0, 0, 0, False), (0, 0, 0, True)])
    assert a.transitions == ((0, 0, 0, True),)


def test_fg_p_membership():
    a = fixtures.automaton("fg_p_nba")
    p, notp = 1, 0
    assert accepts_lasso(a, word([notp, notp], [p]))
    assert not accepts_lasso(a, word([p], [p, notp]))
    assert not accepts_lasso(a, word([], [notp]))


def test_properties_of_fixtures():
    det = fixtures.automaton("universal_dba")
    assert is_deterministic(det) and is_complete(det) and is_limit_deterministic(det)
    fg = fixtures.automaton("fg_p_nba")
    assert not is_deterministic(fg)
    assert is_limit_deterministic(fg)
    assert branching_degree(fg) == 2
    assert not is_limit_deterministic(fixtures.automaton("fig1_nba"))


def test_make_complete_adds_rejecting_sink():
    fg = fixtures.automaton("fg_p_nba")
    c = make_complete(fg)
    assert is_complete(c)
    assert c.num_states == fg.num_states + 1
    assert bounded_language_equal(fg, c) is None


def test_trim_drops_unreachable():
    a = BuchiAutomaton(("a",), 3, frozenset([0]), ((0, 0, 0, True), (2, 0, 1, False)))
    t = trim(a)
    assert t.num_states == 1 and t.transitions == ((0, 0, 0, True),)


def test_rename_aps_checks_arity():
    fg = fixtures.automaton("fg_p_nba")
    assert rename_aps(fg, ["odd"]).aps == ("odd",)
    with pytest.raises(AutomatonError):
        rename_aps(fg, ["x", "y"])


def test_bounded_language_equal_finds_separating_word():
    fg = fixtures.automaton("fg_p_nba")
    univ = rename_aps(fixtures.automaton("universal_dba"), list(fg.aps))
    w = bounded_language_equal(fg, univ)
    assert w is not None
    assert accepts_lasso(fg, w) != accepts_lasso(univ, w)
    assert bounded_language_equal(fg, fg) is None


def test_iter_lassos_count():
    # cycles of length 1..2 and prefixes of length 0..2 over two letters
    assert sum(1 for _ in iter_lassos(2, 2)) == (2 + 4) * (1 + 2 + 4)


@given(nbas())
def test_hoa_round_trip(a):
    assert parse_hoa(write_hoa(a)) == a


@given(nbas(max_states=3), st.data())
def test_bounded_equality_agrees_with_membership(a, data):
    b = random_nba(random.Random(data.draw(st.integers(0, 10**6))), 2, len(a.aps), density=0.4)
    w = bounded_language_equal(a, b, max_bound=2)
    if w is None:
        for lasso in iter_lassos(a.alphabet_size, min(2, a.num_states * b.num_states)):
            assert accepts_lasso(a, lasso) == accepts_lasso(b, lasso)
    else:
        assert accepts_lasso(a, w) != accepts_lasso(b, w)


@given(nbas())
def test_unrolled_lasso_is_same_word(a):
    rng = random.Random(len(a.transitions))
    k = a.alphabet_size
    w = word([rng.randrange(k) for _ in range(2)], [rng.randrange(k) for _ in range(3)])
    assert accepts_lasso(a, w) == accepts_lasso(a, w.unrolled(2))


@pytest.mark.parametrize("text, fragment", [
    ("HOA: v1\nStates: 1\nStart: 0\nAP: 1 \"a\"\nAcceptance: 2 Inf(0)&Inf(1)\n--BODY--\n--END--\n",
     "Acceptance"),
    ("HOA: v1\nStates: 1\nStart: 0\nAP: 1 \"a\"\nAcceptance: 1 Inf(0)\n--BODY--\nState: 0\n[0] 3\n--END--\n",
     "out of range"),
    ("HOA: v1\nStates: 1\nStart: 0\nAP: 1 \"a\"\nAcceptance: 1 Inf(0)\n--BODY--\nState: 0\n[1] 0\n--END--\n",
     "atomic proposition"),
])
def test_hoa_errors(text, fragment):
    with pytest.raises(HoaError) as err:
        parse_hoa(text)
    assert fragment.lower() in str(err.value).lower()
