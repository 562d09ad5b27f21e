import random

import pytest

from gfmkit import fixtures
from gfmkit.automata import is_deterministic
from gfmkit.constructions import build_sldba
from gfmkit.mdp import random_mdp
from gfmkit.model_check import refute_gfm_on_instance
from gfmkit.simulation import certify_gfm

MANIFEST = fixtures.corpus_manifest()
NAMES = sorted(MANIFEST["verdicts"])


def test_corpus_is_complete():
    assert len(NAMES) == 30
    assert fixtures.corpus_names() == NAMES


def test_corpus_covers_every_verdict():
    seen = {v for entry in MANIFEST["verdicts"].values() for v in entry.values()}
    assert {"det", "sim0", "sim1", "sim2", "nosim"} <= seen


@pytest.mark.parametrize("name", NAMES)
def test_frozen_verdicts(name):
    aut = fixtures.corpus_automaton(name)
    for ref, verdict in MANIFEST["verdicts"][name].items():
        assert certify_gfm(aut, ref, budget=MANIFEST["budget"]).verdict == verdict
    if "det" in MANIFEST["verdicts"][name].values():
        assert is_deterministic(aut)


@pytest.mark.parametrize("name", [n for n in NAMES if MANIFEST["verdicts"][n]["sldba"] != "nosim"])
def test_certified_corpus_survives_refutation(name):
    aut = fixtures.corpus_automaton(name)
    ref = build_sldba(aut)
    rng = random.Random(name)
    for _ in range(5):
        m = random_mdp(rng, rng.randint(1, 6), aps=aut.aps, source_labelled=True)
        assert not refute_gfm_on_instance(m, aut, ref, check_language=False).refuted
