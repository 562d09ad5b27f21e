import numpy as np
import pytest

from gfmkit import fixtures
from gfmkit.prism import PrismError, parse_prism_subset

SMALL = """
mdp
const int K = 2;
module m
  x : [0..K] init 0;
  f : bool init false;
  [up] x < K -> 0.25 : (x' = x + 1) + 0.75 : (x' = x);
  [flip] true -> (f' = !f);
endmodule
label "top" = x = K;
label "f" = f;
"""


def test_small_model():
    m = parse_prism_subset(SMALL)
    assert m.aps == ("top", "f")
    assert m.num_states == 6
    assert m.state_names[0] == "0,0"
    assert m.choice_names[:2] == ("up", "flip")
    assert m.source_letters() is not None
    top = [n for n in m.state_names if n.startswith("2,")]
    for name in top:
        s = m.state_names.index(name)
        assert [m.choice_names[c] for c in m.choices(s)] == ["flip"]
        assert m.source_letters()[s] & 1


def test_const_override():
    assert parse_prism_subset(SMALL, {"K": 3}).num_states == 8


def test_deadlock_gets_self_loop():
    m = parse_prism_subset("mdp\nmodule m\n x : [0..1] init 0;\n [] x = 0 -> (x' = 1);\nendmodule\n")
    s = m.state_names.index("1")
    (c,) = m.choices(s)
    assert m.choice_names[c] == "deadlock"
    assert m.dst[m.trans_start[c]] == s


def test_bundled_models():
    milk = parse_prism_subset(fixtures.read_text("milk.prism"))
    assert milk.num_states == 13
    assert milk.aps == ("p0", "p1", "p2", "p3", "p4")
    odd = parse_prism_subset(fixtures.read_text("oddChocolates.prism"), {"M": 2})
    assert odd.num_states == 3 ** 5
    assert odd.aps == ("odd",)
    letters = odd.source_letters()
    total = np.array([sum(int(v) for v in n.split(",")) for n in odd.state_names])
    assert np.array_equal(letters, total % 2)


def test_forgiveness_model_parses():
    m = parse_prism_subset(fixtures.read_text("forgiveness.prism"))
    assert m.num_states > 1
    assert np.allclose(np.add.reduceat(m.prob, m.trans_start[:-1]), 1.0)


@pytest.mark.parametrize("text, fragment", [
    ("mdp\nmodule m\n x : [0..1] init 0;\n [] true -> (x' = 2);\nendmodule\n", "range"),
    ("mdp\nmodule m\n x : [0..1] init 0;\n [] true -> 0.5 : (x' = 1);\nendmodule\n", "sum"),
    ("mdp\nmodule m\n x : [0..1] init 0;\n [] true -> (y' = 1);\nendmodule\n", "y"),
    ("mdp\nmodule m\nendmodule\n", "variables"),
    ("mdp\nmodule m\n x : [0..1] init 0;\n [] true -> (x' = 1)\nendmodule\n", ";"),
])
def test_errors(text, fragment):
    with pytest.raises(PrismError, match=fragment):
        parse_prism_subset(text)


def test_state_limit():
    with pytest.raises(PrismError, match="exceeds"):
        parse_prism_subset(SMALL, max_states=3)
