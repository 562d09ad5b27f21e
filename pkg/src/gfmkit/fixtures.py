"""Bundled example automata and models."""
from __future__ import annotations

from importlib import resources

from .automata import BuchiAutomaton
from .hoa import parse_hoa


def data_path(name: str):
    return resources.files("gfmkit") / "data" / name


def read_text(name: str) -> str:
    return data_path(name).read_text()


def automaton(name: str) -> BuchiAutomaton:
    """Load ``data/<name>.hoa``."""
    return parse_hoa(read_text(f"{name}.hoa"))


def names() -> list[str]:
    return sorted(p.name for p in resources.files("gfmkit").joinpath("data").iterdir() if p.is_file())


def corpus_names() -> list[str]:
    return sorted(p.name for p in data_path("corpus").iterdir() if p.name.endswith(".hoa"))


def corpus_automaton(name: str) -> BuchiAutomaton:
    return parse_hoa(data_path("corpus").joinpath(name).read_text())


def corpus_manifest() -> dict:
    import json

    return json.loads(data_path("corpus").joinpath("manifest.json").read_text())


def fg_conjunction_nba(num_aps: int) -> BuchiAutomaton:
    """Product NBA for ``FG p0 & ... & FG p{k-1}``.

    A state is the bitmask of conjuncts already committed to staying true.
    On each letter any subset of the enabled conjuncts may commit; only the
    all-committed state accepts.
    """
    full = (1 << num_aps) - 1
    trans = []
    for q in range(1 << num_aps):
        for a in range(1 << num_aps):
            if q & ~a & full:
                continue
            free = ~q & a & full
            sub = free
            while True:
                d = q | sub
                trans.append((q, a, d, q == full))
                if sub == 0:
                    break
                sub = (sub - 1) & free
    aps = tuple(f"p{i}" for i in range(num_aps))
    return BuchiAutomaton.build(aps, 1 << num_aps, [0], trans)
