"""Regenerate or check the bundled certification corpus.

The corpus holds the figure fixtures plus seeded random NBAs picked to cover
every verdict.  ``manifest.json`` freezes the verdict for both references.
Run with ``--check`` to compare fresh verdicts against the frozen ones.
"""
from __future__ import annotations

import argparse
import json
import random
import sys

from gfmkit import fixtures
from gfmkit.automata import random_nba
from gfmkit.hoa import write_hoa
from gfmkit.simulation import certify_gfm

FIXTURES = ["fig1_nba", "fig3_nba", "fig4_A", "fig4_B", "fig5_sldba", "fig5_forgiving",
            "fg_p_nba", "fg_p_sldba", "milk_nba", "universal_dba"]
RANDOM_SEEDS = [0, 1, 2, 5, 6, 7, 8, 9, 10, 12, 22, 26, 104, 126, 144, 146, 156, 168, 239, 341]
REFERENCES = ("sldba", "slim")
BUDGET = 200_000


def corpus_random_nba(seed: int):
    rng = random.Random(seed)
    return random_nba(rng, rng.randint(2, 4), rng.randint(1, 2),
                      density=rng.choice([0.2, 0.3, 0.4]), accepting=0.3)


def corpus_sources() -> dict:
    out = {f"{name}.hoa": fixtures.automaton(name) for name in FIXTURES}
    out.update({f"rand_s{seed}.hoa": corpus_random_nba(seed) for seed in RANDOM_SEEDS})
    return out


def verdicts(aut) -> dict:
    return {ref: certify_gfm(aut, ref, budget=BUDGET).verdict for ref in REFERENCES}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--check", action="store_true")
    args = p.parse_args(argv)
    corpus = fixtures.data_path("corpus")
    manifest_path = corpus / "manifest.json"
    if args.check:
        frozen = json.loads(manifest_path.read_text())
        bad = 0
        for name, expected in frozen["verdicts"].items():
            got = verdicts(fixtures.corpus_automaton(name))
            status = "ok" if got == expected else "MISMATCH"
            bad += got != expected
            print(f"{status} {name}: {got}")
        return 1 if bad else 0
    manifest = {"budget": BUDGET, "verdicts": {}}
    for name, aut in corpus_sources().items():
        (corpus / name).write_text(write_hoa(aut, name=name[:-4]))
        manifest["verdicts"][name] = verdicts(aut)
        print(name, manifest["verdicts"][name])
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
