"""Certification verdict statistics over seeded random NBAs.

Stands in for a translator-generated formula corpus: random automata are
certified against both references and verdicts are tallied, along with
game sizes and timings.
"""
from __future__ import annotations

import argparse
import collections
import json
import random
import time

from gfmkit.automata import random_nba
from gfmkit.simulation import certify_gfm


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=300)
    p.add_argument("--max-states", type=int, default=4)
    p.add_argument("--aps", type=int, default=2)
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    args = p.parse_args(argv)
    tallies = {ref: collections.Counter() for ref in ("sldba", "slim")}
    seconds = collections.Counter()
    largest = collections.Counter()
    for i in range(args.count):
        rng = random.Random(args.seed * 1_000_003 + i)
        a = random_nba(rng, rng.randint(1, args.max_states), rng.randint(1, args.aps),
                       density=rng.choice([0.2, 0.3, 0.4]), accepting=0.3)
        for ref in tallies:
            start = time.perf_counter()
            rep = certify_gfm(a, ref, budget=args.budget)
            seconds[ref] += time.perf_counter() - start
            tallies[ref][rep.verdict] += 1
            sizes = [lv.game_states or 0 for lv in rep.levels]
            largest[ref] = max(largest[ref], max(sizes, default=0))
    summary = {ref: {"verdicts": dict(t), "seconds": round(seconds[ref], 2),
                     "largest_game": largest[ref]} for ref, t in tallies.items()}
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
        return
    for ref, s in summary.items():
        counts = ", ".join(f"{k}={v}" for k, v in sorted(s["verdicts"].items()))
        print(f"{ref}: {counts}  ({s['seconds']}s, largest game {s['largest_game']} states)")


if __name__ == "__main__":
    main()
