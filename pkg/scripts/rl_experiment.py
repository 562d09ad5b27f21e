"""Slim versus minimal SLDBA for Q-learning on oddChocolates.

Runs the same hyperparameters over several seeds with both automata and
reports the first checkpoint at which the greedy policy is evaluated at or
above the threshold.
"""
from __future__ import annotations

import argparse
import csv
import json
import time
from pathlib import Path

from gfmkit import fixtures
from gfmkit.automata import rename_aps
from gfmkit.constructions import build_slim
from gfmkit.prism import parse_prism_subset
from gfmkit.rl import Hyperparams, make_env, q_learning

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "odd_chocolates.cfg"


def automata() -> dict:
    return {
        "slim": rename_aps(build_slim(fixtures.automaton("fg_p_nba")), ["odd"]),
        "sldba": rename_aps(fixtures.automaton("fg_p_sldba"), ["odd"]),
    }


def run(hp: Hyperparams, seeds, threshold: float = 0.95, curves: Path | None = None) -> dict:
    model = parse_prism_subset(fixtures.read_text("oddChocolates.prism"))
    results = {}
    for name, aut in automata().items():
        rows = []
        for seed in seeds:
            start = time.perf_counter()
            params = Hyperparams(**{**hp.__dict__, "seed": seed})
            learned = q_learning(make_env(model, aut, params), params)
            first = learned.first_success(threshold)
            final = learned.evaluations[-1][1] if learned.evaluations else None
            held = [v >= threshold for _, v in learned.evaluations]
            rows.append({"seed": seed, "first_success": first, "final": final,
                         "held": round(sum(held) / len(held), 3) if held else None,
                         "steps": learned.steps, "seconds": round(time.perf_counter() - start, 2)})
            if curves is not None:
                curves.mkdir(parents=True, exist_ok=True)
                with open(curves / f"{name}_seed{seed}.csv", "w", newline="") as fh:
                    learned.write_curve(fh)
        results[name] = {"successes": sum(r["first_success"] is not None for r in rows), "runs": rows}
    return results


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(CONFIG))
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.95)
    p.add_argument("--tie-break", choices=["lowest", "random"])
    p.add_argument("--curves", type=Path, help="directory for per-run CSV curves")
    p.add_argument("--json", action="store_true")
    args = p.parse_args(argv)
    hp = Hyperparams.load(args.config, tie_break=args.tie_break)
    results = run(hp, range(args.seeds), args.threshold, args.curves)
    if args.json:
        print(json.dumps(results, indent=2))
        return
    for name, res in results.items():
        print(f"{name}: {res['successes']}/{args.seeds} seeds reach {args.threshold}")
        for r in res["runs"]:
            print(f"  seed {r['seed']}: first={r['first_success']} final={r['final']} "
                  f"held={r['held']} steps={r['steps']} {r['seconds']}s")


if __name__ == "__main__":
    main()
