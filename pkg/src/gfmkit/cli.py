"""Command-line front end.

Exit codes: 0 success, 1 the property fails (``nosim`` or refuted),
2 usage or input error, 3 resource guard hit (game budget, memory).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .automata import (AutomatonError, BuchiAutomaton, branching_degree, is_complete,
                       is_deterministic, is_limit_deterministic, rename_aps)
from .constructions import build_sldba, build_slim
from .hoa import HoaError, read_hoa_file, write_hoa
from .mdp import MDPError, parse_explicit
from .model_check import ReferenceMismatch, psat, refute_gfm_on_instance
from .parity import dump_game
from .prism import PrismError, read_prism_file
from .rl import Hyperparams, evaluate_policy, make_env, q_learning
from .simulation import (UPDATE_RULES, BudgetExceeded, SimLevel, build_game, build_sim2,
                         certify_gfm, decide)

EXIT_OK, EXIT_FAILS, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, sort_keys=True) if args.json else text)


def _load_automaton(path: str, aps=None) -> BuchiAutomaton:
    aut = read_hoa_file(path)
    if aps:
        names = [s.strip() for s in aps.split(",")]
        if len(names) != len(aut.aps):
            raise UsageError(f"--aps gives {len(names)} names for {len(aut.aps)} propositions")
        aut = rename_aps(aut, names)
    return aut


def _parse_consts(items) -> dict:
    consts = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--const expects NAME=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        consts[key.strip()] = float(value) if "." in value else int(value)
    return consts


def _load_model(path: str, consts=None):
    if Path(path).suffix == ".prism":
        return read_prism_file(path, _parse_consts(consts))
    if consts:
        raise UsageError("--const only applies to PRISM models")
    return parse_explicit(Path(path).read_text())


# -- commands -------------------------------------------------------------------

def cmd_inspect(args) -> int:
    a = _load_automaton(args.automaton)
    props = {
        "states": a.num_states,
        "transitions": len(a.transitions),
        "accepting_transitions": len(a.accepting),
        "aps": list(a.aps),
        "initial": sorted(a.initial),
        "deterministic": is_deterministic(a),
        "complete": is_complete(a),
        "limit_deterministic": is_limit_deterministic(a),
        "branching_degree": branching_degree(a),
    }
    _emit(args, props, "\n".join(f"{k}: {v}" for k, v in props.items()))
    return EXIT_OK


def _cmd_construct(args, build) -> int:
    a = _load_automaton(args.automaton)
    out = build(a, complete=args.complete)
    text = write_hoa(out)
    if args.output:
        Path(args.output).write_text(text)
        _emit(args, {"states": out.num_states, "output": args.output},
              f"wrote {out.num_states} states to {args.output}")
    elif args.json:
        _emit(args, {"states": out.num_states, "hoa": text}, "")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_slim(args) -> int:
    return _cmd_construct(args, build_slim)


def cmd_sldba(args) -> int:
    return _cmd_construct(args, build_sldba)


def cmd_simulate(args) -> int:
    spoiler = _load_automaton(args.spoiler)
    duplicator = _load_automaton(args.duplicator)
    level = SimLevel(args.level)
    d = decide(level, spoiler, duplicator, args.budget, args.update)
    if args.dump_game:
        if level == SimLevel.SIM2:
            sg = build_sim2(spoiler, duplicator, args.budget, args.update)
        else:
            sg = build_game(level, spoiler, duplicator, args.budget)
        Path(args.dump_game).write_text(dump_game(sg.game))
    payload = {"level": str(level), "holds": d.holds, "game_states": d.game_states,
               "game_edges": d.game_edges}
    verdict = "holds" if d.holds else "fails"
    _emit(args, payload, f"{level}: {verdict} ({d.game_states} game states, {d.game_edges} edges)")
    return EXIT_OK if d.holds else EXIT_FAILS


def _certify_one(path: str, reference: str, budget, update: str) -> dict:
    a = read_hoa_file(path)
    ref = reference if reference in ("slim", "sldba") else read_hoa_file(reference)
    return certify_gfm(a, ref, budget, name=path, update=update).to_dict()


def _verdict_exit(verdict: str) -> int:
    if verdict.startswith("timeout"):
        return EXIT_RESOURCE
    return EXIT_FAILS if verdict == "nosim" else EXIT_OK


def _format_report(rep: dict) -> str:
    levels = ", ".join(f"{lv['level']}={lv['holds']}" for lv in rep["levels"])
    return f"{rep['input']}: {rep['verdict']}" + (f" [{levels}]" if levels else "")


def cmd_certify(args) -> int:
    if args.batch:
        files = sorted(str(p) for p in Path(args.batch).glob("*.hoa"))
        if not files:
            raise UsageError(f"no .hoa files in {args.batch}")
        jobs = args.jobs or os.cpu_count() or 1
        work = [(f, args.reference, args.budget, args.update) for f in files]
        if jobs == 1:
            reports = [_certify_one(*w) for w in work]
        else:
            with ProcessPoolExecutor(jobs) as pool:
                reports = list(pool.map(_certify_one, *zip(*work)))
        _emit(args, {"reports": reports}, "\n".join(_format_report(r) for r in reports))
        return max(_verdict_exit(r["verdict"]) for r in reports)
    if not args.automaton:
        raise UsageError("certify needs an automaton or --batch DIR")
    rep = _certify_one(args.automaton, args.reference, args.budget, args.update)
    _emit(args, rep, _format_report(rep))
    return _verdict_exit(rep["verdict"])


def cmd_mc(args) -> int:
    m = _load_model(args.model, args.const)
    a = _load_automaton(args.automaton, args.aps)
    if args.ref is None:
        r = psat(m, a, args.tol)
        _emit(args, {"psat": r.value, **r.report()}, f"psat: {r.value:.10g}")
        return EXIT_OK
    ref = _load_automaton(args.ref, args.aps)
    res = refute_gfm_on_instance(m, a, ref, args.tol, check_language=not args.no_language_check)
    payload = {"psat": res.psat.value, "psemsat": res.psemsat.value, "gap": res.gap,
               "refuted": res.refuted, "verdict": res.verdict}
    _emit(args, payload, f"psat: {res.psat.value:.10g}\npsemsat: {res.psemsat.value:.10g}\n"
                         f"verdict: {res.verdict}")
    return EXIT_FAILS if res.refuted else EXIT_OK


def cmd_learn(args) -> int:
    m = _load_model(args.model, args.const)
    a = _load_automaton(args.automaton, args.aps)
    overrides = {"seed": args.seed, "ep_count": args.episodes, "eval_every": args.eval_every}
    if args.config:
        hp = Hyperparams.load(args.config, **overrides)
    else:
        hp = Hyperparams(**{k: v for k, v in overrides.items() if v is not None})
    env = make_env(m, a, hp)
    run = q_learning(env, hp)
    value = evaluate_policy(env, run.policy)
    if args.curve:
        with open(args.curve, "w", newline="") as fh:
            run.write_curve(fh)
    payload = {"evaluated_probability": value, "episodes": hp.ep_count, "steps": run.steps,
               "visited_states": len(run.policy.q)}
    _emit(args, payload, f"evaluated probability: {value:.10g}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    p = argparse.ArgumentParser(prog="gfmkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("inspect", parents=[common], help="automaton properties")
    s.add_argument("automaton")
    s.set_defaults(func=cmd_inspect)

    for name, func, doc in (("slim", cmd_slim, "slim GFM automaton"),
                            ("sldba", cmd_sldba, "suitable limit-deterministic automaton")):
        s = sub.add_parser(name, parents=[common], help=doc)
        s.add_argument("automaton")
        s.add_argument("-o", "--output")
        s.add_argument("--complete", action="store_true", help="add a rejecting sink")
        s.set_defaults(func=func)

    budget_help = "game-state budget (default from GFMKIT_BUDGET or 5000000)"
    s = sub.add_parser("simulate", parents=[common], help="decide a simulation game")
    s.add_argument("--level", type=int, choices=[0, 1, 2], required=True)
    s.add_argument("spoiler")
    s.add_argument("duplicator")
    s.add_argument("--dump-game", metavar="FILE")
    s.add_argument("--budget", type=int, help=budget_help)
    s.add_argument("--update", choices=UPDATE_RULES, default="charged")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("certify", parents=[common], help="certify good-for-MDPs by simulation")
    s.add_argument("automaton", nargs="?")
    s.add_argument("--reference", default="sldba",
                   help="slim, sldba, or a HOA file with the same language")
    s.add_argument("--budget", type=int, help=budget_help)
    s.add_argument("--update", choices=UPDATE_RULES, default="charged")
    s.add_argument("--batch", metavar="DIR")
    s.add_argument("--jobs", type=int, help="worker processes for --batch")
    s.set_defaults(func=cmd_certify)

    model_args = argparse.ArgumentParser(add_help=False)
    model_args.add_argument("model", help=".prism or explicit .mdpx model")
    model_args.add_argument("automaton")
    model_args.add_argument("--const", action="append", metavar="NAME=VALUE")
    model_args.add_argument("--aps", help="comma-separated names replacing the automaton's propositions")

    s = sub.add_parser("mc", parents=[common, model_args], help="model check an MDP")
    s.add_argument("--ref", help="GFM reference automaton with the same language")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--no-language-check", action="store_true")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("learn", parents=[common, model_args], help="Q-learning on the product")
    s.add_argument("--config", help="key = value hyperparameter file")
    s.add_argument("--seed", type=int)
    s.add_argument("--episodes", type=int)
    s.add_argument("--eval-every", type=int)
    s.add_argument("--curve", metavar="CSV")
    s.set_defaults(func=cmd_learn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, HoaError, PrismError, MDPError, AutomatonError, ReferenceMismatch,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
