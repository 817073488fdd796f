"""Command-line front end.

Four commands:

* ``run <file>`` — execute one scenario file; exit code reports the
  outcome (0 ok, 1 expectation failed, 2 parse error, 3 capability).
* ``matrix [dir]`` — run a scenario corpus (default: the bundled one)
  and emit the solution matrix report; nonzero exit when the corpus is
  incomplete or any scenario fails.
* ``attack <name>`` — replay a named attack and print its evidence;
  exit 0 iff the attack succeeded.
* ``privacy <protocol> <game>`` — run an unlinkability game and print
  the result record.

``--out FILE`` additionally writes the printed report to a file.
"""

from __future__ import annotations

import argparse
import inspect
import sys
from pathlib import Path

from pathtrace.attacks import ATTACKS, BoundedSearchError
from pathtrace.matrix import emit_matrix
from pathtrace.network import AdvModel, CapabilityError
from pathtrace.privacy import GameKind, PrivacyGame, UnsupportedGameError, run_game
from pathtrace.protocols.base import VerifierPolicyError
from pathtrace.scenario import EXIT_CAPABILITY, corpus_dir, run_scenario

_MODELS = {"AdvT": AdvModel.ADV_T, "AdvR": AdvModel.ADV_R}


def _emit(lines: list[str], out: str | None) -> None:
    text = "\n".join(lines)
    print(text)
    if out:
        Path(out).write_text(text + "\n")


def _cmd_run(args: argparse.Namespace) -> int:
    result = run_scenario(args.file)
    _emit(result.report_lines(), args.out)
    return result.exit_code


def _cmd_matrix(args: argparse.Namespace) -> int:
    directory = Path(args.dir) if args.dir else corpus_dir()
    code, lines = emit_matrix(directory)
    _emit(lines, args.out)
    return code


def _cmd_attack(args: argparse.Namespace) -> int:
    op = ATTACKS[args.name]
    kwargs = {}
    if args.seed is not None:
        if "seed" not in inspect.signature(op).parameters:
            print(f"attack {args.name} does not take a seed", file=sys.stderr)
            return 2
        kwargs["seed"] = args.seed
    try:
        outcome = op(**kwargs)
    except (CapabilityError, VerifierPolicyError, BoundedSearchError) as exc:
        print(f"capability: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    lines = outcome.summary_lines()
    run = outcome.run_result()
    if run is not None:
        lines += run.report_lines()
    _emit(lines, args.out)
    return 0 if outcome.succeeded else 1


def _cmd_privacy(args: argparse.Namespace) -> int:
    game = PrivacyGame(
        kind=GameKind(args.game),
        protocol=args.protocol,
        distinguisher=args.distinguisher,
        trials=args.trials,
        seed=args.seed,
        mode=args.mode,
        adversary=_MODELS[args.adversary],
        worlds=args.worlds,
    )
    try:
        result = run_game(game)
    except UnsupportedGameError as exc:
        print(f"capability: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    lines = result.report_lines()
    if args.trials < 100:
        lines.append("warning: fewer than 100 trials; not a reportable result")
    _emit(lines, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathtrace",
        description="Deterministic simulator for path-based traceability protocols.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario file")
    p_run.add_argument("file", help="scenario (.scn) file")
    p_run.add_argument("--out", help="also write the report to this file")
    p_run.set_defaults(func=_cmd_run)

    p_matrix = sub.add_parser("matrix", help="run a corpus and emit the solution matrix")
    p_matrix.add_argument(
        "dir", nargs="?", help="scenario directory (default: bundled corpus)"
    )
    p_matrix.add_argument("--out", help="also write the report to this file")
    p_matrix.set_defaults(func=_cmd_matrix)

    p_attack = sub.add_parser("attack", help="replay a named attack")
    p_attack.add_argument("name", choices=sorted(ATTACKS))
    p_attack.add_argument("--seed", type=int, help="override the attack's default seed")
    p_attack.add_argument("--out", help="also write the report to this file")
    p_attack.set_defaults(func=_cmd_attack)

    p_priv = sub.add_parser("privacy", help="run an unlinkability game")
    p_priv.add_argument("protocol")
    p_priv.add_argument("game", choices=[k.value for k in GameKind])
    p_priv.add_argument("--distinguisher", default="random")
    p_priv.add_argument("--trials", type=int, default=500)
    p_priv.add_argument("--seed", type=int, default=0)
    p_priv.add_argument("--mode", default="default")
    p_priv.add_argument("--adversary", choices=sorted(_MODELS), default="AdvT")
    p_priv.add_argument("--worlds", type=int, default=32)
    p_priv.add_argument("--out", help="also write the report to this file")
    p_priv.set_defaults(func=_cmd_privacy)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
