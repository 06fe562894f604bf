"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invariant or certificate failure.
"""
from __future__ import annotations

import argparse
import sys
from contextlib import ExitStack

from .adversary import AttackModel
from .harness import (
    FORMATS,
    SimConfig,
    attack_sweep,
    emit_report,
    emit_sweep,
    run_trials,
    verify_table1,
)
from .records import ConfigurationError, Secret

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _mode(text: str) -> tuple[str, int | None]:
    if text in ("equal", "random"):
        return text, None
    name, _, j = text.partition("=")
    if name == "differ-at" and j.isdigit():
        return name, int(j)
    raise argparse.ArgumentTypeError("mode must be equal, random or differ-at=J")


def _attack(text: str) -> AttackModel:
    try:
        return AttackModel.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _counts(text: str) -> list[int]:
    try:
        counts = [int(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None
    if not counts or min(counts) < 1:
        raise argparse.ArgumentTypeError("decoy counts must be positive")
    return counts


def _add_sim_flags(p: argparse.ArgumentParser, *, length: int | None, attack: str, trials: int) -> None:
    p.add_argument("--length", type=int, default=length, help="secret length L in bits")
    p.add_argument("--secret-a", help="Alice's bits, least-significant first")
    p.add_argument("--secret-b", help="Bob's bits, least-significant first")
    p.add_argument("--mode", type=_mode, default=("random", None),
                   help="equal | differ-at=J | random (ignored with explicit secrets)")
    p.add_argument("--decoys", type=int, default=None, help="decoys per channel (default L)")
    p.add_argument("--threshold", type=float, default=0.0, help="max tolerated decoy error rate")
    p.add_argument("--attack", type=_attack, default=_attack(attack),
                   help="none | intercept-resend | measure-resend=z|x | dishonest-alice")
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=FORMATS, default="human")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cavityqpc", description="Cavity-QED private comparison simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="Monte Carlo protocol runs")
    _add_sim_flags(run, length=None, attack="none", trials=1000)
    run.add_argument("--dump-transcript", metavar="PATH",
                     help="write every trial's public transcript (JSON lines)")
    run.add_argument("--dump-eve", metavar="PATH",
                     help="write the attacker's private records (debugging only)")

    v = sub.add_parser("verify-table1", help="exhaustive check of the comparison table")
    v.add_argument("--rows", action="store_true", help="include every checked row")

    sweep = sub.add_parser("attack-sweep", help="detection rate against decoy count")
    _add_sim_flags(sweep, length=1, attack="intercept-resend", trials=1000)
    sweep.add_argument("--decoy-counts", type=_counts, default=[1, 2, 5, 10, 20])
    return parser


def _sim_config(args) -> SimConfig:
    mode, j = args.mode
    length = args.length
    if args.secret_a is not None or args.secret_b is not None:
        if args.secret_a is None or args.secret_b is None:
            raise ConfigurationError("--secret-a and --secret-b must be given together")
        mode, j = "explicit", None
        if length is None:
            length = len(Secret.from_string(args.secret_a))
    if length is None:
        length = 8
    return SimConfig(
        length=length,
        mode=mode,
        differ_at=j,
        secret_a=args.secret_a,
        secret_b=args.secret_b,
        decoys=args.decoys,
        threshold=args.threshold,
        attack=args.attack,
        trials=args.trials,
        seed=args.seed,
        output_format=args.format,
    )


def _cmd_run(args) -> int:
    config = _sim_config(args)
    config.validate()
    with ExitStack() as stack:
        tfile = stack.enter_context(open(args.dump_transcript, "w")) if args.dump_transcript else None
        efile = stack.enter_context(open(args.dump_eve, "w")) if args.dump_eve else None

        def on_trial(t, out):
            if tfile is not None:
                tfile.write(f"# trial {t}\n")
                tfile.write(out.transcript.to_lines())
            if efile is not None:
                efile.write(f"# trial {t}\n")
                for rec in out.eve_records:
                    efile.write(rec.to_lines())

        stats = run_trials(config, on_trial if (tfile or efile) else None)
    sys.stdout.write(emit_report(stats, config.output_format))
    if stats.invariant_violations:
        print(f"invariant violated in {stats.invariant_violations} trial(s)", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_verify(args) -> int:
    cert = verify_table1()
    print(cert.to_json(include_rows=args.rows))
    return EXIT_OK if cert.passed else EXIT_INVARIANT


def _cmd_sweep(args) -> int:
    config = _sim_config(args)
    config.validate()
    rows = attack_sweep(config, args.decoy_counts)
    sys.stdout.write(emit_sweep(rows, config.output_format))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "verify-table1": _cmd_verify, "attack-sweep": _cmd_sweep}[args.command]
    try:
        return handler(args)
    except ConfigurationError as exc:
        print(f"cavityqpc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
