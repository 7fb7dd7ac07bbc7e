"""
TrapTP simulator command line entry point.
"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from app.context import configure_logging
from app.exceptions import ConfigError, TrapTPError
from app.models.circuit import CircuitDesc
from app.models.game import GameKind, GameOptions, SchemeName
from app.models.log import ComputationLog, canonical_json
from app.services.adversaries import builtin_adversaries
from app.services.config_service import Settings, config_service, parse_budgets
from app.services.experiment_service import Experiment, ExperimentReport, experiment_service
from app.services.selftest_service import selftest_service
from app.services.serialization_service import serialization_service
from app.services.statevector import qsim
from app.transport.client import DelegationClient, input_state
from app.transport.server import DelegationServer

logger = logging.getLogger("app.cli")

DEFAULT_CIRCUITS = 200


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="traptp", description="Verifiable quantum FHE (TrapTP) simulator")
    parser.add_argument("--seed", type=int, help="Master seed (TRAPTP_SEED wins over this flag)")
    parser.add_argument("--level", type=int, help="Concatenation level of the Steane code")
    parser.add_argument("--budgets", help="Resource budgets t,p,h")
    parser.add_argument("--addr", help="Server address host:port")
    sub = parser.add_subparsers(dest="command", required=True)

    selftest = sub.add_parser("selftest", help="Run every module's invariant suite")
    selftest.add_argument("--vectors", type=Path, help="MAC test vector file")

    run = sub.add_parser("run", help="Run an acceptance experiment")
    run.add_argument("experiment", choices=Experiment.ALL)
    run.add_argument("--trials", type=int, help="Trials (circuits for correctness)")
    run.add_argument("--adversary", default="honest", choices=sorted(builtin_adversaries()))
    run.add_argument("--game", default=GameKind.IND_VER.value, choices=[k.value for k in GameKind])
    run.add_argument("--variant", default=SchemeName.TRAPTP.value, choices=[s.value for s in SchemeName])
    run.add_argument("--weight", type=int, default=1, help="Attack weight")
    run.add_argument("--basis", default="X", choices=["X", "Z"], help="Attack Pauli kind")
    run.add_argument("--circuit", help="Circuit file for the game (default: X 0)")
    run.add_argument("--csv", type=Path, help="Write the per-trial CSV here")
    run.add_argument("--workers", type=int, default=0, help="Dispatch batches to this many Celery workers")

    serve = sub.add_parser("serve", help="Run the evaluation server")
    serve.add_argument("--tamper-log", action="store_true", help="Flip one byte of every returned log")

    connect = sub.add_parser("connect", help="Delegate a circuit to a server")
    connect.add_argument("--circuit", required=True, help="Circuit file, or inline text such as 'H 0; MEAS 0 X'")
    connect.add_argument("--input", help="Input string over 0, 1, +, - (default all zeros)")
    connect.add_argument("--log-out", type=Path, help="Save the server's log here")

    dump = sub.add_parser("dump-log", help="Pretty-print a computation log")
    dump.add_argument("path", type=Path)
    return parser


def load_settings(args: argparse.Namespace) -> Settings:
    overrides = {"seed": args.seed, "level": args.level, "addr": args.addr}
    if args.budgets:
        overrides.update(parse_budgets(args.budgets))
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    return config_service.load(**overrides)


def read_circuit(source: str) -> CircuitDesc:
    path = Path(source)
    return CircuitDesc.from_text(path.read_text(encoding="utf-8") if path.is_file() else source)


def cmd_selftest(args: argparse.Namespace, settings: Settings) -> int:
    report = selftest_service.run(settings.seed, args.vectors)
    sys.stdout.write(report.to_text())
    return report.exit_code


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    if args.experiment == Experiment.CORRECTNESS:
        count = args.trials or DEFAULT_CIRCUITS
        if args.workers:
            from worker.game_tasks import dispatch_correctness

            report = dispatch_correctness(settings.seed, count, args.workers)
        else:
            report = experiment_service.run_correctness(count, settings.seed, settings.level)
    elif args.experiment == Experiment.ATTACK_STATS:
        report = experiment_service.run_attack_stats(args.weight, args.basis, settings.trials, settings.seed, settings.level)
    else:
        options = game_options(args, settings)
        if args.workers:
            from worker.game_tasks import dispatch_trials

            stats = dispatch_trials(args.game, args.variant, args.adversary, settings.trials, settings.seed, options, args.workers)
            report = experiment_service.run_game(stats=stats)
        else:
            report = experiment_service.run_game(args.game, args.variant, args.adversary, settings.trials, settings.seed, options)
    return emit(report, args.csv)


def game_options(args: argparse.Namespace, settings: Settings) -> GameOptions:
    t, p, h = settings.budgets
    fields = {"level": settings.level, "budget_t": t, "budget_p": p, "budget_h": h, "weight": args.weight, "basis": args.basis}
    if args.circuit:
        circuit = read_circuit(args.circuit)
        fields.update(circuit=circuit.to_text(), n_wires=circuit.n_wires)
    try:
        return GameOptions(**fields)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def emit(report: ExperimentReport, csv_path: Optional[Path]) -> int:
    if csv_path is not None:
        report.write_csv(csv_path)
    sys.stdout.write("\n".join(report.summary_lines()) + "\n")
    return 0 if report.passed in (None, True) else 1


def cmd_serve(args: argparse.Namespace, settings: Settings) -> int:
    server = DelegationServer(settings, tamper_log=args.tamper_log)
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        logger.info(f"Server stopped sessions={server.sessions}")
    return 0


def cmd_connect(args: argparse.Namespace, settings: Settings) -> int:
    circuit = read_circuit(args.circuit)
    client = DelegationClient(settings)
    outcome = asyncio.run(client.delegate(circuit, input_state(args.input, circuit.n_wires)))
    if args.log_out is not None:
        args.log_out.write_text(outcome.log_text, encoding="latin-1")
    result = outcome.result
    lines = [f"verdict={'acc' if result.accepted else 'rej'}"]
    lines.extend(f"bit wire={w} value={b}" for w, b in sorted(result.bits.items()))
    if result.quantum_wires:
        lines.append(f"state wires={','.join(str(w) for w in result.quantum_wires)}")
        lines.append(qsim.dump_state(result.state).rstrip("\n"))
    if not result.accepted:
        lines.append(f"reason={result.reason}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0 if result.accepted else 2


def cmd_dump_log(args: argparse.Namespace, settings: Settings) -> int:
    """Accepts plain log text or a serialized LOG record."""
    raw = args.path.read_bytes()
    text = serialization_service.decode_log_text(raw) if raw.startswith(b"TTPR") else raw.decode("latin-1")
    log = ComputationLog.from_text(text)
    for entry in log:
        inputs = ",".join(entry.inputs) or "-"
        sys.stdout.write(
            f"{entry.seq:>4} {entry.kind.value:<12} {entry.function_id:<24} in={inputs} "
            f"digest={entry.digest} payload={canonical_json(entry.payload)}\n"
        )
    sys.stdout.write(f"entries={len(log)}\n")
    return 0


COMMANDS = {
    "selftest": cmd_selftest,
    "run": cmd_run,
    "serve": cmd_serve,
    "connect": cmd_connect,
    "dump-log": cmd_dump_log,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args)
    except ConfigError as e:
        configure_logging()
        logger.error(f"Invalid configuration error={e}")
        return 2
    configure_logging(settings.log_level)
    try:
        return COMMANDS[args.command](args, settings)
    except TrapTPError as e:
        logger.error(f"Command failed command={args.command} error={e}")
        return 2
    except OSError as e:
        logger.error(f"Command failed command={args.command} error={e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
