"""Command-line entry point.

Machine-readable output goes to stdout as JSON, notes go to stderr.
Exit status: 0 ok/accepted, 1 violations found or statistic over threshold,
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from scipy import stats

from .errors import MalformedInput
from .protocol import BlockRecord, Registry, canonical_json, parse_json
from .sim import SimConfig, make_registry, run_campaign, run_round
from .vectors import golden_vectors
from .verifier import ObservedLog, audit_block, report_json

OK, FAILED, USAGE = 0, 1, 2

TAIL_PROBABILITY = 1e-4


def default_threshold(n_nodes: int) -> float:
    """Upper 1e-4 chi-square quantile for ``n_nodes - 1`` degrees of freedom, to 0.1."""
    return round(float(stats.chi2.isf(TAIL_PROBABILITY, max(n_nodes - 1, 1))), 1)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write(path: str, text: str) -> None:
    Path(path).write_text(text + "\n", encoding="ascii")


def cmd_simulate(config_path: str, record_path: str, log_path: str,
                 registry_path: str | None = None, round_index: int = 0) -> int:
    try:
        config = SimConfig.load(config_path)
    except MalformedInput as exc:
        _note(f"error: {exc}")
        return USAGE
    if not 0 <= round_index < config.rounds:
        _note(f"error: round {round_index} outside [0, {config.rounds})")
        return USAGE
    record, log = run_round(config, round_index)
    _write(record_path, record.to_json())
    _write(log_path, log.to_json())
    if registry_path:
        _write(registry_path, canonical_json(make_registry(config).to_dict()))
    _note(f"round {round_index}: {len(record.solver_list)} solvers, winner {record.winner_node_id}")
    return OK


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from exc


def cmd_audit(record_path: str, log_path: str, registry_path: str) -> int:
    try:
        record = BlockRecord.from_json(_read(record_path))
        log = ObservedLog.from_json(_read(log_path))
        registry = Registry.from_dict(parse_json(_read(registry_path)))
    except MalformedInput as exc:
        _note(f"error: {exc}")
        return USAGE
    violations = audit_block(record, log, registry)
    print(report_json(violations))
    if violations:
        _note(f"{len(violations)} violation(s); record rejected")
        return FAILED
    return OK


def cmd_stats(n_nodes: int, rounds: int, seed: int, threshold: float | None = None,
              workers: int = 1) -> int:
    try:
        config = SimConfig(n_nodes=n_nodes, master_seed=seed, rounds=rounds)
    except ValueError as exc:
        _note(f"error: {exc}")
        return USAGE
    if threshold is None:
        threshold = default_threshold(n_nodes)
    result = run_campaign(config, workers=workers)
    out = result.to_dict()
    out["threshold"] = threshold
    out["passed"] = result.chi_square < threshold
    print(json.dumps(out, indent=2))
    return OK if out["passed"] else FAILED


def cmd_vectors() -> int:
    print(json.dumps(golden_vectors(), indent=2))
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dftws", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulated round, write record and log")
    s.add_argument("--config", required=True)
    s.add_argument("--record", required=True, help="output path for the block record")
    s.add_argument("--log", required=True, help="output path for the observed log")
    s.add_argument("--registry", help="optional output path for the node registry")
    s.add_argument("--round", type=int, default=0, dest="round_index")

    a = sub.add_parser("audit", help="audit a block record against an observed log")
    a.add_argument("--record", required=True)
    a.add_argument("--log", required=True)
    a.add_argument("--registry", required=True)

    st = sub.add_parser("stats", help="winner-position fairness over honest rounds")
    st.add_argument("--nodes", type=int, required=True)
    st.add_argument("--rounds", type=int, required=True)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--threshold", type=float, default=None)
    st.add_argument("--workers", type=int, default=1)

    sub.add_parser("vectors", help="print golden conformance vectors")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if args.command == "simulate":
        return cmd_simulate(args.config, args.record, args.log, args.registry, args.round_index)
    if args.command == "audit":
        return cmd_audit(args.record, args.log, args.registry)
    if args.command == "stats":
        return cmd_stats(args.nodes, args.rounds, args.seed, args.threshold, args.workers)
    return cmd_vectors()


if __name__ == "__main__":
    sys.exit(main())
