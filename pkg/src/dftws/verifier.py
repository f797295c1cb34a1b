"""Independent audit of a published block record.

Any node can rerun these checks using the record, its own log of what it
saw on the wire, and the identity registry. Every check that fails is
reported; the audit does not stop at the first finding.
"""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from . import codec
from .errors import MalformedInput
from .protocol import (
    BlockProblem,
    BlockRecord,
    SolutionSubmission,
    canonical_json,
    make_randomness_commitment,
    make_solution_commitment,
    node_sort_key,
    parse_json,
    selection_for,
    submission_attests,
)

RA = "RA"


class ViolationCode(str, enum.Enum):
    COMMITMENT_MISMATCH = "COMMITMENT_MISMATCH"
    SIGNATURE_INVALID = "SIGNATURE_INVALID"
    LIST_UNSORTED = "LIST_UNSORTED"
    DUPLICATE_NODE = "DUPLICATE_NODE"
    OMITTED_SOLVER = "OMITTED_SOLVER"
    EXTRANEOUS_SOLVER = "EXTRANEOUS_SOLVER"
    WINNER_INDEX_MISMATCH = "WINNER_INDEX_MISMATCH"
    MODAL_SOLUTION_MISMATCH = "MODAL_SOLUTION_MISMATCH"
    LATE_SUBMISSION_INCLUDED = "LATE_SUBMISSION_INCLUDED"
    EMPTY_LIST = "EMPTY_LIST"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    detail: str
    offender: str = RA

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code.value, "offender": self.offender, "detail": self.detail}


def report_json(violations: Sequence[Violation]) -> str:
    return canonical_json([v.to_dict() for v in violations])


@dataclass(frozen=True)
class ObservedLog:
    """Announcement plus every solution broadcast one node witnessed, in tick order."""

    announcement: BlockProblem
    broadcasts: tuple[SolutionSubmission, ...] = ()
    announcement_tick: int = 0

    def __post_init__(self) -> None:
        ticks = [self.announcement_tick] + [b.broadcast_tick for b in self.broadcasts]
        if any(a > b for a, b in zip(ticks, ticks[1:])):
            raise MalformedInput("observed log ticks must be non-decreasing")

    def timely(self) -> list[SolutionSubmission]:
        return [b for b in self.broadcasts if b.broadcast_tick <= self.announcement.deadline_tick]

    def to_list(self) -> list[dict[str, Any]]:
        p = self.announcement
        events: list[dict[str, Any]] = [
            {
                "tick": self.announcement_tick,
                "kind": "announcement",
                "prev_block_hash": p.prev_block_hash,
                "commitment_s": p.commitment_s,
                "problem_payload": p.problem_payload,
                "deadline_tick": p.deadline_tick,
            }
        ]
        for b in self.broadcasts:
            events.append(
                {
                    "tick": b.broadcast_tick,
                    "kind": "solution",
                    "node_id": b.node_id,
                    "solution_commitment": b.solution_commitment,
                    "signature": b.signature,
                }
            )
        return events

    def to_json(self) -> str:
        return canonical_json(self.to_list())

    @classmethod
    def from_list(cls, events: Any) -> ObservedLog:
        if not isinstance(events, list) or not events:
            raise MalformedInput("observed log must be a non-empty JSON array")
        announcement = None
        announcement_tick = 0
        broadcasts = []
        try:
            for ev in events:
                tick = ev["tick"]
                if isinstance(tick, bool) or not isinstance(tick, int):
                    raise MalformedInput("event tick must be an integer")
                if ev["kind"] == "announcement":
                    if announcement is not None:
                        raise MalformedInput("observed log has more than one announcement")
                    announcement = BlockProblem(
                        prev_block_hash=codec.require_digest(ev["prev_block_hash"]),
                        commitment_s=codec.require_digest(ev["commitment_s"]),
                        problem_payload=str(ev["problem_payload"]),
                        deadline_tick=int(ev["deadline_tick"]),
                    )
                    announcement_tick = tick
                elif ev["kind"] == "solution":
                    broadcasts.append(
                        SolutionSubmission(
                            node_id=str(ev["node_id"]),
                            solution_commitment=codec.require_digest(ev["solution_commitment"]),
                            signature=codec.require_signature(ev["signature"]),
                            broadcast_tick=tick,
                        )
                    )
                else:
                    raise MalformedInput(f"unknown event kind {ev['kind']!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MalformedInput):
                raise
            raise MalformedInput(f"bad observed-log event: {exc}") from exc
        if announcement is None:
            raise MalformedInput("observed log has no announcement")
        return cls(announcement, tuple(broadcasts), announcement_tick)

    @classmethod
    def from_json(cls, text: str) -> ObservedLog:
        return cls.from_list(parse_json(text))


def verify_randomness_reveal(
    record: BlockRecord, announcement: BlockProblem | None = None
) -> Violation | None:
    """Does the revealed randomness open the commitment the RA announced?

    With an ``announcement`` the record's ``s`` and previous block hash must
    also match what was announced, otherwise an RA could swap in a fresh
    commitment together with rerolled bytes.
    """
    p = record.problem
    if announcement is not None and (
        announcement.commitment_s != p.commitment_s
        or announcement.prev_block_hash != p.prev_block_hash
    ):
        return Violation(
            ViolationCode.COMMITMENT_MISMATCH,
            "record commitment_s / prev_block_hash differ from the announced problem",
        )
    if make_randomness_commitment(p.prev_block_hash, record.reveal.random_bytes_hex) != p.commitment_s:
        return Violation(
            ViolationCode.COMMITMENT_MISMATCH,
            "keccak(prev_block_hash + random_bytes_hex) != commitment_s",
        )
    return None


def verify_solver_list(record: BlockRecord, registry: Mapping[str, bytes]) -> list[Violation]:
    entries = record.solver_list
    if not entries:
        return [Violation(ViolationCode.EMPTY_LIST, "solver list is empty; no winner")]
    out: list[Violation] = []
    keys = [node_sort_key(e.node_id) for e in entries]
    for i, (a, b) in enumerate(zip(keys, keys[1:])):
        if a > b:
            out.append(
                Violation(
                    ViolationCode.LIST_UNSORTED,
                    f"entry {i} ({entries[i].node_id}) sorts after entry {i + 1} ({entries[i + 1].node_id})",
                )
            )
    counts = Counter(e.node_id for e in entries)
    for node_id in sorted((n for n, c in counts.items() if c > 1), key=node_sort_key):
        out.append(
            Violation(ViolationCode.DUPLICATE_NODE, f"{node_id} listed {counts[node_id]} times")
        )

    solution_hash = record.reveal.solution_hash
    expected_commitment = make_solution_commitment(solution_hash)
    message = bytes.fromhex(solution_hash)
    for i, e in enumerate(entries):
        pub = registry.get(e.node_id)
        if pub is None:
            out.append(
                Violation(ViolationCode.EXTRANEOUS_SOLVER, f"entry {i}: {e.node_id} is not registered")
            )
            continue
        if e.commitment != expected_commitment:
            out.append(
                Violation(
                    ViolationCode.SIGNATURE_INVALID,
                    f"entry {i}: {e.node_id} committed to a different solution",
                    e.node_id,
                )
            )
        elif not codec.verify(pub, message, e.signature):
            out.append(
                Violation(
                    ViolationCode.SIGNATURE_INVALID,
                    f"entry {i}: {e.node_id} signature does not cover the revealed solution hash",
                    e.node_id,
                )
            )
    return out


def verify_completeness(
    record: BlockRecord, log: ObservedLog, registry: Mapping[str, bytes]
) -> list[Violation]:
    """Compare the published list with this node's own observations."""
    out: list[Violation] = []
    deadline = log.announcement.deadline_tick
    solution_hash = record.reveal.solution_hash
    listed = {e.node_id for e in record.solver_list}

    reported: set[str] = set()
    for b in log.timely():
        if b.node_id in listed or b.node_id in reported:
            continue
        if submission_attests(b, solution_hash, registry):
            reported.add(b.node_id)
            out.append(
                Violation(
                    ViolationCode.OMITTED_SOLVER,
                    f"{b.node_id} broadcast a valid solution at tick {b.broadcast_tick} but is not listed",
                )
            )

    first_seen: dict[tuple[str, str], int] = {}
    for b in log.broadcasts:
        first_seen.setdefault((b.node_id, b.signature), b.broadcast_tick)
    for i, e in enumerate(record.solver_list):
        tick = first_seen.get((e.node_id, e.signature))
        if tick is None:
            out.append(
                Violation(
                    ViolationCode.EXTRANEOUS_SOLVER,
                    f"entry {i}: {e.node_id} was never observed broadcasting this signature",
                )
            )
        elif tick > deadline:
            out.append(
                Violation(
                    ViolationCode.LATE_SUBMISSION_INCLUDED,
                    f"entry {i}: {e.node_id} first broadcast at tick {tick}, deadline {deadline}",
                )
            )
    return out


def verify_winner(record: BlockRecord) -> Violation | None:
    """Replay the draw over the list as published."""
    entries = record.solver_list
    if not entries:
        if (record.winner_index, record.winner_node_id, record.selection_digest_a) != (None, None, None):
            return Violation(ViolationCode.WINNER_INDEX_MISMATCH, "winner declared for an empty solver list")
        return None
    sel = selection_for(entries, record.reveal.random_bytes_hex)
    problems = []
    if record.selection_digest_a != sel.selection_digest_a:
        problems.append(f"selection digest {record.selection_digest_a} != {sel.selection_digest_a}")
    if record.winner_index != sel.winner_index:
        problems.append(f"winner_index {record.winner_index} != {sel.winner_index}")
    if record.winner_node_id != entries[sel.winner_index].node_id:
        problems.append(f"winner_node_id {record.winner_node_id} != {entries[sel.winner_index].node_id}")
    if problems:
        return Violation(ViolationCode.WINNER_INDEX_MISMATCH, "; ".join(problems))
    return None


def commitment_tally(log: ObservedLog) -> Counter[str]:
    """Timely solution commitments, counting each node once (its earliest)."""
    seen: dict[str, str] = {}
    for b in log.timely():
        seen.setdefault(b.node_id, b.solution_commitment)
    return Counter(seen.values())


def verify_modal_solution(record: BlockRecord, log: ObservedLog) -> Violation | None:
    """The revealed solution must be among the most broadcast ones; ties pass."""
    tally = commitment_tally(log)
    if not tally:
        return None
    revealed = make_solution_commitment(record.reveal.solution_hash)
    top = max(tally.values())
    if tally.get(revealed, 0) < top:
        return Violation(
            ViolationCode.MODAL_SOLUTION_MISMATCH,
            f"revealed solution has {tally.get(revealed, 0)} commitments, the most common has {top}",
        )
    return None


def audit_block(
    record: BlockRecord, log: ObservedLog, registry: Mapping[str, bytes]
) -> list[Violation]:
    """All checks in order reveal, list, completeness, winner, modal. Empty means accepted."""
    out: list[Violation] = []
    v = verify_randomness_reveal(record, log.announcement)
    if v:
        out.append(v)
    out.extend(verify_solver_list(record, registry))
    out.extend(verify_completeness(record, log, registry))
    v = verify_winner(record)
    if v:
        out.append(v)
    v = verify_modal_solution(record, log)
    if v:
        out.append(v)
    return out
