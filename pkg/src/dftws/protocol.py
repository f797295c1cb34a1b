"""Commit-reveal winner selection.

Round outline, from the Root Authority's (RA) side:

1. draw secret random bytes, publish ``s = keccak(prev_block_hash + random_hex)``
   with the problem;
2. nodes broadcast ``keccak(solution_hash)`` and a signature over the raw
   solution-hash bytes before the deadline;
3. after the deadline the RA reveals the random bytes and the solution hash,
   builds the canonically sorted solver list and draws
   ``a = keccak(sig_1 + ... + sig_n + random_hex)``;
4. the winner is ``int(a[:15], 16) % n``.

Everything below is a pure function of its arguments.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from . import codec
from .errors import MalformedInput, ProtocolViolation

PREFIX_HEX_CHARS = 15


@dataclass(frozen=True)
class ProtocolParams:
    random_bytes_len: int = 10000
    prefix_hex_chars: int = PREFIX_HEX_CHARS
    max_list_len: int = 1 << 20

    def __post_init__(self) -> None:
        if self.prefix_hex_chars != PREFIX_HEX_CHARS:
            raise ValueError("prefix_hex_chars is fixed at 15 so the prefix fits in an int64")
        if self.random_bytes_len < 32:
            raise ValueError("random_bytes_len must be at least 32")
        if self.max_list_len < 1:
            raise ValueError("max_list_len must be positive")


DEFAULT_PARAMS = ProtocolParams()


@dataclass(frozen=True)
class BlockProblem:
    prev_block_hash: str
    commitment_s: str
    problem_payload: str
    deadline_tick: int


@dataclass(frozen=True)
class SolutionSubmission:
    node_id: str
    solution_commitment: str
    signature: str
    broadcast_tick: int


@dataclass(frozen=True)
class SolverEntry:
    node_id: str
    commitment: str
    signature: str


SolverList = tuple[SolverEntry, ...]


@dataclass(frozen=True)
class RevealPacket:
    random_bytes_hex: str
    solution_hash: str


@dataclass(frozen=True)
class Selection:
    selection_digest_a: str
    winner_index: int


class Registry(Mapping[str, bytes]):
    """Registered node IDs and their Ed25519 public keys.

    Registration is what keeps a node eligible for the solver list; the key
    has to hash to the ID it is registered under.
    """

    def __init__(self, keys: Mapping[str, bytes] | None = None):
        self._keys: dict[str, bytes] = {}
        for node_id, pub in (keys or {}).items():
            self.add(node_id, pub)

    def add(self, node_id: str, public_key: bytes) -> None:
        if codec.derive_node_id(public_key) != node_id:
            raise MalformedInput(f"public key does not derive node id {node_id}")
        self._keys[node_id] = public_key

    def register(self, keypair: codec.KeyPair) -> str:
        node_id = keypair.node_id
        self._keys[node_id] = keypair.public_key
        return node_id

    def __getitem__(self, node_id: str) -> bytes:
        return self._keys[node_id]

    def __iter__(self) -> Iterator[str]:
        return iter(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def to_dict(self) -> dict[str, Any]:
        return {"registered": {nid: self._keys[nid].hex() for nid in sorted(self._keys, key=node_sort_key)}}

    @classmethod
    def from_dict(cls, data: Any) -> Registry:
        try:
            entries = data["registered"]
            keys = {nid: bytes.fromhex(codec.require_digest(pub, "public key")) for nid, pub in entries.items()}
        except (KeyError, TypeError, AttributeError) as exc:
            raise MalformedInput(f"bad registry document: {exc}") from exc
        return cls(keys)


# -- commitments --------------------------------------------------------------


def new_random_bytes_hex(params: ProtocolParams = DEFAULT_PARAMS) -> str:
    """Fresh RA secret from the OS entropy source."""
    return os.urandom(params.random_bytes_len).hex()


def make_randomness_commitment(prev_block_hash: str, random_bytes_hex: str) -> str:
    codec.require_digest(prev_block_hash, "prev_block_hash")
    codec.require_hex(random_bytes_hex, "random_bytes_hex")
    return codec.keccak256(prev_block_hash + random_bytes_hex)


def make_solution_commitment(solution_hash: str) -> str:
    """keccak over the hex text of the solution hash; safe to broadcast early."""
    return codec.keccak256(codec.require_digest(solution_hash, "solution_hash"))


def sign_solution(private_key: bytes, solution_hash: str) -> str:
    """Sign the 32 raw bytes behind ``solution_hash`` (not its hex text)."""
    return codec.sign(private_key, bytes.fromhex(codec.require_digest(solution_hash, "solution_hash")))


def make_submission(keypair: codec.KeyPair, solution_hash: str, tick: int) -> SolutionSubmission:
    return SolutionSubmission(
        node_id=keypair.node_id,
        solution_commitment=make_solution_commitment(solution_hash),
        signature=sign_solution(keypair.private_key, solution_hash),
        broadcast_tick=tick,
    )


# -- solver list --------------------------------------------------------------


def node_sort_key(node_id: str) -> tuple[str, str]:
    # case-insensitive first ("0" < "9" < "a" < "z"), raw order breaks fold ties
    return (node_id.lower(), node_id)


def is_canonical_order(entries: Sequence[SolverEntry]) -> bool:
    """Strictly ascending by :func:`node_sort_key`, so no repeated IDs either."""
    keys = [node_sort_key(e.node_id) for e in entries]
    return all(a < b for a, b in zip(keys, keys[1:]))


def submission_attests(
    sub: SolutionSubmission,
    solution_hash: str,
    registry: Mapping[str, bytes],
    expected_commitment: str | None = None,
) -> bool:
    """Registered node, right commitment, and a signature over the revealed hash."""
    pub = registry.get(sub.node_id)
    if pub is None:
        return False
    if expected_commitment is None:
        expected_commitment = make_solution_commitment(solution_hash)
    if sub.solution_commitment != expected_commitment:
        return False
    if not codec.is_signature(sub.signature):
        return False
    return codec.verify(pub, bytes.fromhex(solution_hash), sub.signature)


def build_solver_list(
    submissions: Iterable[SolutionSubmission],
    revealed_hash: str,
    deadline_tick: int,
    registry: Mapping[str, bytes],
) -> SolverList:
    """Filter submissions down to the canonical solver list.

    Late, unregistered, mis-committed and badly signed submissions are
    dropped. A node that broadcast more than once keeps its earliest valid
    submission.
    """
    expected = make_solution_commitment(revealed_hash)
    ordered = sorted(
        submissions, key=lambda s: (s.broadcast_tick, s.node_id, s.solution_commitment, s.signature)
    )
    chosen: dict[str, SolutionSubmission] = {}
    for sub in ordered:
        if sub.node_id in chosen or sub.broadcast_tick > deadline_tick:
            continue
        if submission_attests(sub, revealed_hash, registry, expected):
            chosen[sub.node_id] = sub
    return tuple(
        SolverEntry(s.node_id, s.solution_commitment, s.signature)
        for s in sorted(chosen.values(), key=lambda s: node_sort_key(s.node_id))
    )


def concat_signatures(entries: Sequence[SolverEntry]) -> str:
    if not entries:
        raise ProtocolViolation("solver list is empty; there is no winner to draw")
    if not is_canonical_order(entries):
        raise ProtocolViolation("solver list is not in canonical node-id order")
    return "".join(e.signature for e in entries)


def prefix_value(digest: str, width: int = PREFIX_HEX_CHARS) -> int:
    return int(digest[:width], 16)


def selection_for(entries: Sequence[SolverEntry], random_bytes_hex: str) -> Selection:
    """Winner draw over ``entries`` exactly as given, with no ordering checks.

    Auditors use this to replay what an RA computed over the list it
    published; :func:`select_winner` is the checked entry point.
    """
    if not entries:
        raise ProtocolViolation("solver list is empty; there is no winner to draw")
    digest = codec.keccak256("".join(e.signature for e in entries) + random_bytes_hex)
    return Selection(digest, prefix_value(digest) % len(entries))


def select_winner(
    entries: Sequence[SolverEntry],
    random_bytes_hex: str,
    params: ProtocolParams = DEFAULT_PARAMS,
) -> Selection:
    concatenated = concat_signatures(entries)
    if len(entries) > params.max_list_len:
        raise ProtocolViolation(f"solver list longer than {params.max_list_len}")
    codec.require_hex(random_bytes_hex, "random_bytes_hex")
    digest = codec.keccak256(concatenated + random_bytes_hex)
    return Selection(digest, prefix_value(digest, params.prefix_hex_chars) % len(entries))


# -- block record ---------------------------------------------------------------


@dataclass(frozen=True)
class BlockRecord:
    """What the RA publishes for a block.

    A round nobody solved still yields a record: empty solver list and
    ``None`` in all three winner fields.
    """

    problem: BlockProblem
    reveal: RevealPacket
    solver_list: SolverList = field(default_factory=tuple)
    winner_index: int | None = None
    winner_node_id: str | None = None
    selection_digest_a: str | None = None

    def to_dict(self) -> dict[str, Any]:
        # key order is part of the wire format
        return {
            "prev_block_hash": self.problem.prev_block_hash,
            "commitment_s": self.problem.commitment_s,
            "problem_payload": self.problem.problem_payload,
            "deadline_tick": self.problem.deadline_tick,
            "random_bytes_hex": self.reveal.random_bytes_hex,
            "solution_hash": self.reveal.solution_hash,
            "solver_list": [
                {"node_id": e.node_id, "commitment": e.commitment, "signature": e.signature}
                for e in self.solver_list
            ],
            "selection_digest_a": self.selection_digest_a,
            "winner_index": self.winner_index,
            "winner_node_id": self.winner_node_id,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: Any) -> BlockRecord:
        """Structural parse only; protocol-level checks belong to the auditor."""
        if not isinstance(data, dict):
            raise MalformedInput("block record must be a JSON object")
        try:
            problem = BlockProblem(
                prev_block_hash=codec.require_digest(data["prev_block_hash"], "prev_block_hash"),
                commitment_s=codec.require_digest(data["commitment_s"], "commitment_s"),
                problem_payload=_require_str(data["problem_payload"], "problem_payload"),
                deadline_tick=_require_int(data["deadline_tick"], "deadline_tick"),
            )
            reveal = RevealPacket(
                random_bytes_hex=codec.require_hex(data["random_bytes_hex"], "random_bytes_hex"),
                solution_hash=codec.require_digest(data["solution_hash"], "solution_hash"),
            )
            raw_list = data["solver_list"]
            if not isinstance(raw_list, list):
                raise MalformedInput("solver_list must be an array")
            entries = tuple(
                SolverEntry(
                    node_id=_require_str(e["node_id"], "node_id"),
                    commitment=codec.require_digest(e["commitment"], "commitment"),
                    signature=codec.require_signature(e["signature"]),
                )
                for e in raw_list
            )
            digest = data["selection_digest_a"]
            index = data["winner_index"]
            winner = data["winner_node_id"]
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"block record missing or mistyped field: {exc}") from exc
        if digest is not None:
            codec.require_digest(digest, "selection_digest_a")
        if index is not None:
            _require_int(index, "winner_index")
        if winner is not None:
            _require_str(winner, "winner_node_id")
        return cls(problem, reveal, entries, index, winner, digest)

    @classmethod
    def from_json(cls, text: str) -> BlockRecord:
        return cls.from_dict(parse_json(text))


def assemble_block_record(
    problem: BlockProblem,
    reveal: RevealPacket,
    entries: Sequence[SolverEntry],
    selection: Selection | None,
) -> BlockRecord:
    """Build a record and check its invariants, naming the first one broken."""
    entries = tuple(entries)
    if make_randomness_commitment(problem.prev_block_hash, reveal.random_bytes_hex) != problem.commitment_s:
        raise ProtocolViolation("revealed random bytes do not open commitment_s")
    if not is_canonical_order(entries):
        raise ProtocolViolation("solver list is not canonically ordered with distinct node ids")
    if not entries:
        if selection is not None:
            raise ProtocolViolation("a winner was selected from an empty solver list")
        return BlockRecord(problem, reveal, entries)
    if selection is None:
        raise ProtocolViolation("non-empty solver list requires a selection")
    if not 0 <= selection.winner_index < len(entries):
        raise ProtocolViolation(f"winner_index {selection.winner_index} outside [0, {len(entries)})")
    if selection_for(entries, reveal.random_bytes_hex) != selection:
        raise ProtocolViolation("selection does not match the solver list and revealed randomness")
    return BlockRecord(
        problem,
        reveal,
        entries,
        winner_index=selection.winner_index,
        winner_node_id=entries[selection.winner_index].node_id,
        selection_digest_a=selection.selection_digest_a,
    )


# -- json helpers ---------------------------------------------------------------


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def parse_json(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError as exc:
        raise MalformedInput(f"invalid JSON: {exc}") from exc


def _require_str(value: Any, what: str) -> str:
    if not isinstance(value, str):
        raise MalformedInput(f"{what} must be a string")
    return value


def _require_int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedInput(f"{what} must be an integer")
    return value
