"""Golden fixture: five nodes (seeds 1..5) drawing over the worked example values.

Seed ``i`` is the integer ``i`` as 32 big-endian bytes.
"""

from __future__ import annotations

from typing import Any

from . import codec
from .protocol import (
    BlockProblem,
    BlockRecord,
    Registry,
    RevealPacket,
    assemble_block_record,
    build_solver_list,
    make_randomness_commitment,
    make_solution_commitment,
    make_submission,
    select_winner,
)

EXAMPLE_SOLUTION_HASH = "69868b59cab0f269284b96acca5549ab804095fcb452d64aba3c904bc82117bc"
EXAMPLE_PREV_BLOCK_HASH = "d60ee5d9b1a312631632d0ab8816ca64259093d8ab0b4d29f35db6a6151b0f8d"
# 32 bytes rather than the 10000 a live RA would draw
EXAMPLE_RANDOM_BYTES_HEX = "a4896a3f93bf4bf58378e579f3cf193bb4af1022af7d2089f37d8bae7157b85f"
FIXTURE_PAYLOAD = "fixture: five nodes, example solution hash"
FIXTURE_DEADLINE = 100


def fixture_keypairs() -> list[codec.KeyPair]:
    return [codec.generate_keypair(i.to_bytes(32, "big")) for i in range(1, 6)]


def fixture_registry() -> Registry:
    reg = Registry()
    for kp in fixture_keypairs():
        reg.register(kp)
    return reg


def fixture_record() -> BlockRecord:
    registry = fixture_registry()
    subs = [make_submission(kp, EXAMPLE_SOLUTION_HASH, tick=10 + i) for i, kp in enumerate(fixture_keypairs())]
    problem = BlockProblem(
        prev_block_hash=EXAMPLE_PREV_BLOCK_HASH,
        commitment_s=make_randomness_commitment(EXAMPLE_PREV_BLOCK_HASH, EXAMPLE_RANDOM_BYTES_HEX),
        problem_payload=FIXTURE_PAYLOAD,
        deadline_tick=FIXTURE_DEADLINE,
    )
    entries = build_solver_list(subs, EXAMPLE_SOLUTION_HASH, FIXTURE_DEADLINE, registry)
    selection = select_winner(entries, EXAMPLE_RANDOM_BYTES_HEX)
    return assemble_block_record(
        problem, RevealPacket(EXAMPLE_RANDOM_BYTES_HEX, EXAMPLE_SOLUTION_HASH), entries, selection
    )


def golden_vectors() -> dict[str, Any]:
    record = fixture_record()
    return {
        "keccak256_empty": codec.keccak256(""),
        "keccak256_abc": codec.keccak256("abc"),
        "example_commitment_s": record.problem.commitment_s,
        "example_solution_commitment": make_solution_commitment(EXAMPLE_SOLUTION_HASH),
        "fixture_node_ids": [e.node_id for e in record.solver_list],
        "fixture_selection_digest_a": record.selection_digest_a,
        "fixture_winner_index": record.winner_index,
        "fixture_winner_node_id": record.winner_node_id,
        "fixture_record_keccak256": codec.keccak256(record.to_json()),
    }
