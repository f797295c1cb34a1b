"""Deterministic, fair and transparent block-winner selection with public auditing."""

from .codec import KeyPair, derive_node_id, generate_keypair, keccak256, sign, verify
from .errors import DftwsError, MalformedInput, ProtocolViolation
from .protocol import (
    BlockProblem,
    BlockRecord,
    ProtocolParams,
    Registry,
    RevealPacket,
    Selection,
    SolutionSubmission,
    SolverEntry,
    assemble_block_record,
    build_solver_list,
    concat_signatures,
    make_randomness_commitment,
    make_solution_commitment,
    select_winner,
    sign_solution,
)
from .verifier import ObservedLog, Violation, ViolationCode, audit_block

__all__ = [
    "BlockProblem", "BlockRecord", "DftwsError", "KeyPair", "MalformedInput", "ObservedLog",
    "ProtocolParams", "ProtocolViolation", "Registry", "RevealPacket", "Selection",
    "SolutionSubmission", "SolverEntry", "Violation", "ViolationCode", "assemble_block_record",
    "audit_block", "build_solver_list", "concat_signatures", "derive_node_id", "generate_keypair",
    "keccak256", "make_randomness_commitment", "make_solution_commitment", "select_winner",
    "sign", "sign_solution", "verify",
]
