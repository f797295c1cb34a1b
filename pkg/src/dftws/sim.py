"""Deterministic in-process simulation of protocol rounds.

Time is a logical tick counter. All randomness comes from SplitMix64
streams derived from ``master_seed``, so a round is a pure function of
``(config, round_index)`` on any platform.

Tick layout of a round: the RA announces at tick 0, honest solvers
broadcast somewhere in ``[1, deadline_tick]``, late nodes in
``(deadline_tick, deadline_tick + LATE_WINDOW]``, and the RA reveals after
that. Uploading solution data to the RA has no effect on selection and is
not modeled.
"""

from __future__ import annotations

import enum
import json
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

from scipy import stats

from . import codec
from .errors import MalformedInput
from .protocol import (
    BlockProblem,
    BlockRecord,
    Registry,
    RevealPacket,
    SolutionSubmission,
    SolverEntry,
    assemble_block_record,
    build_solver_list,
    make_randomness_commitment,
    make_solution_commitment,
    make_submission,
    node_sort_key,
    selection_for,
    sign_solution,
    submission_attests,
)
from .verifier import ObservedLog

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
LATE_WINDOW = 10
KEY_STREAM = 0


class SplitMix64:
    """Steele/Lea/Flood SplitMix64; small, portable, and easy to re-implement elsewhere."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def randbytes(self, n: int) -> bytes:
        # little-endian u64 words, last word truncated
        words = (n + 7) // 8
        return b"".join(self.next_u64().to_bytes(8, "little") for _ in range(words))[:n]

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def derive_seed(master_seed: int, stream: int) -> int:
    """First output of SplitMix64 seeded at ``master_seed + stream * gamma``."""
    return SplitMix64((master_seed + stream * GOLDEN_GAMMA) & MASK64).next_u64()


def round_rng(master_seed: int, round_index: int) -> SplitMix64:
    return SplitMix64(derive_seed(master_seed, round_index + 1))


class NodeBehavior(str, enum.Enum):
    HONEST = "HONEST"
    LATE = "LATE"  # broadcasts after the deadline
    FORGER = "FORGER"  # commits to and signs a wrong solution hash
    COPIER = "COPIER"  # rebroadcasts someone else's commitment, signs the commitment
    UNREGISTERED = "UNREGISTERED"  # solves honestly but never registered
    SILENT = "SILENT"


class RaBehavior(str, enum.Enum):
    HONEST = "HONEST"
    OMIT_SOLVER = "OMIT_SOLVER"  # drops the entry that would have won
    REROLL_RANDOM = "REROLL_RANDOM"  # reveals bytes that do not open s
    INCLUDE_LATE = "INCLUDE_LATE"
    WRONG_WINNER = "WRONG_WINNER"  # publishes (index + 1) % len
    MINORITY_REVEAL = "MINORITY_REVEAL"  # reveals a non-modal solution
    INCLUDE_FORGED = "INCLUDE_FORGED"  # lists timely entries whose proof fails
    INCLUDE_UNREGISTERED = "INCLUDE_UNREGISTERED"
    SHUFFLE_LIST = "SHUFFLE_LIST"  # publishes the list in reverse order
    DUPLICATE_ENTRY = "DUPLICATE_ENTRY"  # lists one solver twice


@dataclass(frozen=True)
class SimConfig:
    n_nodes: int
    master_seed: int
    random_bytes_len: int = 32
    deadline_tick: int = 100
    node_behaviors: Mapping[int, NodeBehavior] = field(default_factory=dict)
    ra_behavior: RaBehavior = RaBehavior.HONEST
    rounds: int = 1

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.random_bytes_len < 1:
            raise ValueError("random_bytes_len must be >= 1")
        if self.deadline_tick < 1:
            raise ValueError("deadline_tick must be >= 1")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        behaviors = {int(k): NodeBehavior(v) for k, v in self.node_behaviors.items()}
        for slot in behaviors:
            if not 0 <= slot < self.n_nodes:
                raise ValueError(f"behavior given for node slot {slot}, outside [0, {self.n_nodes})")
        object.__setattr__(self, "node_behaviors", behaviors)
        object.__setattr__(self, "ra_behavior", RaBehavior(self.ra_behavior))

    def behavior(self, slot: int) -> NodeBehavior:
        return self.node_behaviors.get(slot, NodeBehavior.HONEST)

    @property
    def all_honest(self) -> bool:
        return self.ra_behavior is RaBehavior.HONEST and all(
            b is NodeBehavior.HONEST for b in self.node_behaviors.values()
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_nodes": self.n_nodes,
            "master_seed": self.master_seed,
            "random_bytes_len": self.random_bytes_len,
            "deadline_tick": self.deadline_tick,
            "node_behaviors": {str(k): v.value for k, v in sorted(self.node_behaviors.items())},
            "ra_behavior": self.ra_behavior.value,
            "rounds": self.rounds,
        }

    @classmethod
    def from_dict(cls, data: Any) -> SimConfig:
        if not isinstance(data, dict):
            raise MalformedInput("config must be a JSON object")
        unknown = set(data) - {
            "n_nodes", "master_seed", "random_bytes_len", "deadline_tick",
            "node_behaviors", "ra_behavior", "rounds",
        }
        if unknown:
            raise MalformedInput(f"unknown config keys: {sorted(unknown)}")
        try:
            ints = {k: data[k] for k in ("n_nodes", "master_seed", "random_bytes_len", "deadline_tick", "rounds") if k in data}
            for k, v in ints.items():
                if isinstance(v, bool) or not isinstance(v, int):
                    raise MalformedInput(f"{k} must be an integer")
            return cls(
                **ints,
                node_behaviors={int(k): NodeBehavior(v) for k, v in data.get("node_behaviors", {}).items()},
                ra_behavior=RaBehavior(data.get("ra_behavior", "HONEST")),
            )
        except MalformedInput:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise MalformedInput(f"bad config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> SimConfig:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise MalformedInput(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise MalformedInput(f"config {path} is not JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class SimNode:
    slot: int
    keypair: codec.KeyPair
    behavior: NodeBehavior

    @property
    def node_id(self) -> str:
        return self.keypair.node_id


@lru_cache(maxsize=64)
def _keypairs(master_seed: int, n_nodes: int) -> tuple[codec.KeyPair, ...]:
    rng = SplitMix64(derive_seed(master_seed, KEY_STREAM))
    return tuple(codec.generate_keypair(rng.randbytes(codec.SEED_LEN)) for _ in range(n_nodes))


def make_nodes(config: SimConfig) -> list[SimNode]:
    """Node identities are fixed for the whole campaign (drawn from the key stream)."""
    return [
        SimNode(i, kp, config.behavior(i))
        for i, kp in enumerate(_keypairs(config.master_seed, config.n_nodes))
    ]


def make_registry(config: SimConfig) -> Registry:
    reg = Registry()
    for node in make_nodes(config):
        if node.behavior is not NodeBehavior.UNREGISTERED:
            reg.register(node.keypair)
    return reg


def toy_work(problem_payload: str, prev_block_hash: str) -> str:
    """Stand-in for the Monte Carlo workload: identical for every honest solver."""
    return codec.keccak256(problem_payload + codec.require_digest(prev_block_hash) + "solved")


def forged_work(problem_payload: str, prev_block_hash: str) -> str:
    return codec.keccak256(problem_payload + prev_block_hash + "forged")


def _broadcasts(nodes: list[SimNode], rng: SplitMix64, deadline: int,
                honest_hash: str, forged_hash: str) -> list[SolutionSubmission]:
    # one tick draw per slot whatever the behavior, so adding an adversary
    # does not shift anybody else's timing
    ticks = [1 + rng.below(deadline) for _ in nodes]
    late_ticks = [deadline + 1 + rng.below(LATE_WINDOW) for _ in nodes]
    subs: list[tuple[int, int, SolutionSubmission]] = []
    copiers = []
    for node, tick, late in zip(nodes, ticks, late_ticks):
        b = node.behavior
        if b in (NodeBehavior.HONEST, NodeBehavior.UNREGISTERED):
            subs.append((tick, node.slot, make_submission(node.keypair, honest_hash, tick)))
        elif b is NodeBehavior.LATE:
            subs.append((late, node.slot, make_submission(node.keypair, honest_hash, late)))
        elif b is NodeBehavior.FORGER:
            subs.append((tick, node.slot, make_submission(node.keypair, forged_hash, tick)))
        elif b is NodeBehavior.COPIER:
            copiers.append((node, tick))
    for node, tick in copiers:
        # copy the earliest commitment seen so far, or wait for the first one
        others = sorted((t, s, sub) for t, s, sub in subs if s != node.slot)
        if not others:
            continue
        seen = [o for o in others if o[0] < tick] or [others[0]]
        victim_tick, _, victim = seen[0]
        when = max(tick, victim_tick + 1)
        stolen = victim.solution_commitment
        subs.append(
            (when, node.slot,
             SolutionSubmission(node.node_id, stolen, sign_solution(node.keypair.private_key, stolen), when))
        )
    subs.sort(key=lambda x: (x[0], x[1]))
    return [s for _, _, s in subs]


def _minority_hash(broadcasts: list[SolutionSubmission], deadline: int, candidates: dict[str, str],
                   fallback: str) -> str:
    """Least-common timely commitment whose preimage the RA knows."""
    counts: dict[str, int] = {}
    seen: set[str] = set()
    for b in broadcasts:
        if b.broadcast_tick <= deadline and b.node_id not in seen:
            seen.add(b.node_id)
            counts[b.solution_commitment] = counts.get(b.solution_commitment, 0) + 1
    if counts:
        top = max(counts.values())
        minority = sorted((c, com) for com, c in counts.items() if c < top and com in candidates)
        if minority:
            return candidates[minority[0][1]]
    return fallback


def run_round(config: SimConfig, round_index: int) -> tuple[BlockRecord, ObservedLog]:
    """Play one full round and return the RA's record plus an observer's log."""
    nodes = make_nodes(config)
    registry = make_registry(config)
    rng = round_rng(config.master_seed, round_index)
    deadline = config.deadline_tick

    prev_block_hash = rng.randbytes(32).hex()
    random_bytes_hex = rng.randbytes(config.random_bytes_len).hex()
    payload = f"toy-mc round={round_index} events=1000"
    problem = BlockProblem(
        prev_block_hash=prev_block_hash,
        commitment_s=make_randomness_commitment(prev_block_hash, random_bytes_hex),
        problem_payload=payload,
        deadline_tick=deadline,
    )

    honest_hash = toy_work(payload, prev_block_hash)
    forged_hash = forged_work(payload, prev_block_hash)
    broadcasts = _broadcasts(nodes, rng, deadline, honest_hash, forged_hash)
    log = ObservedLog(problem, tuple(broadcasts))
    # drawn unconditionally to keep the stream layout independent of ra_behavior
    reroll_hex = rng.randbytes(config.random_bytes_len).hex()

    ra = config.ra_behavior
    revealed = honest_hash
    if ra is RaBehavior.MINORITY_REVEAL:
        candidates = {make_solution_commitment(h): h for h in (honest_hash, forged_hash)}
        revealed = _minority_hash(broadcasts, deadline, candidates, codec.keccak256(payload + prev_block_hash + "minority"))
    published_random = reroll_hex if ra is RaBehavior.REROLL_RANDOM else random_bytes_hex
    reveal = RevealPacket(published_random, revealed)

    if ra is RaBehavior.INCLUDE_LATE:
        entries = list(build_solver_list(broadcasts, revealed, deadline + LATE_WINDOW, registry))
    elif ra is RaBehavior.INCLUDE_UNREGISTERED:
        everyone = Registry({n.node_id: n.keypair.public_key for n in nodes})
        entries = list(build_solver_list(broadcasts, revealed, deadline, everyone))
    else:
        entries = list(build_solver_list(broadcasts, revealed, deadline, registry))

    if ra is RaBehavior.OMIT_SOLVER and entries:
        del entries[selection_for(entries, published_random).winner_index]
    elif ra is RaBehavior.INCLUDE_FORGED:
        listed = {e.node_id for e in entries}
        for b in broadcasts:
            if (b.broadcast_tick <= deadline and b.node_id in registry and b.node_id not in listed
                    and not submission_attests(b, revealed, registry)):
                listed.add(b.node_id)
                entries.append(SolverEntry(b.node_id, b.solution_commitment, b.signature))
        entries.sort(key=lambda e: node_sort_key(e.node_id))
    elif ra is RaBehavior.SHUFFLE_LIST:
        entries.reverse()
    elif ra is RaBehavior.DUPLICATE_ENTRY and entries:
        entries.insert(1, entries[0])

    if ra is RaBehavior.HONEST:
        selection = selection_for(entries, published_random) if entries else None
        return assemble_block_record(problem, reveal, entries, selection), log

    if not entries:
        return BlockRecord(problem, reveal, tuple(entries)), log
    sel = selection_for(entries, published_random)
    index = sel.winner_index
    if ra is RaBehavior.WRONG_WINNER:
        index = (index + 1) % len(entries)
    record = BlockRecord(
        problem, reveal, tuple(entries),
        winner_index=index,
        winner_node_id=entries[index].node_id,
        selection_digest_a=sel.selection_digest_a,
    )
    return record, log


@dataclass(frozen=True)
class WinnerStats:
    rounds: int
    index_counts: tuple[int, ...]
    node_counts: dict[str, int]
    chi_square: float
    p_value: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "rounds": self.rounds,
            "index_counts": list(self.index_counts),
            "node_counts": dict(sorted(self.node_counts.items(), key=lambda kv: node_sort_key(kv[0]))),
            "chi_square": self.chi_square,
            "p_value": self.p_value,
        }


def _winners(args: tuple[SimConfig, int, int]) -> list[tuple[int, str]]:
    config, start, stop = args
    out = []
    for r in range(start, stop):
        record, _ = run_round(config, r)
        out.append((record.winner_index, record.winner_node_id))
    return out


def uniform_chi_square(counts: list[int] | tuple[int, ...]) -> tuple[float, float]:
    """Pearson statistic and p-value against a uniform spread over ``counts``."""
    if len(counts) < 2:
        return 0.0, 1.0
    res = stats.chisquare(counts)
    return float(res.statistic), float(res.pvalue)


def run_campaign(config: SimConfig, workers: int = 1) -> WinnerStats:
    """Winner counts by list position and by node over ``config.rounds`` honest rounds.

    With ``workers > 1`` rounds are spread over processes; results are merged
    in round order, so the output does not depend on ``workers``.
    """
    if not config.all_honest:
        raise ValueError("fairness campaigns need an all-honest config")
    n = config.n_nodes
    if workers > 1:
        step = -(-config.rounds // workers)
        chunks = [(config, s, min(s + step, config.rounds)) for s in range(0, config.rounds, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            winners = [w for part in pool.map(_winners, chunks) for w in part]
    else:
        winners = _winners((config, 0, config.rounds))

    index_counts = [0] * n
    node_counts = {node.node_id: 0 for node in make_nodes(config)}
    for index, node_id in winners:
        index_counts[index] += 1
        node_counts[node_id] += 1
    chi2, p = uniform_chi_square(index_counts)
    return WinnerStats(config.rounds, tuple(index_counts), node_counts, chi2, p)
