"""Exit criteria. Each test prints a PASS/FAIL line in the terminal summary."""

import hashlib
import json
import random
import time

import pytest

from dftws import codec
from dftws.protocol import (
    SolutionSubmission,
    SolverEntry,
    build_solver_list,
    make_randomness_commitment,
    make_submission,
    node_sort_key,
    select_winner,
)
from dftws.sim import NodeBehavior as NB, RaBehavior as RB, SimConfig, make_registry, run_campaign, run_round
from dftws.vectors import (
    EXAMPLE_PREV_BLOCK_HASH,
    EXAMPLE_RANDOM_BYTES_HEX,
    EXAMPLE_SOLUTION_HASH,
    fixture_record,
)
from dftws.verifier import ViolationCode as V, audit_block
from tests.oracles.keccak_ref import keccak256 as ref_keccak
from tests.oracles.winner_oracle import golden

# frozen outputs of tests/oracles (reference Keccak + stand-alone winner script)
EMPTY_KECCAK = "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
ABC_KECCAK = "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"
EXAMPLE_COMMITMENT_S = "1e8544951429149c7dff1029a751dcfb7b91a623bec51755a1bd0604d341475d"
FIXTURE_WINNER_INDEX = 1
FIXTURE_DIGEST_A = "3834bdfd77b1b2cc3da78ec454f3258a11886b542968926411815c00b9d6429e"
# regression pin for the canonical JSON of the fixture record
FIXTURE_RECORD_KECCAK = "b8590114414552d7ad0ed57825bcebbfba01bee220d71c45c650c04488e358ef"

CHI_SQUARE_LIMIT = 23.5
TWO_NODE_ROUNDS, TWO_NODE_BAND = 10000, 300
SENSITIVITY_TRIALS, SENSITIVITY_CENTER, SENSITIVITY_BAND = 1000, 0.80, 0.05


@pytest.fixture
def criterion(request):
    def mark(name):
        request.node.user_properties.append(("criterion", name))
    return mark


def test_ac1_keccak_conformance(criterion):
    criterion("AC1 Keccak-256 conformance (legacy padding, not SHA3-256)")
    assert codec.keccak256("") == EMPTY_KECCAK == ref_keccak(b"")
    assert codec.keccak256("abc") == ABC_KECCAK == ref_keccak(b"abc")
    assert codec.keccak256("") != hashlib.sha3_256(b"").hexdigest()
    assert not codec.keccak256("").startswith("a7ffc6f8bf1ed766")


def test_ac2_example_commitment_vector(criterion):
    criterion("AC2 randomness commitment over the worked-example values")
    got = make_randomness_commitment(EXAMPLE_PREV_BLOCK_HASH, EXAMPLE_RANDOM_BYTES_HEX)
    assert got == EXAMPLE_COMMITMENT_S
    assert got == ref_keccak((EXAMPLE_PREV_BLOCK_HASH + EXAMPLE_RANDOM_BYTES_HEX).encode("ascii"))


def test_ac3_golden_round(criterion):
    criterion("AC3 golden 5-node round: winner index and byte-stable record")
    start = time.perf_counter()
    first, second = fixture_record(), fixture_record()
    elapsed = time.perf_counter() - start
    oracle = golden()
    assert first.winner_index == FIXTURE_WINNER_INDEX == oracle["winner_index"]
    assert first.selection_digest_a == FIXTURE_DIGEST_A == oracle["selection_digest_a"]
    assert first.winner_node_id == oracle["winner_node_id"]
    assert first.to_json() == second.to_json()
    assert codec.keccak256(first.to_json()) == FIXTURE_RECORD_KECCAK
    assert elapsed < 1.0


def test_ac4_fairness(criterion):
    criterion("AC4 fairness: chi2(df=4) < 23.5 over 20000 rounds; 2 nodes within 5000 +/- 300")
    five = run_campaign(SimConfig(n_nodes=5, master_seed=2024, rounds=20000))
    print(f"5 nodes: counts={five.index_counts} chi2={five.chi_square:.3f} p={five.p_value:.3f}")
    assert sum(five.index_counts) == 20000
    assert five.chi_square < CHI_SQUARE_LIMIT

    two = run_campaign(SimConfig(n_nodes=2, master_seed=2025, rounds=TWO_NODE_ROUNDS))
    print(f"2 nodes: counts={two.index_counts}")
    for count in two.index_counts:
        assert abs(count - TWO_NODE_ROUNDS // 2) <= TWO_NODE_BAND


# code -> (node behaviors, RA behavior) injecting exactly that fault
SCENARIOS = {
    V.COMMITMENT_MISMATCH: ({}, RB.REROLL_RANDOM),
    V.SIGNATURE_INVALID: ({1: NB.FORGER}, RB.INCLUDE_FORGED),
    V.LIST_UNSORTED: ({}, RB.SHUFFLE_LIST),
    V.DUPLICATE_NODE: ({}, RB.DUPLICATE_ENTRY),
    V.OMITTED_SOLVER: ({}, RB.OMIT_SOLVER),
    V.EXTRANEOUS_SOLVER: ({3: NB.UNREGISTERED}, RB.INCLUDE_UNREGISTERED),
    V.WINNER_INDEX_MISMATCH: ({}, RB.WRONG_WINNER),
    V.MODAL_SOLUTION_MISMATCH: ({0: NB.FORGER}, RB.MINORITY_REVEAL),
    V.LATE_SUBMISSION_INCLUDED: ({4: NB.LATE}, RB.INCLUDE_LATE),
    V.EMPTY_LIST: ({i: NB.SILENT for i in range(5)}, RB.HONEST),
}


def test_ac5_detection_matrix(criterion):
    criterion("AC5 detection matrix for all 10 codes; >=200 honest rounds accepted")
    assert set(SCENARIOS) == set(V)
    for code, (nodes, ra) in SCENARIOS.items():
        for seed in range(5):
            cfg = SimConfig(n_nodes=5, master_seed=seed, node_behaviors=nodes, ra_behavior=ra)
            record, log = run_round(cfg, seed)
            found = {v.code for v in audit_block(record, log, make_registry(cfg))}
            assert found == {code}, (code, seed, found)

    rng = random.Random(99)
    for i in range(240):
        cfg = SimConfig(n_nodes=rng.randint(1, 8), master_seed=rng.getrandbits(64),
                        deadline_tick=rng.randint(1, 200))
        record, log = run_round(cfg, i)
        assert audit_block(record, log, make_registry(cfg)) == [], (i, cfg)


def test_ac6_sensitivity(criterion):
    criterion("AC6 one-hex-char signature change: digest always moves, index moves 80% +/- 5")
    rng = random.Random(6)
    ids = sorted((codec.generate_keypair(rng.randbytes(32)).node_id for _ in range(5)), key=node_sort_key)
    index_changed = 0
    for _ in range(SENSITIVITY_TRIALS):
        entries = [SolverEntry(i, "00" * 32, rng.randbytes(64).hex()) for i in ids]
        rand = rng.randbytes(32).hex()
        before = select_winner(entries, rand)
        j, pos = rng.randrange(5), rng.randrange(128)
        sig = entries[j].signature
        new_char = rng.choice([c for c in "0123456789abcdef" if c != sig[pos]])
        entries[j] = SolverEntry(ids[j], "00" * 32, sig[:pos] + new_char + sig[pos + 1:])
        after = select_winner(entries, rand)
        assert after.selection_digest_a != before.selection_digest_a
        index_changed += after.winner_index != before.winner_index
    rate = index_changed / SENSITIVITY_TRIALS
    print(f"winner index changed in {rate:.1%} of trials")
    assert abs(rate - SENSITIVITY_CENTER) <= SENSITIVITY_BAND


def test_ac7_canonicalization(criterion):
    criterion("AC7 permutation invariance (100 perms x 8) and case-insensitive 0<9<a<z order")
    rng = random.Random(7)
    kps = [codec.generate_keypair(rng.randbytes(32)) for _ in range(8)]
    registry = {kp.node_id: kp.public_key for kp in kps}
    subs = [make_submission(kp, EXAMPLE_SOLUTION_HASH, 1 + i) for i, kp in enumerate(kps)]
    base = build_solver_list(subs, EXAMPLE_SOLUTION_HASH, 100, registry)
    assert len(base) == 8
    for _ in range(100):
        shuffled = subs[:]
        rng.shuffle(shuffled)
        assert build_solver_list(shuffled, EXAMPLE_SOLUTION_HASH, 100, registry) == base
    assert [e.node_id for e in base] == sorted(registry, key=str.lower)

    constructed = ["12D3bbb", "12D3aaa", "12D3Abc", "12d3ABD", "12D39xx", "12D30yy", "12D3Zed", "12D3c00"]
    expected = ["12D30yy", "12D39xx", "12D3aaa", "12D3Abc", "12d3ABD", "12D3bbb", "12D3c00", "12D3Zed"]
    keyed = {nid: kp for nid, kp in zip(constructed, kps)}
    mixed_subs = [
        SolutionSubmission(nid, s.solution_commitment, s.signature, s.broadcast_tick)
        for nid, s in zip(constructed, (make_submission(keyed[n], EXAMPLE_SOLUTION_HASH, 5) for n in constructed))
    ]
    out = build_solver_list(mixed_subs, EXAMPLE_SOLUTION_HASH, 100,
                            {nid: kp.public_key for nid, kp in keyed.items()})
    assert [e.node_id for e in out] == expected
    assert expected.index("12D3aaa") < expected.index("12D3bbb")
    assert sorted(constructed) != expected  # a case-sensitive sort would disagree
