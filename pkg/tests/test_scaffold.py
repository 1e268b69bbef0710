"""Tournament scaffold: combinatorics, wiring, ceremony, verification."""

import copy
import dataclasses
import hashlib
import json

import pytest

from commitlotto.chain import TransactionBody, compute_ntxid
from commitlotto.scaffold import (
    BRANCH_DEPOSIT_REFUND,
    BRANCH_DEPOSIT_SPEND,
    DEPOSIT_HASHLOCKED,
    FORMAT_TAG,
    MODE_MULTIINPUT,
    SIDE_LEFT,
    SIDE_RIGHT,
    SLOT_MPC,
    IdealMpcOracle,
    IndexOutOfRange,
    KernelId,
    MpcIncomplete,
    NotPowerOfTwo,
    build_deposit_atomic,
    candidates,
    dump_tournament,
    export_dot,
    iter_bodies,
    kernel_count,
    kernel_count_geometric,
    load_tournament,
    matches_at,
    multi_candidate_pair,
    num_levels,
    players_of,
    scaffold_stats,
    signing_ceremony,
    tournament_from_json,
    tournament_to_json,
    unpack_index,
    verify_as_honest,
    winner_side,
)
from commitlotto.script import (
    AfterHeight,
    AllOf,
    AllSign,
    AnyOf,
    HashPreimage,
    KeySign,
    SignatureOracle,
)

from conftest import small_tournament


# counting


def test_kernel_count_frozen_values():
    assert [kernel_count(l) for l in range(4)] == [1, 9, 729, 4782969]
    assert [kernel_count(l, MODE_MULTIINPUT) for l in range(4)] == [1, 4, 16, 64]


def test_kernel_count_recurrence():
    # each kernel pairs one of 3 outcomes of each child kernel on each side
    for level in range(1, 5):
        prev = kernel_count(level - 1)
        assert kernel_count(level) == (3 * prev) ** 2


def test_geometric_count_diverges_at_level_two():
    # the geometric guess 9**level undercounts because child multiplicity
    # compounds, not the per-level factor
    assert [kernel_count_geometric(l) for l in range(4)] == [1, 9, 81, 729]
    assert kernel_count_geometric(0) == kernel_count(0)
    assert kernel_count_geometric(1) == kernel_count(1)
    for level in range(2, 5):
        assert kernel_count_geometric(level) < kernel_count(level)


def test_bracket_shape():
    assert num_levels(8) == 3
    assert [matches_at(8, l) for l in range(3)] == [4, 2, 1]
    with pytest.raises(NotPowerOfTwo):
        num_levels(3)
    with pytest.raises(NotPowerOfTwo):
        num_levels(0)
    assert matches_at(8, 3) == 0  # no matches above the root


def test_offchain_totals_frozen():
    assert scaffold_stats(2).total_offchain == 6
    assert scaffold_stats(4).total_offchain == 56
    assert scaffold_stats(8).total_offchain == 3756
    assert scaffold_stats(16).total_offchain == 23922356
    assert [scaffold_stats(n, MODE_MULTIINPUT).total_offchain for n in (2, 4, 8, 16, 32)] == [
        8,
        39,
        165,
        665,
        2641,
    ]


def test_offchain_total_matches_sum_over_matches():
    for n in (2, 4, 8):
        s = scaffold_stats(n)
        expect = 1 + sum(
            matches_at(n, l) * kernel_count(l) * 5 for l in range(num_levels(n))
        )
        assert s.total_offchain == expect
        assert s.per_level == tuple(
            matches_at(n, l) * kernel_count(l) * 5 for l in range(num_levels(n))
        )


def test_worst_case_onchain_counts():
    for n in (2, 4, 8, 16):
        assert scaffold_stats(n).on_chain_worst_case == 3 * (n - 1) + 1
        assert scaffold_stats(n, MODE_MULTIINPUT).on_chain_worst_case == 4 * (n - 1) + 1
        hl = scaffold_stats(n, deposit_option=DEPOSIT_HASHLOCKED)
        assert hl.on_chain_worst_case == 3 * (n - 1) + n
        assert hl.deposit_count == n


def test_stats_match_materialized_build(plain4, multi8):
    for t in (plain4, multi8):
        closed = scaffold_stats(t.n, t.mode, t.deposit_option)
        built = t.stats
        assert built.materialized and not closed.materialized
        a, b = closed.to_json(), built.to_json()
        a.pop("materialized"), b.pop("materialized")
        assert a == b


# index packing


def test_unpack_index_frozen_examples():
    assert unpack_index(1, 0, 7) == (0, 2, 0, 1)
    assert unpack_index(2, 0, 80) == (0, 2, 8, 2)


def test_unpack_index_round_trip():
    for level in (1, 2):
        per_side = 3 * kernel_count(level - 1)
        for combo in range(kernel_count(level)):
            lk, lt, rk, rt = unpack_index(level, 0, combo)
            assert 0 <= lk < kernel_count(level - 1) and lt in (0, 1, 2)
            assert 0 <= rk < kernel_count(level - 1) and rt in (0, 1, 2)
            assert (lk * 3 + lt) * per_side + (rk * 3 + rt) == combo
    with pytest.raises(IndexOutOfRange):
        unpack_index(0, 0, 0)
    with pytest.raises(IndexOutOfRange):
        unpack_index(1, 0, 81)


def test_winner_side_mapping():
    assert winner_side(0) == SIDE_LEFT
    assert winner_side(1) == SIDE_RIGHT
    assert winner_side(2) == SIDE_RIGHT
    with pytest.raises(IndexOutOfRange):
        winner_side(3)


def test_players_of_plain_tracks_child_winners():
    # n=4, final match: combo 0 pairs both level-0 left winners
    assert players_of(4, 1, 0, 0) == (0, 2)
    # combo 4 = (left child outcome 1, right child outcome 1): both right winners
    assert players_of(4, 1, 0, 4) == (1, 3)
    # level 0 is just the fixed bracket seeding
    assert players_of(4, 0, 1, 0) == (2, 3)
    for combo in range(9):
        lk, lt, rk, rt = unpack_index(1, 0, combo)
        lp = 0 if winner_side(lt) == SIDE_LEFT else 1
        rp = 2 if winner_side(rt) == SIDE_LEFT else 3
        assert players_of(4, 1, 0, combo) == (lp, rp)


def test_candidates_and_multi_pairs():
    assert candidates(8, 0, 2) == [4, 5]
    assert candidates(8, 1, 1) == [4, 5, 6, 7]
    assert candidates(8, 2, 0) == list(range(8))
    with pytest.raises(IndexOutOfRange):
        candidates(8, 1, 2)
    # multiinput combos enumerate candidate pairs left-major
    n, level, match = 8, 1, 0
    pairs = [multi_candidate_pair(n, level, match, c) for c in range(kernel_count(level, MODE_MULTIINPUT))]
    assert pairs == [(0, 2), (0, 3), (1, 2), (1, 3)]
    for combo, pair in enumerate(pairs):
        assert players_of(n, level, match, combo, MODE_MULTIINPUT) == pair


# built structure


def test_build_rejects_bad_params():
    with pytest.raises(NotPowerOfTwo):
        small_tournament(3)
    with pytest.raises(ValueError):
        small_tournament(4, mode="turbo")
    with pytest.raises(ValueError):
        small_tournament(4, deposit_option="escrow")


def test_kernel_population_matches_counts(plain4):
    for level in range(plain4.levels):
        for match in range(matches_at(4, level)):
            got = [kid for kid in plain4.kernels if kid.level == level and kid.match == match]
            assert len(got) == kernel_count(level)


def test_schedule_and_stride(plain4, multi8):
    assert plain4.level_stride == 2 * plain4.tau
    assert multi8.level_stride == 4 * multi8.tau
    for t in (plain4, multi8):
        for level in range(t.levels):
            t0, t1, t2 = t.schedule(level)
            assert (t0, t1, t2) == (
                t.t_commit + t.level_stride * level,
                t.t_commit + t.level_stride * level + t.tau,
                t.t_commit + t.level_stride * level + 2 * t.tau,
            )
            k = t.kernel(level, 0, 0)
            assert (k.t0, k.t1, k.t2) == (t0, t1, t2)


def test_kernel_wiring_plain(plain4):
    # a final-level kernel's entry spends the two specific child outcomes
    # named by its combination index
    kid = KernelId(1, 0, 7)
    k = plain4.kernels[kid]
    lk, lt, rk, rt = unpack_index(1, 0, 7)
    left_child = plain4.kernels[KernelId(0, 0, lk)]
    right_child = plain4.kernels[KernelId(0, 1, rk)]
    refs = [spec.ref for spec in k.entry_tx.inputs]
    assert refs[0].txid == compute_ntxid(left_child.outcome_txs[lt])
    assert refs[1].txid == compute_ntxid(right_child.outcome_txs[rt])
    # pot doubles per level, outcomes each pay the full pot to one side
    assert k.pot == 4 * plain4.bet
    for tx in k.outcome_txs:
        assert sum(o.value for o in tx.outputs) == k.pot


def test_final_level_outcomes_pay_single_key(plain4):
    k = plain4.kernel(1, 0, 0)
    left_key = plain4.master_keys[k.left_player]
    right_key = plain4.master_keys[k.right_player]
    assert k.outcome_txs[0].outputs[0].predicate == KeySign(left_key)
    assert k.outcome_txs[1].outputs[0].predicate == KeySign(right_key)
    assert k.outcome_txs[2].outputs[0].predicate == KeySign(right_key)


def test_outcome_locktimes_follow_kernel_windows(plain4):
    for k in plain4.kernels.values():
        assert k.outcome_txs[0].locktime == k.t2  # left wins by waiting out t2
        assert k.outcome_txs[1].locktime == k.t1  # right wins on silence at t1
        assert k.outcome_txs[2].locktime == 0  # parity win is immediate
        assert k.entry_tx.locktime == 0  # entries gate on availability, not height


def test_deposit_atomic_shape(plain4):
    dep = plain4.deposit_bodies[0]
    assert len(dep.inputs) == 4 and len(dep.outputs) == 4
    master = AllSign(plain4.master_keys)
    assert all(o.predicate == master and o.value == plain4.bet for o in dep.outputs)
    assert build_deposit_atomic(plain4.funding, None, plain4.bet, master) == dep
    with pytest.raises(ValueError):
        build_deposit_atomic(plain4.funding, [2] * 4, 1, master)


def test_deposit_hashlocked_shape():
    t = small_tournament(4, deposit_option=DEPOSIT_HASHLOCKED)
    assert t.refund_time == t.t_commit
    assert len(t.deposit_bodies) == 4
    master = AllSign(t.master_keys)
    for i, body in enumerate(t.deposit_bodies):
        pred = body.outputs[0].predicate
        assert isinstance(pred, AnyOf) and len(pred.branches) == 2
        spend = pred.branches[BRANCH_DEPOSIT_SPEND]
        refund = pred.branches[BRANCH_DEPOSIT_REFUND]
        assert spend == AllOf((master, HashPreimage(t.mpc_digest, SLOT_MPC)))
        assert refund == AllOf((KeySign(t.master_keys[i]), AfterHeight(t.t_commit)))


def test_multiinput_compressions_gather_candidate_wins(multi8):
    from commitlotto.chain import FixedInput, MultiInput

    # entries spend one specific compression output per side
    k = multi8.kernel(1, 0, 0)
    assert all(isinstance(spec, FixedInput) for spec in k.entry_tx.inputs)
    a, b = multi_candidate_pair(8, 1, 0, 0)
    assert k.entry_tx.inputs[0].ref.txid == multi8.compressions[(0, 0, a)].ntxid
    assert k.entry_tx.inputs[1].ref.txid == multi8.compressions[(0, 1, b)].ntxid

    # one compression per (match, candidate); its choice set holds every
    # outcome of that match paying the candidate, and exactly one can land
    comp = multi8.compressions[(1, 0, 0)]
    assert isinstance(comp.body.inputs[0], MultiInput)
    assert len(comp.body.inputs[0].refs) == 2  # candidate 0 is left in 2 of 4 combos

    # the root-level compression pays the candidate directly
    final = multi8.compressions[(2, 0, 5)]
    assert final.body.outputs[0].predicate == KeySign(multi8.master_keys[5])
    # non-final compressions stay in the joint custody of the group
    assert comp.body.outputs[0].predicate == AllSign(multi8.master_keys)


def test_secrets_are_fresh_per_kernel_per_side(plain4):
    values = list(plain4.secrets.values())
    assert len(values) == len(set(values))
    assert all(len(s) == 32 and any(s) for s in values)
    for kid, k in plain4.kernels.items():
        assert hashlib.sha256(plain4.secret(kid, SIDE_LEFT)).digest() == k.left_commit
        assert hashlib.sha256(plain4.secret(kid, SIDE_RIGHT)).digest() == k.right_commit


# mpc oracle


def test_mpc_oracle_digest_is_hash_of_xor():
    mpc = IdealMpcOracle(3)
    inputs = [bytes([i + 1]) * 32 for i in range(3)]
    for i, s in enumerate(inputs):
        mpc.collect(i, s)
    combined = bytes(a ^ b ^ c for a, b, c in zip(*inputs))
    assert mpc.combined() == combined
    assert mpc.digest() == hashlib.sha256(combined).digest()


def test_mpc_oracle_withholds_until_complete():
    mpc = IdealMpcOracle(2)
    mpc.collect(0, b"\x01" * 32)
    assert not mpc.complete
    with pytest.raises(MpcIncomplete):
        mpc.combined()
    with pytest.raises(ValueError):
        mpc.collect(1, b"\x00" * 32)
    with pytest.raises(ValueError):
        mpc.collect(1, b"\x01" * 16)


# signing ceremony


class YesDecider:
    def at_signing(self, view):
        return True

    def at_deposit(self, view):
        return True


class RefuseAt:
    def __init__(self, stop_index):
        self.stop_index = stop_index

    def at_signing(self, view):
        return view.sequence_index < self.stop_index

    at_deposit = at_signing


def test_ceremony_collects_every_signature(plain4):
    oracle = SignatureOracle()
    for i, key in enumerate(plain4.master_keys):
        oracle.register_key(i, key)
    res = signing_ceremony(plain4, [YesDecider()] * 4, oracle)
    assert res.complete and res.aborted_by is None
    assert res.bodies_signed == 56
    assert len(res.tags) == 56 * 4


def test_ceremony_abort_stops_before_any_exposure(plain4):
    oracle = SignatureOracle()
    for i, key in enumerate(plain4.master_keys):
        oracle.register_key(i, key)
    deciders = [YesDecider(), YesDecider(), RefuseAt(0), YesDecider()]
    res = signing_ceremony(plain4, deciders, oracle)
    assert res.aborted_by == 2
    assert res.bodies_signed == 0


def test_ceremony_orders_deposit_last(plain4):
    plan = iter_bodies(plain4, include_deposits=True)
    assert plan[-1].role == "deposit"
    assert len(plan) == 56
    # without the deposit: kernels and nothing else
    assert len(iter_bodies(plain4, include_deposits=False)) == 55


# honest verification


def clone(t):
    return copy.deepcopy(t)


def test_verify_accepts_honest_build(plain4, multi8):
    assert verify_as_honest(plain4) == []
    assert verify_as_honest(multi8) == []
    t = small_tournament(4, deposit_option=DEPOSIT_HASHLOCKED)
    assert verify_as_honest(t) == []


def rules_of(violations):
    return {v.rule for v in violations}


def test_verify_flags_duplicate_commitment(plain4):
    t = clone(plain4)
    a = t.kernels[KernelId(0, 0, 0)]
    b = t.kernels[KernelId(0, 1, 0)]
    t.kernels[KernelId(0, 1, 0)] = dataclasses.replace(b, left_commit=a.left_commit)
    assert "DuplicateCommitment" in rules_of(verify_as_honest(t))


def test_verify_flags_schedule_tampering(plain4):
    t = clone(plain4)
    k = t.kernels[KernelId(0, 0, 0)]
    t.kernels[KernelId(0, 0, 0)] = dataclasses.replace(k, t1=k.t1 + 1)
    assert "BadSchedule" in rules_of(verify_as_honest(t))

    t = clone(plain4)
    t.level_stride += 1
    assert "BadSchedule" in rules_of(verify_as_honest(t))


def test_verify_flags_timeout_tampering(plain4):
    t = clone(plain4)
    k = t.kernels[KernelId(0, 0, 0)]
    worse = k.outcome_txs[1]._replace(locktime=k.outcome_txs[1].locktime + 1)
    t.kernels[KernelId(0, 0, 0)] = dataclasses.replace(
        k, outcome_txs=(k.outcome_txs[0], worse, k.outcome_txs[2])
    )
    assert "BadTimeout" in rules_of(verify_as_honest(t))


def test_verify_flags_rewired_input(plain4):
    from commitlotto.chain import FixedInput
    from commitlotto.primitives import OutputRef

    t = clone(plain4)
    k = t.kernels[KernelId(1, 0, 0)]
    bogus = TransactionBody(
        inputs=(FixedInput(OutputRef(b"\xee" * 32, 0)), k.entry_tx.inputs[1]),
        outputs=k.entry_tx.outputs,
        locktime=k.entry_tx.locktime,
    )
    t.kernels[KernelId(1, 0, 0)] = dataclasses.replace(k, entry_tx=bogus)
    assert "BadWiring" in rules_of(verify_as_honest(t))


def test_verify_flags_payout_redirection(plain4):
    t = clone(plain4)
    k = t.kernels[KernelId(1, 0, 0)]
    # outcome 1 should pay the right player; point it at the left player
    stolen = k.outcome_txs[1]._replace(
        outputs=(
            k.outcome_txs[1].outputs[0]._replace(
                predicate=KeySign(t.master_keys[k.left_player])
            ),
        )
    )
    t.kernels[KernelId(1, 0, 0)] = dataclasses.replace(
        k, outcome_txs=(k.outcome_txs[0], stolen, k.outcome_txs[2])
    )
    assert "BadScript" in rules_of(verify_as_honest(t))


def test_verify_flags_missing_and_extra_kernels(plain4):
    t = clone(plain4)
    del t.kernels[KernelId(1, 0, 8)]
    assert "MissingKernel" in rules_of(verify_as_honest(t))

    t = clone(plain4)
    k = t.kernels[KernelId(1, 0, 8)]
    t.kernels[KernelId(1, 0, 9)] = k
    assert "UnexpectedKernel" in rules_of(verify_as_honest(t))


def test_verify_flags_deposit_tampering(plain4):
    t = clone(plain4)
    dep = t.deposit_bodies[0]
    t.deposit_bodies = (
        dep._replace(outputs=dep.outputs[:-1] + (dep.outputs[-1]._replace(value=2),)),
    )
    assert "BadDeposit" in rules_of(verify_as_honest(t))


def test_verify_flags_late_refund_window():
    t = clone(small_tournament(4, deposit_option=DEPOSIT_HASHLOCKED))
    t.refund_time = t.t_commit + 5
    found = verify_as_honest(t)
    assert any(
        v.rule == "BadDeposit" and "commit deadline" in v.detail for v in found
    )


def test_verify_rejects_bad_player_count():
    t = clone(small_tournament(4))
    t.master_keys = t.master_keys[:3] + (t.master_keys[0],)
    assert rules_of(verify_as_honest(t)) == {"BadParams"}


# serialization


def test_json_round_trip_preserves_public_state(plain4):
    doc = tournament_to_json(plain4)
    assert doc["format"] == FORMAT_TAG
    back = tournament_from_json(doc)
    assert back.n == plain4.n and back.mode == plain4.mode
    assert back.secrets == {}  # secrets never travel
    assert set(back.kernels) == set(plain4.kernels)
    for kid in plain4.kernels:
        a, b = plain4.kernels[kid], back.kernels[kid]
        assert (a.entry_tx, a.reveal_tx, a.outcome_txs) == (b.entry_tx, b.reveal_tx, b.outcome_txs)
    assert verify_as_honest(back) == []


def test_dump_load_text_round_trip(multi8):
    text = dump_tournament(multi8)
    back = load_tournament(text)
    assert back.stats.to_json() == multi8.stats.to_json()
    assert back.compressions.keys() == multi8.compressions.keys()
    assert verify_as_honest(back) == []


def test_load_rejects_wrong_format_tag(plain4):
    doc = tournament_to_json(plain4)
    doc["format"] = "something-else"
    with pytest.raises(ValueError):
        tournament_from_json(doc)


def test_json_doc_is_json_serializable(plain4):
    json.dumps(tournament_to_json(plain4))


def test_export_dot_mentions_every_kernel(plain4):
    dot = export_dot(plain4)
    assert dot.startswith("digraph")
    for kid in plain4.kernels:
        assert f"k{kid.level}_{kid.match}_{kid.combo}" in dot
