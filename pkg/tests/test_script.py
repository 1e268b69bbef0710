"""Predicate evaluation, hashing formulas, signature oracle."""

import hashlib

import pytest

from commitlotto.script import (
    AfterHeight,
    AllOf,
    AllSign,
    AnyOf,
    EvalContext,
    HashPreimage,
    InputWitness,
    KeySign,
    NotKeyOwner,
    SignatureOracle,
    XorParityOdd,
    commitment,
    evaluate,
    evaluate_explain,
    parity_bit,
    predicate_from_json,
    predicate_to_json,
)

KEY_A = b"\xaa" * 32
KEY_B = b"\xbb" * 32
DIGEST = b"\x01" * 32


def ctx(oracle=None, height=0, digest=DIGEST):
    return EvalContext(height=height, sig_digest=digest, oracle=oracle or SignatureOracle())


def witness(signatures=(), preimages=None, branch=None):
    return InputWitness(tuple(signatures), dict(preimages or {}), branch, None)


# frozen hash formulas


def test_commitment_is_plain_sha256():
    secret = b"\x07" * 32
    assert commitment(secret) == hashlib.sha256(secret).digest()


def test_parity_bit_reads_low_bit_of_last_byte():
    assert parity_bit(b"\x00" * 31 + b"\x06") == 0
    assert parity_bit(b"\x00" * 31 + b"\x03") == 1
    assert parity_bit(b"\xff\x02") == 0


def test_signature_tag_formula_frozen():
    oracle = SignatureOracle()
    oracle.register_key("alice", KEY_A)
    tag = oracle.sign("alice", KEY_A, DIGEST)
    assert tag == hashlib.sha256(b"sigtag:" + KEY_A + DIGEST).digest()[:16]


# signature oracle


def test_oracle_rejects_foreign_key():
    oracle = SignatureOracle()
    oracle.register_key("alice", KEY_A)
    oracle.register_key("bob", KEY_B)
    with pytest.raises(NotKeyOwner):
        oracle.sign("bob", KEY_A, DIGEST)


def test_verify_requires_a_recorded_signing_act():
    oracle = SignatureOracle()
    oracle.register_key("alice", KEY_A)
    assert not oracle.verify(KEY_A, DIGEST)
    oracle.sign("alice", KEY_A, DIGEST)
    assert oracle.verify(KEY_A, DIGEST)
    assert not oracle.verify(KEY_A, b"\x02" * 32)
    assert oracle.entry_count == 1
    # re-signing the same digest is idempotent
    oracle.sign("alice", KEY_A, DIGEST)
    assert oracle.entry_count == 1


# predicate evaluation


def test_keysign_needs_material_and_record():
    oracle = SignatureOracle()
    oracle.register_key("alice", KEY_A)
    p = KeySign(KEY_A)
    ok, why = evaluate_explain(p, witness(), ctx(oracle))
    assert not ok and "missing signature" in why
    tag = oracle.sign("alice", KEY_A, DIGEST)
    assert evaluate(p, witness([(KEY_A, tag)]), ctx(oracle))
    # same material against a different digest fails
    other = ctx(oracle, digest=b"\x02" * 32)
    ok, why = evaluate_explain(p, witness([(KEY_A, tag)]), other)
    assert not ok and "signature check failed" in why


def test_allsign_requires_every_key():
    oracle = SignatureOracle()
    oracle.register_key("alice", KEY_A)
    oracle.register_key("bob", KEY_B)
    p = AllSign((KEY_A, KEY_B))
    ta = oracle.sign("alice", KEY_A, DIGEST)
    ok, why = evaluate_explain(p, witness([(KEY_A, ta)]), ctx(oracle))
    assert not ok and "missing signature" in why
    tb = oracle.sign("bob", KEY_B, DIGEST)
    assert evaluate(p, witness([(KEY_A, ta), (KEY_B, tb)]), ctx(oracle))


def test_hash_preimage_slot_matching():
    secret = b"\x05" * 32
    p = HashPreimage(commitment(secret), "s")
    assert evaluate(p, witness(preimages={"s": secret}), ctx())
    ok, why = evaluate_explain(p, witness(), ctx())
    assert not ok and "missing preimage" in why
    ok, why = evaluate_explain(p, witness(preimages={"s": b"\x06" * 32}), ctx())
    assert not ok and "wrong preimage" in why


def test_after_height_boundary_inclusive():
    p = AfterHeight(7)
    assert not evaluate(p, witness(), ctx(height=6))
    assert evaluate(p, witness(), ctx(height=7))
    assert evaluate(p, witness(), ctx(height=8))


def test_xor_parity_odd():
    even = b"\x00" * 31 + b"\x06"  # low bit 0
    odd = b"\x00" * 31 + b"\x03"  # low bit 1
    p = XorParityOdd("l", "r")
    assert evaluate(p, witness(preimages={"l": even, "r": odd}), ctx())
    ok, why = evaluate_explain(p, witness(preimages={"l": even, "r": even}), ctx())
    assert not ok and why == "xor parity is even"
    ok, why = evaluate_explain(p, witness(preimages={"l": even}), ctx())
    assert not ok and why == "missing parity preimages"


def test_allof_reports_first_failing_term():
    p = AllOf((AfterHeight(3), HashPreimage(commitment(b"\x01" * 32), "s")))
    ok, why = evaluate_explain(p, witness(), ctx(height=0))
    assert not ok and "height 0 below lock 3" == why
    ok, why = evaluate_explain(p, witness(), ctx(height=3))
    assert not ok and "missing preimage" in why
    w = witness(preimages={"s": b"\x01" * 32})
    assert evaluate(p, w, ctx(height=3))


def test_anyof_uses_only_the_selected_branch():
    oracle = SignatureOracle()
    oracle.register_key("alice", KEY_A)
    tag = oracle.sign("alice", KEY_A, DIGEST)
    p = AnyOf((KeySign(KEY_A), AfterHeight(100)))
    # branch 0 succeeds even though branch 1 cannot
    assert evaluate(p, witness([(KEY_A, tag)], branch=0), ctx(oracle))
    # selecting the timeout branch ignores the valid signature
    ok, why = evaluate_explain(p, witness([(KEY_A, tag)], branch=1), ctx(oracle))
    assert not ok and "below lock" in why
    ok, why = evaluate_explain(p, witness([(KEY_A, tag)]), ctx(oracle))
    assert not ok and why == "missing branch selector"
    ok, why = evaluate_explain(p, witness(branch=2), ctx(oracle))
    assert not ok and "out of range" in why


def test_evaluate_rejects_non_predicate():
    with pytest.raises(TypeError):
        evaluate("not a predicate", witness(), ctx())


# serialization


def test_predicate_json_round_trip():
    secret = b"\x09" * 32
    p = AnyOf(
        (
            AllOf(
                (
                    AllSign((KEY_A, KEY_B)),
                    HashPreimage(commitment(secret), "sL"),
                    XorParityOdd("sL", "sR"),
                )
            ),
            AfterHeight(42),
            KeySign(KEY_A),
        )
    )
    doc = predicate_to_json(p)
    assert predicate_from_json(doc) == p


def test_predicate_json_rejects_unknown_op():
    with pytest.raises(ValueError):
        predicate_from_json({"op": "mystery"})
