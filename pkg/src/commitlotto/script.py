"""Spending predicates, witnesses and the ideal signature oracle.

Predicates form a small semantic AST instead of a byte-level script VM:
N-of-N multisig, hash locks, absolute time locks, a one-bit XOR parity check
over two revealed preimages, and conjunction/alternation combinators. An
AnyOf never scans branches; the witness's branch selector picks exactly one,
so evaluation order can never leak an unintended spend path.

Signatures come from an ideal oracle that records (key, digest) pairs.
Verification succeeds only for recorded pairs, which models unforgeability
without real cryptography and keeps runs deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .primitives import OutputRef, lp_bytes, lp_str, sha256, u32, u64


@dataclass(frozen=True)
class KeySign:
    """Spendable by a signature from one key."""

    key: bytes


@dataclass(frozen=True)
class AllSign:
    """Spendable only with a signature from every listed key."""

    keys: tuple[bytes, ...]


@dataclass(frozen=True)
class HashPreimage:
    """Requires a preimage of `digest` supplied in the named witness slot."""

    digest: bytes
    slot: str


@dataclass(frozen=True)
class AfterHeight:
    """True once the chain height reaches `height` (absolute time lock)."""

    height: int


@dataclass(frozen=True)
class XorParityOdd:
    """True iff the low bits of two slot preimages XOR to 1.

    Parity is taken from the last byte of each preimage. The slots must be
    bound by HashPreimage terms inside the same AllOf, otherwise arbitrary
    bytes could satisfy the check.
    """

    slot_a: str
    slot_b: str


@dataclass(frozen=True)
class AllOf:
    terms: tuple


@dataclass(frozen=True)
class AnyOf:
    branches: tuple


Predicate = Union[KeySign, AllSign, HashPreimage, AfterHeight, XorParityOdd, AllOf, AnyOf]

_TAG_KEYSIGN = b"\x01"
_TAG_ALLSIGN = b"\x02"
_TAG_HASHPRE = b"\x03"
_TAG_AFTER = b"\x04"
_TAG_XOR = b"\x05"
_TAG_ALLOF = b"\x06"
_TAG_ANYOF = b"\x07"


def predicate_bytes(p: Predicate) -> bytes:
    """Canonical serialization, the basis of all transaction digests."""
    if isinstance(p, KeySign):
        return _TAG_KEYSIGN + lp_bytes(p.key)
    if isinstance(p, AllSign):
        return _TAG_ALLSIGN + u32(len(p.keys)) + b"".join(lp_bytes(k) for k in p.keys)
    if isinstance(p, HashPreimage):
        return _TAG_HASHPRE + lp_bytes(p.digest) + lp_str(p.slot)
    if isinstance(p, AfterHeight):
        return _TAG_AFTER + u64(p.height)
    if isinstance(p, XorParityOdd):
        return _TAG_XOR + lp_str(p.slot_a) + lp_str(p.slot_b)
    if isinstance(p, AllOf):
        return _TAG_ALLOF + u32(len(p.terms)) + b"".join(
            lp_bytes(predicate_bytes(t)) for t in p.terms
        )
    if isinstance(p, AnyOf):
        return _TAG_ANYOF + u32(len(p.branches)) + b"".join(
            lp_bytes(predicate_bytes(b)) for b in p.branches
        )
    raise TypeError(f"not a predicate: {p!r}")


def predicate_to_json(p: Predicate) -> dict:
    if isinstance(p, KeySign):
        return {"op": "key-sign", "key": p.key.hex()}
    if isinstance(p, AllSign):
        return {"op": "all-sign", "keys": [k.hex() for k in p.keys]}
    if isinstance(p, HashPreimage):
        return {"op": "hash-preimage", "digest": p.digest.hex(), "slot": p.slot}
    if isinstance(p, AfterHeight):
        return {"op": "after-height", "height": p.height}
    if isinstance(p, XorParityOdd):
        return {"op": "xor-parity-odd", "slot_a": p.slot_a, "slot_b": p.slot_b}
    if isinstance(p, AllOf):
        return {"op": "all-of", "terms": [predicate_to_json(t) for t in p.terms]}
    if isinstance(p, AnyOf):
        return {"op": "any-of", "branches": [predicate_to_json(b) for b in p.branches]}
    raise TypeError(f"not a predicate: {p!r}")


def predicate_from_json(obj: dict) -> Predicate:
    op = obj["op"]
    if op == "key-sign":
        return KeySign(bytes.fromhex(obj["key"]))
    if op == "all-sign":
        return AllSign(tuple(bytes.fromhex(k) for k in obj["keys"]))
    if op == "hash-preimage":
        return HashPreimage(bytes.fromhex(obj["digest"]), obj["slot"])
    if op == "after-height":
        return AfterHeight(int(obj["height"]))
    if op == "xor-parity-odd":
        return XorParityOdd(obj["slot_a"], obj["slot_b"])
    if op == "all-of":
        return AllOf(tuple(predicate_from_json(t) for t in obj["terms"]))
    if op == "any-of":
        return AnyOf(tuple(predicate_from_json(b) for b in obj["branches"]))
    raise ValueError(f"unknown predicate op: {op}")


def commitment(secret: bytes) -> bytes:
    """Commitment digest for a scaffold secret."""
    return sha256(secret)


def parity_bit(preimage: bytes) -> int:
    return preimage[-1] & 1


class NotKeyOwner(Exception):
    """Raised when a party asks the oracle to sign with a key it does not own."""


class SignatureOracle:
    """Ideal signatures: verify(key, digest) is true iff sign() recorded it."""

    def __init__(self) -> None:
        self._owners: dict[bytes, object] = {}
        self._signed: set[tuple[bytes, bytes]] = set()

    def register_key(self, party, key: bytes) -> None:
        self._owners[key] = party

    def owner_of(self, key: bytes):
        return self._owners.get(key)

    def sign(self, party, key: bytes, digest: bytes) -> bytes:
        if self._owners.get(key) != party:
            raise NotKeyOwner(f"{party!r} does not own key {key.hex()[:12]}")
        self._signed.add((key, digest))
        # the tag is an opaque handle carried in witnesses; verification
        # consults the registry, not the tag
        return sha256(b"sigtag:" + key + digest)[:16]

    def verify(self, key: bytes, digest: bytes) -> bool:
        return (key, digest) in self._signed

    @property
    def entry_count(self) -> int:
        return len(self._signed)


@dataclass
class InputWitness:
    """Witness material for one transaction input.

    `signatures` holds (key, tag) pairs, `preimages` maps slot labels to
    revealed byte strings, `branch` selects an AnyOf alternative and
    `chosen_ref` names the consumed member of a MultiInput set.
    """

    signatures: tuple[tuple[bytes, bytes], ...] = ()
    preimages: Mapping[str, bytes] = field(default_factory=dict)
    branch: Optional[int] = None
    chosen_ref: Optional[OutputRef] = None


@dataclass
class Witness:
    inputs: tuple[InputWitness, ...] = ()


@dataclass
class EvalContext:
    """Information a predicate may consult during evaluation."""

    height: int
    sig_digest: bytes
    oracle: SignatureOracle
    multi_input_set: Optional[tuple[OutputRef, ...]] = None
    chosen_ref: Optional[OutputRef] = None


def evaluate_explain(p: Predicate, w: InputWitness, ctx: EvalContext) -> tuple[bool, Optional[str]]:
    """Evaluate and, on failure, say why.

    Malformed witnesses (missing slots, signatures or branch selectors)
    evaluate false like any other failure; the reason string distinguishes
    them for diagnostics.
    """
    if isinstance(p, KeySign):
        if not any(k == p.key for k, _tag in w.signatures):
            return False, f"missing signature material for key {p.key.hex()[:12]}"
        if not ctx.oracle.verify(p.key, ctx.sig_digest):
            return False, f"signature check failed for key {p.key.hex()[:12]}"
        return True, None
    if isinstance(p, AllSign):
        supplied = {k for k, _tag in w.signatures}
        for key in p.keys:
            if key not in supplied:
                return False, f"missing signature material for key {key.hex()[:12]}"
            if not ctx.oracle.verify(key, ctx.sig_digest):
                return False, f"signature check failed for key {key.hex()[:12]}"
        return True, None
    if isinstance(p, HashPreimage):
        pre = w.preimages.get(p.slot)
        if pre is None:
            return False, f"missing preimage slot {p.slot!r}"
        if sha256(pre) != p.digest:
            return False, f"wrong preimage in slot {p.slot!r}"
        return True, None
    if isinstance(p, AfterHeight):
        if ctx.height < p.height:
            return False, f"height {ctx.height} below lock {p.height}"
        return True, None
    if isinstance(p, XorParityOdd):
        a = w.preimages.get(p.slot_a)
        b = w.preimages.get(p.slot_b)
        if not a or not b:
            return False, "missing parity preimages"
        if (parity_bit(a) ^ parity_bit(b)) != 1:
            return False, "xor parity is even"
        return True, None
    if isinstance(p, AllOf):
        for term in p.terms:
            ok, why = evaluate_explain(term, w, ctx)
            if not ok:
                return False, why
        return True, None
    if isinstance(p, AnyOf):
        # exactly one branch is evaluated, chosen by the witness
        if w.branch is None:
            return False, "missing branch selector"
        if not (0 <= w.branch < len(p.branches)):
            return False, f"branch selector {w.branch} out of range"
        return evaluate_explain(p.branches[w.branch], w, ctx)
    raise TypeError(f"not a predicate: {p!r}")


def evaluate(p: Predicate, w: InputWitness, ctx: EvalContext) -> bool:
    ok, _why = evaluate_explain(p, w, ctx)
    return ok
