"""Simulated UTXO blockchain with a block-height clock.

The chain is an append-only log plus a UTXO set. There are no fees and no
mempool: `submit` validates against current state and either applies the
transaction at the current height or rejects it with a reason. Consumed
output references are exclusive forever, which is what the scaffold's
mutually exclusive spend paths rely on.

Transaction ids are normalized (NTXID): the digest covers the canonical body
only, never witness data, so a fully wired tree of unsigned transactions can
reference each other before any signature exists. A MultiInput input commits
to its whole candidate set; the consumed member is witness data, so every
choice leaves the NTXID and the signature digest unchanged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

from .primitives import NULL_TXID, OutputRef, lp_bytes, sha256, u32, u64
from .script import (
    EvalContext,
    KeySign,
    Predicate,
    SignatureOracle,
    Witness,
    evaluate_explain,
    predicate_bytes,
    predicate_to_json,
)

# rejection reasons
DOUBLE_SPEND = "DoubleSpend"
LOCKTIME = "Locktime"
SCRIPT_FAIL = "ScriptFail"
MISSING_INPUT = "MissingInput"
VALUE_MISMATCH = "ValueMismatch"
BAD_MULTI_INPUT = "BadMultiInput"


@dataclass(frozen=True)
class ChainParams:
    tau: int = 6
    genesis_height: int = 0
    bet_value: int = 1

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.bet_value <= 0:
            raise ValueError("bet_value must be positive")


class FixedInput(NamedTuple):
    ref: OutputRef


class MultiInput(NamedTuple):
    refs: tuple[OutputRef, ...]


TxInput = Union[FixedInput, MultiInput]


def multi_input(refs) -> MultiInput:
    """Normalize a candidate set: sorted, deduplicated, non-empty."""
    normalized = tuple(sorted(set(refs)))
    if not normalized:
        raise ValueError("EmptySet: MultiInput needs at least one candidate ref")
    return MultiInput(normalized)


class TxOutput(NamedTuple):
    value: int
    predicate: Predicate


class TransactionBody(NamedTuple):
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]
    locktime: int = 0


def body_bytes(body: TransactionBody) -> bytes:
    parts = [u32(len(body.inputs))]
    for spec in body.inputs:
        if isinstance(spec, FixedInput):
            parts.append(b"\x00" + spec.ref.encode())
        else:
            parts.append(b"\x01" + u32(len(spec.refs)))
            parts.extend(r.encode() for r in spec.refs)
    parts.append(u32(len(body.outputs)))
    for out in body.outputs:
        parts.append(u64(out.value))
        parts.append(lp_bytes(predicate_bytes(out.predicate)))
    parts.append(u64(body.locktime))
    return b"".join(parts)


def compute_ntxid(body: TransactionBody) -> bytes:
    """Witness-independent transaction id."""
    return sha256(b"ntxid:" + body_bytes(body))


def sig_digest_for(body: TransactionBody, input_index: int) -> bytes:
    """Digest a signer commits to when authorizing one input.

    The canonical body already encodes a MultiInput as its full candidate
    set (the chosen ref lives in the witness), so one signing covers every
    member of the set, and all inputs of a body share a single digest.
    """
    if not (0 <= input_index < len(body.inputs)):
        raise IndexError(f"input index {input_index} out of range")
    return sha256(b"sigmsg:" + body_bytes(body))


class SubmitResult(NamedTuple):
    accepted: bool
    ntxid: Optional[bytes]
    reason: Optional[str]
    detail: str = ""


class LogEntry(NamedTuple):
    ntxid: bytes
    body: TransactionBody
    witness: Optional[Witness]  # None marks a mint
    height: int


class Chain:
    """Ledger state: height, UTXO set, spent set and the accepted log."""

    def __init__(self, params: ChainParams, oracle: SignatureOracle):
        self.params = params
        self.oracle = oracle
        self.height = params.genesis_height
        self.utxo: dict[OutputRef, TxOutput] = {}
        self.log: list[LogEntry] = []
        self.minted_total = 0
        self._spent: set[OutputRef] = set()
        self._mint_serial = 0

    def advance(self, blocks: int = 1) -> int:
        if blocks < 1:
            raise ValueError("advance by at least one block")
        self.height += blocks
        return self.height

    def advance_to(self, height: int) -> int:
        if height > self.height:
            self.height = height
        return self.height

    def mint(self, value: int, predicate: Predicate) -> OutputRef:
        """Create value out of thin air (test and scenario setup only).

        The synthetic input references the null txid with a serial index, so
        repeated mints of identical outputs still get distinct NTXIDs.
        """
        if value <= 0:
            raise ValueError("mint value must be positive")
        body = TransactionBody(
            inputs=(FixedInput(OutputRef(NULL_TXID, self._mint_serial)),),
            outputs=(TxOutput(value, predicate),),
        )
        self._mint_serial += 1
        ntxid = compute_ntxid(body)
        ref = OutputRef(ntxid, 0)
        self.utxo[ref] = body.outputs[0]
        self.minted_total += value
        self.log.append(LogEntry(ntxid, body, None, self.height))
        return ref

    def submit(self, body: TransactionBody, witness: Witness) -> SubmitResult:
        """Validate and apply atomically at the current height."""
        ntxid = compute_ntxid(body)
        if len(witness.inputs) != len(body.inputs):
            return SubmitResult(False, None, SCRIPT_FAIL, "witness arity mismatch")
        if body.locktime > self.height:
            return SubmitResult(
                False, None, LOCKTIME, f"locktime {body.locktime} > height {self.height}"
            )

        consumed: list[OutputRef] = []
        for i, (spec, iw) in enumerate(zip(body.inputs, witness.inputs)):
            if isinstance(spec, FixedInput):
                if iw.chosen_ref is not None:
                    return SubmitResult(
                        False, None, BAD_MULTI_INPUT, f"input {i}: chosenRef on fixed input"
                    )
                ref = spec.ref
            else:
                if iw.chosen_ref is None:
                    return SubmitResult(
                        False, None, BAD_MULTI_INPUT, f"input {i}: missing chosenRef"
                    )
                if iw.chosen_ref not in spec.refs:
                    return SubmitResult(
                        False, None, BAD_MULTI_INPUT, f"input {i}: chosenRef not in set"
                    )
                ref = iw.chosen_ref
            if ref in consumed:
                return SubmitResult(False, None, DOUBLE_SPEND, f"input {i}: repeated ref")
            if ref not in self.utxo:
                if ref in self._spent:
                    return SubmitResult(
                        False, None, DOUBLE_SPEND, f"input {i}: {ref.short()} already spent"
                    )
                return SubmitResult(False, None, MISSING_INPUT, f"input {i}: unknown {ref.short()}")
            consumed.append(ref)

        in_sum = sum(self.utxo[ref].value for ref in consumed)
        out_sum = sum(out.value for out in body.outputs)
        if not body.outputs or any(out.value <= 0 for out in body.outputs):
            return SubmitResult(False, None, VALUE_MISMATCH, "outputs must carry positive value")
        if in_sum != out_sum:
            return SubmitResult(
                False, None, VALUE_MISMATCH, f"inputs {in_sum} != outputs {out_sum}"
            )

        for i, (spec, iw) in enumerate(zip(body.inputs, witness.inputs)):
            ctx = EvalContext(
                height=self.height,
                sig_digest=sig_digest_for(body, i),
                oracle=self.oracle,
                multi_input_set=spec.refs if isinstance(spec, MultiInput) else None,
                chosen_ref=iw.chosen_ref,
            )
            ok, why = evaluate_explain(self.utxo[consumed[i]].predicate, iw, ctx)
            if not ok:
                return SubmitResult(False, None, SCRIPT_FAIL, f"input {i}: {why}")

        for ref in consumed:
            del self.utxo[ref]
            self._spent.add(ref)
        for k, out in enumerate(body.outputs):
            self.utxo[OutputRef(ntxid, k)] = out
        self.log.append(LogEntry(ntxid, body, witness, self.height))
        return SubmitResult(True, ntxid, None)

    # accounting helpers

    def total_utxo_value(self) -> int:
        return sum(out.value for out in self.utxo.values())

    def key_balance(self, key: bytes) -> int:
        """Value spendable unilaterally by one key."""
        return sum(
            out.value
            for out in self.utxo.values()
            if isinstance(out.predicate, KeySign) and out.predicate.key == key
        )

    def is_unspent(self, ref: OutputRef) -> bool:
        return ref in self.utxo

    def was_spent(self, ref: OutputRef) -> bool:
        return ref in self._spent

    def audit(self) -> None:
        """Assert ledger invariants; used by tests after every scenario."""
        assert self.total_utxo_value() == self.minted_total, "value conservation broken"
        seen: set[OutputRef] = set()
        for entry in self.log:
            if entry.witness is None:
                continue  # mint
            for spec, iw in zip(entry.body.inputs, entry.witness.inputs):
                ref = spec.ref if isinstance(spec, FixedInput) else iw.chosen_ref
                assert ref not in seen, f"output {ref.short()} consumed twice"
                seen.add(ref)
        assert seen == self._spent, "spent set out of sync with log"

    def export_log_jsonl(self) -> str:
        """One JSON object per accepted transaction, in order."""
        lines = []
        for entry in self.log:
            lines.append(json.dumps(_log_entry_json(entry), sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


def _log_entry_json(entry: LogEntry) -> dict:
    body = entry.body
    inputs = []
    for i, spec in enumerate(body.inputs):
        if isinstance(spec, FixedInput):
            inputs.append({"kind": "fixed", "txid": spec.ref.txid.hex(), "index": spec.ref.index})
        else:
            inputs.append(
                {
                    "kind": "multi",
                    "refs": [{"txid": r.txid.hex(), "index": r.index} for r in spec.refs],
                }
            )
    outputs = [
        {"value": out.value, "predicate": predicate_to_json(out.predicate)}
        for out in body.outputs
    ]
    summary: object
    if entry.witness is None:
        summary = "mint"
    else:
        summary = [
            {
                "signatures": len(iw.signatures),
                "preimage_slots": sorted(iw.preimages.keys()),
                "branch": iw.branch,
                "chosen_ref": (
                    {"txid": iw.chosen_ref.txid.hex(), "index": iw.chosen_ref.index}
                    if iw.chosen_ref
                    else None
                ),
            }
            for iw in entry.witness.inputs
        ]
    return {
        "ntxid": entry.ntxid.hex(),
        "height": entry.height,
        "locktime": body.locktime,
        "inputs": inputs,
        "outputs": outputs,
        "witness": summary,
    }
