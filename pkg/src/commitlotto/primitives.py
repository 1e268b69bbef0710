"""Low-level helpers shared across the package.

Canonical encodings are length-prefixed fields in declaration order with
fixed-width little-endian integers, so every digest in the system is a pure
function of the encoded structure. The deterministic RNG is a SHA-256
counter stream; child streams are derived by label so independent consumers
never share state and replays are bit-exact across platforms.
"""

from __future__ import annotations

import hashlib
import struct
from typing import NamedTuple

HASH_BYTES = 32
SIG_LAMBDA = 32  # nominal signature size in bytes, used for cost accounting
NULL_TXID = b"\x00" * HASH_BYTES


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def u32(n: int) -> bytes:
    return struct.pack("<I", n)


def u64(n: int) -> bytes:
    return struct.pack("<Q", n)


def lp_bytes(data: bytes) -> bytes:
    """Length-prefixed byte string."""
    return u32(len(data)) + data


def lp_str(s: str) -> bytes:
    return lp_bytes(s.encode("utf-8"))


class OutputRef(NamedTuple):
    """Reference to one output of a transaction, by normalized id and index."""

    txid: bytes
    index: int

    def encode(self) -> bytes:
        return self.txid + u32(self.index)

    def short(self) -> str:
        return f"{self.txid.hex()[:12]}:{self.index}"


class Rng:
    """Deterministic byte stream seeded by an integer, string or bytes.

    Output block i is sha256(key || i); `child(label)` derives a stream
    whose key mixes in the label, which keeps sibling consumers independent.
    """

    __slots__ = ("_key", "_counter")

    def __init__(self, seed: bytes | int | str):
        if isinstance(seed, int):
            seed = str(seed).encode("utf-8")
        elif isinstance(seed, str):
            seed = seed.encode("utf-8")
        self._key = sha256(b"rng-seed:" + seed)
        self._counter = 0

    def child(self, label) -> "Rng":
        r = Rng(b"")
        r._key = sha256(self._key + b"/" + str(label).encode("utf-8"))
        return r

    def bytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += sha256(self._key + u64(self._counter))
            self._counter += 1
        return bytes(out[:n])

    def nonzero_bytes(self, n: int) -> bytes:
        # all-zero strings are reserved as "unset" sentinels by callers
        while True:
            b = self.bytes(n)
            if any(b):
                return b

    def u256(self) -> int:
        return int.from_bytes(self.bytes(32), "big")

    def nonzero_u256(self) -> int:
        return int.from_bytes(self.nonzero_bytes(32), "big")

    def randrange(self, n: int) -> int:
        # rejection sampling keeps the draw unbiased
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = int.from_bytes(self.bytes(8), "big")
            if v < limit:
                return v % n
