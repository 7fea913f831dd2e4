"""Fixed-length binary payloads with XOR composition."""

from __future__ import annotations

import os


class Symbol(bytes):
    """An immutable octet block that composes with ``^``.

    All symbols of one session share a length; combining symbols of
    different lengths raises ``ValueError``.
    """

    __slots__ = ()

    @classmethod
    def zero(cls, size: int) -> "Symbol":
        return cls(size)

    @classmethod
    def random(cls, size: int, rng=None) -> "Symbol":
        if rng is None:
            return cls(os.urandom(size))
        return cls(rng.integers(0, 256, size=size, dtype="uint8").tobytes())

    def __xor__(self, other: bytes) -> "Symbol":
        return xor(self, other)

    def is_zero(self) -> bool:
        return not any(self)

    def __repr__(self) -> str:
        return f"Symbol({self.hex()})"


def xor(a: bytes, b: bytes) -> Symbol:
    if len(a) != len(b):
        raise ValueError(f"symbol length mismatch: {len(a)} != {len(b)}")
    n = len(a)
    v = int.from_bytes(a, "big") ^ int.from_bytes(b, "big")
    return Symbol(v.to_bytes(n, "big"))


class XorCounter:
    """Counts symbol-XOR operations for one session or one decode."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def accumulate(self, target: bytes, source: bytes) -> Symbol:
        out = xor(target, source)
        self.count += 1
        return out

    def __repr__(self) -> str:
        return f"XorCounter({self.count})"


def xor_accumulate(target: bytes, source: bytes, counter: XorCounter) -> Symbol:
    """Return ``target ^ source`` and charge one operation to ``counter``."""
    return counter.accumulate(target, source)
