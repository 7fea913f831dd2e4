"""Sender and receiver of the truncated real-time oblivious protocol.

The sender streams XORs of ``current_degree`` codeword symbols; the receiver
either decodes one new codeword symbol from each arrival or discards it, and
asks the sender to raise the degree whenever its optimal value changes. Codeword
positions are 0-based throughout.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass
from typing import NamedTuple

from .degree import DegreePolicy
from .symbols import Symbol, XorCounter

_MASK64 = (1 << 64) - 1
_WIRE_HEADER = struct.Struct(">HQ")


class ProtocolError(Exception):
    """A state machine was driven out of order or received a malformed message."""


# -- index derivation --------------------------------------------------------


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_indices(index_seed: int, degree: int, k: int) -> tuple[int, ...]:
    """Positions of the ``degree`` distinct codeword symbols named by ``index_seed``.

    Partial Fisher-Yates shuffle of ``range(k)`` driven by SplitMix64, with
    rejection sampling so every draw is exactly uniform. Sender and receiver
    call this with the same arguments and get the same tuple.
    """
    if not 1 <= degree <= k:
        raise ValueError(f"degree must satisfy 1 <= degree <= k={k}, got {degree}")
    state = index_seed & _MASK64
    swapped: dict[int, int] = {}
    out = []
    for i in range(degree):
        n = k - i
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            state, z = _splitmix64(state)
            if z < limit:
                break
        j = i + z % n
        out.append(swapped.get(j, j))
        swapped[j] = swapped.get(i, i)
    return tuple(out)


# -- messages ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class EncodingSymbol:
    payload: Symbol
    degree: int
    index_seed: int

    def indices(self, k: int) -> tuple[int, ...]:
        return derive_indices(self.index_seed, self.degree, k)

    def to_bytes(self) -> bytes:
        return _WIRE_HEADER.pack(self.degree, self.index_seed) + bytes(self.payload)

    @classmethod
    def from_bytes(cls, data: bytes, symbol_size: int) -> "EncodingSymbol":
        if len(data) != _WIRE_HEADER.size + symbol_size:
            raise ValueError(
                f"expected {_WIRE_HEADER.size + symbol_size} bytes, got {len(data)}"
            )
        degree, seed = _WIRE_HEADER.unpack_from(data)
        return cls(Symbol(data[_WIRE_HEADER.size:]), degree, seed)


class FeedbackMessage(enum.Enum):
    INCREMENT_DEGREE = 0x01
    TERMINATE = 0x02

    def to_bytes(self) -> bytes:
        return bytes([self.value])

    @classmethod
    def from_bytes(cls, data: bytes) -> "FeedbackMessage":
        if len(data) != 1:
            raise ValueError(f"feedback message is one octet, got {len(data)}")
        try:
            return cls(data[0])
        except ValueError:
            raise ValueError(f"unknown feedback octet 0x{data[0]:02x}") from None


# -- sender ------------------------------------------------------------------


class Sender:
    """Encoder loop. Holds the codeword and the degree it is currently told to use."""

    def __init__(self, codeword, policy: DegreePolicy, seed: int | None = None):
        if len(codeword) != policy.k:
            raise ValueError(f"codeword has {len(codeword)} symbols, policy expects {policy.k}")
        self.codeword = [Symbol(c) for c in codeword]
        self.policy = policy
        self.current_degree = 1
        self.terminated = False
        self.xors = XorCounter()
        self._rng = random.Random(seed)

    @property
    def can_increment(self) -> bool:
        return self.current_degree < self.policy.max_degree

    def next_symbol(self) -> EncodingSymbol:
        if self.terminated:
            raise ProtocolError("sender already terminated")
        seed = self._rng.getrandbits(64)
        idx = derive_indices(seed, self.current_degree, self.policy.k)
        payload = self.codeword[idx[0]]
        for i in idx[1:]:
            payload = self.xors.accumulate(payload, self.codeword[i])
        return EncodingSymbol(payload, self.current_degree, seed)

    def on_feedback(self, msg: FeedbackMessage) -> None:
        if msg is FeedbackMessage.TERMINATE:
            self.terminated = True
        elif msg is FeedbackMessage.INCREMENT_DEGREE:
            if not self.can_increment:
                raise ProtocolError(
                    f"increment past max degree {self.policy.max_degree}"
                )
            self.current_degree += 1
        else:
            raise ProtocolError(f"unknown feedback {msg!r}")


# -- receiver ----------------------------------------------------------------


class Outcome(NamedTuple):
    position: int | None  # decoded codeword position, None when discarded
    feedback: FeedbackMessage | None

    @property
    def decoded(self) -> bool:
        return self.position is not None


class Receiver:
    """Process-or-discard decoder with a known-position bitmap.

    Stops accepting symbols once ``target`` positions are known.
    """

    def __init__(self, policy: DegreePolicy, symbol_size: int):
        self.policy = policy
        self.k = policy.k
        self.target = policy.target
        self.symbol_size = symbol_size
        self.known = bytearray(self.k)
        self.symbols: list[Symbol | None] = [None] * self.k
        self.r = 0
        self.desired_degree = policy.degree(0)
        self.xors = XorCounter()
        self.bitmap_lookups = 0

    def is_complete(self) -> bool:
        return self.r >= self.target

    def process(self, sym: EncodingSymbol) -> Outcome:
        if self.is_complete():
            raise ProtocolError("receiver already holds its target")
        if not 1 <= sym.degree <= self.k:
            raise ProtocolError(f"degree {sym.degree} outside [1, {self.k}]")
        if len(sym.payload) != self.symbol_size:
            raise ProtocolError(f"payload of {len(sym.payload)} bytes, expected {self.symbol_size}")
        idx = sym.indices(self.k)
        known = self.known
        unknown = -1
        n_unknown = 0
        for i in idx:
            if not known[i]:
                n_unknown += 1
                unknown = i
        self.bitmap_lookups += len(idx)
        if n_unknown != 1:
            return Outcome(None, None)

        value = sym.payload
        for i in idx:
            if i != unknown:
                value = self.xors.accumulate(value, self.symbols[i])
        self.symbols[unknown] = value
        known[unknown] = 1
        self.r += 1

        if self.is_complete():
            return Outcome(unknown, FeedbackMessage.TERMINATE)
        new_degree = self.policy.degree(self.r)
        if new_degree != self.desired_degree:
            self.desired_degree = new_degree
            return Outcome(unknown, FeedbackMessage.INCREMENT_DEGREE)
        return Outcome(unknown, None)

    def received(self) -> list[Symbol | None]:
        """Codeword view with ``None`` at every unrecovered position."""
        return list(self.symbols)
