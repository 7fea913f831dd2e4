"""Systematic sparse-graph outer code of rate at most 1 - 2*gamma.

Codeword layout: ``k_prime`` message symbols followed by ``m = k - k_prime``
parity symbols. Every message symbol feeds ``parity_degree`` distinct checks
chosen pseudorandomly from ``construction_seed``, so the graph is rebuilt from
the spec alone. Parities are accumulated along a staircase, check ``j`` being::

    p[j] ^ p[j-1] ^ (XOR of its message neighbours) == 0      (p[-1] := 0)

which keeps an erased parity recoverable from its neighbours in the chain.
Decoding peels checks with a single erased variable and hands a stalled
residual to GF(2) elimination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .degree import exact_gamma
from .symbols import Symbol, XorCounter


@dataclass(frozen=True)
class PrecodeSpec:
    k_prime: int
    gamma: float
    parity_degree: int = 6
    construction_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.k_prime, int) or self.k_prime < 1:
            raise ValueError(f"k_prime must be a positive integer, got {self.k_prime!r}")
        exact_gamma(self.gamma)
        if self.parity_degree < 1:
            raise ValueError(f"parity_degree must be positive, got {self.parity_degree}")

    @property
    def k(self) -> int:
        return math.ceil(self.k_prime / (1 - 2 * exact_gamma(self.gamma)))

    @property
    def n_parity(self) -> int:
        return self.k - self.k_prime

    @property
    def overhead_ratio(self) -> float:
        """Stored codeword symbols per message symbol."""
        return self.k / self.k_prime

    @cached_property
    def message_checks(self) -> tuple[tuple[int, ...], ...]:
        """For each message position, the checks it participates in."""
        rng = np.random.default_rng(self.construction_seed)
        m = self.n_parity
        w = min(self.parity_degree, m)
        return tuple(
            tuple(sorted(int(c) for c in rng.choice(m, size=w, replace=False)))
            for _ in range(self.k_prime)
        )

    @cached_property
    def check_neighbors(self) -> tuple[tuple[int, ...], ...]:
        """For each check, the message positions it covers."""
        nbrs: list[list[int]] = [[] for _ in range(self.n_parity)]
        for i, checks in enumerate(self.message_checks):
            for c in checks:
                nbrs[c].append(i)
        return tuple(tuple(n) for n in nbrs)

    @cached_property
    def check_variables(self) -> tuple[tuple[int, ...], ...]:
        """All codeword positions in each check: message neighbours and the
        one or two staircase parities."""
        kp = self.k_prime
        out = []
        for j, nbrs in enumerate(self.check_neighbors):
            stair = (kp + j,) if j == 0 else (kp + j - 1, kp + j)
            out.append(nbrs + stair)
        return tuple(out)

    @cached_property
    def variable_checks(self) -> tuple[tuple[int, ...], ...]:
        """For each codeword position, the checks containing it."""
        m = self.n_parity
        parity = [(j,) if j == m - 1 else (j, j + 1) for j in range(m)]
        return self.message_checks + tuple(parity)


@dataclass
class DecodeResult:
    """Outcome of :func:`precode_decode`. ``message`` is None on failure."""

    message: list[Symbol] | None
    xors: int = 0
    peeled: int = 0
    eliminated: int = 0
    erased_message: int = 0
    undetermined: int = 0  # message positions left ambiguous by a failed decode

    @property
    def ok(self) -> bool:
        return self.message is not None

    @property
    def used_elimination(self) -> bool:
        return self.eliminated > 0 or self.undetermined > 0


def precode_encode(spec: PrecodeSpec, message, counter: XorCounter | None = None) -> list[Symbol]:
    if len(message) != spec.k_prime:
        raise ValueError(f"message has {len(message)} symbols, expected {spec.k_prime}")
    if counter is None:
        counter = XorCounter()
    msg = [Symbol(m) for m in message]
    prev = Symbol.zero(len(msg[0]))
    parity = []
    for j, nbrs in enumerate(spec.check_neighbors):
        acc = prev if j else None
        for i in nbrs:
            acc = msg[i] if acc is None else counter.accumulate(acc, msg[i])
        if acc is None:
            acc = prev
        parity.append(acc)
        prev = acc
    return msg + parity


def precode_decode(spec: PrecodeSpec, received) -> DecodeResult:
    """Recover the message from a codeword with erasures (``None`` entries)."""
    k_prime = spec.k_prime
    if len(received) != spec.k:
        raise ValueError(f"received has {len(received)} slots, expected {spec.k}")
    vals: list[Symbol | None] = [None if s is None else Symbol(s) for s in received]
    result = DecodeResult(None, erased_message=sum(v is None for v in vals[:k_prime]))
    if not result.erased_message:
        result.message = vals[:k_prime]
        return result

    counter = XorCounter()
    check_vars = spec.check_variables
    var_checks = spec.variable_checks
    erased = [i for i, v in enumerate(vals) if v is None]
    missing: dict[int, int] = {}
    for i in erased:
        for c in var_checks[i]:
            missing[c] = missing.get(c, 0) + 1

    def solve(c: int, skip: int) -> Symbol:
        acc = None
        for i in check_vars[c]:
            if i != skip:
                acc = vals[i] if acc is None else counter.accumulate(acc, vals[i])
        return acc

    queue = [c for c, n in missing.items() if n == 1]
    while queue:
        c = queue.pop()
        if missing[c] != 1:
            continue
        u = next(i for i in check_vars[c] if vals[i] is None)
        vals[u] = solve(c, u)
        result.peeled += 1
        for c2 in var_checks[u]:
            missing[c2] -= 1
            if missing[c2] == 1:
                queue.append(c2)

    residual = [i for i in erased if vals[i] is None]
    if any(i < k_prime for i in residual):
        size = len(next((v for v in vals if v is not None), b""))
        solved, undetermined = _eliminate(spec, vals, residual, missing, counter, size)
        result.eliminated = len(solved)
        result.undetermined = undetermined
        if undetermined:
            result.xors = counter.count
            return result
        for i, v in solved.items():
            vals[i] = v

    result.xors = counter.count
    result.message = vals[:k_prime]
    return result


def _eliminate(spec, vals, residual, missing, counter, size):
    """Gauss-Jordan over GF(2) on the checks still touching erased positions.

    Returns the solved message positions and the number of message positions
    the residual system leaves undetermined.
    """
    k_prime = spec.k_prime
    col = {v: j for j, v in enumerate(residual)}
    rows = []
    for c, n in missing.items():
        if n <= 0:
            continue
        mask = 0
        acc = None
        for i in spec.check_variables[c]:
            if vals[i] is None:
                mask |= 1 << col[i]
            else:
                acc = vals[i] if acc is None else counter.accumulate(acc, vals[i])
        rows.append([mask, acc])

    pivot_row: dict[int, int] = {}
    t0 = 0
    for j in range(len(residual)):
        bit = 1 << j
        p = next((t for t in range(t0, len(rows)) if rows[t][0] & bit), None)
        if p is None:
            continue
        rows[t0], rows[p] = rows[p], rows[t0]
        pmask, pval = rows[t0]
        for t, row in enumerate(rows):
            if t != t0 and row[0] & bit:
                row[0] ^= pmask
                row[1] = _add(row[1], pval, counter)
        pivot_row[j] = t0
        t0 += 1

    free = 0
    for j in range(len(residual)):
        if j not in pivot_row:
            free |= 1 << j
    solved = {}
    undetermined = 0
    for j, v in enumerate(residual):
        if v >= k_prime:
            continue
        t = pivot_row.get(j)
        if t is None or rows[t][0] & free:
            undetermined += 1
        else:
            solved[v] = rows[t][1] if rows[t][1] is not None else Symbol.zero(size)
    return solved, undetermined


def _add(a, b, counter):
    if a is None:
        return b
    if b is None:
        return a
    return counter.accumulate(a, b)


def erase_uniform(codeword, n_erasures: int, rng) -> list:
    """Copy of ``codeword`` with ``n_erasures`` uniformly chosen slots set to None."""
    out = list(codeword)
    for i in rng.choice(len(out), size=n_erasures, replace=False):
        out[int(i)] = None
    return out
