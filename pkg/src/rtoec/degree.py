"""Degree schedule for the truncated real-time oblivious protocol.

The receiver knows ``r`` of ``k`` codeword symbols. A fresh encoding symbol of
degree ``d`` is *revealing* when exactly one of its ``d`` distinct constituents
is unknown; its probability is hypergeometric::

    p(d, r) = C(r, d-1) * (k - r) / C(k, d)

The ratio ``p(d+1, r) / p(d, r) = (r-d+1)(d+1) / (d(k-d))`` exceeds one iff
``d (k - r) < r + 1``, so the maximizers of ``p`` are the integers between
``ceil((r+1)/(k-r))`` and ``floor((k+1)/(k-r))``. The two coincide unless
``k - r`` divides ``k + 1``, in which case two neighbouring degrees tie and we
take the smaller one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

# Absorbs the additive remainder terms of the processed-symbol bound.
C_SLACK = 4 * math.e + 1

# Decimal expansion of e, truncated and rounded up at 40 places.
_E_LOW = Fraction("2.7182818284590452353602874713526624977572")
_E_HIGH = Fraction("2.7182818284590452353602874713526624977573")


def exact_gamma(gamma) -> Fraction:
    """Rational value of ``gamma``; floats are read through their shortest repr."""
    if isinstance(gamma, Fraction):
        g = gamma
    elif isinstance(gamma, int):
        g = Fraction(gamma)
    else:
        g = Fraction(repr(float(gamma)))
    if not 0 < g < Fraction(1, 2):
        raise ValueError(f"gamma must satisfy 0 < gamma < 1/2, got {gamma}")
    return g


def _check_k(k: int) -> None:
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")


def _check_r(k: int, r: int) -> None:
    _check_k(k)
    if not 0 <= r < k:
        raise ValueError(f"r must satisfy 0 <= r < k={k}, got {r}")


def truncation_target(k: int, gamma) -> int:
    """Number of codeword symbols the receiver recovers: ceil((1 - gamma) k)."""
    _check_k(k)
    return math.ceil((1 - exact_gamma(gamma)) * k)


def closed_form_degree(k: int, r: int) -> int:
    """floor((k+1)/(k-r)), or k at r = k-1. The largest maximizer of p(., r)."""
    _check_r(k, r)
    if r == k - 1:
        return k
    return (k + 1) // (k - r)


def optimal_degree(k: int, r: int) -> int:
    """Smallest degree maximizing the revealing probability at ``r`` known symbols.

    Equal to :func:`closed_form_degree` except where ``k - r`` divides ``k + 1``;
    there ``d`` and ``d + 1`` reveal with equal probability and the cheaper one
    is returned.
    """
    _check_r(k, r)
    if r == k - 1:
        return k
    return max(1, -(-(r + 1) // (k - r)))


def _check_d(k: int, r: int, d: int) -> None:
    _check_r(k, r)
    if not 1 <= d <= k:
        raise ValueError(f"degree must satisfy 1 <= d <= k={k}, got {d}")


def revealing_probability(k: int, r: int, d: int, exact: bool = False):
    """Probability that a uniform ``d``-subset of ``k`` positions has exactly one
    position outside the ``r`` known ones.

    Returns a ``Fraction`` when ``exact`` is true, otherwise a float.
    """
    _check_d(k, r, d)
    if d - 1 > r:
        return Fraction(0) if exact else 0.0
    num = math.comb(r, d - 1) * (k - r)
    den = math.comb(k, d)
    return Fraction(num, den) if exact else num / den


@lru_cache(maxsize=4)
def _comb_row(n: int) -> tuple[int, ...]:
    return tuple(math.comb(n, j) for j in range(n + 1))


def brute_force_optimal_degree(k: int, r: int) -> int:
    """Exhaustive argmax of p(d, r) over d = 1..k; ties go to the smaller d.

    Comparisons are exact integer cross-multiplications.
    """
    _check_r(k, r)
    ck = _comb_row(k)
    cr = _comb_row(r)
    best = 1
    # p(d) is proportional to C(r, d-1) / C(k, d); k - r is a common factor.
    best_num, best_den = cr[0], ck[1]
    for d in range(2, k + 1):
        num = cr[d - 1] if d - 1 <= r else 0
        if num * best_den > best_num * ck[d]:
            best, best_num, best_den = d, num, ck[d]
    return best


def meets_reveal_floor(k: int, r: int, d: int | None = None) -> bool:
    """Exact check that p(d, r) >= 1/e, with d defaulting to the optimal degree."""
    if d is None:
        d = optimal_degree(k, r)
    p = revealing_probability(k, r, d, exact=True)
    if p * _E_LOW >= 1:
        return True
    if p * _E_HIGH < 1:
        return False
    # p * e lies within 1e-40 of 1; fall back to 60-digit arithmetic.
    import mpmath

    with mpmath.workdps(60):
        return mpmath.mpf(p.numerator) / p.denominator * mpmath.e >= 1


def expected_symbols_bound(k: int, gamma) -> float:
    """Upper bound on the mean processed-symbol count of the truncated protocol:
    ``2k - e*gamma*k + C_SLACK``."""
    _check_k(k)
    g = float(exact_gamma(gamma))
    return 2 * k - math.e * g * k + C_SLACK


def theorem_symbols_bound(k_prime: int, gamma) -> float:
    """End-to-end bound ``(1 + gamma) 2 k' + C_SLACK`` for the composed code."""
    _check_k(k_prime)
    g = float(exact_gamma(gamma))
    return (1 + g) * 2 * k_prime + C_SLACK


def degree_transitions(k: int, gamma) -> list[int]:
    """The values of r in [1, target-1] at which the optimal degree changes."""
    target = truncation_target(k, gamma)
    out = []
    prev = optimal_degree(k, 0)
    for r in range(1, target):
        d = optimal_degree(k, r)
        if d != prev:
            out.append(r)
            prev = d
    return out


def feedback_budget(k: int, gamma) -> int:
    """Feedback messages of one lossless session: one per degree change while
    recovering the first ceil((1-gamma)k) symbols, plus the termination."""
    return len(degree_transitions(k, gamma)) + 1


def min_block_length(gamma) -> int:
    """Smallest k with k * gamma**2 >= 4."""
    g = exact_gamma(gamma)
    return math.ceil(4 / (g * g))


@dataclass(frozen=True)
class DegreePolicy:
    """Precomputed degree schedule for one (k, gamma).

    Construction enforces ``k >= 4/gamma**2`` so that the schedule steps by
    exactly one degree at a time up to the truncation target.
    """

    k: int
    gamma: float
    target: int
    max_degree: int
    transitions: tuple[int, ...]

    @classmethod
    def create(cls, k: int, gamma) -> "DegreePolicy":
        _check_k(k)
        g = exact_gamma(gamma)
        if k * g * g < 4:
            raise ValueError(
                f"k={k} too small for gamma={gamma}: need k >= 4/gamma^2 = {min_block_length(g)}"
            )
        target = truncation_target(k, g)
        transitions = degree_transitions(k, g)
        max_degree = optimal_degree(k, target - 1)
        if max_degree != 1 + len(transitions):
            raise ValueError("degree schedule does not step by single increments")
        if max_degree > math.floor(2 / g):
            raise ValueError(f"max degree {max_degree} exceeds 2/gamma")
        return cls(k, float(gamma), target, max_degree, tuple(transitions))

    def degree(self, r: int) -> int:
        """Optimal degree at ``r`` known symbols, held at the last scheduled
        value once the target is reached."""
        if r < 0:
            raise ValueError(f"r must be nonnegative, got {r}")
        return optimal_degree(self.k, min(r, self.target - 1))

    @property
    def feedback_budget(self) -> int:
        return len(self.transitions) + 1
