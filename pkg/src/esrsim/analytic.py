"""Closed-form outcome sampling for the exchange circuits.

Before measurement the three input registers are in a uniform superposition
of every triple ``(a, b, c)`` with ``a ^ b ^ c == i``, so Alice's and Bob's
results can be drawn uniformly and Charlie's follows. The two-party variant
is the same with Alice removed: ``b`` uniform and ``c = b ^ i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .bitvec import BitLike, BitVector, as_bitvector, xor
from .errors import InvalidN, TableTooLarge

MAX_EXACT_N = 6


@dataclass(frozen=True)
class OutcomeTriple:
    a: BitVector
    b: BitVector
    c: BitVector

    def parity(self) -> BitVector:
        return xor(self.a, xor(self.b, self.c))

    def as_strings(self) -> tuple[str, str, str]:
        return str(self.a), str(self.b), str(self.c)


def _uniform_bits(n: int, rng: np.random.Generator) -> BitVector:
    # 63-bit chunks keep integers within int64
    value, remaining = 0, n
    while remaining:
        take = min(remaining, 63)
        value = (value << take) | int(rng.integers(0, 1 << take, dtype=np.uint64))
        remaining -= take
    return BitVector(value, n)


def _check(i: BitLike) -> BitVector:
    i = as_bitvector(i)
    if len(i) < 1:
        raise InvalidN("the aggregated vector must have at least one bit")
    return i


def sample_outcome(i: BitLike, rng: np.random.Generator) -> OutcomeTriple:
    i = _check(i)
    a = _uniform_bits(len(i), rng)
    b = _uniform_bits(len(i), rng)
    return OutcomeTriple(a, b, xor(i, xor(a, b)))


def sample_outcome_epr(i: BitLike, rng: np.random.Generator) -> tuple[BitVector, BitVector]:
    i = _check(i)
    b = _uniform_bits(len(i), rng)
    return b, xor(i, b)


def exact_distribution(i: BitLike) -> dict[tuple[str, str, str], Fraction]:
    """Exact joint law of ``(a, b, c)``: ``2**(-2n)`` on every triple with ``a ^ b ^ c == i``."""
    i = _check(i)
    n = len(i)
    if n > MAX_EXACT_N:
        raise TableTooLarge(f"exact table for n={n} has {4**n} rows; limit is n={MAX_EXACT_N}")
    p = Fraction(1, 4**n)
    table = {}
    for a, b in product(range(1 << n), repeat=2):
        triple = OutcomeTriple(BitVector(a, n), BitVector(b, n), BitVector(a ^ b ^ i.value, n))
        table[triple.as_strings()] = p
    return dict(sorted(table.items()))


def exact_distribution_epr(i: BitLike) -> dict[tuple[str, str], Fraction]:
    i = _check(i)
    n = len(i)
    if n > 2 * MAX_EXACT_N:
        raise TableTooLarge(f"exact table for n={n} is too large")
    p = Fraction(1, 2**n)
    return {
        (format(b, f"0{n}b"), format(b ^ i.value, f"0{n}b")): p for b in range(1 << n)
    }
